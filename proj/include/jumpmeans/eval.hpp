#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "jumpmeans/core.hpp"
#include "jumpmeans/rng.hpp"

namespace jumpmeans {

// ---------------------------------------------------------------------------
// Holdout machinery. A split never removes a sequence's first or last
// observation (they anchor the horizon), holds out round(fraction * length)
// interior points chosen uniformly, and is reproducible from (seed, sequence
// index) alone.
// ---------------------------------------------------------------------------

struct HoldoutSplit {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> heldout_indices;  // 0-based, sorted, per sequence
};

inline HoldoutSplit make_split(const Dataset& d, double fraction, std::uint64_t seed) {
  if (d.sequences.empty()) throw DataError("make_split: dataset is empty");
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw DataError("make_split: fraction must be in [0, 1)");
  HoldoutSplit split;
  split.fraction = fraction;
  split.seed = seed;
  split.heldout_indices.resize(d.sequences.size());
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    const int len = static_cast<int>(d.sequences[i].times.size());
    if (len < 3)
      throw DataError("make_split: sequence " + std::to_string(i + 1) +
                      " has fewer than 3 observations");
    int count = static_cast<int>(std::llround(fraction * len));
    count = std::min(count, len - 2);
    if (count <= 0) continue;
    std::vector<int> eligible(len - 2);
    for (int j = 0; j < len - 2; ++j) eligible[j] = j + 1;
    Rng rng = Rng::substream(seed, i + 1);
    for (int j = 0; j < count; ++j) {
      int pick = j + static_cast<int>(rng.uniform() * static_cast<double>(eligible.size() - j));
      pick = std::min<int>(pick, static_cast<int>(eligible.size()) - 1);
      std::swap(eligible[j], eligible[pick]);
    }
    eligible.resize(count);
    std::sort(eligible.begin(), eligible.end());
    split.heldout_indices[i] = std::move(eligible);
  }
  return split;
}

// Materializes the partition: a training dataset with the held-out points
// removed, and the removed points themselves. Endpoints always stay.
inline std::pair<Dataset, HeldoutSet> apply_split(const Dataset& d, const HoldoutSplit& split) {
  if (split.heldout_indices.size() != d.sequences.size())
    throw DataError("apply_split: split does not match dataset");
  Dataset train = d;
  HeldoutSet held;
  held.seqs.resize(d.sequences.size());
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    const auto& src = d.sequences[i];
    const auto& idx = split.heldout_indices[i];
    auto& tr = train.sequences[i];
    tr.times.clear();
    tr.values.clear();
    std::size_t next = 0;
    for (std::size_t j = 0; j < src.times.size(); ++j) {
      if (next < idx.size() && static_cast<std::size_t>(idx[next]) == j) {
        if (j == 0 || j + 1 == src.times.size())
          throw DataError("apply_split: split holds out a sequence endpoint");
        held.seqs[i].push_back({src.times[j], src.values[j]});
        ++next;
      } else {
        tr.times.push_back(src.times[j]);
        tr.values.push_back(src.values[j]);
      }
    }
    if (next != idx.size()) throw DataError("apply_split: held-out index out of range");
  }
  return {std::move(train), std::move(held)};
}

// ---------------------------------------------------------------------------
// Binning for real-valued observations. Half-open bins over strictly
// increasing thresholds: value < t0 -> bin 1, t0 <= value < t1 -> bin 2, ...,
// value >= t_last -> bin len+1.
// ---------------------------------------------------------------------------

inline int bin_value(double v, const std::vector<double>& thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw std::invalid_argument("bin_value: thresholds must be strictly increasing");
  // A value equal to a threshold belongs to the bin above it.
  auto it = std::upper_bound(thresholds.begin(), thresholds.end(), v);
  return static_cast<int>(it - thresholds.begin()) + 1;
}

inline std::vector<int> bin_values(const std::vector<double>& values,
                                   const std::vector<double>& thresholds) {
  std::vector<int> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(bin_value(v, thresholds));
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction error. Predictions come from the fitted trajectories: the
// state at a held-out time, decoded through the emission model when the data
// are hidden. Errors are percentages; the headline number weights sequences
// equally, the pooled number weights points equally.
// ---------------------------------------------------------------------------

struct EvalResult {
  double error_percent = 0.0;         // mean over sequences with held-out points
  double pooled_error_percent = 0.0;  // over all held-out points
  std::vector<double> per_sequence;   // NaN for sequences with nothing held out
  long num_points = 0;
  long num_sequences_scored = 0;
};

namespace detail {

inline int argmax_row(const std::vector<double>& row) {
  int best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = static_cast<int>(j);
  return best;
}

// Class label of an observed value under the dataset's observation kind.
inline int observed_class(ObsKind kind, EmissionKind ekind, const std::vector<double>* thresholds,
                          double value) {
  if (kind == ObsKind::direct || ekind == EmissionKind::multinomial)
    return static_cast<int>(std::llround(value));
  if (!thresholds || thresholds->empty())
    throw DataError("gaussian observations need bin thresholds to score");
  return bin_value(value, *thresholds);
}

// Class label predicted for a state.
inline int predicted_class(ObsKind kind, EmissionKind ekind, const EmissionModel* emission,
                           const std::vector<double>* thresholds, int state) {
  if (kind == ObsKind::direct) return state;
  if (!emission) throw DataError("hidden observations need an emission model to score");
  if (ekind == EmissionKind::multinomial) {
    const auto& rho = std::get<MultinomialEmission>(*emission).rho;
    if (state < 1 || state > static_cast<int>(rho.size()))
      throw DataError("predicted state outside emission model");
    return argmax_row(rho[state - 1]) + 1;
  }
  const auto& means = std::get<GaussianEmission>(*emission).means;
  if (state < 1 || state > static_cast<int>(means.size()))
    throw DataError("predicted state outside emission model");
  if (!thresholds || thresholds->empty())
    throw DataError("gaussian observations need bin thresholds to score");
  return bin_value(means[state - 1], *thresholds);
}

inline EvalResult summarize(const std::vector<long>& mistakes, const std::vector<long>& points) {
  EvalResult r;
  r.per_sequence.assign(points.size(), kNaN);
  double sum = 0.0;
  long total_mistakes = 0, total_points = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i] == 0) continue;
    double e = 100.0 * static_cast<double>(mistakes[i]) / static_cast<double>(points[i]);
    r.per_sequence[i] = e;
    sum += e;
    total_mistakes += mistakes[i];
    total_points += points[i];
    ++r.num_sequences_scored;
  }
  r.num_points = total_points;
  r.error_percent = r.num_sequences_scored ? sum / static_cast<double>(r.num_sequences_scored) : 0.0;
  r.pooled_error_percent =
      total_points ? 100.0 * static_cast<double>(total_mistakes) / static_cast<double>(total_points) : 0.0;
  return r;
}

}  // namespace detail

inline EvalResult reconstruction_error(const std::vector<Trajectory>& trajs, ObsKind kind,
                                       EmissionKind ekind, const EmissionModel* emission,
                                       const std::vector<double>* thresholds,
                                       const HeldoutSet& heldout) {
  if (trajs.size() != heldout.seqs.size())
    throw DataError("reconstruction_error: trajectory count does not match holdout");
  std::vector<long> mistakes(trajs.size(), 0), points(trajs.size(), 0);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    for (const auto& pt : heldout.seqs[i]) {
      int s = state_at(trajs[i], pt.time);
      int pred = detail::predicted_class(kind, ekind, emission, thresholds, s);
      int truth = detail::observed_class(kind, ekind, thresholds, pt.value);
      ++points[i];
      if (pred != truth) ++mistakes[i];
    }
  }
  return detail::summarize(mistakes, points);
}

// Majority-vote baseline: predicts the most frequent training observation
// class everywhere (smallest class on ties).
inline int majority_class(const Dataset& train, const std::vector<double>* thresholds) {
  std::vector<long> counts;
  for (const auto& seq : train.sequences) {
    for (double v : seq.values) {
      int c = detail::observed_class(train.kind, train.emission, thresholds, v);
      if (c < 1) throw DataError("majority_class: observation class below 1");
      if (static_cast<std::size_t>(c) > counts.size()) counts.resize(c, 0);
      ++counts[c - 1];
    }
  }
  if (counts.empty()) throw DataError("majority_class: no training observations");
  int best = 0;
  for (std::size_t j = 1; j < counts.size(); ++j)
    if (counts[j] > counts[best]) best = static_cast<int>(j);
  return best + 1;
}

inline EvalResult baseline_error(const Dataset& train, const HeldoutSet& heldout,
                                 const std::vector<double>* thresholds) {
  if (train.sequences.size() != heldout.seqs.size())
    throw DataError("baseline_error: training sequences do not match holdout");
  int majority = majority_class(train, thresholds);
  std::vector<long> mistakes(heldout.seqs.size(), 0), points(heldout.seqs.size(), 0);
  for (std::size_t i = 0; i < heldout.seqs.size(); ++i) {
    for (const auto& pt : heldout.seqs[i]) {
      int truth = detail::observed_class(train.kind, train.emission, thresholds, pt.value);
      ++points[i];
      if (truth != majority) ++mistakes[i];
    }
  }
  return detail::summarize(mistakes, points);
}

}  // namespace jumpmeans
