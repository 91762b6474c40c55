#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "jumpmeans/core.hpp"
#include "jumpmeans/rng.hpp"

namespace jumpmeans {

// ---------------------------------------------------------------------------
// Synthetic data generators. Every sequence is drawn from its own substream
// of (seed, sequence index), parameters from stream 0, so datasets are
// reproducible point for point and nested suites share prefixes exactly.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  int num_states = 10;
  int num_symbols = 5;       // hidden multinomial output alphabet
  int num_sequences = 500;
  int obs_per_sequence = 20;
  double horizon = 0.0;      // 0 means obs_per_sequence
  EmissionKind emission = EmissionKind::multinomial;
  double dirichlet_conc = 1.0;   // transition and emission rows
  double rate_shape = 1.0;       // rates ~ Gamma(shape, rate)
  double rate_rate = 1.0;
  double gaussian_sd = 0.25;     // gaussian observation noise around state means
  std::uint64_t seed = 0;
  // Test hook: bypass emission sampling (e.g. identity emission).
  std::optional<EmissionModel> emission_override;
};

// Equally spaced observation grid on [0, horizon] starting at 0.
inline std::vector<double> observation_times(int count, double horizon) {
  if (count < 1) throw std::invalid_argument("observation_times: count must be >= 1");
  if (count == 1) return {0.0};
  std::vector<double> out(count);
  double step = horizon / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) out[i] = step * static_cast<double>(i);
  out.back() = horizon;
  return out;
}

// Forward simulation: initial state from pi, exponential dwells, jumps from
// the corresponding transition row. A dwell that would pass the horizon is
// truncated there (the final state holds the remainder).
inline Trajectory sample_trajectory(const MjpParams& params, double horizon, Rng& rng) {
  if (!(horizon > 0)) throw std::invalid_argument("sample_trajectory: horizon must be positive");
  auto bad = validate(params);
  if (!bad.empty()) throw std::invalid_argument("sample_trajectory: " + bad.front());

  Trajectory traj;
  traj.horizon = horizon;
  int s = rng.categorical(params.initial) + 1;
  traj.states.push_back(s);
  if (params.num_states == 1) return traj;

  double elapsed = 0.0;
  for (;;) {
    double dwell = rng.exponential(params.rates[s - 1]);
    if (elapsed + dwell >= horizon) break;
    elapsed += dwell;
    traj.dwell_times.push_back(dwell);
    s = rng.categorical(params.transition[s - 1]) + 1;
    traj.states.push_back(s);
  }
  return traj;
}

namespace detail {

inline MjpParams sample_params(const SyntheticSpec& spec, Rng& rng) {
  const int m = spec.num_states;
  if (m < 1) throw std::invalid_argument("sample_params: num_states must be >= 1");
  MjpParams p;
  p.num_states = m;
  p.initial.assign(m, 1.0 / m);
  p.transition.assign(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    if (m == 1) break;
    auto off = rng.dirichlet(spec.dirichlet_conc, m - 1);
    int k = 0;
    for (int j = 0; j < m; ++j)
      if (j != i) p.transition[i][j] = off[k++];
  }
  p.rates.resize(m);
  for (int i = 0; i < m; ++i) p.rates[i] = rng.gamma(spec.rate_shape, spec.rate_rate);
  return p;
}

inline EmissionModel sample_emission(const SyntheticSpec& spec, Rng& rng) {
  if (spec.emission_override) return *spec.emission_override;
  if (spec.emission == EmissionKind::multinomial) {
    MultinomialEmission e;
    e.rho.reserve(spec.num_states);
    for (int i = 0; i < spec.num_states; ++i)
      e.rho.push_back(rng.dirichlet(spec.dirichlet_conc, spec.num_symbols));
    return e;
  }
  // Fixed, well separated state means; only the noise is random.
  GaussianEmission e;
  e.means.resize(spec.num_states);
  for (int i = 0; i < spec.num_states; ++i) e.means[i] = static_cast<double>(i + 1);
  return e;
}

inline double spec_horizon(const SyntheticSpec& spec) {
  return spec.horizon > 0 ? spec.horizon : static_cast<double>(spec.obs_per_sequence);
}

}  // namespace detail

// Directly observed protocol: states read off the trajectory at the grid.
inline Dataset generate_synthetic1(const SyntheticSpec& spec) {
  Dataset d;
  d.kind = ObsKind::direct;
  d.emission = EmissionKind::multinomial;
  d.horizon = detail::spec_horizon(spec);
  d.prng_name = kPrngName;
  d.prng_seed = spec.seed;

  Rng prng = Rng::substream(spec.seed, 0);
  MjpParams params = detail::sample_params(spec, prng);
  auto times = observation_times(spec.obs_per_sequence, d.horizon);

  d.sequences.resize(spec.num_sequences);
  for (int i = 0; i < spec.num_sequences; ++i) {
    Rng srng = Rng::substream(spec.seed, static_cast<std::uint64_t>(i) + 1);
    Trajectory traj = sample_trajectory(params, d.horizon, srng);
    auto& seq = d.sequences[i];
    seq.times = times;
    seq.values.reserve(times.size());
    for (double t : times) seq.values.push_back(static_cast<double>(state_at(traj, t)));
  }
  d.generator = GeneratorInfo{params, std::nullopt};
  return d;
}

// Hidden-state protocol: same trajectories, observations pushed through an
// emission model (multinomial symbols or gaussian reals).
inline Dataset generate_synthetic2(const SyntheticSpec& spec) {
  Dataset d;
  d.kind = ObsKind::hidden;
  d.emission = spec.emission;
  d.horizon = detail::spec_horizon(spec);
  d.prng_name = kPrngName;
  d.prng_seed = spec.seed;

  Rng prng = Rng::substream(spec.seed, 0);
  MjpParams params = detail::sample_params(spec, prng);
  EmissionModel emission = detail::sample_emission(spec, prng);
  auto times = observation_times(spec.obs_per_sequence, d.horizon);

  d.sequences.resize(spec.num_sequences);
  for (int i = 0; i < spec.num_sequences; ++i) {
    Rng srng = Rng::substream(spec.seed, static_cast<std::uint64_t>(i) + 1);
    Trajectory traj = sample_trajectory(params, d.horizon, srng);
    auto& seq = d.sequences[i];
    seq.times = times;
    seq.values.reserve(times.size());
    for (double t : times) {
      int s = state_at(traj, t);
      if (const auto* mult = std::get_if<MultinomialEmission>(&emission)) {
        seq.values.push_back(static_cast<double>(srng.categorical(mult->rho[s - 1]) + 1));
      } else {
        const auto& g = std::get<GaussianEmission>(emission);
        seq.values.push_back(srng.normal(g.means[s - 1], spec.gaussian_sd));
      }
    }
  }
  d.generator = GeneratorInfo{params, emission};
  return d;
}

// Prefix-nested suite sharing one parameter draw: dataset j holds the first
// sizes[j] sequences of the largest dataset, observation for observation.
// The suite is always gaussian-observed regardless of the base spec.
inline std::vector<Dataset> generate_scaling_suite(const SyntheticSpec& base,
                                                   const std::vector<int>& sizes) {
  if (sizes.empty()) throw std::invalid_argument("generate_scaling_suite: no sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw std::invalid_argument("generate_scaling_suite: sizes must be >= 1");
    if (i > 0 && sizes[i] <= sizes[i - 1])
      throw std::invalid_argument("generate_scaling_suite: sizes must be strictly increasing");
  }
  SyntheticSpec spec = base;
  spec.num_sequences = sizes.back();
  spec.emission = EmissionKind::gaussian;
  Dataset full = generate_synthetic2(spec);

  std::vector<Dataset> out;
  out.reserve(sizes.size());
  for (int n : sizes) {
    Dataset d = full;
    d.sequences.assign(full.sequences.begin(), full.sequences.begin() + n);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace jumpmeans
