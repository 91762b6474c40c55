#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jumpmeans/common.hpp"

namespace jumpmeans {

// ---------------------------------------------------------------------------
// Domain types. State ids and observation symbols are 1-based everywhere a
// human sees them (files, error messages, stored sequences); internal arrays
// are indexed with id - 1.
// ---------------------------------------------------------------------------

// Piecewise-constant path of a jump process on [0, horizon]. states holds
// K+1 entries, dwell_times the first K of them; the final state occupies
// horizon - sum(dwell_times). Right-continuous: at a jump instant the new
// state is already active.
struct Trajectory {
  std::vector<int> states;
  std::vector<double> dwell_times;
  double horizon = 0.0;
};

struct MjpParams {
  int num_states = 0;
  std::vector<double> initial;                  // pi, length M
  std::vector<std::vector<double>> transition;  // P, M x M, zero diagonal
  std::vector<double> rates;                    // lambda, length M
};

struct MultinomialEmission {
  std::vector<std::vector<double>> rho;  // M x N, rows sum to 1
};

struct GaussianEmission {
  std::vector<double> means;  // length M
};

using EmissionModel = std::variant<MultinomialEmission, GaussianEmission>;

struct DirectObsSeq {
  std::vector<double> times;  // strictly increasing, first is 0
  std::vector<int> states;    // observed state ids
  double horizon = 0.0;
};

struct HiddenObsSeq {
  std::vector<double> times;   // strictly increasing, within [0, horizon]
  std::vector<double> values;  // symbols (integral) or reals, per emission kind
  double horizon = 0.0;
};

// Objective weights. zeta scales observation terms, xi transition terms,
// xi_lambda/mu_lambda the rate prior, xi1 the per-state penalty, xi2 the
// base-measure coupling, gamma the dwell-sum offset.
struct Hyperparams {
  double xi = 1.0;
  double xi_lambda = 1.0;
  double mu_lambda = 0.5;
  double zeta = 1.0;
  double xi1 = 5.0;
  double xi2 = 0.005;
  double gamma = 5.0;
};

// Profile used by the nonparametric fits in the experiments.
inline Hyperparams np_default_hyperparams() {
  Hyperparams h;
  h.zeta = 0.005;
  h.xi = 0.005;
  h.xi2 = 0.005;
  h.xi1 = 5.0;
  h.gamma = 5.0;
  return h;
}

// ---------------------------------------------------------------------------
// Dataset container shared by the generators, the fitters and the evaluation
// harness. values stores states (direct), symbols (hidden multinomial) or
// reals (hidden gaussian); kind/emission discriminate.
// ---------------------------------------------------------------------------

enum class ObsKind { direct, hidden };
enum class EmissionKind { multinomial, gaussian };

// Model families: observed paths with dwell penalties (domjp), hidden paths
// with an emission model (hmjp), hidden paths with an open state count (imjp).
enum class ModelKind { domjp, hmjp, imjp };

struct SequenceData {
  std::vector<double> times;
  std::vector<double> values;
};

struct GeneratorInfo {
  MjpParams params;
  std::optional<EmissionModel> emission;
};

struct Dataset {
  int format_version = 1;
  ObsKind kind = ObsKind::direct;
  EmissionKind emission = EmissionKind::multinomial;
  double horizon = 0.0;
  std::vector<SequenceData> sequences;
  std::optional<GeneratorInfo> generator;  // diagnostics only, never used by fits
  std::string prng_name;
  std::uint64_t prng_seed = 0;
};

struct HeldoutPoint {
  double time = 0.0;
  double value = 0.0;
};

// Held-out observations per sequence, aligned with the training dataset's
// sequence order. Sequences with nothing held out keep an empty slot.
struct HeldoutSet {
  std::vector<std::vector<HeldoutPoint>> seqs;
};

// ---------------------------------------------------------------------------
// Validation. Returns human-readable violations (empty means valid); ops
// that require validity throw std::invalid_argument on hard violations.
// ---------------------------------------------------------------------------

inline std::vector<std::string> validate(const Trajectory& traj) {
  std::vector<std::string> out;
  if (traj.states.empty()) out.push_back("trajectory has no states");
  if (traj.dwell_times.size() + 1 != traj.states.size())
    out.push_back("dwell_times length must be states length minus 1");
  if (!(traj.horizon > 0)) out.push_back("horizon must be positive");
  double total = 0.0;
  for (std::size_t k = 0; k < traj.dwell_times.size(); ++k) {
    if (!(traj.dwell_times[k] > 0))
      out.push_back("nonpositive dwell time at index " + std::to_string(k + 1));
    total += traj.dwell_times[k];
  }
  if (total > traj.horizon * (1 + 1e-12))
    out.push_back("dwell times exceed horizon");
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k)
    if (traj.states[k] == traj.states[k + 1])
      out.push_back("repeated state at jump " + std::to_string(k + 1));
  return out;
}

inline std::vector<std::string> validate(const MjpParams& p) {
  std::vector<std::string> out;
  const int m = p.num_states;
  if (m <= 0) {
    out.push_back("num_states must be positive");
    return out;
  }
  if (static_cast<int>(p.initial.size()) != m)
    out.push_back("initial distribution has wrong length");
  else {
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
      if (p.initial[i] < 0)
        out.push_back("negative initial probability at state " + std::to_string(i + 1));
      sum += p.initial[i];
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      out.push_back("initial distribution does not sum to 1");
  }
  if (static_cast<int>(p.transition.size()) != m)
    out.push_back("transition matrix has wrong row count");
  else {
    for (int i = 0; i < m; ++i) {
      const auto& row = p.transition[i];
      if (static_cast<int>(row.size()) != m) {
        out.push_back("transition row " + std::to_string(i + 1) + " has wrong length");
        continue;
      }
      double sum = 0.0;
      for (int j = 0; j < m; ++j) {
        if (row[j] < 0)
          out.push_back("negative transition probability at row " + std::to_string(i + 1) +
                        " col " + std::to_string(j + 1));
        sum += row[j];
      }
      if (row[i] != 0.0) out.push_back("nonzero diagonal at row " + std::to_string(i + 1));
      // A single-state chain has no destinations; its only row must stay zero.
      if (m > 1 && std::fabs(sum - 1.0) > 1e-9)
        out.push_back("row " + std::to_string(i + 1) + " does not sum to 1");
    }
  }
  if (static_cast<int>(p.rates.size()) != m)
    out.push_back("rates vector has wrong length");
  else
    for (int i = 0; i < m; ++i)
      if (!(p.rates[i] > 0)) out.push_back("nonpositive rate at state " + std::to_string(i + 1));
  return out;
}

inline std::vector<std::string> validate(const MultinomialEmission& e) {
  std::vector<std::string> out;
  if (e.rho.empty()) out.push_back("emission matrix is empty");
  std::size_t n = e.rho.empty() ? 0 : e.rho.front().size();
  for (std::size_t i = 0; i < e.rho.size(); ++i) {
    const auto& row = e.rho[i];
    if (row.size() != n || n == 0) {
      out.push_back("emission row " + std::to_string(i + 1) + " has wrong length");
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] < 0)
        out.push_back("negative emission probability at row " + std::to_string(i + 1) +
                      " col " + std::to_string(j + 1));
      sum += row[j];
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      out.push_back("emission row " + std::to_string(i + 1) + " does not sum to 1");
  }
  return out;
}

inline std::vector<std::string> validate(const GaussianEmission& e) {
  std::vector<std::string> out;
  if (e.means.empty()) out.push_back("emission means are empty");
  for (std::size_t i = 0; i < e.means.size(); ++i)
    if (!std::isfinite(e.means[i]))
      out.push_back("non-finite emission mean at state " + std::to_string(i + 1));
  return out;
}

inline std::vector<std::string> validate(const EmissionModel& e) {
  if (const auto* m = std::get_if<MultinomialEmission>(&e)) return validate(*m);
  return validate(std::get<GaussianEmission>(e));
}

inline std::vector<std::string> validate(const DirectObsSeq& s) {
  std::vector<std::string> out;
  if (s.times.size() != s.states.size()) out.push_back("times and states differ in length");
  if (!(s.horizon > 0)) out.push_back("horizon must be positive");
  if (!s.times.empty() && s.times.front() != 0.0) out.push_back("first observation time must be 0");
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    if (i > 0 && !(s.times[i] > s.times[i - 1]))
      out.push_back("times not strictly increasing at index " + std::to_string(i + 1));
    if (s.times[i] < 0 || s.times[i] > s.horizon)
      out.push_back("time outside [0, horizon] at index " + std::to_string(i + 1));
  }
  for (std::size_t i = 0; i < s.states.size(); ++i)
    if (s.states[i] < 1) out.push_back("state id below 1 at index " + std::to_string(i + 1));
  return out;
}

inline std::vector<std::string> validate(const HiddenObsSeq& s) {
  std::vector<std::string> out;
  if (s.times.size() != s.values.size()) out.push_back("times and values differ in length");
  if (!(s.horizon > 0)) out.push_back("horizon must be positive");
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    if (i > 0 && !(s.times[i] > s.times[i - 1]))
      out.push_back("times not strictly increasing at index " + std::to_string(i + 1));
    if (s.times[i] < 0 || s.times[i] > s.horizon)
      out.push_back("time outside [0, horizon] at index " + std::to_string(i + 1));
  }
  return out;
}

inline std::vector<std::string> validate(const Hyperparams& h) {
  std::vector<std::string> out;
  auto check = [&](double v, const char* name) {
    if (!(v > 0)) out.push_back(std::string("nonpositive hyperparameter ") + name);
  };
  check(h.xi, "xi");
  check(h.xi_lambda, "xi_lambda");
  check(h.mu_lambda, "mu_lambda");
  check(h.zeta, "zeta");
  check(h.xi1, "xi1");
  check(h.xi2, "xi2");
  check(h.gamma, "gamma");
  return out;
}

// ---------------------------------------------------------------------------
// Core operations.
// ---------------------------------------------------------------------------

// State occupied at time t in [0, horizon]; right-continuous at jumps.
inline int state_at(const Trajectory& traj, double t) {
  if (traj.states.empty()) throw std::invalid_argument("state_at: empty trajectory");
  if (t < 0 || t > traj.horizon) throw std::out_of_range("state_at: time outside [0, horizon]");
  double pos = 0.0;
  for (std::size_t k = 0; k < traj.dwell_times.size(); ++k) {
    pos += traj.dwell_times[k];
    if (t < pos) return traj.states[k];
  }
  return traj.states.back();
}

// Total time spent in each state, indexed by label; the last segment runs to
// the horizon. Sized by the largest label present.
inline std::vector<double> state_occupancy(const Trajectory& traj) {
  if (traj.states.empty()) throw std::invalid_argument("state_occupancy: empty trajectory");
  int max_label = *std::max_element(traj.states.begin(), traj.states.end());
  std::vector<double> out(static_cast<std::size_t>(max_label), 0.0);
  double elapsed = 0.0;
  for (std::size_t k = 0; k < traj.dwell_times.size(); ++k) {
    out[traj.states[k] - 1] += traj.dwell_times[k];
    elapsed += traj.dwell_times[k];
  }
  out[traj.states.back() - 1] += traj.horizon - elapsed;
  return out;
}

// Log probability density of a trajectory: initial state, then per jump the
// dwell density and transition mass, then survival of the final dwell until
// the horizon. Returns -inf when any factor vanishes; no flooring here.
inline double log_prob(const Trajectory& traj, const MjpParams& params) {
  if (traj.states.empty()) throw std::invalid_argument("log_prob: empty trajectory");
  const int m = params.num_states;
  for (int s : traj.states)
    if (s < 1 || s > m) throw std::invalid_argument("log_prob: state id out of range");
  if (traj.dwell_times.size() + 1 != traj.states.size())
    throw std::invalid_argument("log_prob: inconsistent trajectory");

  double lp = std::log(params.initial[traj.states[0] - 1]);
  double elapsed = 0.0;
  for (std::size_t k = 0; k < traj.dwell_times.size(); ++k) {
    int a = traj.states[k] - 1, b = traj.states[k + 1] - 1;
    double t = traj.dwell_times[k];
    lp += std::log(params.rates[a]) - params.rates[a] * t + std::log(params.transition[a][b]);
    elapsed += t;
  }
  lp -= params.rates[traj.states.back() - 1] * (traj.horizon - elapsed);
  return lp;
}

// Dataset helpers: typed views over the raw sequence storage.
inline std::vector<DirectObsSeq> direct_sequences(const Dataset& d) {
  if (d.kind != ObsKind::direct) throw DataError("dataset does not hold direct observations");
  std::vector<DirectObsSeq> out;
  out.reserve(d.sequences.size());
  for (const auto& s : d.sequences) {
    DirectObsSeq seq;
    seq.times = s.times;
    seq.states.reserve(s.values.size());
    for (double v : s.values) seq.states.push_back(static_cast<int>(std::llround(v)));
    seq.horizon = d.horizon;
    out.push_back(std::move(seq));
  }
  return out;
}

inline std::vector<HiddenObsSeq> hidden_sequences(const Dataset& d) {
  if (d.kind != ObsKind::hidden) throw DataError("dataset does not hold hidden observations");
  std::vector<HiddenObsSeq> out;
  out.reserve(d.sequences.size());
  for (const auto& s : d.sequences) out.push_back({s.times, s.values, d.horizon});
  return out;
}

// Largest state id appearing in a direct dataset.
inline int max_observed_state(const Dataset& d) {
  int m = 0;
  for (const auto& s : d.sequences)
    for (double v : s.values) m = std::max(m, static_cast<int>(std::llround(v)));
  return m;
}

}  // namespace jumpmeans
