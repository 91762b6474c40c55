#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jumpmeans/asymptotics.hpp"
#include "jumpmeans/core.hpp"
#include "jumpmeans/eval.hpp"
#include "jumpmeans/rng.hpp"
#include "jumpmeans/viterbi.hpp"

namespace jumpmeans {

// ---------------------------------------------------------------------------
// Segmentation: the working representation of one sequence during a fit.
// Jump k lives strictly inside the open interval (jump_lo[k], jump_hi[k]),
// the gap between the observations that bracket it, so every observation
// stays inside its segment no matter where the jump moves. states has one
// entry per segment (K jumps -> K+1 segments); pin[i] > 0 forces segment i's
// label (observed-state data), pin[i] == 0 leaves it to the decoder.
// ---------------------------------------------------------------------------

struct Segmentation {
  double horizon = 0.0;
  std::vector<double> jump_pos;
  std::vector<double> jump_lo;
  std::vector<double> jump_hi;
  std::vector<int> states;
  std::vector<int> pin;
  std::vector<std::vector<double>> obs;  // observed values per segment
  std::vector<int> obs_segment;          // original observation index -> segment
};

inline double segment_start(const Segmentation& seg, std::size_t i) {
  return i == 0 ? 0.0 : seg.jump_pos[i - 1];
}

inline double segment_end(const Segmentation& seg, std::size_t i) {
  return i == seg.jump_pos.size() ? seg.horizon : seg.jump_pos[i];
}

inline double segment_dwell(const Segmentation& seg, std::size_t i) {
  return segment_end(seg, i) - segment_start(seg, i);
}

// Segment occupied at time t; right-continuous at jump positions.
inline int segment_of_time(const Segmentation& seg, double t) {
  auto it = std::upper_bound(seg.jump_pos.begin(), seg.jump_pos.end(), t);
  return static_cast<int>(it - seg.jump_pos.begin());
}

// Exports the piecewise-constant path. merge_runs collapses adjacent segments
// that carry the same state (needed when the decoder may assign equal labels
// across a jump; the exported trajectory must alternate).
inline Trajectory to_trajectory(const Segmentation& seg, bool merge_runs = false) {
  Trajectory tr;
  tr.horizon = seg.horizon;
  const std::size_t n = seg.states.size();
  for (std::size_t i = 0; i < n; ++i) {
    // the open run simply extends across a merged segment; it is closed with
    // the correct cumulative start when the next distinct state arrives
    if (merge_runs && !tr.states.empty() && tr.states.back() == seg.states[i]) continue;
    if (!tr.states.empty()) {
      // close the previous run at this segment's start
      double prev_end = segment_start(seg, i);
      double consumed = 0.0;
      for (double d : tr.dwell_times) consumed += d;
      tr.dwell_times.push_back(prev_end - consumed);
    }
    tr.states.push_back(seg.states[i]);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Builders. Directly observed sequences merge runs of equal consecutive
// observations into one segment (a jump can only sit between two different
// observed states); hidden sequences get one potential jump per gap.
// ---------------------------------------------------------------------------

namespace detail {

inline void throw_if_invalid(const std::vector<std::string>& issues, const char* what) {
  if (!issues.empty()) throw DataError(std::string(what) + ": " + issues.front());
}

}  // namespace detail

inline Segmentation build_segmentation_direct(const DirectObsSeq& seq) {
  detail::throw_if_invalid(validate(seq), "direct sequence");
  if (seq.states.empty()) throw DataError("direct sequence: no observations");
  Segmentation seg;
  seg.horizon = seq.horizon;
  seg.obs_segment.resize(seq.states.size());
  std::vector<double> run_first, run_last;
  for (std::size_t i = 0; i < seq.states.size(); ++i) {
    int s = seq.states[i];
    if (seg.states.empty() || seg.states.back() != s) {
      seg.states.push_back(s);
      seg.obs.emplace_back();
      run_first.push_back(seq.times[i]);
      run_last.push_back(seq.times[i]);
    }
    run_last.back() = seq.times[i];
    seg.obs.back().push_back(static_cast<double>(s));
    seg.obs_segment[i] = static_cast<int>(seg.states.size()) - 1;
  }
  seg.pin = seg.states;
  for (std::size_t r = 1; r < seg.states.size(); ++r) {
    seg.jump_lo.push_back(run_last[r - 1]);
    seg.jump_hi.push_back(run_first[r]);
    seg.jump_pos.push_back(0.5 * (run_last[r - 1] + run_first[r]));
  }
  return seg;
}

inline Segmentation build_segmentation_hidden(const HiddenObsSeq& seq) {
  detail::throw_if_invalid(validate(seq), "hidden sequence");
  if (seq.values.empty()) throw DataError("hidden sequence: no observations");
  Segmentation seg;
  seg.horizon = seq.horizon;
  const std::size_t n = seq.values.size();
  seg.states.assign(n, 1);  // placeholder until the first decode
  seg.pin.assign(n, 0);
  seg.obs.resize(n);
  seg.obs_segment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    seg.obs[i].push_back(seq.values[i]);
    seg.obs_segment[i] = static_cast<int>(i);
    if (i > 0) {
      seg.jump_lo.push_back(seq.times[i - 1]);
      seg.jump_hi.push_back(seq.times[i]);
      seg.jump_pos.push_back(0.5 * (seq.times[i - 1] + seq.times[i]));
    }
  }
  return seg;
}

// ---------------------------------------------------------------------------
// Decoding costs. Node costs carry the dwell penalty of each segment (the
// final segment is censored) plus observation terms; edge costs carry the
// transition terms with a structurally forbidden diagonal. All probability
// terms use the floored log, matching the objective.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<double>> transition_edge_costs(const MjpParams& params, double xi,
                                                              double prob_floor = kProbFloor) {
  const int m = params.num_states;
  std::vector<std::vector<double>> edge(m, std::vector<double>(m, kInf));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      if (a != b) edge[a][b] = xi * -floored_log(params.transition[a][b], prob_floor);
  return edge;
}

namespace detail {

inline double observation_cost(const std::vector<double>& values, int state,
                               const EmissionModel& emission, double zeta, double prob_floor) {
  double c = 0.0;
  if (const auto* mult = std::get_if<MultinomialEmission>(&emission)) {
    const auto& row = mult->rho[state - 1];
    for (double v : values) {
      int x = static_cast<int>(std::llround(v));
      if (std::fabs(v - x) > 1e-9 || x < 1 || x > static_cast<int>(row.size()))
        throw DataError("observed symbol " + std::to_string(v) + " outside alphabet");
      c += zeta * -floored_log(row[x - 1], prob_floor);
    }
  } else {
    double mean = std::get<GaussianEmission>(emission).means[state - 1];
    for (double v : values) {
      double d = v - mean;
      c += zeta * d * d;
    }
  }
  return c;
}

}  // namespace detail

inline std::vector<std::vector<double>> parametric_node_costs(const Segmentation& seg,
                                                              const MjpParams& params,
                                                              const EmissionModel* emission,
                                                              const Hyperparams& hy,
                                                              double prob_floor = kProbFloor) {
  const int m = params.num_states;
  const std::size_t segs = seg.states.size();
  std::vector<std::vector<double>> node(segs, std::vector<double>(m, kInf));
  for (std::size_t k = 0; k < segs; ++k) {
    double d = segment_dwell(seg, k);
    bool final_seg = (k + 1 == segs);
    for (int s = 1; s <= m; ++s) {
      if (seg.pin[k] > 0 && seg.pin[k] != s) continue;
      double c = final_seg ? censored_penalty(params.rates[s - 1], d)
                           : dwell_penalty(params.rates[s - 1], d);
      if (emission) c += detail::observation_cost(seg.obs[k], s, *emission, hy.zeta, prob_floor);
      node[k][s - 1] = c;
    }
  }
  return node;
}

// Relabels the segments in place with the minimum-cost assignment under the
// current parameters. Pins are honored; equal adjacent labels are impossible
// because the edge diagonal is forbidden.
inline void decode_segments(Segmentation& seg, const MjpParams& params,
                            const EmissionModel* emission, const Hyperparams& hy,
                            double prob_floor = kProbFloor) {
  auto node = parametric_node_costs(seg, params, emission, hy, prob_floor);
  auto edge = transition_edge_costs(params, hy.xi, prob_floor);
  auto labels = min_cost_path(node, edge);
  for (std::size_t k = 0; k < labels.size(); ++k) seg.states[k] = labels[k] + 1;
}

// ---------------------------------------------------------------------------
// Jump position optimization. With states fixed the objective separates into
// one convex term per jump; cyclic coordinate descent with the exact
// per-coordinate minimizer converges to the joint minimum. Each coordinate
// has a closed form: with x the left dwell, c the gap between the flanking
// jumps and d the rate difference, the stationary point solves
// d x^2 - (d c + 2) x + c = 0, whose unique root in (0, c) is
// 2c / (d c + 2 + sqrt(d^2 c^2 + 4)). The final coordinate additionally
// handles the censored right piece, which is flat once the remaining dwell
// drops below 1/rate.
// ---------------------------------------------------------------------------

struct DwellOptions {
  double tol = 1e-8;       // projected-gradient sup norm at exit
  int max_sweeps = 100;
  double margin_frac = 1e-9;  // keep-out margin around observations, times horizon
};

namespace detail {

inline double interior_jump_root(double left, double right, double rate_a, double rate_b) {
  double c = right - left;
  double d = rate_a - rate_b;
  double x = (std::fabs(d) * c < 1e-14) ? 0.5 * c
                                        : 2.0 * c / (d * c + 2.0 + std::sqrt(d * d * c * c + 4.0));
  return left + x;
}

}  // namespace detail

// Returns the number of sweeps performed.
inline int optimize_dwell_times(Segmentation& seg, const MjpParams& params,
                                const DwellOptions& opt = {}) {
  const std::size_t K = seg.jump_pos.size();
  if (K == 0) return 0;
  const double delta = opt.margin_frac * seg.horizon;

  auto bounds = [&](std::size_t j) {
    double lo = seg.jump_lo[j] + delta, hi = seg.jump_hi[j] - delta;
    if (lo > hi) lo = hi = 0.5 * (seg.jump_lo[j] + seg.jump_hi[j]);
    return std::pair<double, double>(lo, hi);
  };

  int sweep = 0;
  for (; sweep < opt.max_sweeps; ++sweep) {
    for (std::size_t j = 0; j < K; ++j) {
      double L = (j == 0) ? 0.0 : seg.jump_pos[j - 1];
      double R = (j + 1 == K) ? seg.horizon : seg.jump_pos[j + 1];
      double la = params.rates[seg.states[j] - 1];
      double lb = params.rates[seg.states[j + 1] - 1];
      auto [lo, hi] = bounds(j);
      double u;
      if (j + 1 < K) {
        u = std::clamp(detail::interior_jump_root(L, R, la, lb), lo, hi);
      } else {
        // Censored right piece: minimize h(la, u-L) + hbar(lb, T-u) over the
        // two smooth regions split at the censoring boundary.
        double uc = seg.horizon - 1.0 / lb;
        double best_u = kNaN, best_g = kInf;
        auto consider = [&](double cand) {
          double g = dwell_penalty(la, cand - L) + censored_penalty(lb, seg.horizon - cand);
          if (g < best_g) {
            best_g = g;
            best_u = cand;
          }
        };
        if (lo <= std::min(hi, uc))  // censoring active on the left piece
          consider(std::clamp(detail::interior_jump_root(L, seg.horizon, la, lb), lo,
                              std::min(hi, uc)));
        if (std::max(lo, uc) <= hi)  // censoring slack on the right piece
          consider(std::clamp(L + 1.0 / la, std::max(lo, uc), hi));
        u = best_u;
      }
      seg.jump_pos[j] = u;
    }

    double worst = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      double L = (j == 0) ? 0.0 : seg.jump_pos[j - 1];
      double R = (j + 1 == K) ? seg.horizon : seg.jump_pos[j + 1];
      double la = params.rates[seg.states[j] - 1];
      double lb = params.rates[seg.states[j + 1] - 1];
      double u = seg.jump_pos[j];
      double g = la - 1.0 / (u - L);
      if (j + 1 < K) {
        g -= lb - 1.0 / (R - u);
      } else if (lb * (R - u) >= 1.0) {
        g -= lb - 1.0 / (R - u);
      }
      auto [lo, hi] = bounds(j);
      if (u <= lo)
        g = std::min(g, 0.0);
      else if (u >= hi)
        g = std::max(g, 0.0);
      worst = std::max(worst, std::fabs(g));
    }
    if (worst <= opt.tol) {
      ++sweep;
      break;
    }
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// Blockwise parameter updates from segment statistics.
// ---------------------------------------------------------------------------

struct SuffStats {
  int num_states = 0;
  std::vector<std::vector<double>> trans_count;  // M x M
  std::vector<double> dwell_count;               // completed dwells per state
  std::vector<double> dwell_sum;
  std::vector<std::vector<double>> censored;  // final dwell times per state
  std::vector<double> init_count;
  std::vector<std::vector<double>> emit_count;  // multinomial, M x N
  std::vector<double> gauss_count, gauss_sum;

  explicit SuffStats(int m, int num_symbols = 0) : num_states(m) {
    trans_count.assign(m, std::vector<double>(m, 0.0));
    dwell_count.assign(m, 0.0);
    dwell_sum.assign(m, 0.0);
    censored.resize(m);
    init_count.assign(m, 0.0);
    if (num_symbols > 0) emit_count.assign(m, std::vector<double>(num_symbols, 0.0));
    gauss_count.assign(m, 0.0);
    gauss_sum.assign(m, 0.0);
  }
};

inline void accumulate_stats(const Segmentation& seg, SuffStats& st) {
  const std::size_t n = seg.states.size();
  st.init_count[seg.states[0] - 1] += 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    st.trans_count[seg.states[i] - 1][seg.states[i + 1] - 1] += 1.0;
    st.dwell_count[seg.states[i] - 1] += 1.0;
    st.dwell_sum[seg.states[i] - 1] += segment_dwell(seg, i);
  }
  st.censored[seg.states[n - 1] - 1].push_back(segment_dwell(seg, n - 1));
}

inline void accumulate_emission_stats(const Segmentation& seg, EmissionKind ekind, SuffStats& st) {
  for (std::size_t i = 0; i < seg.states.size(); ++i) {
    int s = seg.states[i] - 1;
    for (double v : seg.obs[i]) {
      if (ekind == EmissionKind::multinomial) {
        int x = static_cast<int>(std::llround(v));
        if (x < 1 || x > static_cast<int>(st.emit_count[s].size()))
          throw DataError("observed symbol " + std::to_string(x) + " outside alphabet");
        st.emit_count[s][x - 1] += 1.0;
      } else {
        st.gauss_count[s] += 1.0;
        st.gauss_sum[s] += v;
      }
    }
  }
}

// Transition rows become empirical frequencies; a state with no observed
// departures falls back to uniform over the other states.
inline void update_transition_rows(const SuffStats& st, MjpParams& params) {
  const int m = st.num_states;
  for (int a = 0; a < m; ++a) {
    double total = 0.0;
    for (int b = 0; b < m; ++b) total += st.trans_count[a][b];
    for (int b = 0; b < m; ++b) {
      if (a == b)
        params.transition[a][b] = 0.0;
      else if (total > 0)
        params.transition[a][b] = st.trans_count[a][b] / total;
      else
        params.transition[a][b] = m > 1 ? 1.0 / (m - 1) : 0.0;
    }
  }
}

// Exact minimizer of the per-state rate block
//   f(r) = r * S - N log r + sum_c [r t_c >= 1] (r t_c - log(r t_c) - 1)
//        + xi_l (mu_l r - log r - 1)
// f' is continuous and strictly increasing (each censored term switches on
// with zero derivative jump at r = 1/t_c), so the root is unique. Bisection
// localizes it, then the closed form for the active censored set snaps the
// result to full precision.
inline double solve_rate(double dwell_count, double dwell_sum, std::vector<double> censored,
                         const Hyperparams& hy) {
  std::sort(censored.begin(), censored.end());
  std::vector<double> suffix_sum(censored.size() + 1, 0.0);
  for (std::size_t i = censored.size(); i-- > 0;)
    suffix_sum[i] = suffix_sum[i + 1] + censored[i];

  const double a_base = dwell_sum + hy.xi_lambda * hy.mu_lambda;
  const double b_base = dwell_count + hy.xi_lambda;
  auto active_from = [&](double r) {
    // first censored index with t >= 1/r
    return std::lower_bound(censored.begin(), censored.end(), 1.0 / r) - censored.begin();
  };
  auto deriv = [&](double r) {
    auto i = active_from(r);
    double cnt = static_cast<double>(censored.size() - i);
    return (a_base + suffix_sum[i]) - (b_base + cnt) / r;
  };

  double lo = b_base / (a_base + suffix_sum[0] + 1.0), hi = std::max(1.0, 2.0 * b_base / a_base);
  for (int i = 0; i < 4000 && deriv(lo) > 0; ++i) lo *= 0.5;
  for (int i = 0; i < 4000 && deriv(hi) < 0; ++i) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    (deriv(mid) < 0 ? lo : hi) = mid;
  }
  double mid = 0.5 * (lo + hi);
  auto i = active_from(mid);
  double cnt = static_cast<double>(censored.size() - i);
  double snapped = (b_base + cnt) / (a_base + suffix_sum[i]);
  if (active_from(snapped) == i) return snapped;
  return mid;
}

inline void update_rates(const SuffStats& st, const Hyperparams& hy, MjpParams& params) {
  for (int s = 0; s < st.num_states; ++s)
    params.rates[s] = solve_rate(st.dwell_count[s], st.dwell_sum[s], st.censored[s], hy);
}

inline void update_emission(const SuffStats& st, EmissionKind ekind, EmissionModel& emission) {
  if (ekind == EmissionKind::multinomial) {
    auto& rho = std::get<MultinomialEmission>(emission).rho;
    for (int s = 0; s < st.num_states; ++s) {
      double total = 0.0;
      for (double c : st.emit_count[s]) total += c;
      for (std::size_t x = 0; x < rho[s].size(); ++x)
        rho[s][x] = total > 0 ? st.emit_count[s][x] / total : 1.0 / rho[s].size();
    }
  } else {
    auto& means = std::get<GaussianEmission>(emission).means;
    for (int s = 0; s < st.num_states; ++s)
      if (st.gauss_count[s] > 0) means[s] = st.gauss_sum[s] / st.gauss_count[s];
    // states with no assigned observations keep their previous mean
  }
}

// ---------------------------------------------------------------------------
// Objectives. Both take trajectories aligned with the sequences and evaluate
// the full cost: transition terms, dwell penalties with a censored final
// segment, observation terms (hmjp), and the rate prior once per state.
// ---------------------------------------------------------------------------

namespace detail {

inline double trajectory_cost(const Trajectory& tr, const MjpParams& params,
                              const Hyperparams& hy, double prob_floor) {
  auto issues = validate(tr);
  if (!issues.empty()) throw DataError("trajectory: " + issues.front());
  for (int s : tr.states)
    if (s < 1 || s > params.num_states) throw DataError("trajectory state outside model");
  double cost = 0.0;
  double elapsed = 0.0;
  for (std::size_t k = 0; k < tr.dwell_times.size(); ++k) {
    int a = tr.states[k] - 1, b = tr.states[k + 1] - 1;
    cost += hy.xi * -floored_log(params.transition[a][b], prob_floor);
    cost += dwell_penalty(params.rates[a], tr.dwell_times[k]);
    elapsed += tr.dwell_times[k];
  }
  cost += censored_penalty(params.rates[tr.states.back() - 1], tr.horizon - elapsed);
  return cost;
}

inline double rate_prior(const MjpParams& params, const Hyperparams& hy) {
  double cost = 0.0;
  for (int s = 0; s < params.num_states; ++s)
    cost += hy.xi_lambda * (hy.mu_lambda * params.rates[s] - std::log(params.rates[s]) - 1.0);
  return cost;
}

}  // namespace detail

inline double objective_domjp(const std::vector<DirectObsSeq>& seqs,
                              const std::vector<Trajectory>& trajs, const MjpParams& params,
                              const Hyperparams& hy, double prob_floor = kProbFloor) {
  if (seqs.size() != trajs.size())
    throw DataError("objective: sequence and trajectory counts differ");
  double cost = 0.0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    for (std::size_t k = 0; k < seqs[i].times.size(); ++k)
      if (state_at(trajs[i], seqs[i].times[k]) != seqs[i].states[k])
        throw DataError("trajectory " + std::to_string(i + 1) +
                        " contradicts observation " + std::to_string(k + 1));
    cost += detail::trajectory_cost(trajs[i], params, hy, prob_floor);
  }
  return cost + detail::rate_prior(params, hy);
}

inline double objective_hmjp(const std::vector<HiddenObsSeq>& seqs,
                             const std::vector<Trajectory>& trajs, const MjpParams& params,
                             const EmissionModel& emission, const Hyperparams& hy,
                             double prob_floor = kProbFloor) {
  if (seqs.size() != trajs.size())
    throw DataError("objective: sequence and trajectory counts differ");
  double cost = 0.0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    cost += detail::trajectory_cost(trajs[i], params, hy, prob_floor);
    for (std::size_t k = 0; k < seqs[i].times.size(); ++k) {
      int s = state_at(trajs[i], seqs[i].times[k]);
      cost += detail::observation_cost({seqs[i].values[k]}, s, emission, hy.zeta, prob_floor);
    }
  }
  return cost + detail::rate_prior(params, hy);
}

// ---------------------------------------------------------------------------
// Fitting loop: decode labels, move jumps, refresh parameters, repeat until
// the relative objective change drops below tol. Every step is a blockwise
// exact minimization, so the objective never increases.
// ---------------------------------------------------------------------------

struct FitConfig {
  Hyperparams hyper;
  int num_states = 0;   // 0 infers from direct data; hidden fits must set it
  int num_symbols = 0;  // 0 infers the alphabet from the data
  int max_iters = 300;
  double tol = 1e-6;  // relative objective change; 0 disables early exit
  double inner_tol = 1e-8;
  int inner_max_sweeps = 100;
  double prob_floor = kProbFloor;
  double emission_init_noise = 1e-2;
  std::uint64_t seed = 0;
  std::vector<double> eval_thresholds;  // bins for scoring gaussian data
  bool record_timings = false;          // cum_seconds stays 0.0 unless set
  std::optional<EmissionModel> emission_init;  // overrides the default init
};

struct FitTraceRow {
  int iteration = 0;
  double objective = 0.0;
  int num_states = 0;
  double train_error = kNaN;    // percent; NaN when not scorable
  double heldout_error = kNaN;  // percent; NaN without held-out data
  double cum_seconds = 0.0;
  std::uint64_t param_hash = 0;
};

struct FitResult {
  ModelKind kind = ModelKind::domjp;
  MjpParams params;
  std::optional<EmissionModel> emission;
  std::vector<Trajectory> trajectories;
  std::vector<FitTraceRow> trace;
  int iterations = 0;
  bool converged = false;
  double objective = kNaN;
};

namespace detail {

inline std::uint64_t hash_params(const MjpParams& params, const EmissionModel* emission) {
  Fingerprint fp;
  fp.add(params.num_states);
  fp.add(params.transition);
  fp.add(params.rates);
  if (emission) {
    if (const auto* m = std::get_if<MultinomialEmission>(emission)) {
      fp.add(1);
      fp.add(m->rho);
    } else {
      fp.add(2);
      fp.add(std::get<GaussianEmission>(*emission).means);
    }
  }
  return fp.h;
}

// Percent of observations whose predicted class disagrees with the truth,
// sequences weighted equally. Returns NaN when scoring is impossible.
inline double segmentation_train_error(const std::vector<Segmentation>& segs, ObsKind kind,
                                       EmissionKind ekind, const EmissionModel* emission,
                                       const std::vector<double>* thresholds) {
  if (kind == ObsKind::hidden && ekind == EmissionKind::gaussian &&
      (!thresholds || thresholds->empty()))
    return kNaN;
  double sum = 0.0;
  long scored = 0;
  for (const auto& seg : segs) {
    long points = 0, mistakes = 0;
    for (std::size_t i = 0; i < seg.states.size(); ++i) {
      for (double v : seg.obs[i]) {
        int pred = predicted_class(kind, ekind, emission, thresholds, seg.states[i]);
        int truth = observed_class(kind, ekind, thresholds, v);
        ++points;
        if (pred != truth) ++mistakes;
      }
    }
    if (points == 0) continue;
    sum += 100.0 * static_cast<double>(mistakes) / static_cast<double>(points);
    ++scored;
  }
  return scored ? sum / static_cast<double>(scored) : kNaN;
}

inline double segmentation_heldout_error(const std::vector<Segmentation>& segs, ObsKind kind,
                                         EmissionKind ekind, const EmissionModel* emission,
                                         const std::vector<double>* thresholds,
                                         const HeldoutSet* heldout) {
  if (!heldout || heldout->seqs.size() != segs.size()) return kNaN;
  if (kind == ObsKind::hidden && ekind == EmissionKind::gaussian &&
      (!thresholds || thresholds->empty()))
    return kNaN;
  double sum = 0.0;
  long scored = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    long points = 0, mistakes = 0;
    for (const auto& pt : heldout->seqs[i]) {
      int s = segs[i].states[segment_of_time(segs[i], pt.time)];
      int pred = predicted_class(kind, ekind, emission, thresholds, s);
      int truth = observed_class(kind, ekind, thresholds, pt.value);
      ++points;
      if (pred != truth) ++mistakes;
    }
    if (points == 0) continue;
    sum += 100.0 * static_cast<double>(mistakes) / static_cast<double>(points);
    ++scored;
  }
  return scored ? sum / static_cast<double>(scored) : kNaN;
}

inline EmissionModel init_emission(const Dataset& train, int m, int num_symbols,
                                   const FitConfig& cfg) {
  Rng rng = Rng::substream(cfg.seed, 0);
  if (train.emission == EmissionKind::multinomial) {
    MultinomialEmission e;
    e.rho.assign(m, std::vector<double>(num_symbols, 0.0));
    for (auto& row : e.rho) {
      double total = 0.0;
      for (auto& p : row) {
        p = std::max(cfg.prob_floor,
                     1.0 / num_symbols + cfg.emission_init_noise * (2.0 * rng.uniform() - 1.0));
        total += p;
      }
      for (auto& p : row) p /= total;
    }
    return e;
  }
  // Gaussian means start at evenly spaced data quantiles so states separate.
  std::vector<double> values;
  for (const auto& s : train.sequences) values.insert(values.end(), s.values.begin(), s.values.end());
  std::sort(values.begin(), values.end());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= values.empty() ? 1.0 : static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  double sd = values.empty() ? 1.0 : std::sqrt(var / static_cast<double>(values.size()));
  if (!(sd > 0)) sd = 1.0;
  GaussianEmission e;
  e.means.resize(m);
  for (int s = 0; s < m; ++s) {
    double q = (s + 0.5) / m;
    std::size_t idx = values.empty()
                          ? 0
                          : std::min<std::size_t>(values.size() - 1,
                                                  static_cast<std::size_t>(q * values.size()));
    double base = values.empty() ? 0.0 : values[idx];
    e.means[s] = base + cfg.emission_init_noise * sd * (2.0 * rng.uniform() - 1.0);
  }
  return e;
}

}  // namespace detail

inline FitResult fit_parametric(const Dataset& train, ModelKind kind, const FitConfig& cfg,
                                const HeldoutSet* heldout = nullptr) {
  if (kind != ModelKind::domjp && kind != ModelKind::hmjp)
    throw DataError("fit_parametric handles domjp and hmjp only");
  if (train.sequences.empty()) throw DataError("fit: dataset has no sequences");
  if (kind == ModelKind::domjp && train.kind != ObsKind::direct)
    throw DataError("domjp requires directly observed sequences");
  if (kind == ModelKind::hmjp && train.kind != ObsKind::hidden)
    throw DataError("hmjp requires hidden observations");
  detail::throw_if_invalid(validate(cfg.hyper), "hyperparameters");

  // Segmentations and the model dimensions.
  std::vector<Segmentation> segs;
  int m = cfg.num_states;
  int num_symbols = cfg.num_symbols;
  if (kind == ModelKind::domjp) {
    for (const auto& seq : direct_sequences(train)) segs.push_back(build_segmentation_direct(seq));
    int seen = max_observed_state(train);
    if (m <= 0) m = seen;
    if (seen > m)
      throw DataError("observed state " + std::to_string(seen) + " exceeds num_states " +
                      std::to_string(m));
  } else {
    for (const auto& seq : hidden_sequences(train)) segs.push_back(build_segmentation_hidden(seq));
    if (m <= 0) throw DataError("hmjp needs an explicit num_states");
    if (train.emission == EmissionKind::multinomial) {
      int seen = 0;
      for (const auto& s : train.sequences)
        for (double v : s.values) {
          int x = static_cast<int>(std::llround(v));
          if (std::fabs(v - x) > 1e-9 || x < 1)
            throw DataError("multinomial observations must be positive integers");
          seen = std::max(seen, x);
        }
      if (num_symbols <= 0) num_symbols = seen;
      if (seen > num_symbols)
        throw DataError("observed symbol " + std::to_string(seen) + " exceeds num_symbols " +
                        std::to_string(num_symbols));
    }
  }
  if (m < 1) throw DataError("fit: no states");

  FitResult res;
  res.kind = kind;
  res.params.num_states = m;
  res.params.initial.assign(m, 1.0 / m);
  res.params.transition.assign(m, std::vector<double>(m, m > 1 ? 1.0 / (m - 1) : 0.0));
  for (int s = 0; s < m; ++s) res.params.transition[s][s] = 0.0;
  res.params.rates.assign(m, 1.0);
  if (kind == ModelKind::hmjp) {
    res.emission = cfg.emission_init ? *cfg.emission_init
                                     : detail::init_emission(train, m, num_symbols, cfg);
    detail::throw_if_invalid(validate(*res.emission), "emission init");
  }

  std::vector<DirectObsSeq> dseqs;
  std::vector<HiddenObsSeq> hseqs;
  if (kind == ModelKind::domjp) dseqs = direct_sequences(train);
  else hseqs = hidden_sequences(train);

  DwellOptions dwell_opt;
  dwell_opt.tol = cfg.inner_tol;
  dwell_opt.max_sweeps = cfg.inner_max_sweeps;

  const std::vector<double>* thresholds = cfg.eval_thresholds.empty() ? nullptr : &cfg.eval_thresholds;
  auto t0 = std::chrono::steady_clock::now();
  double prev_obj = kNaN;

  for (int it = 1; it <= cfg.max_iters; ++it) {
    const EmissionModel* em = res.emission ? &*res.emission : nullptr;
    // Labels: decode hidden sequences; observed labels are pinned at build time.
    if (kind == ModelKind::hmjp) {
      parallel_for(
          segs.size(),
          [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i)
              decode_segments(segs[i], res.params, em, cfg.hyper, cfg.prob_floor);
          },
          1);
    }
    // Jump positions.
    parallel_for(
        segs.size(),
        [&](std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) optimize_dwell_times(segs[i], res.params, dwell_opt);
        },
        1);
    // Parameters.
    SuffStats st(m, num_symbols);
    for (const auto& seg : segs) {
      accumulate_stats(seg, st);
      if (kind == ModelKind::hmjp) accumulate_emission_stats(seg, train.emission, st);
    }
    update_transition_rows(st, res.params);
    update_rates(st, cfg.hyper, res.params);
    if (res.emission) update_emission(st, train.emission, *res.emission);

    // Objective under the refreshed parameters.
    res.trajectories.clear();
    res.trajectories.reserve(segs.size());
    for (const auto& seg : segs) res.trajectories.push_back(to_trajectory(seg));
    double obj = kind == ModelKind::domjp
                     ? objective_domjp(dseqs, res.trajectories, res.params, cfg.hyper, cfg.prob_floor)
                     : objective_hmjp(hseqs, res.trajectories, res.params, *res.emission, cfg.hyper,
                                      cfg.prob_floor);
    if (!std::isfinite(obj)) throw NumericError("fit: objective is not finite");

    FitTraceRow row;
    row.iteration = it;
    row.objective = obj;
    row.num_states = m;
    row.train_error = detail::segmentation_train_error(segs, train.kind, train.emission,
                                                       res.emission ? &*res.emission : nullptr,
                                                       thresholds);
    row.heldout_error = detail::segmentation_heldout_error(segs, train.kind, train.emission,
                                                           res.emission ? &*res.emission : nullptr,
                                                           thresholds, heldout);
    if (cfg.record_timings)
      row.cum_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.param_hash = detail::hash_params(res.params, res.emission ? &*res.emission : nullptr);
    res.trace.push_back(row);

    if (it >= 2 && std::fabs(obj - prev_obj) < cfg.tol * std::max(1.0, std::fabs(prev_obj))) {
      res.converged = true;
      break;
    }
    prev_obj = obj;
  }

  res.iterations = static_cast<int>(res.trace.size());
  res.objective = res.trace.back().objective;

  // The initial distribution plays no role in the objective; report the
  // empirical frequency of starting states.
  std::vector<double> init(m, 0.0);
  for (const auto& seg : segs) init[seg.states[0] - 1] += 1.0;
  for (double& v : init) v /= static_cast<double>(segs.size());
  res.params.initial = init;
  return res;
}

// ---------------------------------------------------------------------------
// Reference path for a directly observed sequence under known parameters:
// the likelihood supremum over dwell times concentrates all free time on the
// visited state with the smallest rate. Dwells of other segments shrink to
// eps = eps_frac * horizon, so the result is within O(eps) of the supremum
// while remaining a valid trajectory.
// ---------------------------------------------------------------------------

inline Trajectory mle_degenerate_trajectory(const DirectObsSeq& seq, const MjpParams& params,
                                            double eps_frac = 1e-6) {
  detail::throw_if_invalid(validate(seq), "direct sequence");
  detail::throw_if_invalid(validate(params), "parameters");
  if (seq.states.empty()) throw DataError("no observations");

  std::vector<int> path;
  for (int s : seq.states) {
    if (s < 1 || s > params.num_states) throw DataError("observed state outside model");
    if (path.empty() || path.back() != s) path.push_back(s);
  }
  for (std::size_t k = 0; k + 1 < path.size(); ++k)
    if (!(params.transition[path[k] - 1][path[k + 1] - 1] > 0))
      throw DataError("transition " + std::to_string(path[k]) + " -> " +
                      std::to_string(path[k + 1]) + " has zero probability");

  Trajectory tr;
  tr.states = path;
  tr.horizon = seq.horizon;
  const std::size_t K = path.size() - 1;
  if (K == 0) return tr;

  int slow = path[0];
  for (int s : path)
    if (params.rates[s - 1] < params.rates[slow - 1]) slow = s;

  const double eps = eps_frac * seq.horizon;
  std::size_t n_star = 0, n_other = 0;
  for (std::size_t i = 0; i < K; ++i) (path[i] == slow ? n_star : n_other) += 1;

  double share;
  if (path[K] == slow) {
    share = (seq.horizon - static_cast<double>(n_other) * eps) / static_cast<double>(n_star + 1);
  } else {
    share = (seq.horizon - static_cast<double>(n_other + 1) * eps) / static_cast<double>(n_star);
  }
  if (!(share > 0)) throw DataError("horizon too small for a valid degenerate path");

  tr.dwell_times.resize(K);
  for (std::size_t i = 0; i < K; ++i) tr.dwell_times[i] = (path[i] == slow) ? share : eps;
  return tr;
}

}  // namespace jumpmeans
