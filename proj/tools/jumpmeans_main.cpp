// Command-line front end: simulate / fit / evaluate / report.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical
// failure. Every output file gets a <output>.manifest.json sidecar recording
// the resolved configuration, the PRNG, and digests of all inputs and
// outputs, so a run can be reproduced from the manifest alone.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "jumpmeans/jumpmeans.hpp"

namespace jm = jumpmeans;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sibling_path(const std::string& out, const char* suffix) {
  std::string stem = out;
  constexpr std::string_view ext = ".json";
  if (stem.size() >= ext.size() &&
      stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0)
    stem.resize(stem.size() - ext.size());
  return stem + suffix;
}

// --config <json>: keys are the long flag names with '-' replaced by '_'.
// Explicit command-line flags always win over config values.
struct ConfigLayer {
  CLI::App* cmd = nullptr;
  nlohmann::json cfg;

  void load(const std::string& path) {
    if (path.empty()) return;
    cfg = jm::detail::parse_file(path);
    if (!cfg.is_object()) throw jm::DataError("'" + path + "': config must be a JSON object");
  }

  template <class T>
  void merge(const std::string& flag, T& var) const {
    if (!cfg.is_object()) return;
    std::string key = flag.substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    if (!cfg.contains(key) || cmd->get_option(flag)->count() > 0) return;
    try {
      var = cfg.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw jm::DataError("config key '" + key + "': " + e.what());
    }
  }
};

// Canonical snapshot of the resolved options, embedded in the manifest.
struct Snapshot {
  std::ostringstream os;
  bool first = true;
  Snapshot() { os << '{'; }
  std::ostream& key(const char* k) {
    if (!first) os << ',';
    first = false;
    os << '"' << k << "\":";
    return os;
  }
  void str(const char* k, const std::string& v) { jm::jsonio::string(key(k), v); }
  void num(const char* k, double v) { jm::jsonio::number(key(k), v); }
  void integer(const char* k, long long v) { key(k) << v; }
  void u64(const char* k, std::uint64_t v) { key(k) << v; }
  void boolean(const char* k, bool v) { key(k) << (v ? "true" : "false"); }
  void nums(const char* k, const std::vector<double>& v) { jm::jsonio::array(key(k), v); }
  void strs(const char* k, const std::vector<std::string>& v) {
    auto& o = key(k);
    o << '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) o << ',';
      jm::jsonio::string(o, v[i]);
    }
    o << ']';
  }
  std::string finish() {
    os << '}';
    return os.str();
  }
};

void add_input(jm::RunManifest& man, const std::string& path) {
  if (!path.empty()) man.inputs.emplace_back(path, jm::file_digest_hex(path));
}

// Digests are taken after all outputs are on disk, then one identical
// manifest is written next to each output.
void finish_manifests(jm::RunManifest& man, const std::vector<std::string>& outputs) {
  for (const auto& path : outputs) man.outputs.emplace_back(path, jm::file_digest_hex(path));
  for (const auto& path : outputs) jm::write_manifest(path, man);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string protocol, out, config_path, emission = "multinomial";
  std::uint64_t seed = 0;
  int num_seqs = 500, num_states = 0, num_symbols = 5, obs_per_seq = 20;
  double horizon = 0.0, gaussian_sd = 0.25;
  ConfigLayer layer;
};

void run_simulate(SimulateArgs& a) {
  a.layer.load(a.config_path);
  a.layer.merge("--protocol", a.protocol);
  a.layer.merge("--seed", a.seed);
  a.layer.merge("--num-seqs", a.num_seqs);
  a.layer.merge("--num-states", a.num_states);
  a.layer.merge("--num-symbols", a.num_symbols);
  a.layer.merge("--obs-per-seq", a.obs_per_seq);
  a.layer.merge("--horizon", a.horizon);
  a.layer.merge("--emission", a.emission);
  a.layer.merge("--gaussian-sd", a.gaussian_sd);
  a.layer.merge("--out", a.out);

  bool synthetic2;
  if (a.protocol == "synthetic1")
    synthetic2 = false;
  else if (a.protocol == "synthetic2")
    synthetic2 = true;
  else
    throw UsageError("simulate: --protocol must be synthetic1 or synthetic2");
  if (a.out.empty()) throw UsageError("simulate: --out is required");

  jm::SyntheticSpec spec;
  spec.num_states = a.num_states > 0 ? a.num_states : (synthetic2 ? 5 : 10);
  spec.num_symbols = a.num_symbols;
  spec.num_sequences = a.num_seqs;
  spec.obs_per_sequence = a.obs_per_seq;
  spec.horizon = a.horizon;
  spec.emission = jm::emission_kind_from(a.emission);
  spec.gaussian_sd = a.gaussian_sd;
  spec.seed = a.seed;
  jm::Dataset d = synthetic2 ? jm::generate_synthetic2(spec) : jm::generate_synthetic1(spec);

  std::ostringstream body;
  jm::write_dataset(body, d);
  jm::write_text_file(a.out, body.str());

  Snapshot snap;
  snap.str("protocol", a.protocol);
  snap.u64("seed", a.seed);
  snap.integer("num_seqs", a.num_seqs);
  snap.integer("num_states", spec.num_states);
  snap.integer("num_symbols", spec.num_symbols);
  snap.integer("obs_per_seq", spec.obs_per_sequence);
  snap.num("horizon", spec.horizon);
  snap.str("emission", a.emission);
  snap.num("gaussian_sd", spec.gaussian_sd);
  snap.str("out", a.out);

  jm::RunManifest man;
  man.command = "simulate";
  man.config_json = snap.finish();
  man.prng_name = jm::kPrngName;
  man.seed = a.seed;
  add_input(man, a.config_path);
  finish_manifests(man, {a.out});

  long points = 0;
  for (const auto& s : d.sequences) points += static_cast<long>(s.times.size());
  std::cout << "wrote " << a.out << " (" << d.sequences.size() << " sequences, " << points
            << " points)\n";
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string model, dataset, out, trajectories_out, trace_out, split_out, config_path;
  double holdout = 0.0, tol = 1e-6;
  std::uint64_t split_seed = 0, seed = 0;
  int num_states = 0, num_symbols = 0, max_iters = -1;
  double xi = jm::kNaN, xi_lambda = jm::kNaN, mu_lambda = jm::kNaN, zeta = jm::kNaN;
  double xi1 = jm::kNaN, xi2 = jm::kNaN, gamma = jm::kNaN;
  std::vector<double> thresholds;
  bool timings = false;
  ConfigLayer layer;
};

void run_fit(FitArgs& a) {
  a.layer.load(a.config_path);
  a.layer.merge("--model", a.model);
  a.layer.merge("--dataset", a.dataset);
  a.layer.merge("--out", a.out);
  a.layer.merge("--trajectories-out", a.trajectories_out);
  a.layer.merge("--trace-out", a.trace_out);
  a.layer.merge("--holdout", a.holdout);
  a.layer.merge("--split-seed", a.split_seed);
  a.layer.merge("--split-out", a.split_out);
  a.layer.merge("--num-states", a.num_states);
  a.layer.merge("--num-symbols", a.num_symbols);
  a.layer.merge("--max-iters", a.max_iters);
  a.layer.merge("--tol", a.tol);
  a.layer.merge("--seed", a.seed);
  a.layer.merge("--timings", a.timings);
  a.layer.merge("--thresholds", a.thresholds);
  a.layer.merge("--xi", a.xi);
  a.layer.merge("--xi-lambda", a.xi_lambda);
  a.layer.merge("--mu-lambda", a.mu_lambda);
  a.layer.merge("--zeta", a.zeta);
  a.layer.merge("--xi1", a.xi1);
  a.layer.merge("--xi2", a.xi2);
  a.layer.merge("--gamma", a.gamma);

  jm::ModelKind kind;
  try {
    kind = jm::model_kind_from(a.model);
  } catch (const jm::DataError&) {
    throw UsageError("fit: --model must be domjp, hmjp or imjp");
  }
  if (a.dataset.empty()) throw UsageError("fit: --dataset is required");
  if (a.out.empty()) throw UsageError("fit: --out is required");
  if (a.holdout < 0.0 || a.holdout >= 1.0) throw UsageError("fit: --holdout must be in [0, 1)");
  if (!a.split_out.empty() && a.holdout == 0.0)
    throw UsageError("fit: --split-out requires --holdout > 0");

  jm::Hyperparams hy =
      kind == jm::ModelKind::imjp ? jm::np_default_hyperparams() : jm::Hyperparams{};
  auto override_if_set = [](double& target, double flag) {
    if (!std::isnan(flag)) target = flag;
  };
  override_if_set(hy.xi, a.xi);
  override_if_set(hy.xi_lambda, a.xi_lambda);
  override_if_set(hy.mu_lambda, a.mu_lambda);
  override_if_set(hy.zeta, a.zeta);
  override_if_set(hy.xi1, a.xi1);
  override_if_set(hy.xi2, a.xi2);
  override_if_set(hy.gamma, a.gamma);
  int max_iters = a.max_iters >= 0 ? a.max_iters : (kind == jm::ModelKind::imjp ? 50 : 300);

  jm::Dataset full = jm::read_dataset(a.dataset);
  jm::Dataset train = full;
  jm::HeldoutSet heldout;
  jm::HoldoutSplit split;
  bool have_split = a.holdout > 0.0;
  if (have_split) {
    split = jm::make_split(full, a.holdout, a.split_seed);
    auto parts = jm::apply_split(full, split);
    train = std::move(parts.first);
    heldout = std::move(parts.second);
  }

  jm::FitConfig cfg;
  cfg.hyper = hy;
  cfg.num_states = a.num_states;
  cfg.num_symbols = a.num_symbols;
  cfg.max_iters = max_iters;
  cfg.tol = a.tol;
  cfg.seed = a.seed;
  cfg.eval_thresholds = a.thresholds;
  cfg.record_timings = a.timings;

  std::vector<jm::FitTraceRow> trace;
  std::vector<jm::Trajectory> trajs;
  jm::ModelFile mf;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  const jm::HeldoutSet* heldout_ptr = have_split ? &heldout : nullptr;
  if (kind == jm::ModelKind::imjp) {
    jm::NpFitResult r = jm::fit_imjp(train, cfg, heldout_ptr);
    mf = jm::to_model_file(r, hy);
    trace = std::move(r.trace);
    trajs = std::move(r.trajectories);
    iterations = r.iterations;
    converged = r.converged;
    objective = r.objective;
  } else {
    jm::FitResult r = jm::fit_parametric(train, kind, cfg, heldout_ptr);
    mf = jm::to_model_file(r, hy);
    trace = std::move(r.trace);
    trajs = std::move(r.trajectories);
    iterations = r.iterations;
    converged = r.converged;
    objective = r.objective;
  }

  std::string traj_path =
      a.trajectories_out.empty() ? sibling_path(a.out, ".trajectories.json") : a.trajectories_out;
  std::string trace_path = a.trace_out.empty() ? sibling_path(a.out, ".trace.csv") : a.trace_out;

  {
    std::ostringstream os;
    jm::write_model(os, mf);
    jm::write_text_file(a.out, os.str());
  }
  {
    std::ostringstream os;
    jm::write_trajectories(os, trajs, full.horizon);
    jm::write_text_file(traj_path, os.str());
  }
  {
    std::ostringstream os;
    jm::write_trace_csv(os, trace);
    jm::write_text_file(trace_path, os.str());
  }
  std::vector<std::string> outputs = {a.out, traj_path, trace_path};
  if (!a.split_out.empty()) {
    std::ostringstream os;
    jm::write_split(os, split);
    jm::write_text_file(a.split_out, os.str());
    outputs.push_back(a.split_out);
  }

  Snapshot snap;
  snap.str("model", a.model);
  snap.str("dataset", a.dataset);
  snap.str("out", a.out);
  snap.str("trajectories_out", traj_path);
  snap.str("trace_out", trace_path);
  snap.num("holdout", a.holdout);
  snap.u64("split_seed", a.split_seed);
  snap.str("split_out", a.split_out);
  snap.integer("num_states", a.num_states);
  snap.integer("num_symbols", a.num_symbols);
  snap.integer("max_iters", max_iters);
  snap.num("tol", a.tol);
  snap.u64("seed", a.seed);
  snap.boolean("timings", a.timings);
  snap.nums("thresholds", a.thresholds);
  snap.num("xi", hy.xi);
  snap.num("xi_lambda", hy.xi_lambda);
  snap.num("mu_lambda", hy.mu_lambda);
  snap.num("zeta", hy.zeta);
  snap.num("xi1", hy.xi1);
  snap.num("xi2", hy.xi2);
  snap.num("gamma", hy.gamma);

  jm::RunManifest man;
  man.command = "fit";
  man.config_json = snap.finish();
  man.prng_name = jm::kPrngName;
  man.seed = a.seed;
  add_input(man, a.config_path);
  add_input(man, a.dataset);
  finish_manifests(man, outputs);

  std::cout << "fit " << a.model << ": " << iterations << " iterations, objective "
            << fmt_g(objective) << (converged ? ", converged" : ", max iterations") << ", M="
            << mf.num_states << '\n';
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model, dataset, split, trajectories, trace, out, config_path;
  std::vector<double> thresholds;
  ConfigLayer layer;
};

void run_evaluate(EvaluateArgs& a) {
  a.layer.load(a.config_path);
  a.layer.merge("--model", a.model);
  a.layer.merge("--dataset", a.dataset);
  a.layer.merge("--split", a.split);
  a.layer.merge("--trajectories", a.trajectories);
  a.layer.merge("--trace", a.trace);
  a.layer.merge("--thresholds", a.thresholds);
  a.layer.merge("--out", a.out);
  if (a.model.empty() || a.dataset.empty() || a.split.empty() || a.trajectories.empty())
    throw UsageError("evaluate: --model, --dataset, --split and --trajectories are required");
  if (a.out.empty()) throw UsageError("evaluate: --out is required");

  jm::ModelFile model = jm::read_model(a.model);
  jm::Dataset full = jm::read_dataset(a.dataset);
  jm::HoldoutSplit split = jm::read_split(a.split);
  std::vector<jm::Trajectory> trajs = jm::read_trajectories(a.trajectories);

  bool needs_hidden = model.kind != jm::ModelKind::domjp;
  if (needs_hidden != (full.kind == jm::ObsKind::hidden))
    throw jm::DataError("model kind '" + jm::to_string(model.kind) +
                        "' does not match dataset kind '" + jm::to_string(full.kind) + "'");
  if (trajs.size() != full.sequences.size())
    throw jm::DataError("trajectory count does not match dataset sequence count");

  auto parts = jm::apply_split(full, split);
  const jm::Dataset& train = parts.first;
  const jm::HeldoutSet& heldout = parts.second;

  const std::vector<double>* thr = a.thresholds.empty() ? nullptr : &a.thresholds;
  const jm::EmissionModel* emission = model.emission ? &*model.emission : nullptr;
  jm::EvalResult res =
      jm::reconstruction_error(trajs, full.kind, full.emission, emission, thr, heldout);
  jm::EvalResult base = jm::baseline_error(train, heldout, thr);

  jm::ResultsFile r;
  r.dataset = a.dataset;
  r.method = jm::to_string(model.kind);
  r.num_points = res.num_points;
  r.num_sequences_scored = res.num_sequences_scored;
  r.error_percent = res.error_percent;
  r.pooled_error_percent = res.pooled_error_percent;
  r.baseline_error_percent = base.error_percent;
  r.baseline_pooled_error_percent = base.pooled_error_percent;
  r.total_seconds = a.trace.empty() ? 0.0 : jm::read_trace_total_seconds(a.trace);
  r.per_sequence = res.per_sequence;

  {
    std::ostringstream os;
    jm::write_results(os, r);
    jm::write_text_file(a.out, os.str());
  }

  Snapshot snap;
  snap.str("model", a.model);
  snap.str("dataset", a.dataset);
  snap.str("split", a.split);
  snap.str("trajectories", a.trajectories);
  snap.str("trace", a.trace);
  snap.nums("thresholds", a.thresholds);
  snap.str("out", a.out);

  jm::RunManifest man;
  man.command = "evaluate";
  man.config_json = snap.finish();
  man.prng_name = "none";
  man.seed = 0;
  add_input(man, a.config_path);
  add_input(man, a.model);
  add_input(man, a.dataset);
  add_input(man, a.split);
  add_input(man, a.trajectories);
  add_input(man, a.trace);
  finish_manifests(man, {a.out});

  std::cout << "evaluate " << r.method << ": error " << fmt_g(r.error_percent) << "% (baseline "
            << fmt_g(r.baseline_error_percent) << "%), " << r.num_points << " held-out points\n";
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> results;
  std::string summary_out, scaling_out, config_path;
  ConfigLayer layer;
};

void run_report(ReportArgs& a) {
  a.layer.load(a.config_path);
  a.layer.merge("--summary-out", a.summary_out);
  a.layer.merge("--scaling-out", a.scaling_out);
  if (a.results.empty()) throw UsageError("report: at least one results file is required");
  if (a.summary_out.empty() && a.scaling_out.empty())
    throw UsageError("report: --summary-out or --scaling-out is required");

  std::vector<jm::ResultsFile> rows;
  rows.reserve(a.results.size());
  for (const auto& path : a.results) rows.push_back(jm::read_results(path));

  std::vector<std::string> outputs;
  if (!a.summary_out.empty()) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      if (rows[x].dataset != rows[y].dataset) return rows[x].dataset < rows[y].dataset;
      return rows[x].method < rows[y].method;
    });
    std::ostringstream os;
    os << "dataset,method,num_points,error_percent,pooled_error_percent,"
          "baseline_error_percent,baseline_pooled_error_percent,total_seconds\n";
    for (std::size_t i : order) {
      const auto& r = rows[i];
      os << csv_field(r.dataset) << ',' << csv_field(r.method) << ',' << r.num_points << ','
         << fmt_g(r.error_percent) << ',' << fmt_g(r.pooled_error_percent) << ','
         << fmt_g(r.baseline_error_percent) << ',' << fmt_g(r.baseline_pooled_error_percent)
         << ',' << fmt_g(r.total_seconds) << '\n';
    }
    jm::write_text_file(a.summary_out, os.str());
    outputs.push_back(a.summary_out);
  }
  if (!a.scaling_out.empty()) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      if (rows[x].num_points != rows[y].num_points) return rows[x].num_points < rows[y].num_points;
      return rows[x].dataset < rows[y].dataset;
    });
    std::ostringstream os;
    os << "num_points,total_seconds,error_percent\n";
    for (std::size_t i : order) {
      const auto& r = rows[i];
      os << r.num_points << ',' << fmt_g(r.total_seconds) << ',' << fmt_g(r.error_percent)
         << '\n';
    }
    jm::write_text_file(a.scaling_out, os.str());
    outputs.push_back(a.scaling_out);
  }

  Snapshot snap;
  snap.strs("results", a.results);
  snap.str("summary_out", a.summary_out);
  snap.str("scaling_out", a.scaling_out);

  jm::RunManifest man;
  man.command = "report";
  man.config_json = snap.finish();
  man.prng_name = "none";
  man.seed = 0;
  add_input(man, a.config_path);
  for (const auto& path : a.results) add_input(man, path);
  finish_manifests(man, outputs);

  std::cout << "report: " << rows.size() << " result file(s), " << outputs.size()
            << " output(s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAP inference for Markov jump processes"};
  app.require_subcommand(1);

  SimulateArgs sim;
  {
    CLI::App* c = app.add_subcommand("simulate", "Generate a synthetic dataset");
    sim.layer.cmd = c;
    c->add_option("--protocol", sim.protocol, "synthetic1 (direct) or synthetic2 (hidden)");
    c->add_option("--seed", sim.seed, "PRNG seed");
    c->add_option("--num-seqs", sim.num_seqs, "number of sequences");
    c->add_option("--num-states", sim.num_states, "generator state count (0 = protocol default)");
    c->add_option("--num-symbols", sim.num_symbols, "observed alphabet size (synthetic2)");
    c->add_option("--obs-per-seq", sim.obs_per_seq, "observations per sequence");
    c->add_option("--horizon", sim.horizon, "time horizon (0 = obs-per-seq)");
    c->add_option("--emission", sim.emission, "multinomial or gaussian (synthetic2)");
    c->add_option("--gaussian-sd", sim.gaussian_sd, "gaussian observation noise");
    c->add_option("-o,--out", sim.out, "output dataset path");
    c->add_option("--config", sim.config_path, "JSON config file");
    c->callback([&] { run_simulate(sim); });
  }

  FitArgs fit;
  {
    CLI::App* c = app.add_subcommand("fit", "Fit a model to a dataset");
    fit.layer.cmd = c;
    c->add_option("--model", fit.model, "domjp, hmjp or imjp");
    c->add_option("--dataset", fit.dataset, "input dataset path");
    c->add_option("-o,--out", fit.out, "output model path");
    c->add_option("--trajectories-out", fit.trajectories_out, "output trajectories path");
    c->add_option("--trace-out", fit.trace_out, "output trace CSV path");
    c->add_option("--holdout", fit.holdout, "held-out observation fraction in [0, 1)");
    c->add_option("--split-seed", fit.split_seed, "holdout split seed");
    c->add_option("--split-out", fit.split_out, "output split path");
    c->add_option("--num-states", fit.num_states, "state count (domjp: 0 = infer)");
    c->add_option("--num-symbols", fit.num_symbols, "alphabet size (0 = infer)");
    c->add_option("--max-iters", fit.max_iters, "iteration cap (default 300, imjp 50)");
    c->add_option("--tol", fit.tol, "relative objective tolerance");
    c->add_option("--seed", fit.seed, "emission initialization seed");
    c->add_flag("--timings", fit.timings, "record wall time in the trace");
    c->add_option("--thresholds", fit.thresholds, "gaussian binning thresholds")
        ->delimiter(',');
    c->add_option("--xi", fit.xi, "transition penalty weight");
    c->add_option("--xi-lambda", fit.xi_lambda, "rate prior weight");
    c->add_option("--mu-lambda", fit.mu_lambda, "rate prior mean");
    c->add_option("--zeta", fit.zeta, "emission penalty weight");
    c->add_option("--xi1", fit.xi1, "state count penalty");
    c->add_option("--xi2", fit.xi2, "hierarchy KL penalty");
    c->add_option("--gamma", fit.gamma, "dwell pseudo-time");
    c->add_option("--config", fit.config_path, "JSON config file");
    c->callback([&] { run_fit(fit); });
  }

  EvaluateArgs ev;
  {
    CLI::App* c = app.add_subcommand("evaluate", "Score held-out reconstruction error");
    ev.layer.cmd = c;
    c->add_option("--model", ev.model, "fitted model path");
    c->add_option("--dataset", ev.dataset, "full dataset path");
    c->add_option("--split", ev.split, "split path written by fit");
    c->add_option("--trajectories", ev.trajectories, "trajectories path written by fit");
    c->add_option("--trace", ev.trace, "trace CSV (total_seconds source)");
    c->add_option("--thresholds", ev.thresholds, "gaussian binning thresholds")
        ->delimiter(',');
    c->add_option("-o,--out", ev.out, "output results path");
    c->add_option("--config", ev.config_path, "JSON config file");
    c->callback([&] { run_evaluate(ev); });
  }

  ReportArgs rep;
  {
    CLI::App* c = app.add_subcommand("report", "Aggregate results files into CSV tables");
    rep.layer.cmd = c;
    c->add_option("results", rep.results, "results JSON files")->required();
    c->add_option("--summary-out", rep.summary_out, "summary CSV path");
    c->add_option("--scaling-out", rep.scaling_out, "scaling CSV path");
    c->add_option("--config", rep.config_path, "JSON config file");
    c->callback([&] { run_report(rep); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const jm::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const jm::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
