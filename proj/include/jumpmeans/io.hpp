#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "jumpmeans/core.hpp"
#include "jumpmeans/eval.hpp"
#include "jumpmeans/nonparametric.hpp"
#include "jumpmeans/parametric.hpp"

// File formats. Writing is done by hand so output is canonical: fixed field
// order, no whitespace, %.17g floats, newline-terminated. Reading goes
// through a JSON parser and tolerates any formatting, so
// parse -> serialize restores the canonical bytes exactly.

namespace jumpmeans {

// ---------------------------------------------------------------------------
// Canonical primitives.
// ---------------------------------------------------------------------------

namespace jsonio {

inline void number(std::ostream& os, double v) {
  if (!std::isfinite(v)) throw NumericError("cannot serialize a non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

inline void number_or_null(std::ostream& os, double v) {
  if (std::isnan(v))
    os << "null";
  else
    number(os, v);
}

inline void integer(std::ostream& os, long long v) { os << v; }
inline void integer(std::ostream& os, std::uint64_t v) { os << v; }

inline void string(std::ostream& os, const std::string& s) {
  os << '"';
  for (char c : s) {
    switch (c) {
      case '"': os << "\\\""; break;
      case '\\': os << "\\\\"; break;
      case '\n': os << "\\n"; break;
      case '\r': os << "\\r"; break;
      case '\t': os << "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          os << buf;
        } else {
          os << c;
        }
    }
  }
  os << '"';
}

inline void array(std::ostream& os, const std::vector<double>& v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    number(os, v[i]);
  }
  os << ']';
}

inline void array(std::ostream& os, const std::vector<int>& v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    integer(os, static_cast<long long>(v[i]));
  }
  os << ']';
}

inline void matrix(std::ostream& os, const std::vector<std::vector<double>>& m) {
  os << '[';
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) os << ',';
    array(os, m[i]);
  }
  os << ']';
}

inline void emission(std::ostream& os, const EmissionModel& e) {
  if (const auto* mult = std::get_if<MultinomialEmission>(&e)) {
    os << "{\"kind\":\"multinomial\",\"rho\":";
    matrix(os, mult->rho);
    os << '}';
  } else {
    os << "{\"kind\":\"gaussian\",\"means\":";
    array(os, std::get<GaussianEmission>(e).means);
    os << '}';
  }
}

}  // namespace jsonio

inline std::string to_string(ObsKind k) { return k == ObsKind::direct ? "direct" : "hidden"; }
inline std::string to_string(EmissionKind k) {
  return k == EmissionKind::multinomial ? "multinomial" : "gaussian";
}
inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::domjp: return "domjp";
    case ModelKind::hmjp: return "hmjp";
    default: return "imjp";
  }
}

inline ObsKind obs_kind_from(const std::string& s) {
  if (s == "direct") return ObsKind::direct;
  if (s == "hidden") return ObsKind::hidden;
  throw DataError("unknown observation kind '" + s + "'");
}
inline EmissionKind emission_kind_from(const std::string& s) {
  if (s == "multinomial") return EmissionKind::multinomial;
  if (s == "gaussian") return EmissionKind::gaussian;
  throw DataError("unknown emission kind '" + s + "'");
}
inline ModelKind model_kind_from(const std::string& s) {
  if (s == "domjp") return ModelKind::domjp;
  if (s == "hmjp") return ModelKind::hmjp;
  if (s == "imjp") return ModelKind::imjp;
  throw DataError("unknown model kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Dataset file.
// ---------------------------------------------------------------------------

inline void write_dataset(std::ostream& os, const Dataset& d) {
  os << "{\"format_version\":" << d.format_version;
  os << ",\"kind\":\"" << to_string(d.kind) << '"';
  os << ",\"emission\":\"" << to_string(d.emission) << '"';
  os << ",\"horizon\":";
  jsonio::number(os, d.horizon);
  os << ",\"sequences\":[";
  for (std::size_t i = 0; i < d.sequences.size(); ++i) {
    if (i) os << ',';
    os << "{\"times\":";
    jsonio::array(os, d.sequences[i].times);
    os << ",\"values\":";
    jsonio::array(os, d.sequences[i].values);
    os << '}';
  }
  os << "],\"generator\":";
  if (d.generator) {
    const auto& g = *d.generator;
    os << "{\"params\":{\"num_states\":" << g.params.num_states << ",\"pi\":";
    jsonio::array(os, g.params.initial);
    os << ",\"P\":";
    jsonio::matrix(os, g.params.transition);
    os << ",\"lambda\":";
    jsonio::array(os, g.params.rates);
    os << "},\"emission\":";
    if (g.emission)
      jsonio::emission(os, *g.emission);
    else
      os << "null";
    os << '}';
  } else {
    os << "null";
  }
  os << ",\"prng\":{\"name\":";
  jsonio::string(os, d.prng_name);
  os << ",\"seed\":";
  jsonio::integer(os, d.prng_seed);
  os << "}}\n";
}

namespace detail {

inline nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

template <typename T>
T field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) throw DataError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("field '") + name + "': " + e.what());
  }
}

inline EmissionModel emission_from_json(const nlohmann::json& j) {
  auto kind = field<std::string>(j, "kind");
  if (kind == "multinomial")
    return MultinomialEmission{field<std::vector<std::vector<double>>>(j, "rho")};
  if (kind == "gaussian") return GaussianEmission{field<std::vector<double>>(j, "means")};
  throw DataError("unknown emission kind '" + kind + "'");
}

}  // namespace detail

inline Dataset read_dataset(const std::string& path) {
  auto j = detail::parse_file(path);
  Dataset d;
  try {
    d.format_version = detail::field<int>(j, "format_version");
    d.kind = obs_kind_from(detail::field<std::string>(j, "kind"));
    d.emission = emission_kind_from(detail::field<std::string>(j, "emission"));
    d.horizon = detail::field<double>(j, "horizon");
    for (const auto& s : detail::field<nlohmann::json>(j, "sequences")) {
      SequenceData seq;
      seq.times = detail::field<std::vector<double>>(s, "times");
      seq.values = detail::field<std::vector<double>>(s, "values");
      if (seq.times.size() != seq.values.size())
        throw DataError("sequence times and values differ in length");
      d.sequences.push_back(std::move(seq));
    }
    if (j.contains("generator") && !j.at("generator").is_null()) {
      const auto& g = j.at("generator");
      GeneratorInfo info;
      const auto& p = g.at("params");
      info.params.num_states = detail::field<int>(p, "num_states");
      info.params.initial = detail::field<std::vector<double>>(p, "pi");
      info.params.transition = detail::field<std::vector<std::vector<double>>>(p, "P");
      info.params.rates = detail::field<std::vector<double>>(p, "lambda");
      if (g.contains("emission") && !g.at("emission").is_null())
        info.emission = detail::emission_from_json(g.at("emission"));
      d.generator = std::move(info);
    }
    const auto& prng = j.at("prng");
    d.prng_name = detail::field<std::string>(prng, "name");
    d.prng_seed = detail::field<std::uint64_t>(prng, "seed");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
  return d;
}

// ---------------------------------------------------------------------------
// Model file: {kind, M, pi, P, lambda, emission, pi0?, hyperparams}. For the
// nonparametric model P holds the M x (M+1) transition rows (last slot =
// unused mass), lambda the derived rates, and pi0 is present.
// ---------------------------------------------------------------------------

struct ModelFile {
  ModelKind kind = ModelKind::domjp;
  int num_states = 0;
  std::vector<double> pi;
  std::vector<std::vector<double>> P;
  std::vector<double> lambda;
  std::optional<EmissionModel> emission;
  std::optional<std::vector<double>> pi0;
  Hyperparams hyper;
};

inline ModelFile to_model_file(const FitResult& fit, const Hyperparams& hy) {
  ModelFile m;
  m.kind = fit.kind;
  m.num_states = fit.params.num_states;
  m.pi = fit.params.initial;
  m.P = fit.params.transition;
  m.lambda = fit.params.rates;
  m.emission = fit.emission;
  m.hyper = hy;
  return m;
}

inline ModelFile to_model_file(const NpFitResult& fit, const Hyperparams& hy) {
  ModelFile m;
  m.kind = ModelKind::imjp;
  m.num_states = fit.model.num_states;
  m.pi = fit.initial;
  m.P = fit.model.pi_rows;
  m.lambda = fit.rates;
  m.emission = fit.model.emission;
  m.pi0 = fit.model.pi0;
  m.hyper = hy;
  return m;
}

inline void write_model(std::ostream& os, const ModelFile& m) {
  os << "{\"kind\":\"" << to_string(m.kind) << '"';
  os << ",\"M\":" << m.num_states;
  os << ",\"pi\":";
  jsonio::array(os, m.pi);
  os << ",\"P\":";
  jsonio::matrix(os, m.P);
  os << ",\"lambda\":";
  jsonio::array(os, m.lambda);
  os << ",\"emission\":";
  if (m.emission)
    jsonio::emission(os, *m.emission);
  else
    os << "null";
  if (m.pi0) {
    os << ",\"pi0\":";
    jsonio::array(os, *m.pi0);
  }
  os << ",\"hyperparams\":{\"xi\":";
  jsonio::number(os, m.hyper.xi);
  os << ",\"xi_lambda\":";
  jsonio::number(os, m.hyper.xi_lambda);
  os << ",\"mu_lambda\":";
  jsonio::number(os, m.hyper.mu_lambda);
  os << ",\"zeta\":";
  jsonio::number(os, m.hyper.zeta);
  os << ",\"xi1\":";
  jsonio::number(os, m.hyper.xi1);
  os << ",\"xi2\":";
  jsonio::number(os, m.hyper.xi2);
  os << ",\"gamma\":";
  jsonio::number(os, m.hyper.gamma);
  os << "}}\n";
}

inline ModelFile read_model(const std::string& path) {
  auto j = detail::parse_file(path);
  ModelFile m;
  try {
    m.kind = model_kind_from(detail::field<std::string>(j, "kind"));
    m.num_states = detail::field<int>(j, "M");
    m.pi = detail::field<std::vector<double>>(j, "pi");
    m.P = detail::field<std::vector<std::vector<double>>>(j, "P");
    m.lambda = detail::field<std::vector<double>>(j, "lambda");
    if (j.contains("emission") && !j.at("emission").is_null())
      m.emission = detail::emission_from_json(j.at("emission"));
    if (j.contains("pi0")) m.pi0 = detail::field<std::vector<double>>(j, "pi0");
    const auto& h = j.at("hyperparams");
    m.hyper.xi = detail::field<double>(h, "xi");
    m.hyper.xi_lambda = detail::field<double>(h, "xi_lambda");
    m.hyper.mu_lambda = detail::field<double>(h, "mu_lambda");
    m.hyper.zeta = detail::field<double>(h, "zeta");
    m.hyper.xi1 = detail::field<double>(h, "xi1");
    m.hyper.xi2 = detail::field<double>(h, "xi2");
    m.hyper.gamma = detail::field<double>(h, "gamma");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Split file. Indices are 0-based positions into the stored sequences.
// ---------------------------------------------------------------------------

inline void write_split(std::ostream& os, const HoldoutSplit& s) {
  os << "{\"format_version\":1,\"fraction\":";
  jsonio::number(os, s.fraction);
  os << ",\"seed\":";
  jsonio::integer(os, s.seed);
  os << ",\"heldout_indices\":[";
  for (std::size_t i = 0; i < s.heldout_indices.size(); ++i) {
    if (i) os << ',';
    jsonio::array(os, s.heldout_indices[i]);
  }
  os << "]}\n";
}

inline HoldoutSplit read_split(const std::string& path) {
  auto j = detail::parse_file(path);
  HoldoutSplit s;
  try {
    s.fraction = detail::field<double>(j, "fraction");
    s.seed = detail::field<std::uint64_t>(j, "seed");
    s.heldout_indices = detail::field<std::vector<std::vector<int>>>(j, "heldout_indices");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Trajectories file.
// ---------------------------------------------------------------------------

inline void write_trajectories(std::ostream& os, const std::vector<Trajectory>& trajs,
                               double horizon) {
  os << "{\"format_version\":1,\"horizon\":";
  jsonio::number(os, horizon);
  os << ",\"trajectories\":[";
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (i) os << ',';
    os << "{\"states\":";
    jsonio::array(os, trajs[i].states);
    os << ",\"dwell_times\":";
    jsonio::array(os, trajs[i].dwell_times);
    os << '}';
  }
  os << "]}\n";
}

inline std::vector<Trajectory> read_trajectories(const std::string& path) {
  auto j = detail::parse_file(path);
  std::vector<Trajectory> out;
  try {
    double horizon = detail::field<double>(j, "horizon");
    for (const auto& t : detail::field<nlohmann::json>(j, "trajectories")) {
      Trajectory tr;
      tr.states = detail::field<std::vector<int>>(t, "states");
      tr.dwell_times = detail::field<std::vector<double>>(t, "dwell_times");
      tr.horizon = horizon;
      out.push_back(std::move(tr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fit trace CSV. cum_seconds is 0.000000 unless the fit recorded wall time,
// which keeps repeated runs byte-identical.
// ---------------------------------------------------------------------------

inline void write_trace_csv(std::ostream& os, const std::vector<FitTraceRow>& trace) {
  os << "iteration,objective,num_states,train_error,heldout_error,cum_seconds\n";
  char buf[64];
  for (const auto& row : trace) {
    os << row.iteration << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.objective);
    os << buf << ',' << row.num_states << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.train_error);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.heldout_error);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.6f", row.cum_seconds);
    os << buf << '\n';
  }
}

// Final cumulative seconds column of a trace file (0 when timings were off).
inline double read_trace_total_seconds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line, last;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  if (last.empty()) throw DataError("'" + path + "': no trace rows");
  auto pos = last.find_last_of(',');
  if (pos == std::string::npos) throw DataError("'" + path + "': malformed trace row");
  return std::strtod(last.c_str() + pos + 1, nullptr);
}

// ---------------------------------------------------------------------------
// Results file.
// ---------------------------------------------------------------------------

struct ResultsFile {
  std::string dataset;
  std::string method;
  long num_points = 0;
  long num_sequences_scored = 0;
  double error_percent = 0.0;
  double pooled_error_percent = 0.0;
  double baseline_error_percent = 0.0;
  double baseline_pooled_error_percent = 0.0;
  double total_seconds = 0.0;
  std::vector<double> per_sequence;  // NaN serialized as null
};

inline void write_results(std::ostream& os, const ResultsFile& r) {
  os << "{\"format_version\":1,\"dataset\":";
  jsonio::string(os, r.dataset);
  os << ",\"method\":";
  jsonio::string(os, r.method);
  os << ",\"num_points\":" << r.num_points;
  os << ",\"num_sequences_scored\":" << r.num_sequences_scored;
  os << ",\"error_percent\":";
  jsonio::number(os, r.error_percent);
  os << ",\"pooled_error_percent\":";
  jsonio::number(os, r.pooled_error_percent);
  os << ",\"baseline_error_percent\":";
  jsonio::number(os, r.baseline_error_percent);
  os << ",\"baseline_pooled_error_percent\":";
  jsonio::number(os, r.baseline_pooled_error_percent);
  os << ",\"total_seconds\":";
  jsonio::number(os, r.total_seconds);
  os << ",\"per_sequence_errors\":[";
  for (std::size_t i = 0; i < r.per_sequence.size(); ++i) {
    if (i) os << ',';
    jsonio::number_or_null(os, r.per_sequence[i]);
  }
  os << "]}\n";
}

inline ResultsFile read_results(const std::string& path) {
  auto j = detail::parse_file(path);
  ResultsFile r;
  try {
    r.dataset = detail::field<std::string>(j, "dataset");
    r.method = detail::field<std::string>(j, "method");
    r.num_points = detail::field<long>(j, "num_points");
    r.num_sequences_scored = detail::field<long>(j, "num_sequences_scored");
    r.error_percent = detail::field<double>(j, "error_percent");
    r.pooled_error_percent = detail::field<double>(j, "pooled_error_percent");
    r.baseline_error_percent = detail::field<double>(j, "baseline_error_percent");
    r.baseline_pooled_error_percent = detail::field<double>(j, "baseline_pooled_error_percent");
    r.total_seconds = detail::field<double>(j, "total_seconds");
    for (const auto& v : j.at("per_sequence_errors"))
      r.per_sequence.push_back(v.is_null() ? kNaN : v.get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// File helpers and run manifests. Each command writes, next to every output,
// a <output>.manifest.json recording the resolved configuration, the PRNG,
// and digests of all inputs and outputs. Manifests carry timestamps and are
// not part of the determinism contract.
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("failed while writing '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_digest_hex(const std::string& path) {
  std::string bytes = read_text_file(path);
  std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RunManifest {
  std::string command;
  std::string config_json = "{}";  // canonical snapshot of resolved options
  std::string prng_name;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
};

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(const std::string& output_path, const RunManifest& m) {
  std::ostringstream os;
  os << "{\"command\":";
  jsonio::string(os, m.command);
  os << ",\"config\":" << m.config_json;
  os << ",\"prng\":{\"name\":";
  jsonio::string(os, m.prng_name);
  os << ",\"seed\":";
  jsonio::integer(os, m.seed);
  os << "},\"created\":";
  jsonio::string(os, utc_timestamp());
  auto file_list = [&](const char* name,
                       const std::vector<std::pair<std::string, std::string>>& files) {
    os << ",\"" << name << "\":[";
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (i) os << ',';
      os << "{\"path\":";
      jsonio::string(os, files[i].first);
      os << ",\"fnv1a64\":";
      jsonio::string(os, files[i].second);
      os << '}';
    }
    os << ']';
  };
  file_list("inputs", m.inputs);
  file_list("outputs", m.outputs);
  os << "}\n";
  write_text_file(output_path + ".manifest.json", os.str());
}

}  // namespace jumpmeans
