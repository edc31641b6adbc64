#include "kinetic/config.hpp"

#include "kinetic/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace kinetic {

using nlohmann::json;

std::vector<std::string> all_criteria() {
  return {"A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11", "A12"};
}

ScenarioConfig default_config() {
  ScenarioConfig cfg;
  cfg.criteria = all_criteria();
  return cfg;
}

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(ErrorCode::ConfigError, "'" + where + "' must be an object");
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      fail(ErrorCode::ConfigError, "unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::ConfigError, "bad value for '" + where + "." + key + "'");
  }
}

void require_one_of(const std::string& value, const std::string& key, const std::set<std::string>& options) {
  if (!options.count(value)) fail(ErrorCode::ConfigError, "invalid value '" + value + "' for '" + key + "'");
}

void validate(const ScenarioConfig& c) {
  require_one_of(c.kernel.type, "kernel.type", {"separable", "perturbed", "tabulated"});
  require_one_of(c.kernel.psi, "kernel.psi", {"sign", "linear"});
  require_one_of(c.initial.type, "initial.type", {"cosine-times-g"});
  require_one_of(c.initial.g, "initial.g", {"sigma-power"});
  require_one_of(c.kind, "experiment.kind", {"suite", "steady", "decay", "scan", "laplace", "mc"});
  if (c.kernel.type == "tabulated" && c.kernel.table_path.empty())
    fail(ErrorCode::ConfigError, "'kernel.table_path' is required for tabulated kernels");
  if (c.n_v < 2 || c.n_v % 2 != 0) fail(ErrorCode::ConfigError, "'grid.n_v' must be even and >= 2");
  if (c.P < 0) fail(ErrorCode::ConfigError, "'modes.P' must be >= 0");
  if (!(c.time.t_min > 1.0) || !(c.time.t_max > c.time.t_min) || c.time.t_points < 2)
    fail(ErrorCode::ConfigError, "'time' needs 1 < t_min < t_max and t_points >= 2");
  if (!(c.time.fit_lo < c.time.fit_hi)) fail(ErrorCode::ConfigError, "'time.fit_window' must be increasing");
  if (c.eta.steps < 1 || !(c.eta.max >= c.eta.min)) fail(ErrorCode::ConfigError, "'eta' grid is empty");
  if (c.mc.particles < 1 || c.mc.bins_x < 10 || c.mc.bins_v < 10 || c.mc.groups < 2)
    fail(ErrorCode::ConfigError, "'mc' needs particles >= 1, at least 10 bins per axis and 2 groups");
  if (c.threads < 1) fail(ErrorCode::ConfigError, "'threads' must be >= 1");
  const auto all = all_criteria();
  for (const auto& id : c.criteria)
    if (std::find(all.begin(), all.end(), id) == all.end())
      fail(ErrorCode::ConfigError, "unknown criterion '" + id + "' in 'acceptance.criteria'");
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("malformed JSON: ") + e.what());
  }
  ScenarioConfig c = default_config();
  check_keys(doc, "", {"kernel", "grid", "modes", "initial", "experiment", "time", "eta", "laplace", "mc",
                       "tolerances", "acceptance", "output", "seed", "threads"});
  if (doc.contains("kernel")) {
    const json& k = doc["kernel"];
    check_keys(k, "kernel", {"type", "alpha", "beta", "psi", "vmax", "table_path"});
    read(k, "type", "kernel", c.kernel.type);
    read(k, "alpha", "kernel", c.kernel.alpha);
    read(k, "beta", "kernel", c.kernel.beta);
    read(k, "psi", "kernel", c.kernel.psi);
    read(k, "vmax", "kernel", c.kernel.vmax);
    read(k, "table_path", "kernel", c.kernel.table_path);
  }
  if (doc.contains("grid")) {
    check_keys(doc["grid"], "grid", {"n_v"});
    read(doc["grid"], "n_v", "grid", c.n_v);
  }
  if (doc.contains("modes")) {
    check_keys(doc["modes"], "modes", {"P"});
    read(doc["modes"], "P", "modes", c.P);
  }
  if (doc.contains("initial")) {
    const json& i = doc["initial"];
    check_keys(i, "initial", {"type", "g", "power"});
    read(i, "type", "initial", c.initial.type);
    read(i, "g", "initial", c.initial.g);
    if (i.contains("power") && !i["power"].is_null()) {
      double p = 0.0;
      read(i, "power", "initial", p);
      c.initial.power = p;
    }
  }
  if (doc.contains("experiment")) {
    check_keys(doc["experiment"], "experiment", {"kind"});
    read(doc["experiment"], "kind", "experiment", c.kind);
  }
  if (doc.contains("time")) {
    const json& t = doc["time"];
    check_keys(t, "time", {"t_min", "t_max", "t_points", "fit_window", "n_partial"});
    read(t, "t_min", "time", c.time.t_min);
    read(t, "t_max", "time", c.time.t_max);
    read(t, "t_points", "time", c.time.t_points);
    read(t, "n_partial", "time", c.time.n_partial);
    if (t.contains("fit_window")) {
      std::vector<double> w;
      read(t, "fit_window", "time", w);
      if (w.size() != 2) fail(ErrorCode::ConfigError, "'time.fit_window' must have two entries");
      c.time.fit_lo = w[0];
      c.time.fit_hi = w[1];
    }
  }
  if (doc.contains("eta")) {
    const json& e = doc["eta"];
    check_keys(e, "eta", {"mode", "min", "max", "steps", "powers", "trace_n", "trace_deriv"});
    read(e, "mode", "eta", c.eta.mode);
    read(e, "min", "eta", c.eta.min);
    read(e, "max", "eta", c.eta.max);
    read(e, "steps", "eta", c.eta.steps);
    read(e, "powers", "eta", c.eta.powers);
    read(e, "trace_n", "eta", c.eta.trace_n);
    read(e, "trace_deriv", "eta", c.eta.trace_deriv);
  }
  if (doc.contains("laplace")) {
    const json& l = doc["laplace"];
    check_keys(l, "laplace", {"n", "t", "eta_max", "eps", "tail_tol", "gauss_order"});
    read(l, "n", "laplace", c.laplace.n);
    read(l, "t", "laplace", c.laplace.t);
    read(l, "eta_max", "laplace", c.laplace.eta_max);
    read(l, "eps", "laplace", c.laplace.eps);
    read(l, "tail_tol", "laplace", c.laplace.tail_tol);
    read(l, "gauss_order", "laplace", c.laplace.gauss_order);
  }
  if (doc.contains("mc")) {
    const json& m = doc["mc"];
    check_keys(m, "mc", {"particles", "times", "bins_x", "bins_v", "groups", "stationary_t"});
    read(m, "particles", "mc", c.mc.particles);
    read(m, "times", "mc", c.mc.times);
    read(m, "bins_x", "mc", c.mc.bins_x);
    read(m, "bins_v", "mc", c.mc.bins_v);
    read(m, "groups", "mc", c.mc.groups);
    read(m, "stationary_t", "mc", c.mc.stationary_t);
  }
  if (doc.contains("tolerances")) {
    const json& t = doc["tolerances"];
    check_keys(t, "tolerances", {"term_tol", "unbounded_initial"});
    read(t, "term_tol", "tolerances", c.tolerances.term_tol);
    read(t, "unbounded_initial", "tolerances", c.tolerances.unbounded_initial);
  }
  if (doc.contains("acceptance")) {
    check_keys(doc["acceptance"], "acceptance", {"criteria"});
    read(doc["acceptance"], "criteria", "acceptance", c.criteria);
  }
  if (doc.contains("output")) {
    check_keys(doc["output"], "output", {"dir"});
    read(doc["output"], "dir", "output", c.out_dir);
  }
  read(doc, "seed", "", c.seed);
  read(doc, "threads", "", c.threads);
  validate(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ScenarioConfig& c) {
  json doc;
  doc["kernel"] = {{"type", c.kernel.type},   {"alpha", c.kernel.alpha}, {"beta", c.kernel.beta},
                   {"psi", c.kernel.psi},     {"vmax", c.kernel.vmax},   {"table_path", c.kernel.table_path}};
  doc["grid"] = {{"n_v", c.n_v}};
  doc["modes"] = {{"P", c.P}};
  doc["initial"] = {{"type", c.initial.type}, {"g", c.initial.g}};
  doc["initial"]["power"] = c.initial.power ? json(*c.initial.power) : json(nullptr);
  doc["experiment"] = {{"kind", c.kind}};
  doc["time"] = {{"t_min", c.time.t_min},
                 {"t_max", c.time.t_max},
                 {"t_points", c.time.t_points},
                 {"fit_window", {c.time.fit_lo, c.time.fit_hi}},
                 {"n_partial", c.time.n_partial}};
  doc["eta"] = {{"mode", c.eta.mode},       {"min", c.eta.min},         {"max", c.eta.max},
                {"steps", c.eta.steps},     {"powers", c.eta.powers},   {"trace_n", c.eta.trace_n},
                {"trace_deriv", c.eta.trace_deriv}};
  doc["laplace"] = {{"n", c.laplace.n},           {"t", c.laplace.t},
                    {"eta_max", c.laplace.eta_max}, {"eps", c.laplace.eps},
                    {"tail_tol", c.laplace.tail_tol}, {"gauss_order", c.laplace.gauss_order}};
  doc["mc"] = {{"particles", c.mc.particles}, {"times", c.mc.times},   {"bins_x", c.mc.bins_x},
               {"bins_v", c.mc.bins_v},       {"groups", c.mc.groups}, {"stationary_t", c.mc.stationary_t}};
  doc["tolerances"] = {{"term_tol", c.tolerances.term_tol}, {"unbounded_initial", c.tolerances.unbounded_initial}};
  doc["acceptance"] = {{"criteria", c.criteria}};
  doc["output"] = {{"dir", c.out_dir}};
  doc["seed"] = c.seed;
  doc["threads"] = c.threads;
  return doc.dump(2);
}

std::string config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kinetic
