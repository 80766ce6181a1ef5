#include "ibp/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "ibp/error.hpp"

namespace ibp::cli {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorCode::kConfig, "config field '" + where + "': " + what);
}

// Reads one JSON object, checking types and rejecting unknown keys.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) bad(where_, "must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    read(*it, path(key), out);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) bad(path(key.c_str()), "unknown key");
    }
  }

 private:
  static void read(const json& v, const std::string& where, double& out) {
    if (!v.is_number()) bad(where, "must be a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& where, int& out) {
    if (!v.is_number_integer()) bad(where, "must be an integer");
    const auto x = v.get<std::int64_t>();
    if (x < -2'000'000'000 || x > 2'000'000'000) bad(where, "out of range");
    out = static_cast<int>(x);
  }
  static void read(const json& v, const std::string& where, std::uint64_t& out) {
    if (!v.is_number_unsigned()) bad(where, "must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, const std::string& where, bool& out) {
    if (!v.is_boolean()) bad(where, "must be true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& where, std::string& out) {
    if (!v.is_string()) bad(where, "must be a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, const std::string& where, std::vector<int>& out) {
    if (!v.is_array()) bad(where, "must be an array of integers");
    out.clear();
    for (const auto& x : v) {
      int i = 0;
      read(x, where, i);
      out.push_back(i);
    }
  }
  static void read(const json& v, const std::string& where, std::vector<MetricKind>& out) {
    if (!v.is_array()) bad(where, "must be an array of metric names");
    out.clear();
    for (const auto& x : v) {
      std::string name;
      read(x, where, name);
      const auto kind = metric_from_string(name);
      if (!kind) bad(where, "unknown metric '" + name + "'");
      out.push_back(*kind);
    }
  }
  static void read(const json& v, const std::string& where, AgentState& out) {
    if (!v.is_array() || v.size() != 2) bad(where, "must be [s, v]");
    read(v[0], where, out.s);
    read(v[1], where, out.v);
  }
  static void read(const json& v, const std::string& where, std::map<std::string, std::string>& out) {
    if (!v.is_object()) bad(where, "must be an object of strings");
    out.clear();
    for (const auto& [key, value] : v.items()) {
      if (!value.is_string()) bad(where + "." + key, "must be a string");
      out[key] = value.get<std::string>();
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json metrics_json(const std::vector<MetricKind>& kinds) {
  json out = json::array();
  for (auto k : kinds) out.push_back(std::string(to_string(k)));
  return out;
}

json endpoint_json(const extproto::EndpointDescriptor& e) {
  json j = {{"timeout_seconds", e.timeout_seconds}};
  if (e.transport == extproto::Transport::kChildProcess) {
    j["transport"] = "child-process";
    j["command"] = e.command;
    j["vars"] = e.vars;
  } else {
    j["transport"] = "tcp";
    j["host"] = e.host;
    j["port"] = e.port;
  }
  return j;
}

extproto::EndpointDescriptor endpoint_from(const json& j, const std::string& where) {
  Section s(j, where);
  extproto::EndpointDescriptor e;
  std::string transport = "child-process";
  s.get("transport", transport);
  if (transport == "child-process") {
    e.transport = extproto::Transport::kChildProcess;
  } else if (transport == "tcp") {
    e.transport = extproto::Transport::kTcp;
  } else {
    bad(s.path("transport"), "must be child-process or tcp");
  }
  s.get("command", e.command);
  s.get("vars", e.vars);
  s.get("host", e.host);
  s.get("port", e.port);
  s.get("timeout_seconds", e.timeout_seconds);
  s.finish();
  return e;
}

json bins_json(const HistogramSpec& h) { return {{"lo", h.lo}, {"hi", h.hi}, {"bins", h.bins}}; }

HistogramSpec bins_from(const json& j, const std::string& where, HistogramSpec h) {
  Section s(j, where);
  s.get("lo", h.lo);
  s.get("hi", h.hi);
  s.get("bins", h.bins);
  s.finish();
  return h;
}

}  // namespace

std::vector<double> HistogramSpec::edges() const { return linspace_edges(lo, hi, static_cast<std::size_t>(bins)); }

json scenario_to_json(const Scenario& sc) {
  const auto& p = sc.params;
  return {{"human0", {sc.human0.s, sc.human0.v}},
          {"robot0", {sc.robot0.s, sc.robot0.v}},
          {"horizon", sc.horizon},
          {"geometry", sc.geometry},
          {"collision_threshold", sc.collision_threshold},
          {"params",
           {{"v0", p.v0},
            {"T", p.T},
            {"s0", p.s0},
            {"delta", p.delta},
            {"a", p.a},
            {"b", p.b},
            {"dt", p.dt},
            {"sigma", p.sigma},
            {"far_target", p.far_target}}}};
}

Scenario scenario_from_json(const json& j, const std::string& where) {
  Section s(j, where);
  Scenario sc;
  s.get("human0", sc.human0);
  s.get("robot0", sc.robot0);
  s.get("horizon", sc.horizon);
  s.get("geometry", sc.geometry);
  s.get("collision_threshold", sc.collision_threshold);
  if (const auto* pj = s.child("params")) {
    Section p(*pj, s.path("params"));
    p.get("v0", sc.params.v0);
    p.get("T", sc.params.T);
    p.get("s0", sc.params.s0);
    p.get("delta", sc.params.delta);
    p.get("a", sc.params.a);
    p.get("b", sc.params.b);
    p.get("dt", sc.params.dt);
    p.get("sigma", sc.params.sigma);
    p.get("far_target", sc.params.far_target);
    p.finish();
  }
  s.finish();
  return sc;
}

void RunConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    bad("schema_version", "unsupported version " + std::to_string(schema_version));
  }
  try {
    scenario.validate();
  } catch (const Error& e) {
    bad("scenario", e.what());
  }
  if (scenario.horizon < 1) bad("scenario.horizon", "must be >= 1");
  if (plan.kind != "accelerate" && plan.kind != "natural" && plan.kind != "file") {
    bad("plan.kind", "must be accelerate, natural or file");
  }
  if (plan.kind == "accelerate" && !(plan.v_max >= 0.0)) bad("plan.v_max", "must be >= 0");
  if (plan.kind == "file" && plan.path.empty()) bad("plan.path", "required for plan kind 'file'");
  if (sim_mode != "joint" && sim_mode != "intervened") bad("simulate.mode", "must be joint or intervened");
  if (trials < 1) bad("simulate.trials", "must be >= 1");
  if (n_samples < 1) bad("toy.n_samples", "must be >= 1");
  auto check_bins = [](const char* name, const HistogramSpec& h) {
    if (h.bins < 1) bad(name, "bins must be >= 1");
    if (!(h.hi > h.lo)) bad(name, "hi must exceed lo");
  };
  check_bins("toy.position_bins", position_bins);
  check_bins("toy.distance_bins", distance_bins);
  if (!(onset_drop > 0.0)) bad("toy.onset_drop", "must be > 0");
  if (!(ess_floor >= 0.0)) bad("toy.ess_floor", "must be >= 0");
  if (n_scenarios < 1) bad("dataset.n_scenarios", "must be >= 1");
  if (!(ranges.s_min <= ranges.s_max) || !(ranges.v_min <= ranges.v_max) || ranges.v_min < 0.0) {
    bad("dataset.ranges", "need s_min <= s_max and 0 <= v_min <= v_max");
  }
  // Audit settings only constrain the commands that use them, so that for
  // instance a long-horizon simulate does not trip over the default cuts.
  if (command != "audit" && command != "bench") return;
  if (predictors.empty()) bad("predictors", "at least one predictor is required");
  for (std::size_t i = 0; i < predictors.size(); ++i) {
    const auto& p = predictors[i];
    const std::string where = "predictors[" + std::to_string(i) + "]";
    if (p.tag.empty()) bad(where + ".tag", "must not be empty");
    if (p.endpoint) {
      try {
        p.endpoint->validate();
      } catch (const Error& e) {
        bad(where + ".endpoint", e.what());
      }
    } else {
      const auto tags = builtin_tags();
      if (std::find(tags.begin(), tags.end(), p.tag) == tags.end()) {
        bad(where + ".tag", "unknown built-in predictor '" + p.tag + "' and no endpoint given");
      }
    }
  }
  if (cbp_importance_factor < 1) bad("audit.cbp_importance_factor", "must be >= 1");
  try {
    scheme.validate(scenario.horizon);
  } catch (const Error& e) {
    bad("audit.cuts", e.what());
  }
  if (metrics.empty()) bad("audit.metrics", "must not be empty");
  for (auto m : metrics) {
    if (!is_attribution_metric(m)) bad("audit.metrics", std::string(to_string(m)) + " cannot be attributed");
  }
  for (auto g : gated) {
    if (std::find(metrics.begin(), metrics.end(), g) == metrics.end()) {
      bad("audit.gated", std::string(to_string(g)) + " is not among audit.metrics");
    }
  }
  if (k < 1) bad("audit.k", "must be >= 1");
  if (samples_per_query < 1) bad("audit.samples_per_query", "must be >= 1");
  if (kde_samples_per_query < 2) bad("audit.kde_samples_per_query", "must be >= 2");
  if (!(epsilon >= 0.0)) bad("audit.epsilon", "must be >= 0");
  if (!(kde.bandwidth_floor > 0.0)) bad("audit.kde.bandwidth_floor", "must be > 0");
}

AuditOptions RunConfig::audit_options(int threads) const {
  AuditOptions o;
  o.scheme = scheme;
  o.metrics = metrics;
  o.gated = gated;
  o.k = k;
  o.samples_per_query = samples_per_query;
  o.kde_samples_per_query = kde_samples_per_query;
  o.epsilon = epsilon;
  o.common_random_numbers = common_random_numbers;
  o.threads = threads;
  o.seed = seed;
  o.kde = kde;
  return o;
}

RunConfig preset(const std::string& name) {
  if (name == "paper-toy") return RunConfig{};
  fail(ErrorCode::kConfig, "unknown preset '" + name + "' (known: paper-toy)");
}

json to_json(const RunConfig& c) {
  json predictors = json::array();
  for (const auto& p : c.predictors) {
    json pj = {{"tag", p.tag}};
    if (p.endpoint) pj["endpoint"] = endpoint_json(*p.endpoint);
    predictors.push_back(std::move(pj));
  }
  return {
      {"schema_version", c.schema_version},
      {"command", c.command},
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"scenario", scenario_to_json(c.scenario)},
      {"plan", {{"kind", c.plan.kind}, {"accel", c.plan.accel}, {"v_max", c.plan.v_max}, {"path", c.plan.path}}},
      {"simulate", {{"mode", c.sim_mode}, {"trials", c.trials}}},
      {"toy",
       {{"n_samples", c.n_samples},
        {"position_bins", bins_json(c.position_bins)},
        {"distance_bins", bins_json(c.distance_bins)},
        {"onset_drop", c.onset_drop},
        {"ess_floor", c.ess_floor},
        {"svg", c.svg}}},
      {"dataset",
       {{"n_scenarios", c.n_scenarios},
        {"path", c.dataset_path},
        {"ranges",
         {{"s_min", c.ranges.s_min}, {"s_max", c.ranges.s_max}, {"v_min", c.ranges.v_min}, {"v_max", c.ranges.v_max}}}}},
      {"predictors", predictors},
      {"audit",
       {{"cuts", c.scheme.cuts},
        {"metrics", metrics_json(c.metrics)},
        {"gated", metrics_json(c.gated)},
        {"k", c.k},
        {"samples_per_query", c.samples_per_query},
        {"kde_samples_per_query", c.kde_samples_per_query},
        {"epsilon", c.epsilon},
        {"common_random_numbers", c.common_random_numbers},
        {"cbp_importance_factor", c.cbp_importance_factor},
        {"plan_set", c.plan_set},
        {"kde", {{"bandwidth_floor", c.kde.bandwidth_floor}, {"log_density_floor", c.kde.log_density_floor}}}}},
  };
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    bad("schema_version", "unsupported version " + std::to_string(c.schema_version));
  }
  root.get("command", c.command);
  root.get("seed", c.seed);
  root.get("out_dir", c.out_dir);
  if (const auto* sj = root.child("scenario")) c.scenario = scenario_from_json(*sj, "scenario");
  if (const auto* pj = root.child("plan")) {
    Section s(*pj, "plan");
    s.get("kind", c.plan.kind);
    s.get("accel", c.plan.accel);
    s.get("v_max", c.plan.v_max);
    s.get("path", c.plan.path);
    s.finish();
  }
  if (const auto* sj = root.child("simulate")) {
    Section s(*sj, "simulate");
    s.get("mode", c.sim_mode);
    s.get("trials", c.trials);
    s.finish();
  }
  if (const auto* tj = root.child("toy")) {
    Section s(*tj, "toy");
    s.get("n_samples", c.n_samples);
    if (const auto* b = s.child("position_bins")) c.position_bins = bins_from(*b, "toy.position_bins", c.position_bins);
    if (const auto* b = s.child("distance_bins")) c.distance_bins = bins_from(*b, "toy.distance_bins", c.distance_bins);
    s.get("onset_drop", c.onset_drop);
    s.get("ess_floor", c.ess_floor);
    s.get("svg", c.svg);
    s.finish();
  }
  if (const auto* dj = root.child("dataset")) {
    Section s(*dj, "dataset");
    s.get("n_scenarios", c.n_scenarios);
    s.get("path", c.dataset_path);
    if (const auto* rj = s.child("ranges")) {
      Section r(*rj, "dataset.ranges");
      r.get("s_min", c.ranges.s_min);
      r.get("s_max", c.ranges.s_max);
      r.get("v_min", c.ranges.v_min);
      r.get("v_max", c.ranges.v_max);
      r.finish();
    }
    s.finish();
  }
  if (const auto* pj = root.child("predictors")) {
    if (!pj->is_array()) bad("predictors", "must be an array");
    c.predictors.clear();
    for (std::size_t i = 0; i < pj->size(); ++i) {
      const std::string where = "predictors[" + std::to_string(i) + "]";
      Section s((*pj)[i], where);
      PredictorSpec p;
      s.get("tag", p.tag);
      if (const auto* ej = s.child("endpoint")) p.endpoint = endpoint_from(*ej, where + ".endpoint");
      s.finish();
      c.predictors.push_back(std::move(p));
    }
  }
  if (const auto* aj = root.child("audit")) {
    Section s(*aj, "audit");
    s.get("cuts", c.scheme.cuts);
    s.get("metrics", c.metrics);
    s.get("gated", c.gated);
    s.get("k", c.k);
    s.get("samples_per_query", c.samples_per_query);
    s.get("kde_samples_per_query", c.kde_samples_per_query);
    s.get("epsilon", c.epsilon);
    s.get("common_random_numbers", c.common_random_numbers);
    s.get("cbp_importance_factor", c.cbp_importance_factor);
    s.get("plan_set", c.plan_set);
    if (const auto* kj = s.child("kde")) {
      Section kd(*kj, "audit.kde");
      kd.get("bandwidth_floor", c.kde.bandwidth_floor);
      kd.get("log_density_floor", c.kde.log_density_floor);
      kd.finish();
    }
    s.finish();
  }
  root.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kConfig, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, "config '" + path + "' is not valid JSON at byte " + std::to_string(e.byte));
  }
  return from_json(j);
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path + "'");
  out << to_json(config).dump(2) << '\n';
}

}  // namespace ibp::cli
