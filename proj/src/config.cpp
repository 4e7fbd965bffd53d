#include "bcbf/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace bcbf {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects anything it was not asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  /// Call once all fields are read.
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(where(key) + ": must be finite");
    return d;
  }

  std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(where(key) + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + ": expected a boolean");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(const std::string& key, const Eigen::Matrix<double, N, 1>& fallback) {
    if (!has(key)) return fallback;
    return to_vec<N>(j_.at(key), where(key));
  }

  template <int N>
  static Eigen::Matrix<double, N, 1> to_vec(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != N) throw ConfigError(where + ": expected an array of " + std::to_string(N));
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!v[i].is_number()) throw ConfigError(where + ": expected numbers");
      out[i] = v[i].get<double>();
    }
    return out;
  }

  static Mat2 to_mat2(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) throw ConfigError(where + ": expected a 2x2 array");
    Mat2 m;
    m.row(0) = to_vec<2>(v[0], where).transpose();
    m.row(1) = to_vec<2>(v[1], where).transpose();
    return m;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SlackSign parse_slack_sign(const std::string& s) {
  if (s == "conservative") return SlackSign::kConservative;
  if (s == "as_printed") return SlackSign::kAsPrinted;
  throw ConfigError("robust_slack_sign must be 'conservative' or 'as_printed'");
}

RiskSpec parse_risk_section(Section& sec) {
  RiskSpec r;
  try {
    r.measure = parse_risk_measure(sec.string("measure", "var"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(sec.where("measure") + ": " + e.what());
  }
  const double default_tau = r.measure == RiskMeasure::kExpectation ? 1.0 : 0.1;
  r.tau = sec.number("tau", default_tau);
  r.delta = sec.number("delta", 0.05);
  r.ell = sec.number("ell", 0.0);
  r.essential_lb = sec.number("essential_lb", 0.0);
  r.robust_slack_sign = parse_slack_sign(sec.string("robust_slack_sign", "conservative"));
  sec.finish();
  try {
    r.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return r;
}

GaussianMixture parse_mixture(const json& j) {
  Section sec(j, "mixture");
  GaussianMixture mix;
  const json& comps = sec.raw("components");
  if (!comps.is_array() || comps.empty()) throw ConfigError("mixture.components: expected a non-empty array");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    Section c(comps[i], "mixture.components[" + std::to_string(i) + "]");
    mix.weights.push_back(c.number("weight", 0.0));
    mix.means.push_back(Section::to_vec<2>(c.raw("mean"), c.where("mean")));
    mix.covariances.push_back(Section::to_mat2(c.raw("cov"), c.where("cov")));
    c.finish();
  }
  sec.finish();
  try {
    mix.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mixture: ") + e.what());
  }
  return mix;
}

}  // namespace

TraceLevel parse_trace_level(const std::string& s) {
  if (s == "none") return TraceLevel::kNone;
  if (s == "summary") return TraceLevel::kSummary;
  if (s == "full") return TraceLevel::kFull;
  throw ConfigError("trace level must be one of none, summary, full");
}

RiskSpec parse_risk_spec(const json& j) {
  Section sec(j, "risk");
  return parse_risk_section(sec);
}

Config parse_config(const json& j) {
  Config cfg;
  ScenarioConfig& sc = cfg.scenario;
  Section top(j, "config");

  if (top.has("scenario")) {
    Section s(top.raw("scenario"), "scenario");
    const std::string kind = s.string("kind", "collision");
    if (kind == "collision") {
      sc.kind = ScenarioKind::kCollision;
    } else if (kind == "tracking") {
      sc.kind = ScenarioKind::kTracking;
    } else {
      throw ConfigError("scenario.kind must be 'collision' or 'tracking'");
    }
    sc.n_samples = s.unsigned_int("n_samples", sc.n_samples);
    sc.dt = s.number("dt", sc.dt);
    sc.max_time = s.number("max_time", sc.max_time);
    sc.horizon = s.number("horizon", sc.horizon);
    sc.success_tolerance = s.number("success_tolerance", sc.success_tolerance);
    sc.target = s.vec<2>("target", sc.target);
    sc.start = RobotState::from_vector(s.vec<3>("start", sc.start.as_vector()));
    sc.estimated_velocity = s.vec<2>("estimated_velocity", sc.estimated_velocity);
    sc.true_velocity_scale = s.number("true_velocity_scale", sc.true_velocity_scale);
    sc.filter_enabled = s.boolean("filter_enabled", sc.filter_enabled);
    s.finish();
  }

  if (top.has("model")) {
    Section m(top.raw("model"), "model");
    sc.model.sigma_diag = m.vec<3>("sigma_diag", sc.model.sigma_diag);
    sc.model.d_diag = m.vec<2>("d_diag", sc.model.d_diag);
    sc.model.r_e = m.number("r_e", sc.model.r_e);
    sc.model.r_o = m.number("r_o", sc.model.r_o);
    sc.model.s_e = m.number("s_e", sc.model.s_e);
    sc.model.beta = m.number("beta_deg", sc.model.beta * 180.0 / std::numbers::pi) * std::numbers::pi / 180.0;
    sc.model.workspace_radius = m.number("workspace_radius", sc.model.workspace_radius);
    m.finish();
  }
  sc.model.object_velocity = sc.estimated_velocity;

  if (!top.has("mixture")) throw ConfigError("config: missing 'mixture' section");
  sc.mixture = parse_mixture(top.raw("mixture"));

  if (top.has("risk")) sc.filter.risk = parse_risk_spec(top.raw("risk"));

  if (top.has("filter")) {
    Section f(top.raw("filter"), "filter");
    sc.filter.gamma = f.number("gamma", sc.filter.gamma);
    if (f.has("Q")) sc.filter.Q = Section::to_mat2(f.raw("Q"), f.where("Q"));
    sc.filter.u_lo = f.vec<2>("u_min", sc.filter.u_lo);
    sc.filter.u_hi = f.vec<2>("u_max", sc.filter.u_hi);
    sc.filter.h_min = f.number("h_min", sc.filter.h_min);
    sc.filter.diagnostic_tau = f.number("diagnostic_tau", sc.filter.diagnostic_tau);
    f.finish();
  }

  if (top.has("reference")) {
    Section r(top.raw("reference"), "reference");
    sc.gains.k_rho = r.number("k_rho", sc.gains.k_rho);
    sc.gains.k_alpha = r.number("k_alpha", sc.gains.k_alpha);
    r.finish();
  }

  if (top.has("randomization")) {
    Section r(top.raw("randomization"), "randomization");
    sc.randomization.start_half_width = r.number("start_half_width", sc.randomization.start_half_width);
    sc.randomization.heading_half_width = r.number("heading_half_width", sc.randomization.heading_half_width);
    sc.randomization.mean_jitter = r.number("mean_jitter", sc.randomization.mean_jitter);
    r.finish();
  }

  if (top.has("benchmark")) {
    Section b(top.raw("benchmark"), "benchmark");
    cfg.run.n_runs = b.unsigned_int("n_runs", cfg.run.n_runs);
    if (b.has("methods")) {
      const json& ms = b.raw("methods");
      if (!ms.is_array() || ms.empty()) throw ConfigError("benchmark.methods: expected a non-empty array");
      cfg.run.methods.clear();
      for (const auto& m : ms) cfg.run.methods.push_back(parse_risk_spec(m));
    }
    cfg.run.shift_ell = b.number("shift_ell", cfg.run.shift_ell);
    cfg.run.shift_velocity_scale = b.number("shift_velocity_scale", cfg.run.shift_velocity_scale);
    b.finish();
  }

  if (top.has("run")) {
    Section r(top.raw("run"), "run");
    cfg.run.seed = r.unsigned_int("seed", cfg.run.seed);
    cfg.run.workers = static_cast<unsigned>(r.unsigned_int("workers", cfg.run.workers));
    cfg.run.out_dir = r.string("out_dir", cfg.run.out_dir);
    cfg.run.trace = parse_trace_level(r.string("trace", "summary"));
    r.finish();
  }
  top.finish();

  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const RiskSpec& r) {
  return {{"measure", std::string(to_string(r.measure))},
          {"tau", r.tau},
          {"delta", r.delta},
          {"ell", r.ell},
          {"essential_lb", r.essential_lb},
          {"robust_slack_sign", r.robust_slack_sign == SlackSign::kConservative ? "conservative" : "as_printed"},
          {"label", r.label()}};
}

json to_json(const ScenarioConfig& c) {
  json risk = to_json(c.filter.risk);
  risk.erase("label");  // derived, not an input key
  json comps = json::array();
  for (std::size_t i = 0; i < c.mixture.size(); ++i) {
    const Mat2& s = c.mixture.covariances[i];
    comps.push_back({{"weight", c.mixture.weights[i]},
                     {"mean", {c.mixture.means[i].x(), c.mixture.means[i].y()}},
                     {"cov", {{s(0, 0), s(0, 1)}, {s(1, 0), s(1, 1)}}}});
  }
  return {
      {"scenario",
       {{"kind", std::string(to_string(c.kind))},
        {"n_samples", c.n_samples},
        {"dt", c.dt},
        {"max_time", c.max_time},
        {"horizon", c.horizon},
        {"success_tolerance", c.success_tolerance},
        {"target", {c.target.x(), c.target.y()}},
        {"start", {c.start.px, c.start.py, c.start.theta}},
        {"estimated_velocity", {c.estimated_velocity.x(), c.estimated_velocity.y()}},
        {"true_velocity_scale", c.true_velocity_scale},
        {"filter_enabled", c.filter_enabled}}},
      {"model",
       {{"sigma_diag", {c.model.sigma_diag.x(), c.model.sigma_diag.y(), c.model.sigma_diag.z()}},
        {"d_diag", {c.model.d_diag.x(), c.model.d_diag.y()}},
        {"r_e", c.model.r_e},
        {"r_o", c.model.r_o},
        {"s_e", c.model.s_e},
        {"beta_deg", c.model.beta * 180.0 / std::numbers::pi},
        {"workspace_radius", c.model.workspace_radius}}},
      {"mixture", {{"components", comps}}},
      {"risk", risk},
      {"filter",
       {{"gamma", c.filter.gamma},
        {"Q", {{c.filter.Q(0, 0), c.filter.Q(0, 1)}, {c.filter.Q(1, 0), c.filter.Q(1, 1)}}},
        {"u_min", {c.filter.u_lo.x(), c.filter.u_lo.y()}},
        {"u_max", {c.filter.u_hi.x(), c.filter.u_hi.y()}},
        {"h_min", c.filter.h_min},
        {"diagnostic_tau", c.filter.diagnostic_tau}}},
      {"reference", {{"k_rho", c.gains.k_rho}, {"k_alpha", c.gains.k_alpha}}},
      {"randomization",
       {{"start_half_width", c.randomization.start_half_width},
        {"heading_half_width", c.randomization.heading_half_width},
        {"mean_jitter", c.randomization.mean_jitter}}},
  };
}

json to_json(const BoundResult& r, bool include_weights) {
  json j = {{"value", r.value},
            {"k", r.k_index},
            {"epsilon_eff", r.epsilon_eff},
            {"b_coeff", r.b_coeff},
            {"n", r.weights.size()}};
  if (include_weights) j["weights"] = r.weights;
  return j;
}

json to_json(const RunOutcome& o, bool include_timing) {
  return {{"status", std::string(to_string(o.status))},
          {"t_end", o.t_end},
          {"t_avg_filter_ms", include_timing ? o.t_avg_filter_ms : 0.0},
          {"steps", o.steps},
          {"violations", o.violations},
          {"infeasible_steps", o.infeasible_steps},
          {"nonpositive_steps", o.nonpositive_steps}};
}

json to_json(const BenchmarkSummary& s, bool include_timing) {
  json methods = json::array();
  for (const auto& m : s.methods) {
    methods.push_back({{"method", m.label},
                       {"risk", to_json(m.risk)},
                       {"N", s.n_samples},
                       {"success", m.success},
                       {"collision", m.collision},
                       {"timeout", m.timeout},
                       {"t_avg_ms", include_timing ? m.t_avg_ms : 0.0}});
  }
  return {{"n_runs", s.n_runs},
          {"n_samples", s.n_samples},
          {"true_velocity_scale", s.true_velocity_scale},
          {"methods", methods}};
}

std::string summary_csv(const BenchmarkSummary& s, bool include_timing) {
  std::ostringstream os;
  os << "method,N,success,collision,timeout,t_avg_ms\n";
  for (const auto& m : s.methods) {
    os << m.label << ',' << s.n_samples << ',' << m.success << '/' << s.n_runs << ',' << m.collision << '/'
       << s.n_runs << ',' << m.timeout << '/' << s.n_runs << ',' << (include_timing ? m.t_avg_ms : 0.0) << '\n';
  }
  return os.str();
}

}  // namespace bcbf
