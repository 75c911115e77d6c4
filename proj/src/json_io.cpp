#include "refmi/json_io.hpp"

#include <set>

#include "refmi/error.hpp"

namespace refmi {
namespace {

Json summary_json(const Summary& s) { return Json{{"value", s.value}, {"mcse", s.mcse}}; }

Json model_json(const ArmModel& m) {
  Json sigma = Json::array();
  for (Eigen::Index r = 0; r < m.sigma.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.sigma.cols(); ++c) row.push_back(m.sigma(r, c));
    sigma.push_back(row);
  }
  return Json{{"mu", std::vector<double>(m.mu.data(), m.mu.data() + m.mu.size())}, {"sigma", sigma}};
}

ArmModel model_from_json(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains("mu") || !j.contains("sigma")) {
    throw Error(ErrorKind::InvalidArgument, std::string(name) + " needs 'mu' and 'sigma'");
  }
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto rows = j.at("sigma").get<std::vector<std::vector<double>>>();
  ArmModel m{Vector::Map(mu.data(), static_cast<Eigen::Index>(mu.size())),
             Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(mu.size()))};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != mu.size()) {
      throw Error(ErrorKind::InvalidArgument, std::string(name) + ".sigma must be square and match mu");
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m.sigma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

Json dropout_json(const DropoutSpec& d) {
  if (d.kind == DropoutSpec::Kind::Mcar) return Json{{"type", "mcar"}, {"rate", d.rate}};
  return Json{{"type", "mar_logistic"}, {"intercept", d.intercept}, {"slope", d.slope}};
}

DropoutSpec dropout_from_json(const Json& j, int J, const std::string& name) {
  DropoutSpec d;
  const std::string type = j.value("type", "mcar");
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> known{"type", "rate", "intercept", "slope"};
    if (!known.count(key)) throw Error(ErrorKind::InvalidArgument, name + ": unknown key '" + key + "'");
  }
  if (type == "mcar") {
    d.kind = DropoutSpec::Kind::Mcar;
    const Json& rate = j.contains("rate") ? j.at("rate") : Json(0.0);
    if (rate.is_number()) {
      d.rate.assign(static_cast<std::size_t>(std::max(J, 0)), rate.get<double>());
    } else {
      d.rate = rate.get<std::vector<double>>();
    }
  } else if (type == "mar_logistic") {
    d.kind = DropoutSpec::Kind::MarLogistic;
    d.intercept = j.at("intercept").get<double>();
    d.slope = j.value("slope", 0.0);
  } else {
    throw Error(ErrorKind::InvalidArgument, name + ": type must be mcar or mar_logistic");
  }
  return d;
}

}  // namespace

std::string dump(const Json& j) { return j.dump(2); }

Json to_json(const PooledEstimate& p) {
  return Json{{"method", "rubin"},
              {"estimate", p.theta_bar},
              {"se", p.se()},
              {"df", p.df},
              {"alpha", p.alpha},
              {"ci", {p.ci_lower, p.ci_upper}},
              {"components", {{"within", p.w_bar}, {"between", p.b}, {"total", p.t_total}}},
              {"imputations", p.imputations}};
}

Json to_json(const BootMiEstimate& p) {
  return Json{{"method", "bootMI"},
              {"estimate", p.theta_bar},
              {"se", p.se()},
              {"df", p.df},
              {"alpha", p.alpha},
              {"ci", {p.ci_lower, p.ci_upper}},
              {"components", {{"within", p.sigma2_w}, {"between", p.sigma2_b}, {"total", p.v_hat}}},
              {"bootstraps", p.bootstraps},
              {"imputations", p.imputations},
              {"degenerate", p.degenerate}};
}

Json to_json(const ScenarioConfig& cfg) {
  Json estimators = Json::array();
  for (Estimator e : cfg.estimators) estimators.push_back(std::string(to_string(e)));
  Json j{{"n_a", cfg.n_a},
         {"n_r", cfg.n_r},
         {"J", cfg.J},
         {"baseline", cfg.baseline},
         {"true_ref", model_json(cfg.true_ref)},
         {"true_act", model_json(cfg.true_act)},
         {"dropout", {{"active", dropout_json(cfg.dropout_active)}, {"reference", dropout_json(cfg.dropout_reference)}}},
         {"strategy", std::string(to_string(cfg.strategy))},
         {"analysis", std::string(to_string(cfg.analysis))},
         {"estimators", estimators},
         {"M", cfg.M},
         {"proper", cfg.proper},
         {"B", cfg.B},
         {"boot_M", cfg.boot_M},
         {"bayes_draws", cfg.bayes_draws},
         {"reps", cfg.reps},
         {"alpha", cfg.alpha},
         {"seed", cfg.seed}};
  if (cfg.true_theta) j["true_theta"] = *cfg.true_theta;
  return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "scenario must be a JSON object");
  static const std::set<std::string> known{"n_a",      "n_r",        "J",      "baseline", "true_ref",
                                           "true_act", "dropout",    "strategy", "analysis", "estimators",
                                           "M",        "proper",     "B",      "boot_M",   "bayes_draws",
                                           "reps",     "alpha",      "seed",   "true_theta"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorKind::InvalidArgument, "scenario: unknown key '" + key + "'");
  }
  try {
    ScenarioConfig cfg;
    cfg.n_a = j.at("n_a").get<int>();
    cfg.n_r = j.at("n_r").get<int>();
    cfg.J = j.at("J").get<int>();
    cfg.baseline = j.value("baseline", true);
    cfg.true_ref = model_from_json(j.at("true_ref"), "true_ref");
    cfg.true_act = model_from_json(j.at("true_act"), "true_act");
    const Json none = Json::object();
    const Json& dropout = j.contains("dropout") ? j.at("dropout") : none;
    for (const auto& [key, value] : dropout.items()) {
      if (key != "active" && key != "reference") {
        throw Error(ErrorKind::InvalidArgument, "dropout: unknown arm '" + key + "'");
      }
    }
    cfg.dropout_active = dropout_from_json(dropout.contains("active") ? dropout.at("active") : none, cfg.J,
                                           "dropout.active");
    cfg.dropout_reference = dropout_from_json(
        dropout.contains("reference") ? dropout.at("reference") : none, cfg.J, "dropout.reference");
    cfg.strategy = parse_strategy(j.value("strategy", "j2r"));
    cfg.analysis = parse_analysis(j.value("analysis", "diff_means"));
    if (j.contains("estimators")) {
      cfg.estimators.clear();
      for (const auto& e : j.at("estimators")) cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
    }
    cfg.M = j.value("M", cfg.M);
    cfg.proper = j.value("proper", cfg.proper);
    cfg.B = j.value("B", cfg.B);
    cfg.boot_M = j.value("boot_M", cfg.boot_M);
    cfg.bayes_draws = j.value("bayes_draws", cfg.bayes_draws);
    cfg.reps = j.value("reps", cfg.reps);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("true_theta") && !j.at("true_theta").is_null()) cfg.true_theta = j.at("true_theta").get<double>();
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("scenario: ") + e.what());
  }
}

ScenarioConfig parse_scenario(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

Json to_json(const SimReport& report, bool include_runtime) {
  Json estimators = Json::object();
  for (const auto& s : report.estimators) {
    Json e{{"n", s.n},
           {"mean_estimate", summary_json(s.mean_estimate)},
           {"empirical_sd", s.empirical_sd},
           {"empirical_variance", summary_json(s.empirical_variance)},
           {"mean_variance", summary_json(s.mean_variance)},
           {"variance_ratio", summary_json(s.variance_ratio)},
           {"coverage", summary_json(s.coverage)},
           {"rejection_rate", summary_json(s.rejection_rate)}};
    if (s.mean_within) e["mean_within"] = summary_json(*s.mean_within);
    if (s.mean_between) e["mean_between"] = summary_json(*s.mean_between);
    estimators[std::string(to_string(s.estimator))] = e;
  }
  Json j{{"scenario", to_json(report.config)},
         {"true_theta", report.true_theta},
         {"replications", report.replications},
         {"failed", report.failed},
         {"failures", report.failures},
         {"estimators", estimators}};
  if (include_runtime) j["runtime_seconds"] = report.runtime_seconds;
  return j;
}

}  // namespace refmi
