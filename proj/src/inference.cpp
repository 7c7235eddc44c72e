#include "riskdiff/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "riskdiff/error.hpp"
#include "riskdiff/numerics.hpp"

namespace riskdiff {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::suissa: return "suissa";
    case Method::mh_test: return "mh-test";
    case Method::mh_sato: return "mh-sato";
    case Method::mh_mgr: return "mh-mgr";
    case Method::ge: return "ge";
    case Method::liu: return "liu";
    case Method::ye: return "ye";
    case Method::boot: return "boot";
    case Method::zhang: return "zhang";
    case Method::firth: return "firth";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const Method m : kAllMethods)
    if (method_name(m) == name) return m;
  return std::nullopt;
}

std::string_view estimand_name(Estimand e) {
  switch (e) {
    case Estimand::MTE: return "MTE";
    case Estimand::CTE: return "CTE";
    case Estimand::CPATE: return "CPATE";
    case Estimand::none: return "none";
  }
  return "?";
}

Estimand estimand_of(Method m) {
  switch (m) {
    case Method::mh_test: return Estimand::CTE;
    case Method::mh_sato:
    case Method::ge:
    case Method::firth: return Estimand::CPATE;
    default: return Estimand::MTE;
  }
}

bool uses_working_model(Method m) {
  switch (m) {
    case Method::ge:
    case Method::liu:
    case Method::ye:
    case Method::boot:
    case Method::zhang:
    case Method::firth: return true;
    default: return false;
  }
}

bool has_estimate(Method m) { return m != Method::suissa && m != Method::mh_test; }

WaldResult wald(double estimate, double variance, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!std::isfinite(variance) || variance < 0.0)
    throw NumericalError("variance estimate is negative or not finite");
  if (variance == 0.0) throw NumericalError("variance estimate is zero; Wald statistic undefined");
  const double se = std::sqrt(variance);
  const double q = norm_quantile(1.0 - alpha / 2.0);
  WaldResult w;
  w.z = estimate / se;
  w.p_value = std::min(1.0, 2.0 * norm_cdf(-std::abs(w.z)));
  const double lo = estimate - q * se;
  const double hi = estimate + q * se;
  w.ci = {std::max(-1.0, lo), std::min(1.0, hi)};
  w.truncated = lo < -1.0 || hi > 1.0;
  return w;
}

nlohmann::json to_json(const RiskDiffInference& r) {
  nlohmann::json j;
  j["method"] = method_name(r.method);
  j["estimand"] = estimand_name(r.estimand);
  j["estimate"] = r.estimate ? nlohmann::json(*r.estimate) : nlohmann::json(nullptr);
  j["se"] = r.se ? nlohmann::json(*r.se) : nlohmann::json(nullptr);
  if (r.ci)
    j["ci"] = {r.ci->lower, r.ci->upper};
  else
    j["ci"] = nullptr;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  nlohmann::json f;
  f["separation"] = r.flags.separation;
  f["nonconvergence"] = r.flags.nonconvergence;
  f["bootstrap_failures"] = r.flags.bootstrap_failures;
  f["ci_truncated"] = r.flags.ci_truncated;
  f["strata_skipped"] = r.flags.strata_skipped;
  f["mantel_fleiss_satisfied"] = r.flags.mantel_fleiss_satisfied
                                     ? nlohmann::json(*r.flags.mantel_fleiss_satisfied)
                                     : nlohmann::json(nullptr);
  j["flags"] = f;
  j["note"] = r.note;
  return j;
}

RiskDiffInference inference_from_json(const nlohmann::json& j) {
  RiskDiffInference r;
  const auto m = parse_method(j.at("method").get<std::string>());
  if (!m) throw DomainError("unknown method in record");
  r.method = *m;
  const auto e = j.at("estimand").get<std::string>();
  for (const Estimand cand : {Estimand::MTE, Estimand::CTE, Estimand::CPATE, Estimand::none})
    if (estimand_name(cand) == e) r.estimand = cand;
  if (!j.at("estimate").is_null()) r.estimate = j["estimate"].get<double>();
  if (!j.at("se").is_null()) r.se = j["se"].get<double>();
  if (!j.at("ci").is_null()) r.ci = Interval{j["ci"][0].get<double>(), j["ci"][1].get<double>()};
  r.statistic = j.at("statistic").get<double>();
  r.p_value = j.at("p_value").get<double>();
  const auto& f = j.at("flags");
  r.flags.separation = f.at("separation").get<bool>();
  r.flags.nonconvergence = f.at("nonconvergence").get<bool>();
  r.flags.bootstrap_failures = f.at("bootstrap_failures").get<std::size_t>();
  r.flags.ci_truncated = f.at("ci_truncated").get<bool>();
  r.flags.strata_skipped = f.at("strata_skipped").get<std::size_t>();
  if (!f.at("mantel_fleiss_satisfied").is_null())
    r.flags.mantel_fleiss_satisfied = f["mantel_fleiss_satisfied"].get<bool>();
  r.note = j.value("note", "");
  return r;
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fixed6(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

}  // namespace

std::string csv_header() {
  return "method,estimand,estimate,se,ci_lower,ci_upper,statistic,p_value,separation,"
         "nonconvergence,bootstrap_failures,ci_truncated,strata_skipped";
}

std::string to_csv_row(const RiskDiffInference& r) {
  std::string row;
  row += method_name(r.method);
  row += ',';
  row += estimand_name(r.estimand);
  row += ',' + fixed6(r.estimate) + ',' + fixed6(r.se);
  row += ',' + (r.ci ? fixed6(r.ci->lower) : std::string());
  row += ',' + (r.ci ? fixed6(r.ci->upper) : std::string());
  row += ',' + fixed6(r.statistic) + ',' + fixed6(r.p_value);
  row += r.flags.separation ? ",1" : ",0";
  row += r.flags.nonconvergence ? ",1" : ",0";
  row += ',' + std::to_string(r.flags.bootstrap_failures);
  row += r.flags.ci_truncated ? ",1" : ",0";
  row += ',' + std::to_string(r.flags.strata_skipped);
  return row;
}

}  // namespace riskdiff
