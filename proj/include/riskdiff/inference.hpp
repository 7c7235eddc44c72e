#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace riskdiff {

enum class Estimand { MTE, CTE, CPATE, none };

enum class Method { suissa, mh_test, mh_sato, mh_mgr, ge, liu, ye, boot, zhang, firth };

inline constexpr Method kAllMethods[] = {Method::suissa, Method::mh_test, Method::mh_sato,
                                         Method::mh_mgr, Method::ge,      Method::liu,
                                         Method::ye,     Method::boot,    Method::zhang,
                                         Method::firth};

/// Command-line spelling, e.g. "mh-sato".
std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
std::string_view estimand_name(Estimand e);

/// The estimand each procedure targets.
Estimand estimand_of(Method m);

/// Methods that fit a logistic working model.
bool uses_working_model(Method m);
/// Methods that produce a point estimate and interval.
bool has_estimate(Method m);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v) const noexcept { return lower <= v && v <= upper; }
};

/// Two-sided Wald test of a zero risk difference with a CI truncated to
/// [-1, 1].
struct WaldResult {
  double z = 0.0;
  double p_value = 1.0;
  Interval ci;
  bool truncated = false;
};

/// Throws NumericalError when the variance is negative, non-finite, or zero
/// (the Wald statistic is then undefined).
WaldResult wald(double estimate, double variance, double alpha);

struct InferenceFlags {
  bool separation = false;
  bool nonconvergence = false;
  std::size_t bootstrap_failures = 0;
  bool ci_truncated = false;
  std::size_t strata_skipped = 0;
  std::optional<bool> mantel_fleiss_satisfied;
};

struct RiskDiffInference {
  Method method = Method::ge;
  Estimand estimand = Estimand::none;
  std::optional<double> estimate;
  std::optional<double> se;
  std::optional<Interval> ci;
  double statistic = 0.0;  // z, or chi-square for mh-test and zhang
  double p_value = 1.0;
  InferenceFlags flags;
  std::string note;
};

nlohmann::json to_json(const RiskDiffInference& r);
RiskDiffInference inference_from_json(const nlohmann::json& j);

std::string csv_header();
/// Fixed six-decimal formatting; absent fields are empty cells.
std::string to_csv_row(const RiskDiffInference& r);

}  // namespace riskdiff
