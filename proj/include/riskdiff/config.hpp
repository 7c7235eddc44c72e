#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "riskdiff/simharness.hpp"

namespace riskdiff {

/// Simulation config, INI style:
///
///   [grid]
///   n        = 30, 60, 90, 120, 150
///   delta    = 0, 0.15, 0.30
///   beta_cov = log1, log1.5, log3     # logX means ln(X)
///   p0       = 0.20
///
///   [run]
///   replicates = 10000
///   seed       = 20240601
///   methods    = all                  # or a list: ge, liu, suissa, ...
///   alpha      = 0.05
///   boot_b     = 1000
///   theta_grid = 1000
///   workers    = 1
///
/// `#` and `;` start comments. The grid is the Cartesian product in the
/// order delta, beta_cov, n (the paper grid ordering). Errors carry the
/// offending line number.
GridRun parse_config(std::istream& in);
GridRun load_config(const std::filesystem::path& path);

/// A number, or "logX" for ln(X).
double parse_real(const std::string& text);

}  // namespace riskdiff
