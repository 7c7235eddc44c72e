#pragma once

#include <cstddef>
#include <string>

#include "riskdiff/inference.hpp"
#include "riskdiff/trialdata.hpp"

namespace riskdiff {

struct MhTestResult {
  double chi2 = 0.0;
  double p_value = 1.0;
  std::size_t strata_used = 0;
  std::size_t strata_skipped = 0;
};

/// Uncorrected Cochran-Mantel-Haenszel statistic for a common difference of
/// zero. Strata with fewer than two subjects or no hypergeometric variance
/// are skipped; throws DegenerateTableError if nothing is left.
MhTestResult mh_test(const StratumTable& t);

struct MantelFleiss {
  bool satisfied = false;
  double margin = 0.0;
};

/// Mantel-Fleiss adequacy of the chi-square approximation: the summed
/// expectation must lie at least 5 away from both attainable bounds.
MantelFleiss mantel_fleiss(const StratumTable& t);

enum class MhVariance { sato, mgr };

struct MhRdResult {
  double estimate = 0.0;
  double variance = 0.0;
  Interval ci;
  bool ci_truncated = false;
  double z = 0.0;
  double p_value = 1.0;
  MhVariance variance_kind = MhVariance::sato;
  Estimand estimand = Estimand::CPATE;
  std::string variance_note;
};

/// Mantel-Haenszel weighted risk difference, w_s = n1s n0s / ns.
///
/// sato: Sato (1989), valid under a common difference across strata.
/// mgr:  Greenland-Robins dually consistent variance plus a plug-in term for
///       between-stratum heterogeneity of the stratum differences; the
///       formula used is written to `variance_note`.
MhRdResult mh_rd(const StratumTable& t, MhVariance kind, double alpha = 0.05);

/// Each variance component on its own, for tests and diagnostics.
double mh_rd_estimate(const StratumTable& t);
double sato_variance(const StratumTable& t, double estimate);
double greenland_robins_variance(const StratumTable& t);
double heterogeneity_variance(const StratumTable& t, double estimate);

}  // namespace riskdiff
