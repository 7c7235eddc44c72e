#include "riskdiff/analysis.hpp"

#include <cmath>

#include "riskdiff/error.hpp"
#include "riskdiff/mantel_haenszel.hpp"

namespace riskdiff {

Analysis::Analysis(const TrialDataset& d, std::vector<std::string> covariate_cols,
                   AnalysisOptions opts)
    : d_(d), cols_(std::move(covariate_cols)), opts_(opts) {}

WorkingModel& Analysis::working_model() {
  if (!model_) model_.emplace(d_, cols_, opts_.gcomp);
  return *model_;
}

const StratumTable& Analysis::strata() {
  if (!strata_) strata_ = stratify(d_, cols_);
  return *strata_;
}

RiskDiffInference Analysis::run(Method method, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  if (uses_working_model(method)) return infer(working_model(), method, alpha, opts_.gcomp);

  RiskDiffInference r;
  r.method = method;
  r.estimand = estimand_of(method);

  switch (method) {
    case Method::suissa: {
      if (!cols_.empty()) throw UsageError("method suissa accepts no covariates");
      const long k1 = static_cast<long>(d_.responders(1));
      const long n1 = static_cast<long>(d_.arm_size(1));
      const long k0 = static_cast<long>(d_.responders(0));
      const long n0 = static_cast<long>(d_.arm_size(0));
      if (n1 == 0 || n0 == 0) throw InsufficientDataError("both arms need at least one subject");
      const ExactTestResult e =
          opts_.exact_cache && opts_.ordering == Ordering::abs_z
              ? opts_.exact_cache->get(k1, n1, k0, n0)
              : ss_test(k1, n1, k0, n0, opts_.theta_grid, opts_.ordering);
      r.statistic = e.z_obs;
      r.p_value = e.p_value;
      break;
    }
    case Method::mh_test: {
      const auto t = mh_test(strata());
      r.statistic = t.chi2;
      r.p_value = t.p_value;
      r.flags.strata_skipped = t.strata_skipped;
      r.flags.mantel_fleiss_satisfied = mantel_fleiss(strata()).satisfied;
      break;
    }
    case Method::mh_sato:
    case Method::mh_mgr: {
      const auto m = mh_rd(strata(), method == Method::mh_sato ? MhVariance::sato : MhVariance::mgr,
                           alpha);
      r.estimate = m.estimate;
      r.se = std::sqrt(m.variance);
      r.ci = m.ci;
      r.flags.ci_truncated = m.ci_truncated;
      r.statistic = m.z;
      r.p_value = m.p_value;
      r.note = "variance: " + m.variance_note;
      break;
    }
    default: break;
  }
  return r;
}

RiskDiffInference analyze(const TrialDataset& d, const std::vector<std::string>& covariate_cols,
                          Method method, double alpha, const AnalysisOptions& opts) {
  Analysis a(d, covariate_cols, opts);
  return a.run(method, alpha);
}

}  // namespace riskdiff
