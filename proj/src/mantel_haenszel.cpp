#include "riskdiff/mantel_haenszel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "riskdiff/error.hpp"
#include "riskdiff/numerics.hpp"

namespace riskdiff {
namespace {

void require_strata(const StratumTable& t) {
  if (t.strata.empty()) throw DomainError("stratum table is empty");
}

struct Hypergeometric {
  double mean;
  double var;
};

Hypergeometric hypergeometric(const Stratum& s) {
  const double ns = static_cast<double>(s.total());
  const double n1 = static_cast<double>(s.n1);
  const double n0 = static_cast<double>(s.n0);
  const double m1 = static_cast<double>(s.responders());
  if (s.total() <= 1) return {ns > 0 ? n1 * m1 / ns : 0.0, 0.0};
  return {n1 * m1 / ns, n1 * n0 * m1 * (ns - m1) / (ns * ns * (ns - 1.0))};
}

// Weighted stratum differences need both arms present in every stratum.
void require_both_arms(const StratumTable& t) {
  for (std::size_t s = 0; s < t.strata.size(); ++s)
    if (t.strata[s].n1 < 1 || t.strata[s].n0 < 1)
      throw StratumStructureError("stratum " + stratum_label(t, s) +
                                  " has no subjects in one arm");
}

double weight(const Stratum& s) {
  return static_cast<double>(s.n1) * static_cast<double>(s.n0) / static_cast<double>(s.total());
}

double stratum_difference(const Stratum& s) {
  return static_cast<double>(s.x1) / static_cast<double>(s.n1) -
         static_cast<double>(s.x0) / static_cast<double>(s.n0);
}

// Sums in a canonical order so results do not depend on how the strata
// were listed.
double ordered_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double acc = 0.0;
  for (const double v : terms) acc += v;
  return acc;
}

double weight_sum(const StratumTable& t) {
  std::vector<double> terms;
  for (const auto& s : t.strata) terms.push_back(weight(s));
  const double w = ordered_sum(std::move(terms));
  if (!(w > 0.0)) throw DegenerateTableError("Mantel-Haenszel weights sum to zero");
  return w;
}

}  // namespace

MhTestResult mh_test(const StratumTable& t) {
  require_strata(t);
  MhTestResult r;
  std::vector<double> diffs;
  std::vector<double> vars;
  for (const auto& s : t.strata) {
    const auto h = hypergeometric(s);
    if (s.total() <= 1 || h.var <= 0.0) {
      ++r.strata_skipped;
      continue;
    }
    ++r.strata_used;
    diffs.push_back(static_cast<double>(s.x1) - h.mean);
    vars.push_back(h.var);
  }
  const double diff = ordered_sum(std::move(diffs));
  const double var = ordered_sum(std::move(vars));
  if (!(var > 0.0))
    throw DegenerateTableError("every stratum has zero hypergeometric variance");
  r.chi2 = diff * diff / var;
  r.p_value = chisq1_sf(r.chi2);
  return r;
}

MantelFleiss mantel_fleiss(const StratumTable& t) {
  require_strata(t);
  double expected = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  for (const auto& s : t.strata) {
    const long m1 = s.responders();
    expected += hypergeometric(s).mean;
    lower += static_cast<double>(std::max(0L, m1 - s.n0));
    upper += static_cast<double>(std::min(s.n1, m1));
  }
  MantelFleiss mf;
  mf.margin = std::min(expected - lower, upper - expected);
  mf.satisfied = mf.margin >= 5.0;
  return mf;
}

double mh_rd_estimate(const StratumTable& t) {
  require_strata(t);
  require_both_arms(t);
  std::vector<double> terms;
  for (const auto& s : t.strata) terms.push_back(weight(s) * stratum_difference(s));
  return ordered_sum(std::move(terms)) / weight_sum(t);
}

double sato_variance(const StratumTable& t, double estimate) {
  require_strata(t);
  require_both_arms(t);
  double p = 0.0;
  double q = 0.0;
  for (const auto& s : t.strata) {
    const double n1 = static_cast<double>(s.n1);
    const double n0 = static_cast<double>(s.n0);
    const double ns = n1 + n0;
    const double x1 = static_cast<double>(s.x1);
    const double x0 = static_cast<double>(s.x0);
    p += (n1 * n1 * x0 - n0 * n0 * x1 + n1 * n0 * (n0 - n1) / 2.0) / (ns * ns);
    q += (x1 * (n0 - x0) + x0 * (n1 - x1)) / (2.0 * ns);
  }
  const double w = weight_sum(t);
  return (estimate * p + q) / (w * w);
}

double greenland_robins_variance(const StratumTable& t) {
  require_strata(t);
  require_both_arms(t);
  double v = 0.0;
  for (const auto& s : t.strata) {
    const double n1 = static_cast<double>(s.n1);
    const double n0 = static_cast<double>(s.n0);
    const double ns = n1 + n0;
    const double x1 = static_cast<double>(s.x1);
    const double x0 = static_cast<double>(s.x0);
    v += (x1 * (n1 - x1) * n0 * n0 * n0 + x0 * (n0 - x0) * n1 * n1 * n1) / (n1 * n0 * ns * ns);
  }
  const double w = weight_sum(t);
  return v / (w * w);
}

// Linearising sum_s w_s (d_s - d) = 0 with w_s written as a sum over
// subjects of A (1 - rho)^2 + (1 - A) rho^2 gives a per-subject term
// g_i = (d_s(i) - d) [A_i (1 - rho)^2 + (1 - A_i) rho^2] whose spread comes
// from which strata the trial happened to sample.
double heterogeneity_variance(const StratumTable& t, double estimate) {
  require_strata(t);
  require_both_arms(t);
  double n = 0.0;
  double n1_total = 0.0;
  for (const auto& s : t.strata) {
    n += static_cast<double>(s.total());
    n1_total += static_cast<double>(s.n1);
  }
  const double rho = n1_total / n;
  const double c1 = (1.0 - rho) * (1.0 - rho);
  const double c0 = rho * rho;

  double mean = 0.0;
  for (const auto& s : t.strata) {
    const double dev = stratum_difference(s) - estimate;
    mean += dev * (static_cast<double>(s.n1) * c1 + static_cast<double>(s.n0) * c0);
  }
  mean /= n;
  double ss = 0.0;
  for (const auto& s : t.strata) {
    const double dev = stratum_difference(s) - estimate;
    const double g1 = dev * c1 - mean;
    const double g0 = dev * c0 - mean;
    ss += static_cast<double>(s.n1) * g1 * g1 + static_cast<double>(s.n0) * g0 * g0;
  }
  const double w = weight_sum(t);
  return ss / (w * w);
}

MhRdResult mh_rd(const StratumTable& t, MhVariance kind, double alpha) {
  MhRdResult r;
  r.variance_kind = kind;
  r.estimate = mh_rd_estimate(t);
  if (kind == MhVariance::sato) {
    r.estimand = Estimand::CPATE;
    r.variance = sato_variance(t, r.estimate);
    r.variance_note = "Sato (1989)";
  } else {
    r.estimand = Estimand::MTE;
    r.variance = greenland_robins_variance(t) + heterogeneity_variance(t, r.estimate);
    r.variance_note =
        "Greenland-Robins + sum_i (g_i - mean g)^2 / (sum w)^2, "
        "g_i = (d_s(i) - d)[A_i (1-rho)^2 + (1-A_i) rho^2]";
  }
  if (r.variance < 0.0 || !std::isfinite(r.variance))
    throw NumericalError("Mantel-Haenszel variance is negative");
  const WaldResult w = wald(r.estimate, r.variance, alpha);
  r.ci = w.ci;
  r.ci_truncated = w.truncated;
  r.z = w.z;
  r.p_value = w.p_value;
  return r;
}

}  // namespace riskdiff
