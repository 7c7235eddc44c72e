#include "riskdiff/exact_uncond.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "riskdiff/error.hpp"
#include "riskdiff/kernels.hpp"
#include "riskdiff/numerics.hpp"

namespace riskdiff {
namespace {

constexpr double kThetaLo = 1e-6;
constexpr double kThetaHi = 1.0 - 1e-6;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_counts(long k1, long n1, long k0, long n0) {
  if (n1 < 1 || n0 < 1) throw DomainError("both arms need at least one subject");
  if (k1 < 0 || k1 > n1 || k0 < 0 || k0 > n0)
    throw DomainError("responder counts must lie in [0, n]");
}

double difference(long k1, long n1, long k0, long n0) {
  return static_cast<double>(k1) / static_cast<double>(n1) -
         static_cast<double>(k0) / static_cast<double>(n0);
}

double ranking_statistic(Ordering ordering, long k1, long n1, long k0, long n0) {
  return ordering == Ordering::abs_z ? std::abs(pooled_z(k1, n1, k0, n0))
                                     : difference(k1, n1, k0, n0);
}

}  // namespace

double pooled_z(long k1, long n1, long k0, long n0) {
  check_counts(k1, n1, k0, n0);
  const long s = k1 + k0;
  const long total = n1 + n0;
  if (s == 0 || s == total) return 0.0;
  const double pooled = static_cast<double>(s) / static_cast<double>(total);
  const double var = pooled * (1.0 - pooled) *
                     (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n0));
  return difference(k1, n1, k0, n0) / std::sqrt(var);
}

OutcomeLattice::OutcomeLattice(long n1, long n0, Ordering ordering)
    : n1_(n1), n0_(n0), ordering_(ordering) {
  check_counts(0, n1, 0, n0);
  const auto size = static_cast<std::size_t>((n1 + 1) * (n0 + 1));
  stat_.reserve(size);
  log_coef_.reserve(size);
  total_.reserve(size);
  for (long k1 = 0; k1 <= n1; ++k1) {
    const double c1 = log_choose(n1, k1);
    for (long k0 = 0; k0 <= n0; ++k0) {
      stat_.push_back(ranking_statistic(ordering, k1, n1, k0, n0));
      log_coef_.push_back(c1 + log_choose(n0, k0));
      total_.push_back(static_cast<int>(k1 + k0));
    }
  }
}

OutcomeLattice::Region OutcomeLattice::region(double threshold) const {
  const long total = n1_ + n0_;
  std::vector<double> by_total(static_cast<std::size_t>(total + 1), kNegInf);
  std::size_t members = 0;
  for (std::size_t i = 0; i < stat_.size(); ++i) {
    if (stat_[i] >= threshold) {
      auto& slot = by_total[static_cast<std::size_t>(total_[i])];
      slot = log_add_exp(slot, log_coef_[i]);
      ++members;
    }
  }
  Region r;
  r.everything = members == stat_.size();
  for (long s = 0; s <= total; ++s) {
    const double lc = by_total[static_cast<std::size_t>(s)];
    if (lc == kNegInf) continue;
    r.log_coef.push_back(lc);
    r.successes.push_back(static_cast<double>(s));
    r.failures.push_back(static_cast<double>(total - s));
  }
  return r;
}

double OutcomeLattice::evaluate(const Region& r, double theta) {
  return kernels::exp_affine_sum(r.log_coef, r.successes, r.failures, std::log(theta),
                                 std::log1p(-theta));
}

double OutcomeLattice::tail_at(double threshold, double theta) const {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0, 1)");
  const Region r = region(threshold);
  if (r.everything) return 1.0;
  return std::min(1.0, evaluate(r, theta));
}

ExactTestResult OutcomeLattice::sup_tail(double threshold, std::size_t grid) const {
  if (grid < 2) throw DomainError("theta grid needs at least two points");
  ExactTestResult out;
  out.grid_points = grid;
  const Region r = region(threshold);
  if (r.everything) {
    out.p_value = 1.0;
    out.theta_argsup = 0.5;
    return out;
  }

  const double step = (kThetaHi - kThetaLo) / static_cast<double>(grid - 1);
  const auto theta_at = [&](std::size_t g) {
    return g + 1 == grid ? kThetaHi : kThetaLo + static_cast<double>(g) * step;
  };
  std::size_t best = 0;
  double best_value = -1.0;
  for (std::size_t g = 0; g < grid; ++g) {
    const double v = evaluate(r, theta_at(g));
    if (v > best_value) {
      best_value = v;
      best = g;
    }
  }
  double best_theta = theta_at(best);

  // Golden-section search on the two grid cells around the best point.
  double a = theta_at(best == 0 ? 0 : best - 1);
  double b = theta_at(best + 1 >= grid ? grid - 1 : best + 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = evaluate(r, c);
  double fd = evaluate(r, d);
  for (int it = 0; it < 100 && (b - a) > 1e-13; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = evaluate(r, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = evaluate(r, d);
    }
  }
  if (fc > best_value) {
    best_value = fc;
    best_theta = c;
  }
  if (fd > best_value) {
    best_value = fd;
    best_theta = d;
  }

  out.p_value = std::clamp(best_value, 0.0, 1.0);
  out.theta_argsup = best_theta;
  return out;
}

ExactTestResult ss_test(long k1, long n1, long k0, long n0, std::size_t grid, Ordering ordering) {
  check_counts(k1, n1, k0, n0);
  if (grid < 100) throw DomainError("theta grid must have at least 100 points");
  const OutcomeLattice lattice(n1, n0, ordering);
  const double observed = lattice.statistic(lattice.index(k1, k0));
  ExactTestResult out = lattice.sup_tail(observed - kTieTolerance, grid);
  out.z_obs = pooled_z(k1, n1, k0, n0);
  return out;
}

std::shared_ptr<const LatticePValues> lattice_p_values(long n1, long n0, std::size_t grid,
                                                       Ordering ordering) {
  using Key = std::tuple<long, long, std::size_t, Ordering>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const LatticePValues>> memo;

  const Key key{n1, n0, grid, ordering};
  {
    std::lock_guard lock(mutex);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
  }

  if (grid < 100) throw DomainError("theta grid must have at least 100 points");
  const OutcomeLattice lattice(n1, n0, ordering);
  auto table = std::make_shared<LatticePValues>();
  table->n1 = n1;
  table->n0 = n0;
  table->p.resize(lattice.size());
  // Outcomes with the same statistic share a rejection region.
  std::map<double, double> by_statistic;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const double s = lattice.statistic(i);
    auto it = by_statistic.find(s);
    if (it == by_statistic.end())
      it = by_statistic.emplace(s, lattice.sup_tail(s - kTieTolerance, grid).p_value).first;
    table->p[i] = it->second;
  }

  std::lock_guard lock(mutex);
  // Another thread may have won the race; both tables are identical.
  const auto [it, inserted] = memo.emplace(key, std::move(table));
  return it->second;
}

double exact_rejection_prob(long n1, long n0, double theta, double alpha, std::size_t grid,
                            Ordering ordering) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0, 1)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  if (alpha == 0.0) return 0.0;
  const auto table = lattice_p_values(n1, n0, grid, ordering);
  const double lt = std::log(theta);
  const double lf = std::log1p(-theta);
  double total = 0.0;
  for (long k1 = 0; k1 <= n1; ++k1) {
    for (long k0 = 0; k0 <= n0; ++k0) {
      if (table->p[static_cast<std::size_t>(k1 * (n0 + 1) + k0)] > alpha) continue;
      const double s = static_cast<double>(k1 + k0);
      total += std::exp(log_choose(n1, k1) + log_choose(n0, k0) + s * lt +
                        (static_cast<double>(n1 + n0) - s) * lf);
    }
  }
  return total;
}

std::size_t ExactTestCache::KeyHash::operator()(const Key& k) const noexcept {
  std::size_t h = static_cast<std::size_t>(k.k1);
  h = h * 1000003u ^ static_cast<std::size_t>(k.n1);
  h = h * 1000003u ^ static_cast<std::size_t>(k.k0);
  h = h * 1000003u ^ static_cast<std::size_t>(k.n0);
  return h;
}

ExactTestResult ExactTestCache::get(long k1, long n1, long k0, long n0) {
  const Key key{k1, n1, k0, n0};
  {
    std::shared_lock lock(mutex_);
    if (const auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  const ExactTestResult r = ss_test(k1, n1, k0, n0, grid_, ordering_);
  std::unique_lock lock(mutex_);
  entries_.emplace(key, r);
  return r;
}

std::size_t ExactTestCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace riskdiff
