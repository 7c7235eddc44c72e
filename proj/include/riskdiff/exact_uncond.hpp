#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

namespace riskdiff {

/// How outcome pairs are ranked against the observed one.
enum class Ordering {
  abs_z,             // two-sided, |pooled-variance Z|
  delta_one_sided,   // one-sided, difference in proportions
};

struct ExactTestResult {
  double z_obs = 0.0;
  double p_value = 1.0;
  double theta_argsup = 0.5;
  std::size_t grid_points = 0;
};

inline constexpr std::size_t kDefaultThetaGrid = 1000;
inline constexpr double kTieTolerance = 1e-12;

/// Pooled-variance score statistic; 0 when the pooled proportion is 0 or 1.
double pooled_z(long k1, long n1, long k0, long n0);

/// All (k1, k0) outcomes of a two-arm binomial experiment, in k1-major order,
/// with their ranking statistic and log binomial coefficients.
class OutcomeLattice {
 public:
  OutcomeLattice(long n1, long n0, Ordering ordering);

  long n1() const noexcept { return n1_; }
  long n0() const noexcept { return n0_; }
  Ordering ordering() const noexcept { return ordering_; }
  std::size_t size() const noexcept { return stat_.size(); }
  std::size_t index(long k1, long k0) const {
    return static_cast<std::size_t>(k1 * (n0_ + 1) + k0);
  }
  double statistic(std::size_t i) const { return stat_[i]; }

  /// sup over the theta grid (plus golden-section refinement) of the null
  /// probability of { outcomes with statistic >= threshold }.
  ExactTestResult sup_tail(double threshold, std::size_t grid) const;

  /// Null probability of the region at a fixed theta.
  double tail_at(double threshold, double theta) const;

 private:
  struct Region {
    std::vector<double> log_coef;  // ln sum of C(n1,k1) C(n0,k0) per total s
    std::vector<double> successes;
    std::vector<double> failures;
    bool everything = false;
  };
  Region region(double threshold) const;
  static double evaluate(const Region& r, double theta);

  long n1_;
  long n0_;
  Ordering ordering_;
  std::vector<double> stat_;
  std::vector<double> log_coef_;
  std::vector<int> total_;
};

ExactTestResult ss_test(long k1, long n1, long k0, long n0, std::size_t grid = kDefaultThetaGrid,
                        Ordering ordering = Ordering::abs_z);

/// Probability, at response rate theta in both arms, that ss_test rejects at
/// level alpha. Per-outcome p-values for the (n1, n0) lattice are computed
/// once and shared process-wide.
double exact_rejection_prob(long n1, long n0, double theta, double alpha,
                            std::size_t grid = kDefaultThetaGrid,
                            Ordering ordering = Ordering::abs_z);

/// p-values for every outcome of one lattice, indexed like OutcomeLattice.
struct LatticePValues {
  long n1;
  long n0;
  std::vector<double> p;
};

std::shared_ptr<const LatticePValues> lattice_p_values(long n1, long n0, std::size_t grid,
                                                       Ordering ordering);

/// Thread-safe memo of ss_test results. Entries are immutable once inserted,
/// so lookups only need a shared lock.
class ExactTestCache {
 public:
  explicit ExactTestCache(std::size_t grid = kDefaultThetaGrid,
                          Ordering ordering = Ordering::abs_z)
      : grid_(grid), ordering_(ordering) {}

  ExactTestResult get(long k1, long n1, long k0, long n0);
  std::size_t size() const;

 private:
  struct Key {
    long k1, n1, k0, n0;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };

  std::size_t grid_;
  Ordering ordering_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<Key, ExactTestResult, KeyHash> entries_;
};

}  // namespace riskdiff
