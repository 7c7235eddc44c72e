#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace riskdiff {

enum class CovariateKind { categorical, real };

struct Covariate {
  std::string name;
  CovariateKind kind = CovariateKind::real;
  std::vector<double> values;
  // Sorted distinct integer codes; empty for real-valued columns.
  std::vector<int> levels;

  bool is_binary() const;
};

/// Integer-coded columns with at most this many distinct values are treated
/// as categorical.
inline constexpr std::size_t kMaxCategoricalLevels = 10;

Covariate make_covariate(std::string name, std::vector<double> values);

/// Subject-level two-arm trial data with a binary endpoint. Immutable once
/// constructed; the constructor validates shape and coding.
class TrialDataset {
 public:
  TrialDataset(std::vector<int> y, std::vector<int> arm, std::vector<Covariate> covariates = {});

  std::size_t n() const noexcept { return y_.size(); }
  std::span<const int> y() const noexcept { return y_; }
  std::span<const int> arm() const noexcept { return arm_; }
  const std::vector<Covariate>& covariates() const noexcept { return covariates_; }

  /// Throws SchemaError when the column is absent.
  const Covariate& covariate(const std::string& name) const;

  std::size_t arm_size(int a) const;
  std::size_t responders(int a) const;

  /// New dataset built from rows `idx` (duplicates allowed), covariate kinds
  /// and level sets carried over from this one.
  TrialDataset resample(std::span<const std::size_t> idx) const;

 private:
  TrialDataset() = default;
  std::vector<int> y_;
  std::vector<int> arm_;
  std::vector<Covariate> covariates_;
};

/// CSV with a header row, comma delimiter, optional `id` column (ignored).
/// Row numbers in errors count data rows from 1, the header excluded.
TrialDataset load_csv(const std::filesystem::path& path, const std::string& outcome_col,
                      const std::string& arm_col, const std::vector<std::string>& covariate_cols);
TrialDataset read_csv(std::istream& in, const std::string& outcome_col, const std::string& arm_col,
                      const std::vector<std::string>& covariate_cols);

struct Stratum {
  std::vector<int> key;  // level code per stratifying covariate
  long x1 = 0;
  long n1 = 0;
  long x0 = 0;
  long n0 = 0;

  long total() const noexcept { return n1 + n0; }
  long responders() const noexcept { return x1 + x0; }
};

struct StratumTable {
  std::vector<std::string> covariates;
  std::vector<Stratum> strata;

  static StratumTable single(long x1, long n1, long x0, long n0);
};

inline constexpr std::size_t kMaxStrata = 64;

StratumTable stratify(const TrialDataset& d, const std::vector<std::string>& covariate_cols);

/// Human-readable stratum label such as "X1=0,X2=1".
std::string stratum_label(const StratumTable& t, std::size_t s);

}  // namespace riskdiff
