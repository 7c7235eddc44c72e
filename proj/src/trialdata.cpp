#include "riskdiff/trialdata.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "riskdiff/error.hpp"

namespace riskdiff {

bool Covariate::is_binary() const {
  return kind == CovariateKind::categorical && levels.size() <= 2 &&
         std::all_of(levels.begin(), levels.end(), [](int l) { return l == 0 || l == 1; });
}

Covariate make_covariate(std::string name, std::vector<double> values) {
  Covariate c;
  c.name = std::move(name);
  bool integral = true;
  std::set<int> distinct;
  for (const double v : values) {
    if (!std::isfinite(v)) throw DomainError("covariate " + c.name + " has a non-finite value");
    if (integral && (v != std::round(v) || std::abs(v) > 1e9)) integral = false;
    if (integral) {
      distinct.insert(static_cast<int>(v));
      if (distinct.size() > kMaxCategoricalLevels) integral = false;
    }
  }
  if (integral) {
    c.kind = CovariateKind::categorical;
    c.levels.assign(distinct.begin(), distinct.end());
  }
  c.values = std::move(values);
  return c;
}

TrialDataset::TrialDataset(std::vector<int> y, std::vector<int> arm,
                           std::vector<Covariate> covariates)
    : y_(std::move(y)), arm_(std::move(arm)), covariates_(std::move(covariates)) {
  if (y_.size() != arm_.size()) throw DomainError("outcome and arm lengths differ");
  if (y_.size() < 2) throw DomainError("a dataset needs at least two subjects");
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (y_[i] != 0 && y_[i] != 1) throw ParseError(i + 1, "outcome must be 0 or 1");
    if (arm_[i] != 0 && arm_[i] != 1) throw ParseError(i + 1, "arm must be 0 or 1");
  }
  for (const auto& c : covariates_)
    if (c.values.size() != y_.size())
      throw DomainError("covariate " + c.name + " has the wrong length");
}

const Covariate& TrialDataset::covariate(const std::string& name) const {
  const auto it = std::find_if(covariates_.begin(), covariates_.end(),
                               [&](const Covariate& c) { return c.name == name; });
  if (it == covariates_.end()) throw SchemaError(name);
  return *it;
}

std::size_t TrialDataset::arm_size(int a) const {
  return static_cast<std::size_t>(std::count(arm_.begin(), arm_.end(), a));
}

std::size_t TrialDataset::responders(int a) const {
  std::size_t k = 0;
  for (std::size_t i = 0; i < y_.size(); ++i) k += (arm_[i] == a && y_[i] == 1);
  return k;
}

TrialDataset TrialDataset::resample(std::span<const std::size_t> idx) const {
  TrialDataset out;
  out.y_.reserve(idx.size());
  out.arm_.reserve(idx.size());
  for (const auto i : idx) {
    out.y_.push_back(y_[i]);
    out.arm_.push_back(arm_[i]);
  }
  out.covariates_.reserve(covariates_.size());
  for (const auto& c : covariates_) {
    Covariate r;
    r.name = c.name;
    r.kind = c.kind;
    r.levels = c.levels;
    r.values.reserve(idx.size());
    for (const auto i : idx) r.values.push_back(c.values[i]);
    out.covariates_.push_back(std::move(r));
  }
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& col) {
  if (cell.empty()) throw ParseError(row, "missing value in column " + col);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
    throw ParseError(row, "column " + col + ": not a number: '" + cell + "'");
  return v;
}

int parse_binary(const std::string& cell, std::size_t row, const std::string& col) {
  const double v = parse_number(cell, row, col);
  if (v != 0.0 && v != 1.0)
    throw ParseError(row, "column " + col + " must be 0 or 1, got '" + cell + "'");
  return static_cast<int>(v);
}

}  // namespace

TrialDataset read_csv(std::istream& in, const std::string& outcome_col, const std::string& arm_col,
                      const std::vector<std::string>& covariate_cols) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(outcome_col);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  const auto column_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError(name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t iy = column_index(outcome_col);
  const std::size_t ia = column_index(arm_col);
  std::vector<std::size_t> ix;
  for (const auto& c : covariate_cols) ix.push_back(column_index(c));

  std::vector<int> y;
  std::vector<int> arm;
  std::vector<std::vector<double>> cov(covariate_cols.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(row, "expected " + std::to_string(header.size()) + " fields, found " +
                                std::to_string(cells.size()));
    y.push_back(parse_binary(cells[iy], row, outcome_col));
    arm.push_back(parse_binary(cells[ia], row, arm_col));
    for (std::size_t j = 0; j < ix.size(); ++j)
      cov[j].push_back(parse_number(cells[ix[j]], row, covariate_cols[j]));
  }

  std::vector<Covariate> covariates;
  for (std::size_t j = 0; j < ix.size(); ++j)
    covariates.push_back(make_covariate(covariate_cols[j], std::move(cov[j])));
  return TrialDataset(std::move(y), std::move(arm), std::move(covariates));
}

TrialDataset load_csv(const std::filesystem::path& path, const std::string& outcome_col,
                      const std::string& arm_col, const std::vector<std::string>& covariate_cols) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_csv(in, outcome_col, arm_col, covariate_cols);
}

StratumTable StratumTable::single(long x1, long n1, long x0, long n0) {
  StratumTable t;
  t.strata.push_back(Stratum{{}, x1, n1, x0, n0});
  return t;
}

StratumTable stratify(const TrialDataset& d, const std::vector<std::string>& covariate_cols) {
  std::vector<const Covariate*> cols;
  for (const auto& name : covariate_cols) {
    const Covariate& c = d.covariate(name);
    if (c.kind != CovariateKind::categorical)
      throw CovariateTypeError("CMH-family methods require categorical covariates; '" + name +
                               "' is real-valued");
    cols.push_back(&c);
  }

  std::map<std::vector<int>, Stratum> cells;
  const auto y = d.y();
  const auto arm = d.arm();
  std::vector<int> key(cols.size());
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) key[j] = static_cast<int>(cols[j]->values[i]);
    auto& s = cells[key];
    s.key = key;
    if (arm[i] == 1) {
      ++s.n1;
      s.x1 += y[i];
    } else {
      ++s.n0;
      s.x0 += y[i];
    }
  }
  if (cells.size() > kMaxStrata)
    throw DomainError("cross-classification yields " + std::to_string(cells.size()) +
                      " strata (limit " + std::to_string(kMaxStrata) + ")");

  StratumTable t;
  t.covariates = covariate_cols;
  for (auto& [k, s] : cells) t.strata.push_back(std::move(s));
  return t;
}

std::string stratum_label(const StratumTable& t, std::size_t s) {
  const auto& key = t.strata.at(s).key;
  if (key.empty()) return "(all)";
  std::ostringstream os;
  for (std::size_t j = 0; j < key.size(); ++j) {
    if (j) os << ',';
    os << (j < t.covariates.size() ? t.covariates[j] : "X" + std::to_string(j + 1)) << '='
       << key[j];
  }
  return os.str();
}

}  // namespace riskdiff
