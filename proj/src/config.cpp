#include "riskdiff/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>

#include "riskdiff/error.hpp"

namespace riskdiff {
namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(v.substr(start, comma == std::string::npos ? v.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::uint64_t to_count(const std::string& s, std::size_t line, const std::string& key) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(line, key + ": expected a nonnegative integer, got '" + s + "'");
  return v;
}

struct Entry {
  std::string value;
  std::size_t line;
};

}  // namespace

double parse_real(const std::string& text) {
  const std::string s = trim(text);
  if (s.size() > 3 && s.compare(0, 3, "log") == 0) {
    const auto arg = to_double(s.substr(3));
    if (!arg || *arg <= 0.0) throw DomainError("cannot take the log of '" + s.substr(3) + "'");
    return std::log(*arg);
  }
  const auto v = to_double(s);
  if (!v) throw DomainError("not a number: '" + s + "'");
  return *v;
}

GridRun parse_config(std::istream& in) {
  static const std::map<std::string, std::vector<std::string>> kKeys{
      {"grid", {"n", "delta", "beta_cov", "p0"}},
      {"run", {"replicates", "seed", "methods", "alpha", "boot_b", "theta_grid", "workers"}},
  };

  std::map<std::string, Entry> entries;  // "section.key"
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!kKeys.count(section)) throw ConfigError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
    if (section.empty()) throw ConfigError(line_no, "key outside of a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& allowed = kKeys.at(section);
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(line_no, "unknown key '" + key + "' in [" + section + "]");
    if (value.empty()) throw ConfigError(line_no, "empty value for '" + key + "'");
    const std::string full = section + "." + key;
    if (entries.count(full)) throw ConfigError(line_no, "duplicate key '" + key + "'");
    entries[full] = {value, line_no};
  }

  const auto reals = [&](const std::string& key, std::vector<double> fallback) {
    const auto it = entries.find(key);
    if (it == entries.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(it->second.value)) {
      try {
        out.push_back(parse_real(item));
      } catch (const DomainError& e) {
        throw ConfigError(it->second.line, e.what());
      }
    }
    if (out.empty()) throw ConfigError(it->second.line, key + ": empty list");
    return out;
  };
  const auto count = [&](const std::string& key, std::uint64_t fallback) {
    const auto it = entries.find(key);
    return it == entries.end() ? fallback : to_count(it->second.value, it->second.line, key);
  };
  const auto line_of = [&](const std::string& key) {
    const auto it = entries.find(key);
    return it == entries.end() ? std::size_t{0} : it->second.line;
  };

  GridRun run;
  const auto ns = reals("grid.n", {30, 60, 90, 120, 150});
  const auto deltas = reals("grid.delta", {0.0, 0.15, 0.30});
  const auto betas = reals("grid.beta_cov", {std::log(1.0), std::log(1.5), std::log(3.0)});
  const auto p0s = reals("grid.p0", {0.20});
  if (p0s.size() != 1) throw ConfigError(line_of("grid.p0"), "p0 takes a single value");
  const double p0 = p0s.front();
  if (!(p0 > 0.0 && p0 < 1.0)) throw ConfigError(line_of("grid.p0"), "p0 must lie in (0, 1)");
  for (const double n : ns)
    if (n < 2 || n != std::floor(n))
      throw ConfigError(line_of("grid.n"), "n must be an integer of at least 2");
  for (const double d : deltas)
    if (!(p0 + d > 0.0 && p0 + d < 1.0))
      throw ConfigError(line_of("grid.delta"), "p0 + delta must lie in (0, 1)");
  for (const double d : deltas)
    for (const double b : betas)
      for (const double n : ns) run.grid.push_back(make_scenario(static_cast<long>(n), d, b, p0));

  run.replicates = count("run.replicates", 1000);
  if (run.replicates < 1) throw ConfigError(line_of("run.replicates"), "replicates must be >= 1");
  run.seed = count("run.seed", 1);
  run.workers = count("run.workers", 1);
  if (run.workers < 1) throw ConfigError(line_of("run.workers"), "workers must be >= 1");
  run.options.boot_b = count("run.boot_b", 1000);
  if (run.options.boot_b < 2) throw ConfigError(line_of("run.boot_b"), "boot_b must be >= 2");
  run.options.theta_grid = count("run.theta_grid", 1000);
  if (run.options.theta_grid < 100)
    throw ConfigError(line_of("run.theta_grid"), "theta_grid must be >= 100");
  if (const auto it = entries.find("run.alpha"); it != entries.end()) {
    const auto a = to_double(it->second.value);
    if (!a || !(*a > 0.0 && *a < 1.0))
      throw ConfigError(it->second.line, "alpha must be a number in (0, 1)");
    run.options.alpha = *a;
  }

  const auto it = entries.find("run.methods");
  if (it == entries.end() || it->second.value == "all") {
    run.methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  } else {
    for (const auto& name : split_list(it->second.value)) {
      const auto m = parse_method(name);
      if (!m) throw ConfigError(it->second.line, "unknown method '" + name + "'");
      if (std::find(run.methods.begin(), run.methods.end(), *m) != run.methods.end())
        throw ConfigError(it->second.line, "method '" + name + "' listed twice");
      run.methods.push_back(*m);
    }
    if (run.methods.empty()) throw ConfigError(it->second.line, "no methods listed");
  }
  return run;
}

GridRun load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config " + path.string());
  return parse_config(in);
}

}  // namespace riskdiff
