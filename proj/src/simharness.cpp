#include "riskdiff/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "riskdiff/analysis.hpp"
#include "riskdiff/error.hpp"
#include "riskdiff/kernels.hpp"
#include "riskdiff/version.hpp"

namespace riskdiff {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kBootstrapTag = 0xb007;

const std::vector<std::string> kCovariates{"X1", "X2"};

std::string fixed6(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string iso_time_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string scenario_id(const ScenarioParams& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "n%ld_d%g_b%.4f", p.n, p.delta, p.beta_cov);
  std::string id = buf;
  if (p.p0 != 0.20) {
    std::snprintf(buf, sizeof buf, "_p%g", p.p0);
    id += buf;
  }
  return id;
}

ScenarioSpec make_scenario(long n, double delta, double beta_cov, double p0) {
  ScenarioSpec s;
  s.params.n = n;
  s.params.delta = delta;
  s.params.beta_cov = beta_cov;
  s.params.p0 = p0;
  s.id = scenario_id(s.params);
  return s;
}

std::vector<ScenarioSpec> paper_grid() {
  std::vector<ScenarioSpec> grid;
  for (const double delta : {0.0, 0.15, 0.30})
    for (const double beta : {std::log(1.0), std::log(1.5), std::log(3.0)})
      for (const long n : {30L, 60L, 90L, 120L, 150L}) grid.push_back(make_scenario(n, delta, beta));
  return grid;
}

const MethodOC& OperatingCharacteristics::at(Method m) const {
  for (const auto& o : methods)
    if (o.method == m) return o;
  throw DomainError("method " + std::string(method_name(m)) + " was not run");
}

namespace {

RepOutcome replicate_with_cache(const ScenarioSpec& s, const SolvedCoefficients& c,
                                std::span<const Method> methods, std::size_t r,
                                std::uint64_t base_seed, const HarnessOptions& opts,
                                ExactTestCache* cache) {
  const std::uint64_t scenario_key = hash_string(s.id);
  CounterRng rng(base_seed, stream_key({scenario_key, r}));
  const TrialDataset d = gen_trial(s.params, c, rng);

  AnalysisOptions aopts;
  aopts.theta_grid = opts.theta_grid;
  aopts.exact_cache = cache;
  aopts.gcomp.boot_b = opts.boot_b;
  aopts.gcomp.seed = stream_key({base_seed, scenario_key, r, kBootstrapTag});
  Analysis covariate_adjusted(d, kCovariates, aopts);
  Analysis unadjusted(d, {}, aopts);

  RepOutcome out;
  out.scenario_id = s.id;
  out.replicate = r;
  bool ml_seen = false;
  for (const Method m : methods) {
    MethodRecord rec;
    rec.method = m;
    try {
      Analysis& a = m == Method::suissa ? unadjusted : covariate_adjusted;
      if (uses_working_model(m) && !ml_seen) {
        try {
          const LogisticFit& ml = a.working_model().ml();
          out.separated = ml.separation;
          out.converged = ml.converged;
        } catch (const Error&) {
          out.converged = false;
        }
        ml_seen = true;
      }
      const RiskDiffInference inf = a.run(m, opts.alpha);
      rec.usable = true;
      rec.estimate = inf.estimate;
      rec.ci = inf.ci;
      rec.p_value = inf.p_value;
      rec.reject = inf.p_value <= opts.alpha;
      rec.flags = inf.flags;
    } catch (const Error& e) {
      rec.usable = false;
      rec.failure = e.what();
      if (m == Method::mh_test) out.mh_degenerate = true;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

RepOutcome run_replicate(const ScenarioSpec& s, const SolvedCoefficients& c,
                         std::span<const Method> methods, std::size_t r, std::uint64_t base_seed,
                         const HarnessOptions& opts) {
  ExactTestCache cache(opts.theta_grid);
  return replicate_with_cache(s, c, methods, r, base_seed, opts, &cache);
}

namespace {

OperatingCharacteristics reduce(std::span<const RepOutcome> outcomes, double truth,
                                std::span<const Method> methods, bool strict) {
  OperatingCharacteristics oc;
  oc.replicates = outcomes.size();
  std::size_t separated = 0;
  std::size_t nonconverged = 0;
  std::size_t degenerate = 0;
  for (const auto& o : outcomes) {
    separated += o.separated;
    nonconverged += !o.converged;
    degenerate += o.mh_degenerate;
  }
  const double total = static_cast<double>(outcomes.size());
  if (!outcomes.empty()) {
    oc.separation_rate = static_cast<double>(separated) / total;
    oc.nonconvergence_rate = static_cast<double>(nonconverged) / total;
    oc.mh_failure_rate = static_cast<double>(degenerate) / total;
  }

  for (std::size_t k = 0; k < methods.size(); ++k) {
    MethodOC m;
    m.method = methods[k];
    std::size_t rejections = 0;
    std::size_t with_estimate = 0;
    std::size_t covered = 0;
    double sum_est = 0.0;
    double sum_sq = 0.0;
    for (const auto& o : outcomes) {
      const MethodRecord* rec = nullptr;
      for (const auto& cand : o.records)
        if (cand.method == m.method) rec = &cand;
      if (!rec || !rec->usable) {
        ++m.n_excluded;
        continue;
      }
      ++m.n_used;
      rejections += rec->reject;
      if (rec->estimate) {
        ++with_estimate;
        sum_est += *rec->estimate;
        sum_sq += (*rec->estimate - truth) * (*rec->estimate - truth);
      }
      if (rec->ci) covered += rec->ci->contains(truth);
    }
    if (m.n_used == 0) {
      if (strict)
        throw AggregationError("no usable replicates for method " +
                               std::string(method_name(m.method)));
      m.rejection_rate = m.bias = m.rmse = m.coverage = m.mc_se = kNaN;
      oc.methods.push_back(m);
      continue;
    }
    const double used = static_cast<double>(m.n_used);
    m.rejection_rate = static_cast<double>(rejections) / used;
    m.mc_se = std::sqrt(m.rejection_rate * (1.0 - m.rejection_rate) / used);
    if (with_estimate > 0) {
      const double ne = static_cast<double>(with_estimate);
      m.bias = sum_est / ne - truth;
      m.rmse = std::sqrt(sum_sq / ne);
      m.coverage = static_cast<double>(covered) / ne;
    } else {
      m.bias = m.rmse = m.coverage = kNaN;
    }
    oc.methods.push_back(m);
  }
  return oc;
}

}  // namespace

OperatingCharacteristics aggregate(std::span<const RepOutcome> outcomes, double truth,
                                   std::span<const Method> methods) {
  return reduce(outcomes, truth, methods, true);
}

ScenarioResult run_scenario(const ScenarioSpec& s, std::span<const Method> methods,
                            std::size_t R, std::uint64_t base_seed, std::size_t workers,
                            const HarnessOptions& opts, bool keep_outcomes) {
  if (R < 1) throw DomainError("need at least one replicate");
  if (methods.empty()) throw DomainError("no methods requested");
  const SolvedCoefficients c = solve_coefficients(s.params);
  ExactTestCache cache(opts.theta_grid);

  std::vector<RepOutcome> outcomes(R);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t r = next++; r < R; r = next++)
      outcomes[r] = replicate_with_cache(s, c, methods, r, base_seed, opts, &cache);
  };
  workers = std::clamp<std::size_t>(workers, 1, R);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  ScenarioResult result;
  result.spec = s;
  result.oc = reduce(outcomes, s.params.delta, methods, false);
  if (keep_outcomes) result.outcomes = std::move(outcomes);
  return result;
}

std::string oc_csv_header() {
  return "scenario_id,n,delta,beta_cov,method,rejection_rate,bias,rmse,coverage,n_used,"
         "n_excluded,separation_rate,nonconvergence_rate,mc_se";
}

std::vector<std::string> oc_csv_rows(const ScenarioSpec& s, const OperatingCharacteristics& oc) {
  std::vector<std::string> rows;
  for (const auto& m : oc.methods) {
    std::ostringstream os;
    os << s.id << ',' << s.params.n << ',' << fixed6(s.params.delta) << ','
       << fixed6(s.params.beta_cov) << ',' << method_name(m.method) << ','
       << fixed6(m.rejection_rate) << ',' << fixed6(m.bias) << ',' << fixed6(m.rmse) << ','
       << fixed6(m.coverage) << ',' << m.n_used << ',' << m.n_excluded << ','
       << fixed6(oc.separation_rate) << ',' << fixed6(oc.nonconvergence_rate) << ','
       << fixed6(m.mc_se);
    rows.push_back(os.str());
  }
  return rows;
}

namespace {

// Rows of an existing results file grouped by scenario id.
std::map<std::string, std::vector<std::string>> read_existing(const std::filesystem::path& path) {
  std::map<std::string, std::vector<std::string>> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line) || line != oc_csv_header()) return rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows[line.substr(0, line.find(','))].push_back(line);
  }
  return rows;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw Error("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot replace " + path.string() + ": " + ec.message());
}

nlohmann::json manifest_json(const GridRun& run, const std::string& started,
                             const std::string& status, std::size_t computed,
                             std::size_t reused, const std::string& error) {
  nlohmann::json m;
  m["version"] = kVersion;
  m["config_schema_version"] = kConfigSchemaVersion;
  m["status"] = status;
  m["started"] = started;
  m["finished"] = iso_time_now();
  m["seed"] = run.seed;
  m["replicates"] = run.replicates;
  m["workers"] = run.workers;
  m["alpha"] = run.options.alpha;
  m["boot_b"] = run.options.boot_b;
  m["theta_grid"] = run.options.theta_grid;
  m["simd"] = kernels::to_string(kernels::active().level);
  auto& methods = m["methods"] = nlohmann::json::array();
  for (const Method x : run.methods) methods.push_back(method_name(x));
  auto& scen = m["scenarios"] = nlohmann::json::array();
  for (const auto& s : run.grid)
    scen.push_back({{"id", s.id},
                    {"n", s.params.n},
                    {"delta", s.params.delta},
                    {"beta_cov", s.params.beta_cov},
                    {"p0", s.params.p0}});
  m["scenarios_computed"] = computed;
  m["scenarios_reused"] = reused;
  if (!error.empty()) m["error"] = error;
  return m;
}

}  // namespace

std::vector<std::string> run_grid(
    const GridRun& run, const std::filesystem::path& out_dir, bool resume,
    const std::function<void(const ScenarioSpec&, bool reused)>& progress) {
  if (run.grid.empty()) throw DomainError("scenario grid is empty");
  if (run.replicates < 1) throw DomainError("need at least one replicate");
  std::filesystem::create_directories(out_dir);
  const auto csv_path = out_dir / "results.csv";
  const auto manifest_path = out_dir / "manifest.json";
  const std::string started = iso_time_now();

  std::map<std::string, std::vector<std::string>> done;
  if (resume) {
    done = read_existing(csv_path);
    // Only scenarios with a full set of method rows count as complete.
    std::erase_if(done, [&](const auto& kv) { return kv.second.size() != run.methods.size(); });
  }

  std::size_t computed = 0;
  std::size_t reused = 0;
  std::map<std::string, std::vector<std::string>> rows;
  const auto flush = [&] {
    std::string content = oc_csv_header() + "\n";
    for (const auto& s : run.grid)
      if (const auto it = rows.find(s.id); it != rows.end())
        for (const auto& line : it->second) content += line + "\n";
    write_atomically(csv_path, content);
  };

  try {
    for (const auto& s : run.grid) {
      if (rows.count(s.id)) continue;  // duplicate id in the grid
      if (const auto it = done.find(s.id); it != done.end()) {
        rows[s.id] = it->second;
        ++reused;
        if (progress) progress(s, true);
        continue;
      }
      const auto result =
          run_scenario(s, run.methods, run.replicates, run.seed, run.workers, run.options);
      rows[s.id] = oc_csv_rows(s, result.oc);
      ++computed;
      flush();
      if (progress) progress(s, false);
    }
    flush();
  } catch (const std::exception& e) {
    try {
      write_atomically(manifest_path,
                       manifest_json(run, started, "aborted", computed, reused, e.what()).dump(2) +
                           "\n");
    } catch (const std::exception&) {
    }
    throw;
  }
  write_atomically(manifest_path,
                   manifest_json(run, started, "complete", computed, reused, "").dump(2) + "\n");

  std::vector<std::string> all;
  for (const auto& s : run.grid)
    for (const auto& line : rows[s.id]) all.push_back(line);
  return all;
}

}  // namespace riskdiff
