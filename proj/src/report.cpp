#include "cbftune/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cbftune/errors.hpp"
#include "cbftune/experiment.hpp"
#include "cbftune/tasks.hpp"

namespace cbftune {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Midranks of the pooled sample, returned aligned with `values`.
std::vector<double> midranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t i, size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i + 1) + (j + 1));
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

/// Exact null distribution of U: count[u] = number of rank arrangements of
/// n_a values among n_a + n_b with U statistic exactly u.
std::vector<double> u_distribution(int na, int nb) {
  const int umax = na * nb;
  // dp[m][u] holds the count for the current first-sample size
  std::vector<std::vector<double>> dp(nb + 1, std::vector<double>(umax + 1, 0.0));
  for (int m = 0; m <= nb; ++m) dp[m][0] = 1.0;
  for (int n = 1; n <= na; ++n) {
    std::vector<std::vector<double>> next(nb + 1,
                                          std::vector<double>(umax + 1, 0.0));
    next[0][0] = 1.0;
    for (int m = 1; m <= nb; ++m) {
      for (int u = 0; u <= n * m; ++u) {
        double c = next[m - 1][u];
        if (u >= m) c += dp[m][u - m];
        next[m][u] = c;
      }
    }
    dp = std::move(next);
  }
  return dp[nb];
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Linear-interpolation quantile (sorted input); non-finite when the
/// surrounding order statistics are.
double quantile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = p * (static_cast<double>(values.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = static_cast<size_t>(std::ceil(pos));
  if (!std::isfinite(values[lo]) || !std::isfinite(values[hi])) return kNaN;
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

struct Group {
  std::string algorithm;
  std::vector<const RunRecord*> records;
};

int init_count(const RunRecord& record) {
  int n = 0;
  for (const auto& e : record.entries) {
    if (e.phase == Phase::init) ++n;
  }
  return n;
}

int suggest_count(const RunRecord& record) {
  return static_cast<int>(record.entries.size()) - init_count(record);
}

/// Cumulative best at suggest round i (carrying the last value forward for
/// records with fewer rounds), +infinity before the first feasible entry.
double best_at_round(const RunRecord& record, int round) {
  const int n_init = init_count(record);
  const int n_suggest = suggest_count(record);
  const int last = static_cast<int>(record.entries.size()) - 1;
  const int idx = std::min(n_init + std::min(round, n_suggest - 1), last);
  return record.best_feasible[std::max(idx, 0)];
}

void write_curve_csv(const AlgorithmSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "round,median,p25,p75\n";
  for (size_t i = 0; i < summary.median.size(); ++i) {
    out << i << "," << summary.median[i] << "," << summary.p25[i] << ","
        << summary.p75[i] << "\n";
  }
}

}  // namespace

RankSumResult ranksum(const std::vector<double>& a,
                      const std::vector<double>& b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("ranksum: both samples must be nonempty");
  }
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (const double v : pooled) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("ranksum: samples must be finite");
    }
  }
  const std::vector<double> ranks = midranks(pooled);
  double rank_sum_a = 0.0;
  for (int i = 0; i < na; ++i) rank_sum_a += ranks[i];
  const double u = rank_sum_a - 0.5 * na * (na + 1);

  // tie census over the pooled sample
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  bool ties = false;
  double tie_term = 0.0;
  {
    size_t i = 0;
    while (i < sorted.size()) {
      size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      if (t > 1.0) {
        ties = true;
        tie_term += t * t * t - t;
      }
      i = j + 1;
    }
  }

  RankSumResult result;
  result.u = u;
  if (!ties && na * nb <= 400) {
    const std::vector<double> dist = u_distribution(na, nb);
    double total = 0.0;
    for (const double c : dist) total += c;
    const long u_int = std::lround(u);
    double p_le = 0.0;
    double p_ge = 0.0;
    for (long k = 0; k < static_cast<long>(dist.size()); ++k) {
      if (k <= u_int) p_le += dist[k];
      if (k >= u_int) p_ge += dist[k];
    }
    result.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge) / total);
    result.exact = true;
    return result;
  }

  const double n = static_cast<double>(na + nb);
  const double mean = 0.5 * na * nb;
  const double var =
      (na * nb / 12.0) * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    result.p_value = 1.0;
    result.exact = false;
    return result;
  }
  double z = 0.0;
  if (u > mean) {
    z = (u - mean - 0.5) / std::sqrt(var);
  } else if (u < mean) {
    z = (u - mean + 0.5) / std::sqrt(var);
  }
  result.p_value = std::min(1.0, 2.0 * normal_cdf(-std::abs(z)));
  result.exact = false;
  return result;
}

SummaryReport summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) {
    throw std::invalid_argument("summarize: no records");
  }
  for (const auto& r : records) {
    if (r.task != records.front().task) {
      throw std::invalid_argument("summarize: records mix tasks ('" +
                                  records.front().task + "' vs '" + r.task +
                                  "')");
    }
    if (r.entries.empty()) {
      throw std::invalid_argument("summarize: empty record");
    }
  }

  SummaryReport report;
  report.task = records.front().task;
  int budget = 0;
  for (const auto& r : records) {
    budget = std::max(budget, suggest_count(r));
  }
  report.budget = budget;

  std::vector<Group> groups;
  for (const auto& r : records) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.algorithm == r.algorithm;
    });
    if (it == groups.end()) {
      groups.push_back({r.algorithm, {&r}});
    } else {
      it->records.push_back(&r);
    }
  }

  for (const auto& group : groups) {
    AlgorithmSummary summary;
    summary.algorithm = group.algorithm;
    summary.num_records = static_cast<int>(group.records.size());
    summary.median.resize(budget);
    summary.p25.resize(budget);
    summary.p75.resize(budget);
    for (int round = 0; round < budget; ++round) {
      std::vector<double> values;
      values.reserve(group.records.size());
      for (const RunRecord* r : group.records) {
        values.push_back(best_at_round(*r, round));
      }
      summary.median[round] = quantile(values, 0.5);
      summary.p25[round] = quantile(values, 0.25);
      summary.p75[round] = quantile(values, 0.75);
    }
    int init_total = 0, init_ok = 0, sug_total = 0, sug_ok = 0;
    for (const RunRecord* r : group.records) {
      const double final_value = r->best_feasible.back();
      summary.final_best.push_back(std::isfinite(final_value) ? final_value
                                                              : kNaN);
      for (const auto& e : r->entries) {
        if (e.phase == Phase::init) {
          ++init_total;
          init_ok += e.feasible ? 1 : 0;
        } else {
          ++sug_total;
          sug_ok += e.feasible ? 1 : 0;
        }
      }
    }
    summary.init_feasibility =
        init_total > 0 ? static_cast<double>(init_ok) / init_total : kNaN;
    summary.suggest_feasibility =
        sug_total > 0 ? static_cast<double>(sug_ok) / sug_total : kNaN;
    report.algorithms.push_back(std::move(summary));
  }

  for (size_t i = 0; i < report.algorithms.size(); ++i) {
    for (size_t j = i + 1; j < report.algorithms.size(); ++j) {
      std::vector<double> a, b;
      for (const double v : report.algorithms[i].final_best) {
        if (std::isfinite(v)) a.push_back(v);
      }
      for (const double v : report.algorithms[j].final_best) {
        if (std::isfinite(v)) b.push_back(v);
      }
      if (a.empty() || b.empty()) continue;
      PairwiseTest test;
      test.algorithm_a = report.algorithms[i].algorithm;
      test.algorithm_b = report.algorithms[j].algorithm;
      test.result = ranksum(a, b);
      report.tests.push_back(std::move(test));
    }
  }
  return report;
}

std::vector<std::string> find_record_files(
    const std::vector<std::string>& dirs) {
  std::vector<std::string> files;
  for (const auto& dir : dirs) {
    if (!fs::is_directory(dir)) {
      throw ConfigError("not a directory: " + dir);
    }
    std::vector<std::pair<long, std::string>> local;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name.rfind("record_", 0) != 0) continue;
      if (name.size() < 13 || name.substr(name.size() - 5) != ".json") {
        continue;
      }
      long index = std::numeric_limits<long>::max();
      try {
        index = std::stol(name.substr(7, name.size() - 12));
      } catch (const std::exception&) {
        // non-numeric suffix: sorts after numbered records, by name
      }
      local.emplace_back(index, entry.path().string());
    }
    std::sort(local.begin(), local.end());
    for (auto& [index, path] : local) {
      (void)index;
      files.push_back(std::move(path));
    }
  }
  return files;
}

void write_summary(const SummaryReport& report, const std::string& out_path) {
  json j;
  j["task"] = report.task;
  j["budget"] = report.budget;
  j["algorithms"] = json::array();
  for (const auto& a : report.algorithms) {
    json ja;
    ja["algorithm"] = a.algorithm;
    ja["num_records"] = a.num_records;
    ja["median"] = a.median;
    ja["p25"] = a.p25;
    ja["p75"] = a.p75;
    ja["final_best"] = a.final_best;
    ja["init_feasibility"] = a.init_feasibility;
    ja["suggest_feasibility"] = a.suggest_feasibility;
    j["algorithms"].push_back(std::move(ja));
  }
  j["tests"] = json::array();
  for (const auto& t : report.tests) {
    json jt;
    jt["algorithm_a"] = t.algorithm_a;
    jt["algorithm_b"] = t.algorithm_b;
    jt["u"] = t.result.u;
    jt["p_value"] = t.result.p_value;
    jt["exact"] = t.result.exact;
    j["tests"].push_back(std::move(jt));
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path);
  out << j.dump(2) << "\n";
  if (!out.good()) throw std::runtime_error("write failed for " + out_path);

  const fs::path base(out_path);
  const fs::path dir = base.parent_path();
  const std::string stem = base.stem().string();
  for (const auto& a : report.algorithms) {
    const fs::path curve =
        (dir.empty() ? fs::path(".") : dir) /
        (stem + "_" + a.algorithm + "_curve.csv");
    write_curve_csv(a, curve.string());
  }
}

void export_trace(const std::string& record_path, int entry_index,
                  const std::string& out_csv) {
  const RunRecord record = read_record(record_path);
  if (entry_index < 0 ||
      entry_index >= static_cast<int>(record.entries.size())) {
    throw NotFoundError("record " + record_path + " has no entry " +
                        std::to_string(entry_index));
  }
  const RunEntry& entry = record.entries[entry_index];
  if (entry.trace_id.empty()) {
    throw NotFoundError("entry " + std::to_string(entry_index) +
                        " has no stored trace");
  }
  if (!is_known_task(record.task)) {
    throw ConfigError("record names unknown task '" + record.task + "'");
  }
  const TaskSpec task = make_task(record.task);
  const EpisodeTrace trace = integrate_episode(task, entry.z_raw, record.seed);
  write_trace_csv(trace, out_csv);
}

}  // namespace cbftune
