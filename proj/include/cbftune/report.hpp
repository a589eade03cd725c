#pragma once

#include <string>
#include <vector>

#include "cbftune/optimizer.hpp"

namespace cbftune {

struct RankSumResult {
  double u = 0.0;        // Mann-Whitney U of the first sample
  double p_value = 1.0;  // two-sided
  bool exact = false;    // enumeration (tie-free, n_a*n_b <= 400) vs normal
};

/// Mann-Whitney rank-sum test with midrank ties: exact two-sided p by
/// counting the U distribution when n_a*n_b <= 400 and no ties are present,
/// normal approximation with tie correction otherwise.
RankSumResult ranksum(const std::vector<double>& a,
                      const std::vector<double>& b);

/// Cross-repetition view of one algorithm on one task.
struct AlgorithmSummary {
  std::string algorithm;
  int num_records = 0;
  // Best-feasible value per suggest-round index (length = budget), median
  // and quartiles across repetitions. Entries are NaN while no repetition
  // has a feasible value yet.
  std::vector<double> median;
  std::vector<double> p25;
  std::vector<double> p75;
  std::vector<double> final_best;  // per record; NaN when never feasible
  double init_feasibility = 0.0;
  double suggest_feasibility = 0.0;
};

struct PairwiseTest {
  std::string algorithm_a;
  std::string algorithm_b;
  RankSumResult result;
};

struct SummaryReport {
  std::string task;
  int budget = 0;
  std::vector<AlgorithmSummary> algorithms;
  std::vector<PairwiseTest> tests;  // rank-sum on final best values
};

/// Aggregates run records (grouped by algorithm tag) into medians/quartiles
/// per evaluation index, feasibility rates and pairwise rank-sum tests.
/// Throws std::invalid_argument when records mix tasks.
SummaryReport summarize(const std::vector<RunRecord>& records);

/// Collects record_*.json files under each directory.
std::vector<std::string> find_record_files(
    const std::vector<std::string>& dirs);

/// Writes the report as JSON at out_path plus one
/// <out_path stem>_<algorithm>_curve.csv per algorithm.
void write_summary(const SummaryReport& report, const std::string& out_path);

/// Re-simulates the episode behind one record entry and writes its CSV.
/// Throws NotFoundError for an out-of-range entry.
void export_trace(const std::string& record_path, int entry_index,
                  const std::string& out_csv);

}  // namespace cbftune
