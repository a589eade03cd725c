// Command-line front end: run experiments from a JSON config, aggregate the
// resulting record files, and export single-episode trajectories. All work
// happens behind the C API; this translation unit only parses arguments and
// maps statuses to exit codes (0 success, 2 config error, 3 runtime failure,
// 4 no feasible start in every repetition).
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbftune.h"

namespace {

int exit_code(cbft_status status) {
  switch (status) {
    case CBFT_OK:
      return 0;
    case CBFT_ERROR_CONFIG:
    case CBFT_ERROR_INVALID_ARGUMENT:
    case CBFT_ERROR_NOT_FOUND:
      return 2;
    case CBFT_ERROR_NO_FEASIBLE_START:
      return 4;
    case CBFT_ERROR_RUNTIME:
      return 3;
  }
  return 3;
}

int report_failure(cbft_status status) {
  std::fprintf(stderr, "error: %s\n", cbft_last_error());
  return exit_code(status);
}

struct RunArgs {
  std::string config;
  std::string out_dir;
  int repeats = 0;
  std::uint64_t seed = 0;
  bool has_out = false;
  bool has_repeats = false;
  bool has_seed = false;
};

int do_run(const RunArgs& args) {
  cbft_experiment* exp = nullptr;
  cbft_status status = cbft_experiment_open(args.config.c_str(), &exp);
  if (status != CBFT_OK) return report_failure(status);

  if (args.has_out) {
    status = cbft_experiment_override_output_dir(exp, args.out_dir.c_str());
    if (status != CBFT_OK) {
      cbft_experiment_close(exp);
      return report_failure(status);
    }
  }
  if (args.has_repeats) {
    status = cbft_experiment_override_repeats(exp, args.repeats);
    if (status != CBFT_OK) {
      cbft_experiment_close(exp);
      return report_failure(status);
    }
  }
  if (args.has_seed) {
    status = cbft_experiment_override_seed(exp, args.seed);
    if (status != CBFT_OK) {
      cbft_experiment_close(exp);
      return report_failure(status);
    }
  }

  int completed = 0;
  int failed = 0;
  int no_feasible = 0;
  status = cbft_experiment_run(exp, &completed, &failed, &no_feasible);
  cbft_experiment_close(exp);
  if (status != CBFT_OK) return report_failure(status);

  if (completed == 0) {
    std::fprintf(stderr, "error: all %d repetitions failed: %s\n", failed,
                 cbft_last_error());
    return no_feasible == failed ? 4 : 3;
  }
  if (failed > 0) {
    std::fprintf(stderr, "warning: %d of %d repetitions failed: %s\n", failed,
                 completed + failed, cbft_last_error());
  }
  std::printf("completed %d/%d repetitions\n", completed, completed + failed);
  return 0;
}

int do_summarize(const std::vector<std::string>& dirs,
                 const std::string& out_path) {
  std::vector<const char*> ptrs;
  ptrs.reserve(dirs.size());
  for (const auto& d : dirs) ptrs.push_back(d.c_str());
  const cbft_status status =
      cbft_summarize(ptrs.data(), ptrs.size(), out_path.c_str());
  if (status != CBFT_OK) return report_failure(status);
  std::printf("wrote summary to %s\n", out_path.c_str());
  return 0;
}

int do_trace(const std::string& record, int entry, const std::string& out) {
  const cbft_status status =
      cbft_export_trace(record.c_str(), entry, out.c_str());
  if (status != CBFT_OK) return report_failure(status);
  std::printf("wrote trace to %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Safe tuning workbench for barrier-filtered controllers (v" +
      std::string(cbft_version()) + ")"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand(
      "run", "Run an experiment described by a JSON config");
  run->add_option("--config", run_args.config, "Path to the experiment config")
      ->required();
  CLI::Option* out_opt =
      run->add_option("--out", run_args.out_dir, "Override output directory");
  CLI::Option* repeats_opt = run->add_option("--repeats", run_args.repeats,
                                             "Override repetition count");
  CLI::Option* seed_opt =
      run->add_option("--seed", run_args.seed, "Override base seed");

  std::vector<std::string> dirs;
  std::string summary_out;
  CLI::App* summarize = app.add_subcommand(
      "summarize", "Aggregate record directories into a summary");
  summarize->add_option("dirs", dirs, "Directories holding record_*.json")
      ->required()
      ->expected(-1);
  summarize->add_option("--out", summary_out, "Summary JSON output path")
      ->required();

  std::string record_path;
  std::string trace_out;
  int entry_index = 0;
  CLI::App* trace = app.add_subcommand(
      "trace", "Re-simulate one record entry and export its trajectory CSV");
  trace->add_option("record", record_path, "Run record JSON file")->required();
  trace->add_option("--entry", entry_index, "Entry index within the record")
      ->required();
  trace->add_option("--out", trace_out, "Trajectory CSV output path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // CLI11 returns 0 for --help; anything else is a usage/config problem
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    run_args.has_out = out_opt->count() > 0;
    run_args.has_repeats = repeats_opt->count() > 0;
    run_args.has_seed = seed_opt->count() > 0;
    return do_run(run_args);
  }
  if (summarize->parsed()) return do_summarize(dirs, summary_out);
  if (trace->parsed()) return do_trace(record_path, entry_index, trace_out);
  return 2;
}
