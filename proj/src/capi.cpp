#include "cbftune.h"

#include <exception>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbftune/errors.hpp"
#include "cbftune/experiment.hpp"
#include "cbftune/report.hpp"

namespace {

thread_local std::string g_last_error = "";

cbft_status fail(cbft_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

/// Runs `body` and maps thrown exceptions onto status codes.
template <typename Fn>
cbft_status guarded(Fn&& body) {
  try {
    return body();
  } catch (const cbftune::ConfigError& e) {
    return fail(CBFT_ERROR_CONFIG, e.what());
  } catch (const cbftune::NoFeasibleStartError& e) {
    return fail(CBFT_ERROR_NO_FEASIBLE_START, e.what());
  } catch (const cbftune::NotFoundError& e) {
    return fail(CBFT_ERROR_NOT_FOUND, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(CBFT_ERROR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(CBFT_ERROR_RUNTIME, e.what());
  } catch (...) {
    return fail(CBFT_ERROR_RUNTIME, "unknown failure");
  }
}

}  // namespace

struct cbft_experiment {
  cbftune::ExperimentConfig config;
};

extern "C" {

cbft_status cbft_experiment_open(const char* config_path,
                                 cbft_experiment** out) {
  if (config_path == nullptr || out == nullptr) {
    return fail(CBFT_ERROR_INVALID_ARGUMENT,
                "cbft_experiment_open: null argument");
  }
  *out = nullptr;
  return guarded([&]() {
    auto* handle = new cbft_experiment{cbftune::parse_config(config_path)};
    *out = handle;
    return CBFT_OK;
  });
}

cbft_status cbft_experiment_override_output_dir(cbft_experiment* exp,
                                                const char* dir) {
  if (exp == nullptr || dir == nullptr || *dir == '\0') {
    return fail(CBFT_ERROR_INVALID_ARGUMENT,
                "override_output_dir: null or empty argument");
  }
  exp->config.out_dir = dir;
  return CBFT_OK;
}

cbft_status cbft_experiment_override_repeats(cbft_experiment* exp,
                                             int repeats) {
  if (exp == nullptr) {
    return fail(CBFT_ERROR_INVALID_ARGUMENT, "override_repeats: null handle");
  }
  if (repeats < 1) {
    return fail(CBFT_ERROR_CONFIG, "repeats must be >= 1");
  }
  exp->config.repeats = repeats;
  return CBFT_OK;
}

cbft_status cbft_experiment_override_seed(cbft_experiment* exp,
                                          uint64_t base_seed) {
  if (exp == nullptr) {
    return fail(CBFT_ERROR_INVALID_ARGUMENT, "override_seed: null handle");
  }
  exp->config.base_seed = base_seed;
  return CBFT_OK;
}

cbft_status cbft_experiment_run(cbft_experiment* exp, int* completed,
                                int* failed, int* no_feasible_start) {
  if (exp == nullptr) {
    return fail(CBFT_ERROR_INVALID_ARGUMENT, "run: null handle");
  }
  return guarded([&]() {
    const cbftune::ExperimentResult result =
        cbftune::run_experiment(exp->config);
    if (completed != nullptr) *completed = result.completed;
    if (failed != nullptr) {
      *failed = exp->config.repeats - result.completed;
    }
    if (no_feasible_start != nullptr) {
      *no_feasible_start = result.no_feasible_start;
    }
    if (result.completed < exp->config.repeats) {
      std::string message;
      for (const auto& f : result.failures) {
        if (f.empty()) continue;
        if (!message.empty()) message += "; ";
        message += f;
      }
      g_last_error = message;
    }
    return CBFT_OK;
  });
}

void cbft_experiment_close(cbft_experiment* exp) { delete exp; }

cbft_status cbft_summarize(const char* const* dirs, size_t num_dirs,
                           const char* out_path) {
  if (dirs == nullptr || num_dirs == 0 || out_path == nullptr) {
    return fail(CBFT_ERROR_INVALID_ARGUMENT, "cbft_summarize: null argument");
  }
  return guarded([&]() {
    std::vector<std::string> dir_list;
    dir_list.reserve(num_dirs);
    for (size_t i = 0; i < num_dirs; ++i) {
      if (dirs[i] == nullptr) {
        return fail(CBFT_ERROR_INVALID_ARGUMENT,
                    "cbft_summarize: null directory entry");
      }
      dir_list.emplace_back(dirs[i]);
    }
    const std::vector<std::string> files =
        cbftune::find_record_files(dir_list);
    if (files.empty()) {
      return fail(CBFT_ERROR_INVALID_ARGUMENT,
                  "cbft_summarize: no record files found");
    }
    std::vector<cbftune::RunRecord> records;
    records.reserve(files.size());
    for (const auto& f : files) {
      records.push_back(cbftune::read_record(f));
    }
    cbftune::write_summary(cbftune::summarize(records), out_path);
    return CBFT_OK;
  });
}

cbft_status cbft_export_trace(const char* record_path, int entry_index,
                              const char* out_csv) {
  if (record_path == nullptr || out_csv == nullptr) {
    return fail(CBFT_ERROR_INVALID_ARGUMENT,
                "cbft_export_trace: null argument");
  }
  return guarded([&]() {
    cbftune::export_trace(record_path, entry_index, out_csv);
    return CBFT_OK;
  });
}

const char* cbft_last_error(void) { return g_last_error.c_str(); }

const char* cbft_version(void) { return "1.0.0"; }

}  // extern "C"
