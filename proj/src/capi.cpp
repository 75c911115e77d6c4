#include "refmi/refmi.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "refmi/analysis.hpp"
#include "refmi/error.hpp"
#include "refmi/freq_variance.hpp"
#include "refmi/imputation.hpp"
#include "refmi/json_io.hpp"
#include "refmi/simulation.hpp"
#include "refmi/trial_data.hpp"

struct refmi_dataset {
  refmi::TrialDataset data;
};

struct refmi_imputations {
  std::vector<refmi_dataset> items;
};

namespace {

thread_local std::string last_error;

refmi_status fail(refmi_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

refmi_status status_for(const refmi::Error& e) {
  using refmi::ErrorKind;
  switch (e.kind()) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::TooFewImputations:
      return REFMI_ERR_ARGUMENT;
    case ErrorKind::Io:
      return REFMI_ERR_IO;
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::SingularDesign:
    case ErrorKind::DegenerateVariance:
      return REFMI_ERR_NUMERIC;
    default:
      return REFMI_ERR_DATA;
  }
}

template <typename F>
refmi_status guarded(F&& f) {
  try {
    f();
    return REFMI_OK;
  } catch (const refmi::Error& e) {
    return fail(status_for(e), e.what());
  } catch (const std::bad_alloc&) {
    return fail(REFMI_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(REFMI_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw refmi::Error(refmi::ErrorKind::InvalidArgument, what);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

refmi::Strategy to_strategy(refmi_strategy s) {
  require(s == REFMI_STRATEGY_MAR || s == REFMI_STRATEGY_J2R, "unknown strategy");
  return s == REFMI_STRATEGY_MAR ? refmi::Strategy::Mar : refmi::Strategy::J2R;
}

refmi::Analysis to_analysis(refmi_analysis a) {
  require(a == REFMI_ANALYSIS_DIFF_MEANS || a == REFMI_ANALYSIS_ANCOVA, "unknown analysis");
  return a == REFMI_ANALYSIS_DIFF_MEANS ? refmi::Analysis::DiffMeans : refmi::Analysis::Ancova;
}

std::string pool_json(const std::vector<const refmi::TrialDataset*>& completed, refmi_analysis analysis,
                      double alpha) {
  std::vector<refmi::CompleteDataEstimate> ests;
  ests.reserve(completed.size());
  for (const auto* d : completed) ests.push_back(refmi::analyze(*d, to_analysis(analysis)));
  refmi::Json j = refmi::to_json(refmi::rubin_pool(ests, alpha));
  j["analysis"] = std::string(refmi::to_string(to_analysis(analysis)));
  return refmi::dump(j);
}

}  // namespace

extern "C" {

const char* refmi_version(void) { return "1.0.0"; }

const char* refmi_last_error(void) { return last_error.c_str(); }

const char* refmi_status_name(refmi_status status) {
  switch (status) {
    case REFMI_OK: return "ok";
    case REFMI_ERR_ARGUMENT: return "argument error";
    case REFMI_ERR_IO: return "i/o error";
    case REFMI_ERR_DATA: return "data error";
    case REFMI_ERR_NUMERIC: return "numeric error";
    case REFMI_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void refmi_string_free(char* s) { std::free(s); }

refmi_status refmi_dataset_load_csv(const char* path, refmi_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new refmi_dataset{refmi::load_csv(std::filesystem::path(path))};
  });
}

refmi_status refmi_dataset_parse_csv(const char* text, size_t length, refmi_dataset** out) {
  return guarded([&] {
    require(text && out, "null argument");
    std::istringstream in(std::string(text, length));
    *out = new refmi_dataset{refmi::load_csv(in)};
  });
}

refmi_status refmi_dataset_write_csv(const refmi_dataset* data, const char* path) {
  return guarded([&] {
    require(data && path, "null argument");
    refmi::write_csv(data->data, std::filesystem::path(path));
  });
}

refmi_status refmi_dataset_info_get(const refmi_dataset* data, refmi_dataset_info* out) {
  return guarded([&] {
    require(data && out, "null argument");
    out->patients = data->data.size();
    out->active = data->data.n_active();
    out->reference = data->data.n_reference();
    out->incomplete = data->data.incomplete_count();
    out->last_visit = data->data.last_visit();
    out->has_baseline = data->data.has_baseline() ? 1 : 0;
  });
}

void refmi_dataset_free(refmi_dataset* data) { delete data; }

refmi_status refmi_impute(const refmi_dataset* data, refmi_strategy strategy, int imputations, int proper,
                          uint64_t seed, refmi_imputations** out) {
  return guarded([&] {
    require(data && out, "null argument");
    auto completed = refmi::impute_dataset(data->data, to_strategy(strategy), imputations, proper != 0, seed);
    auto* imps = new refmi_imputations;
    imps->items.reserve(completed.size());
    for (auto& c : completed) imps->items.push_back(refmi_dataset{std::move(c)});
    *out = imps;
  });
}

size_t refmi_imputations_count(const refmi_imputations* imps) { return imps ? imps->items.size() : 0; }

const refmi_dataset* refmi_imputations_get(const refmi_imputations* imps, size_t index) {
  if (!imps || index >= imps->items.size()) return nullptr;
  return &imps->items[index];
}

refmi_status refmi_imputations_write(const refmi_imputations* imps, const char* prefix) {
  return guarded([&] {
    require(imps && prefix, "null argument");
    for (std::size_t m = 0; m < imps->items.size(); ++m) {
      const std::string path = std::string(prefix) + "_imp" + std::to_string(m + 1) + ".csv";
      refmi::write_csv(imps->items[m].data, std::filesystem::path(path));
    }
  });
}

void refmi_imputations_free(refmi_imputations* imps) { delete imps; }

refmi_status refmi_pool_rubin(const refmi_dataset* const* completed, size_t count, refmi_analysis analysis,
                              double alpha, char** json_out) {
  return guarded([&] {
    require(completed && json_out, "null argument");
    std::vector<const refmi::TrialDataset*> items;
    for (std::size_t i = 0; i < count; ++i) {
      require(completed[i] != nullptr, "null dataset");
      items.push_back(&completed[i]->data);
    }
    *json_out = copy_string(pool_json(items, analysis, alpha));
  });
}

refmi_status refmi_imputations_pool_rubin(const refmi_imputations* imps, refmi_analysis analysis, double alpha,
                                          char** json_out) {
  return guarded([&] {
    require(imps && json_out, "null argument");
    std::vector<const refmi::TrialDataset*> items;
    for (const auto& d : imps->items) items.push_back(&d.data);
    *json_out = copy_string(pool_json(items, analysis, alpha));
  });
}

refmi_status refmi_bootstrap(const refmi_dataset* data, refmi_strategy strategy, refmi_analysis analysis,
                             int bootstraps, int imputations, double alpha, uint64_t seed, int threads,
                             const char* grid_csv, char** json_out) {
  return guarded([&] {
    require(data && json_out, "null argument");
    const auto grid = refmi::boot_then_impute(data->data, to_strategy(strategy), bootstraps, imputations, seed,
                                              to_analysis(analysis), threads);
    if (grid_csv) {
      std::ofstream out(grid_csv);
      if (!out) throw refmi::Error(refmi::ErrorKind::Io, std::string("cannot write ") + grid_csv);
      refmi::write_grid_csv(grid, out);
    }
    refmi::Json j = refmi::to_json(refmi::vonhippel_pool(grid, alpha));
    j["analysis"] = std::string(refmi::to_string(to_analysis(analysis)));
    j["strategy"] = std::string(refmi::to_string(to_strategy(strategy)));
    j["redraws"] = grid.retries.size();
    *json_out = copy_string(refmi::dump(j));
  });
}

refmi_status refmi_simulate(const char* scenario_json, int threads, const uint64_t* seed_override,
                            int include_runtime, char** json_out) {
  return guarded([&] {
    require(scenario_json && json_out, "null argument");
    refmi::ScenarioConfig cfg = refmi::parse_scenario(scenario_json);
    if (seed_override) cfg.seed = *seed_override;
    const refmi::SimReport report = refmi::run_scenario(cfg, threads);
    *json_out = copy_string(refmi::dump(refmi::to_json(report, include_runtime != 0)));
  });
}

}  // extern "C"
