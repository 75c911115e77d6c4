// refmi command-line front end. Talks to the library only through refmi.h.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "refmi/refmi.h"

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct DatasetDeleter {
  void operator()(refmi_dataset* d) const { refmi_dataset_free(d); }
};
struct ImputationsDeleter {
  void operator()(refmi_imputations* i) const { refmi_imputations_free(i); }
};
struct StringDeleter {
  void operator()(char* s) const { refmi_string_free(s); }
};
using DatasetPtr = std::unique_ptr<refmi_dataset, DatasetDeleter>;
using ImputationsPtr = std::unique_ptr<refmi_imputations, ImputationsDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

// Thrown to leave a subcommand with a given exit status.
struct Exit {
  int code;
};

void check(refmi_status status, const std::string& context) {
  if (status == REFMI_OK) return;
  std::cerr << "refmi: " << context << ": " << refmi_last_error() << '\n';
  throw Exit{status == REFMI_ERR_ARGUMENT ? kExitUsage : kExitData};
}

DatasetPtr load(const std::string& path) {
  refmi_dataset* raw = nullptr;
  check(refmi_dataset_load_csv(path.c_str(), &raw), path);
  return DatasetPtr(raw);
}

void emit(const char* json, const std::string& output) {
  if (output.empty() || output == "-") {
    std::cout << json << '\n';
    return;
  }
  std::ofstream out(output);
  if (!out) {
    std::cerr << "refmi: cannot write " << output << '\n';
    throw Exit{kExitData};
  }
  out << json << '\n';
}

refmi_strategy strategy_of(const std::string& s) { return s == "mar" ? REFMI_STRATEGY_MAR : REFMI_STRATEGY_J2R; }

refmi_analysis analysis_of(const std::string& s) {
  return s == "ancova" ? REFMI_ANALYSIS_ANCOVA : REFMI_ANALYSIS_DIFF_MEANS;
}

struct Options {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string strategy = "j2r";
  std::string analysis = "diff_means";
  int imputations = 5;
  int bootstraps = 200;
  double alpha = 0.05;
  std::string output;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-based multiple imputation with frequentist variance estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(refmi_version()));

  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", opt.seed, "Random seed");
    sub->add_option("-o,--output", opt.output, "Output file (default stdout)");
  };
  auto add_strategy = [&](CLI::App* sub) {
    sub->add_option("--strategy", opt.strategy, "Imputation strategy")
        ->check(CLI::IsMember({"mar", "j2r"}));
  };
  auto add_analysis = [&](CLI::App* sub) {
    sub->add_option("--analysis", opt.analysis, "Complete-data analysis")
        ->check(CLI::IsMember({"diff_means", "ancova"}));
  };
  auto add_alpha = [&](CLI::App* sub) {
    sub->add_option("--alpha", opt.alpha, "Two-sided level")->check(CLI::Range(1e-6, 0.999999));
  };

  // impute
  std::string input;
  std::string prefix;
  std::string pooled;
  bool improper = false;
  auto* impute = app.add_subcommand("impute", "Write M completed datasets <prefix>_imp<m>.csv");
  impute->add_option("input", input, "Trial CSV")->required()->check(CLI::ExistingFile);
  impute->add_option("-p,--prefix", prefix, "Output prefix")->required();
  impute->add_option("-M,--M", opt.imputations, "Number of imputations")->check(CLI::PositiveNumber);
  impute->add_flag("--improper", improper, "Condition on the MLE instead of posterior draws");
  impute->add_option("--pooled", pooled, "Also write Rubin-pooled JSON of the in-memory imputations");
  add_common(impute);
  add_strategy(impute);
  add_analysis(impute);
  add_alpha(impute);

  // analyze
  std::vector<std::string> files;
  std::string method = "rubin";
  auto* analyze = app.add_subcommand("analyze", "Pool completed datasets with Rubin's rules");
  analyze->add_option("files", files, "Completed CSV files")->required()->check(CLI::ExistingFile);
  analyze->add_option("--method", method, "Pooling method")->check(CLI::IsMember({"rubin"}));
  analyze->add_option("-o,--output", opt.output, "Output file (default stdout)");
  add_analysis(analyze);
  add_alpha(analyze);

  // bootstrap
  std::string grid;
  int boot_imputations = 2;
  auto* bootstrap = app.add_subcommand("bootstrap", "Bootstrap-then-impute variance estimate");
  bootstrap->add_option("input", input, "Trial CSV")->required()->check(CLI::ExistingFile);
  bootstrap->add_option("-B,--B", opt.bootstraps, "Number of bootstraps")->check(CLI::Range(2, 100000000));
  bootstrap->add_option("-M,--M", boot_imputations, "Imputations per bootstrap")->check(CLI::Range(2, 1000000));
  bootstrap->add_option("--grid", grid, "Write the b,m,theta grid to this CSV");
  bootstrap->add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
  add_common(bootstrap);
  add_strategy(bootstrap);
  add_analysis(bootstrap);
  add_alpha(bootstrap);

  // simulate
  std::string config;
  bool no_runtime = false;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte-Carlo scenario (JSON config)");
  simulate->add_option("config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("-M,--M", opt.imputations, "Override M")->check(CLI::PositiveNumber);
  simulate->add_option("-B,--B", opt.bootstraps, "Override B")->check(CLI::PositiveNumber);
  simulate->add_flag("--no-runtime", no_runtime, "Omit runtime_seconds from the report");
  add_common(simulate);
  add_strategy(simulate);
  add_alpha(simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*impute) {
      DatasetPtr data = load(input);
      refmi_imputations* raw = nullptr;
      check(refmi_impute(data.get(), strategy_of(opt.strategy), opt.imputations, improper ? 0 : 1, opt.seed, &raw),
            "impute");
      ImputationsPtr imps(raw);
      check(refmi_imputations_write(imps.get(), prefix.c_str()), "write");
      std::cerr << "wrote " << refmi_imputations_count(imps.get()) << " completed datasets to " << prefix
                << "_imp<m>.csv\n";
      if (!pooled.empty()) {
        char* json = nullptr;
        check(refmi_imputations_pool_rubin(imps.get(), analysis_of(opt.analysis), opt.alpha, &json), "pool");
        StringPtr owned(json);
        emit(json, pooled);
      }
    } else if (*analyze) {
      std::vector<DatasetPtr> owned;
      std::vector<const refmi_dataset*> ptrs;
      for (const auto& f : files) {
        owned.push_back(load(f));
        ptrs.push_back(owned.back().get());
      }
      char* json = nullptr;
      check(refmi_pool_rubin(ptrs.data(), ptrs.size(), analysis_of(opt.analysis), opt.alpha, &json), "analyze");
      StringPtr out(json);
      emit(json, opt.output);
    } else if (*bootstrap) {
      DatasetPtr data = load(input);
      char* json = nullptr;
      check(refmi_bootstrap(data.get(), strategy_of(opt.strategy), analysis_of(opt.analysis), opt.bootstraps,
                            boot_imputations, opt.alpha, opt.seed, opt.threads,
                            grid.empty() ? nullptr : grid.c_str(), &json),
            "bootstrap");
      StringPtr out(json);
      emit(json, opt.output);
    } else if (*simulate) {
      std::ifstream in(config);
      nlohmann::ordered_json cfg;
      try {
        cfg = nlohmann::ordered_json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        std::cerr << "refmi: " << config << ": " << e.what() << '\n';
        return kExitUsage;
      }
      if (simulate->count("--M")) cfg["M"] = opt.imputations;
      if (simulate->count("--B")) cfg["B"] = opt.bootstraps;
      if (simulate->count("--alpha")) cfg["alpha"] = opt.alpha;
      if (simulate->count("--strategy")) cfg["strategy"] = opt.strategy;
      const std::uint64_t* seed = simulate->count("--seed") ? &opt.seed : nullptr;
      char* json = nullptr;
      check(refmi_simulate(cfg.dump().c_str(), opt.threads, seed, no_runtime ? 0 : 1, &json), "simulate");
      StringPtr out(json);
      emit(json, opt.output);
    }
  } catch (const Exit& e) {
    return e.code;
  }
  return 0;
}
