#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "refmi/refmi.h"

namespace fs = std::filesystem;

namespace {

const char* kTrial =
    "id,arm,y0,y1,y2\n"
    "r1,0,0.1,0.4,0.8\nr2,0,-0.3,0.0,0.2\nr3,0,0.9,1.1,1.5\nr4,0,-0.6,-0.4,\nr5,0,0.2,0.5,0.6\n"
    "r6,0,0.0,0.3,0.5\nr7,0,-0.1,0.1,0.4\nr8,0,0.5,0.8,1.0\n"
    "a1,1,0.1,0.6,1.2\na2,1,-0.4,0.2,\na3,1,0.7,1.3,1.9\na4,1,0.0,0.5,0.9\na5,1,0.3,0.9,1.4\n"
    "a6,1,-0.8,-0.2,0.3\na7,1,0.2,0.7,\na8,1,0.9,1.5,2.0\n";

refmi_dataset* parse(const char* text) {
  refmi_dataset* d = nullptr;
  REQUIRE(refmi_dataset_parse_csv(text, std::strlen(text), &d) == REFMI_OK);
  return d;
}

std::string take(char* s) {
  std::string out(s);
  refmi_string_free(s);
  return out;
}

fs::path temp_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("dataset info") {
  refmi_dataset* d = parse(kTrial);
  refmi_dataset_info info{};
  REQUIRE(refmi_dataset_info_get(d, &info) == REFMI_OK);
  CHECK(info.patients == 16);
  CHECK(info.active == 8);
  CHECK(info.reference == 8);
  CHECK(info.incomplete == 3);
  CHECK(info.last_visit == 2);
  CHECK(info.has_baseline == 1);
  refmi_dataset_free(d);
}

TEST_CASE("errors carry a status and a message naming the records") {
  refmi_dataset* d = nullptr;
  const char* bad = "id,arm,y0,y1,y2\nok,0,1,1,1\np2,0,2.0,,4.0\n";
  CHECK(refmi_dataset_parse_csv(bad, std::strlen(bad), &d) == REFMI_ERR_DATA);
  CHECK(d == nullptr);
  CHECK(std::string(refmi_last_error()).find("p2") != std::string::npos);
  CHECK(refmi_dataset_load_csv("/nonexistent/x.csv", &d) == REFMI_ERR_IO);
  CHECK(refmi_dataset_load_csv(nullptr, &d) == REFMI_ERR_ARGUMENT);
  CHECK(refmi_dataset_info_get(nullptr, nullptr) == REFMI_ERR_ARGUMENT);
  CHECK(std::string(refmi_status_name(REFMI_ERR_NUMERIC)) == "numeric error");
  refmi_dataset_free(nullptr);
}

TEST_CASE("written imputations pool to the same JSON as in memory") {
  refmi_dataset* d = parse(kTrial);
  refmi_imputations* imps = nullptr;
  REQUIRE(refmi_impute(d, REFMI_STRATEGY_J2R, 5, 1, 42, &imps) == REFMI_OK);
  REQUIRE(refmi_imputations_count(imps) == 5);
  CHECK(refmi_imputations_get(imps, 5) == nullptr);

  const fs::path dir = temp_dir("refmi_capi_test");
  const std::string prefix = (dir / "trial").string();
  REQUIRE(refmi_imputations_write(imps, prefix.c_str()) == REFMI_OK);

  std::vector<refmi_dataset*> loaded;
  for (int m = 1; m <= 5; ++m) {
    const fs::path p = dir / ("trial_imp" + std::to_string(m) + ".csv");
    REQUIRE(fs::exists(p));
    refmi_dataset* x = nullptr;
    REQUIRE(refmi_dataset_load_csv(p.string().c_str(), &x) == REFMI_OK);
    refmi_dataset_info info{};
    refmi_dataset_info_get(x, &info);
    CHECK(info.incomplete == 0);
    loaded.push_back(x);
  }
  char* in_memory = nullptr;
  char* from_files = nullptr;
  REQUIRE(refmi_imputations_pool_rubin(imps, REFMI_ANALYSIS_DIFF_MEANS, 0.05, &in_memory) == REFMI_OK);
  std::vector<const refmi_dataset*> views(loaded.begin(), loaded.end());
  REQUIRE(refmi_pool_rubin(views.data(), views.size(), REFMI_ANALYSIS_DIFF_MEANS, 0.05, &from_files) == REFMI_OK);
  const std::string a = take(in_memory);
  CHECK(a == take(from_files));
  CHECK(a.find("\"method\": \"rubin\"") != std::string::npos);

  char* ancova = nullptr;
  REQUIRE(refmi_imputations_pool_rubin(imps, REFMI_ANALYSIS_ANCOVA, 0.1, &ancova) == REFMI_OK);
  CHECK(take(ancova).find("\"analysis\": \"ancova\"") != std::string::npos);

  char* one = nullptr;
  CHECK(refmi_pool_rubin(views.data(), 1, REFMI_ANALYSIS_DIFF_MEANS, 0.05, &one) == REFMI_ERR_ARGUMENT);
  for (auto* x : loaded) refmi_dataset_free(x);
  refmi_imputations_free(imps);
  refmi_dataset_free(d);
  fs::remove_all(dir);
}

TEST_CASE("imputation is reproducible through the C API") {
  refmi_dataset* d = parse(kTrial);
  refmi_imputations* a = nullptr;
  refmi_imputations* b = nullptr;
  REQUIRE(refmi_impute(d, REFMI_STRATEGY_MAR, 3, 0, 7, &a) == REFMI_OK);
  REQUIRE(refmi_impute(d, REFMI_STRATEGY_MAR, 3, 0, 7, &b) == REFMI_OK);
  char* ja = nullptr;
  char* jb = nullptr;
  refmi_imputations_pool_rubin(a, REFMI_ANALYSIS_DIFF_MEANS, 0.05, &ja);
  refmi_imputations_pool_rubin(b, REFMI_ANALYSIS_DIFF_MEANS, 0.05, &jb);
  CHECK(take(ja) == take(jb));
  CHECK(refmi_impute(d, REFMI_STRATEGY_MAR, 0, 0, 7, &a) == REFMI_ERR_ARGUMENT);
  refmi_imputations_free(a);
  refmi_imputations_free(b);
  refmi_dataset_free(d);
}

TEST_CASE("bootstrap through the C API") {
  refmi_dataset* d = parse(kTrial);
  const fs::path dir = temp_dir("refmi_capi_boot");
  const std::string grid = (dir / "grid.csv").string();
  char* json = nullptr;
  REQUIRE(refmi_bootstrap(d, REFMI_STRATEGY_J2R, REFMI_ANALYSIS_DIFF_MEANS, 20, 2, 0.05, 3, 2, grid.c_str(),
                          &json) == REFMI_OK);
  const std::string out = take(json);
  CHECK(out.find("\"method\": \"bootMI\"") != std::string::npos);
  std::ifstream in(grid);
  std::string header;
  std::getline(in, header);
  CHECK(header == "b,m,theta");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 40);
  CHECK(refmi_bootstrap(d, REFMI_STRATEGY_J2R, REFMI_ANALYSIS_DIFF_MEANS, 1, 2, 0.05, 3, 1, nullptr, &json) ==
        REFMI_ERR_ARGUMENT);
  refmi_dataset_free(d);
  fs::remove_all(dir);
}

TEST_CASE("simulate through the C API") {
  const char* scenario = R"({
    "n_a": 30, "n_r": 30, "J": 1, "baseline": false,
    "true_ref": {"mu": [0.0], "sigma": [[1.0]]},
    "true_act": {"mu": [0.0], "sigma": [[1.0]]},
    "dropout": {"active": {"type": "mcar", "rate": 0.3}},
    "estimators": ["rubin", "simplifiedMLE"],
    "M": 4, "reps": 6, "seed": 5
  })";
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(refmi_simulate(scenario, 1, nullptr, 0, &a) == REFMI_OK);
  REQUIRE(refmi_simulate(scenario, 2, nullptr, 0, &b) == REFMI_OK);
  const std::string sa = take(a);
  CHECK(sa == take(b));
  CHECK(sa.find("runtime_seconds") == std::string::npos);
  const uint64_t seed = 6;
  REQUIRE(refmi_simulate(scenario, 1, &seed, 1, &a) == REFMI_OK);
  const std::string sc = take(a);
  CHECK(sc.find("runtime_seconds") != std::string::npos);
  CHECK(sc.find("\"seed\": 6") != std::string::npos);
  CHECK(refmi_simulate("{\"n_a\": 1}", 1, nullptr, 0, &a) == REFMI_ERR_ARGUMENT);
  CHECK(refmi_simulate("not json", 1, nullptr, 0, &a) == REFMI_ERR_ARGUMENT);
}
