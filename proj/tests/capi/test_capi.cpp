#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lipscert/lipscert.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  lipscert_string_free(s);
  return out;
}

lipscert_config* config(std::initializer_list<std::pair<const char*, const char*>> sets) {
  lipscert_config* c = nullptr;
  REQUIRE(lipscert_config_default(&c) == LIPSCERT_OK);
  for (const auto& [k, v] : sets) REQUIRE(lipscert_config_set(c, k, v) == LIPSCERT_OK);
  return c;
}

lipscert_config* small_config() {
  return config({{"stage_depths", "[1,0,0,0]"}, {"train.steps", "5"}, {"dataset.n_per_class", "10"}});
}

lipscert_model* model_of(const lipscert_config* c) {
  lipscert_model* m = nullptr;
  REQUIRE(lipscert_model_create(c, &m) == LIPSCERT_OK);
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(lipscert_version()) == LIPSCERT_TEST_VERSION);
  CHECK(std::string(lipscert_status_name(LIPSCERT_ERR_NON_LIPSCHITZ)) == "non-Lipschitz");
  CHECK(std::string(lipscert_gradcheck_modules()).find("scsa,") == 0);
}

TEST_CASE("default config matches the shipped toy config") {
  lipscert_config* c = config({});
  char* json = nullptr;
  REQUIRE(lipscert_config_to_json(c, &json) == LIPSCERT_OK);
  CHECK(take(json) == read_file(LIPSCERT_TEST_SOURCE_DIR "/configs/toy.json"));
  lipscert_config_free(c);

  lipscert_config* loaded = nullptr;
  CHECK(lipscert_config_load(LIPSCERT_TEST_SOURCE_DIR "/configs/toy.json", &loaded) == LIPSCERT_OK);
  lipscert_config_free(loaded);
  CHECK(lipscert_config_load("/nonexistent/x.json", &loaded) == LIPSCERT_ERR_INVALID_ARGUMENT);
}

TEST_CASE("config edits are validated") {
  lipscert_config* c = config({});
  CHECK(lipscert_config_set(c, "nonsense", "1") == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(std::string(lipscert_last_error()).find("nonsense") != std::string::npos);
  CHECK(lipscert_config_set(c, "train.nonsense", "1") == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_config_set(c, "alpha", "\"sometimes\"") == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_config_set(c, "eps", "{") == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_config_set(c, "patch_size", "3") == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_config_set(c, "seed", "42") == LIPSCERT_OK);
  std::uint64_t seed = 0;
  CHECK(lipscert_config_seed(c, &seed) == LIPSCERT_OK);
  CHECK(seed == 42);
  lipscert_config* parsed = nullptr;
  CHECK(lipscert_config_parse("{\"schema_version\": 1, \"extra\": 1}", &parsed) ==
        LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_config_parse("{\"schema_version\": 1}", &parsed) == LIPSCERT_OK);
  lipscert_config_free(parsed);
  lipscert_config_free(c);
}

TEST_CASE("null arguments are rejected and null frees are no-ops") {
  CHECK(lipscert_config_default(nullptr) == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_model_create(nullptr, nullptr) == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_render_svg(nullptr, nullptr) == LIPSCERT_ERR_INVALID_ARGUMENT);
  lipscert_config_free(nullptr);
  lipscert_model_free(nullptr);
  lipscert_cert_report_free(nullptr);
  lipscert_train_result_free(nullptr);
  lipscert_string_free(nullptr);
}

TEST_CASE("model forward, parameter count and weight files") {
  lipscert_config* c = config({});
  lipscert_model* m = model_of(c);
  lipscert_config* one_block = config({{"stage_depths", "[1,0,0,0]"}});
  lipscert_model* tiny = model_of(one_block);
  std::size_t params = 0;
  CHECK(lipscert_model_param_count(tiny, &params) == LIPSCERT_OK);
  CHECK(params == 49052);  // hand count in test_model
  lipscert_model_free(tiny);
  lipscert_config_free(one_block);

  std::vector<double> images(2 * 16 * 16 * 3);
  for (std::size_t i = 0; i < images.size(); ++i) images[i] = std::sin(0.1 * static_cast<double>(i));
  std::vector<double> a(20), b(20);
  REQUIRE(lipscert_model_forward(m, images.data(), 2, a.data()) == LIPSCERT_OK);
  for (double v : a) CHECK(std::isfinite(v));
  CHECK(lipscert_model_forward(m, images.data(), 0, a.data()) == LIPSCERT_ERR_INVALID_ARGUMENT);

  const std::string path = std::string(LIPSCERT_TEST_BINARY_DIR) + "/capi_weights.bin";
  REQUIRE(lipscert_model_save(m, path.c_str()) == LIPSCERT_OK);
  CHECK(read_file(path).substr(0, 4) == "LIPS");
  lipscert_config* other_cfg = config({{"seed", "9"}});
  lipscert_model* other = model_of(other_cfg);
  REQUIRE(lipscert_model_forward(other, images.data(), 2, b.data()) == LIPSCERT_OK);
  CHECK(a != b);
  REQUIRE(lipscert_model_load(other, path.c_str()) == LIPSCERT_OK);
  REQUIRE(lipscert_model_forward(other, images.data(), 2, b.data()) == LIPSCERT_OK);
  CHECK(a == b);
  CHECK(lipscert_model_load(other, "/nonexistent/w.bin") != LIPSCERT_OK);

  lipscert_config* narrow = config({{"channels", "[8,16,32,64]"}});
  lipscert_model* mismatched = model_of(narrow);
  CHECK(lipscert_model_load(mismatched, path.c_str()) == LIPSCERT_ERR_INVALID_ARGUMENT);
  std::remove(path.c_str());
  for (lipscert_model* x : {m, other, mismatched}) lipscert_model_free(x);
  for (lipscert_config* x : {c, other_cfg, narrow}) lipscert_config_free(x);
}

TEST_CASE("certification through the C interface") {
  lipscert_config* c = small_config();
  lipscert_model* m = model_of(c);
  lipscert_cert_options opts;
  lipscert_cert_options_default(&opts);
  CHECK(opts.pairs == 1000);
  CHECK(opts.jac_points == 32);
  opts.pairs = 30;
  opts.jac_points = 2;

  lipscert_cert_report* r = nullptr;
  REQUIRE(lipscert_certify(m, &opts, &r) == LIPSCERT_OK);
  int pass = 0;
  CHECK(lipscert_cert_report_pass(r, &pass) == LIPSCERT_OK);
  CHECK(pass == 1);
  double theo = 0.0, emp = 0.0;
  CHECK(lipscert_cert_report_model(r, LIPSCERT_NORM_2, &theo, &emp) == LIPSCERT_OK);
  CHECK(emp <= theo);
  CHECK(lipscert_cert_report_model(r, LIPSCERT_NORM_INF, &theo, &emp) == LIPSCERT_OK);
  CHECK(emp <= theo);
  CHECK(lipscert_cert_report_model(r, 3, &theo, &emp) == LIPSCERT_ERR_INVALID_ARGUMENT);
  char* json = nullptr;
  REQUIRE(lipscert_cert_report_json(r, &json) == LIPSCERT_OK);
  const std::string text = take(json);
  CHECK(text.find("\"verdict\": \"pass\"") != std::string::npos);
  lipscert_cert_report_free(r);

  opts.norms = LIPSCERT_NORM_INF;
  opts.gradcheck = 0;
  REQUIRE(lipscert_certify(m, &opts, &r) == LIPSCERT_OK);
  CHECK(lipscert_cert_report_model(r, LIPSCERT_NORM_2, &theo, &emp) == LIPSCERT_ERR_INVALID_ARGUMENT);
  lipscert_cert_report_free(r);

  opts.norms = 0;
  CHECK(lipscert_certify(m, &opts, &r) == LIPSCERT_ERR_INVALID_ARGUMENT);
  opts.norms = LIPSCERT_NORM_2;
  opts.pairs = 0;
  CHECK(lipscert_certify(m, &opts, &r) == LIPSCERT_ERR_INVALID_ARGUMENT);
  lipscert_model_free(m);
  lipscert_config_free(c);

  lipscert_config* ln = config({{"stage_depths", "[1,0,0,0]"}, {"norm_kind", "\"layernorm\""}});
  lipscert_model* lm = model_of(ln);
  lipscert_cert_options_default(&opts);
  CHECK(lipscert_certify(lm, &opts, &r) == LIPSCERT_ERR_NON_LIPSCHITZ);
  CHECK(std::string(lipscert_last_error()) == "non-Lipschitz layer: layer_norm");
  lipscert_model_free(lm);
  lipscert_config_free(ln);
}

TEST_CASE("gradient checks through the C interface") {
  lipscert_gradcheck_result res{};
  char* text = nullptr;
  REQUIRE(lipscert_gradcheck("scsa", 4, 8, 1e-5, 1e-4, 0, &res, &text) == LIPSCERT_OK);
  CHECK(res.pass == 1);
  CHECK(res.max_rel_error < 1e-4);
  CHECK(res.checked == 4 * 8 + 3 * 64 + 2);
  CHECK(take(text).find("result: PASS") != std::string::npos);
  CHECK(lipscert_gradcheck("centernorm", 4, 8, 1e-5, 1e-6, 1, &res, nullptr) == LIPSCERT_OK);
  CHECK(res.pass == 1);
  CHECK(lipscert_gradcheck("nope", 4, 8, 1e-5, 1e-4, 0, &res, nullptr) == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_gradcheck("scsa", 4, 8, 0.0, 1e-4, 0, &res, nullptr) == LIPSCERT_ERR_INVALID_ARGUMENT);
}

TEST_CASE("training, ablation and plotting through the C interface") {
  lipscert_config* c = small_config();
  lipscert_model* m = model_of(c);
  lipscert_train_result* r = nullptr;
  REQUIRE(lipscert_train(m, &r) == LIPSCERT_OK);
  std::size_t steps = 0;
  int nan_flag = 1;
  double train_acc = -1.0, eval_acc = -1.0;
  CHECK(lipscert_train_result_summary(r, &steps, &nan_flag, &train_acc, &eval_acc) == LIPSCERT_OK);
  CHECK(steps == 5);
  CHECK(nan_flag == 0);
  CHECK((train_acc >= 0.0 && train_acc <= 1.0));
  lipscert_verdict v{};
  CHECK(lipscert_train_result_verdict(r, &v) == LIPSCERT_OK);
  CHECK(v != LIPSCERT_DIVERGED);
  char* csv = nullptr;
  REQUIRE(lipscert_train_result_csv(r, &csv) == LIPSCERT_OK);
  const std::string metrics = take(csv);
  CHECK(metrics.rfind("step,loss,max_act,grad_norm,nan_flag\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 6);
  char* svg = nullptr;
  REQUIRE(lipscert_render_svg(metrics.c_str(), &svg) == LIPSCERT_OK);
  CHECK(take(svg).find("<polyline") != std::string::npos);
  CHECK(lipscert_render_svg("", &svg) == LIPSCERT_ERR_INVALID_ARGUMENT);
  lipscert_train_result_free(r);

  char* table = nullptr;
  REQUIRE(lipscert_ablate(c, "droppath", "0.2", &table) == LIPSCERT_OK);
  const std::string rows = take(table);
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 2);
  CHECK(rows.find("droppath,0.2,") != std::string::npos);
  CHECK(lipscert_ablate(c, "dropath", "0.2", &table) == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_ablate(c, "alpha", "0.1,oops", &table) == LIPSCERT_ERR_INVALID_ARGUMENT);
  CHECK(lipscert_ablate(c, "alpha", "", &table) == LIPSCERT_ERR_INVALID_ARGUMENT);
  lipscert_model_free(m);
  lipscert_config_free(c);
}
