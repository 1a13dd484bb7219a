// Copyright 2026 The lipscert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "lipscert/lipscert.h"

#include <cstring>
#include <fstream>
#include <ios>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "autodiff/registry.hpp"
#include "lipcert/certify.hpp"
#include "model/config.hpp"
#include "model/dataset.hpp"
#include "model/model.hpp"
#include "model/train.hpp"
#include "model/weights.hpp"
#include "report/report.hpp"

struct lipscert_config {
  lipscert::ModelConfig value;
};

struct lipscert_model {
  lipscert::Model value;
};

struct lipscert_cert_report {
  lipscert::CertReport value;
};

struct lipscert_train_result {
  lipscert::TrainMetrics metrics;
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;
};

namespace {

thread_local std::string g_last_error;

lipscert_status fail(lipscert_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

/// Runs body, translating exceptions into status codes.
template <typename F>
lipscert_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return LIPSCERT_OK;
  } catch (const lipscert::NonLipschitzError& e) {
    return fail(LIPSCERT_ERR_NON_LIPSCHITZ, e.what());
  } catch (const lipscert::NumericError& e) {
    return fail(LIPSCERT_ERR_NUMERIC, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(LIPSCERT_ERR_IO, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(LIPSCERT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(LIPSCERT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(LIPSCERT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(LIPSCERT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LIPSCERT_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " must not be NULL");
}

std::size_t norm_index(const lipscert::CertReport& r, int norm) {
  const lipscert::PNorm want = norm == LIPSCERT_NORM_2     ? lipscert::PNorm::Two
                               : norm == LIPSCERT_NORM_INF ? lipscert::PNorm::Inf
                                                           : throw std::invalid_argument("norm must be a single LIPSCERT_NORM_* bit");
  for (std::size_t i = 0; i < r.norms.size(); ++i) {
    if (r.norms[i] == want) return i;
  }
  throw std::invalid_argument("norm " + lipscert::pnorm_name(want) + " was not certified");
}

}  // namespace

extern "C" {

const char* lipscert_version(void) {
  static const std::string v = lipscert::tool_version();
  return v.c_str();
}

const char* lipscert_last_error(void) { return g_last_error.c_str(); }

const char* lipscert_status_name(lipscert_status s) {
  switch (s) {
    case LIPSCERT_OK: return "ok";
    case LIPSCERT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LIPSCERT_ERR_NON_LIPSCHITZ: return "non-Lipschitz";
    case LIPSCERT_ERR_NUMERIC: return "numeric error";
    case LIPSCERT_ERR_IO: return "i/o error";
    case LIPSCERT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void lipscert_string_free(char* s) { std::free(s); }

lipscert_status lipscert_config_default(lipscert_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new lipscert_config{};
  });
}

lipscert_status lipscert_config_parse(const char* json, lipscert_config** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = new lipscert_config{lipscert::parse_config(json)};
  });
}

lipscert_status lipscert_config_load(const char* path, lipscert_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new lipscert_config{lipscert::load_config(path)};
  });
}

void lipscert_config_free(lipscert_config* cfg) { delete cfg; }

lipscert_status lipscert_config_set(lipscert_config* cfg, const char* key, const char* value_json) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value_json, "value_json");
    nlohmann::json doc = nlohmann::json::parse(lipscert::config_to_json(cfg->value));
    nlohmann::json* node = &doc;
    std::istringstream path(key);
    std::string part;
    while (std::getline(path, part, '.')) {
      if (!node->is_object() || !node->contains(part)) {
        throw lipscert::ConfigError(std::string("unknown config key '") + key + "'");
      }
      node = &(*node)[part];
    }
    *node = nlohmann::json::parse(value_json);
    cfg->value = lipscert::parse_config(doc.dump());
  });
}

lipscert_status lipscert_config_seed(const lipscert_config* cfg, uint64_t* out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = cfg->value.seed;
  });
}

lipscert_status lipscert_config_to_json(const lipscert_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(lipscert::config_to_json(cfg->value) + "\n");
  });
}

lipscert_status lipscert_model_create(const lipscert_config* cfg, lipscert_model** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = new lipscert_model{lipscert::Model(cfg->value)};
  });
}

void lipscert_model_free(lipscert_model* model) { delete model; }

lipscert_status lipscert_model_param_count(const lipscert_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->value.param_count();
  });
}

lipscert_status lipscert_model_save(const lipscert_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    lipscert::Model copy = model->value;
    lipscert::save_weights(copy, path);
  });
}

lipscert_status lipscert_model_load(lipscert_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    lipscert::load_weights(model->value, path);
  });
}

lipscert_status lipscert_model_forward(const lipscert_model* model, const double* images, size_t batch,
                                       double* logits) {
  return guarded([&] {
    require(model, "model");
    require(images, "images");
    require(logits, "logits");
    if (batch == 0) throw std::invalid_argument("batch must be at least 1");
    lipscert::Shape shape{batch};
    for (std::size_t d : model->value.input_shape()) shape.push_back(d);
    lipscert::Tensor x(shape);
    std::memcpy(x.values().data(), images, x.size() * sizeof(double));
    const lipscert::Tensor y = model->value.forward(x);
    std::memcpy(logits, y.values().data(), y.size() * sizeof(double));
  });
}

void lipscert_cert_options_default(lipscert_cert_options* opts) {
  if (!opts) return;
  opts->pairs = lipscert::kDefaultPairs;
  opts->jac_points = lipscert::kDefaultJacPoints;
  opts->seed = 0;
  opts->norms = LIPSCERT_NORM_2 | LIPSCERT_NORM_INF;
  opts->gradcheck = 1;
}

lipscert_status lipscert_certify(const lipscert_model* model, const lipscert_cert_options* opts,
                                 lipscert_cert_report** out) {
  return guarded([&] {
    require(model, "model");
    require(opts, "opts");
    require(out, "out");
    if ((opts->norms & ~(LIPSCERT_NORM_2 | LIPSCERT_NORM_INF)) || opts->norms == 0) {
      throw std::invalid_argument("norms must be a nonempty combination of LIPSCERT_NORM_2 and LIPSCERT_NORM_INF");
    }
    lipscert::CertOptions o;
    o.norms.clear();
    if (opts->norms & LIPSCERT_NORM_2) o.norms.push_back(lipscert::PNorm::Two);
    if (opts->norms & LIPSCERT_NORM_INF) o.norms.push_back(lipscert::PNorm::Inf);
    o.empirical.n_pairs = opts->pairs;
    o.empirical.n_jac_points = opts->jac_points;
    o.empirical.seed = opts->seed;
    o.empirical.validate();
    o.gradcheck = opts->gradcheck != 0;
    *out = new lipscert_cert_report{lipscert::certify_model(model->value, o)};
  });
}

void lipscert_cert_report_free(lipscert_cert_report* report) { delete report; }

lipscert_status lipscert_cert_report_pass(const lipscert_cert_report* report, int* pass) {
  return guarded([&] {
    require(report, "report");
    require(pass, "pass");
    *pass = report->value.pass ? 1 : 0;
  });
}

lipscert_status lipscert_cert_report_model(const lipscert_cert_report* report, int norm,
                                           double* theoretical, double* empirical) {
  return guarded([&] {
    require(report, "report");
    const std::size_t i = norm_index(report->value, norm);
    if (theoretical) *theoretical = report->value.model.theoretical[i];
    if (empirical) *empirical = report->value.model.empirical[i].value;
  });
}

lipscert_status lipscert_cert_report_json(const lipscert_cert_report* report, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup_string(lipscert::report_text(report->value));
  });
}

const char* lipscert_gradcheck_modules(void) {
  static const std::string names = [] {
    std::string s;
    for (const std::string& m : lipscert::registry_modules()) s += (s.empty() ? "" : ",") + m;
    return s;
  }();
  return names.c_str();
}

lipscert_status lipscert_gradcheck(const char* module, size_t n, size_t d, double step, double tol,
                                   uint64_t seed, lipscert_gradcheck_result* result,
                                   char** report_text) {
  return guarded([&] {
    require(module, "module");
    require(result, "result");
    if (!(step > 0.0) || !(tol > 0.0)) throw std::invalid_argument("step and tol must be positive");
    const lipscert::DiffOp op = lipscert::make_registry_op(module, n, d, seed);
    const lipscert::GradCheckReport r = lipscert::finite_diff_check(op, step, tol, seed);
    result->max_rel_error = r.max_rel_error;
    result->checked = 0;
    result->excluded = 0;
    for (const lipscert::TensorCheck& t : r.tensors) {
      result->checked += t.checked;
      result->excluded += t.excluded;
    }
    result->pass = r.pass ? 1 : 0;
    if (report_text) *report_text = dup_string(lipscert::format_report(r));
  });
}

lipscert_status lipscert_train(lipscert_model* model, lipscert_train_result** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    const lipscert::ModelConfig& c = model->value.config();
    const lipscert::SyntheticData data = lipscert::synth_dataset(c);
    auto r = std::make_unique<lipscert_train_result>();
    r->metrics = lipscert::train(model->value, data.train, &data.eval, c.train);
    if (!r->metrics.evals.empty()) {
      r->train_accuracy = r->metrics.evals.back().train_accuracy;
      r->eval_accuracy = r->metrics.evals.back().eval_accuracy;
    }
    *out = r.release();
  });
}

void lipscert_train_result_free(lipscert_train_result* result) { delete result; }

lipscert_status lipscert_train_result_verdict(const lipscert_train_result* result,
                                              lipscert_verdict* verdict) {
  return guarded([&] {
    require(result, "result");
    require(verdict, "verdict");
    switch (result->metrics.verdict()) {
      case lipscert::Verdict::Converged: *verdict = LIPSCERT_CONVERGED; break;
      case lipscert::Verdict::NotConverged: *verdict = LIPSCERT_NOT_CONVERGED; break;
      case lipscert::Verdict::Diverged: *verdict = LIPSCERT_DIVERGED; break;
    }
  });
}

lipscert_status lipscert_train_result_summary(const lipscert_train_result* result, size_t* steps_run,
                                              int* nan_flag, double* train_accuracy,
                                              double* eval_accuracy) {
  return guarded([&] {
    require(result, "result");
    if (steps_run) *steps_run = result->metrics.steps.size();
    if (nan_flag) *nan_flag = result->metrics.nan_flag ? 1 : 0;
    if (train_accuracy) *train_accuracy = result->train_accuracy;
    if (eval_accuracy) *eval_accuracy = result->eval_accuracy;
  });
}

lipscert_status lipscert_train_result_csv(const lipscert_train_result* result, char** out) {
  return guarded([&] {
    require(result, "result");
    require(out, "out");
    *out = dup_string(lipscert::metrics_csv(result->metrics));
  });
}

lipscert_status lipscert_ablate(const lipscert_config* base, const char* axis, const char* values,
                                char** csv_out) {
  return guarded([&] {
    require(base, "base");
    require(axis, "axis");
    require(values, "values");
    require(csv_out, "csv_out");
    const lipscert::AblationAxis a = lipscert::parse_ablation_axis(axis);
    std::vector<std::string> list;
    std::istringstream is(values);
    std::string v;
    while (std::getline(is, v, ',')) {
      if (v.empty()) throw lipscert::ConfigError("empty ablation value");
      list.push_back(v);
    }
    if (list.empty()) throw lipscert::ConfigError("no ablation values given");
    // Validate every value before spending time on training.
    for (const std::string& s : list) lipscert::apply_ablation(base->value, a, s).validate();
    *csv_out = dup_string(lipscert::ablation_csv(a, lipscert::ablation_sweep(a, base->value, list)));
  });
}

lipscert_status lipscert_render_svg(const char* metrics_csv, char** svg_out) {
  return guarded([&] {
    require(metrics_csv, "metrics_csv");
    require(svg_out, "svg_out");
    *svg_out = dup_string(lipscert::render_metrics_svg(lipscert::parse_metrics_csv(metrics_csv)));
  });
}

}  // extern "C"
