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

#include "model/config.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lipscert {

using nlohmann::json;

std::string norm_kind_name(NormKind k) {
  switch (k) {
    case NormKind::CenterNorm: return "centernorm";
    case NormKind::LayerNorm: return "layernorm";
    case NormKind::None: return "none";
  }
  return "?";
}

NormKind parse_norm_kind(const std::string& s) {
  if (s == "centernorm") return NormKind::CenterNorm;
  if (s == "layernorm") return NormKind::LayerNorm;
  if (s == "none") return NormKind::None;
  throw ConfigError("norm_kind must be centernorm, layernorm or none (got '" + s + "')");
}

std::string norm_placement_name(NormPlacement p) {
  switch (p) {
    case NormPlacement::Wrap: return "wrap";
    case NormPlacement::Pre: return "pre";
    case NormPlacement::Branch: return "branch";
  }
  return "?";
}

NormPlacement parse_norm_placement(const std::string& s) {
  if (s == "wrap") return NormPlacement::Wrap;
  if (s == "pre") return NormPlacement::Pre;
  if (s == "branch") return NormPlacement::Branch;
  throw ConfigError("norm_placement must be wrap, pre or branch (got '" + s + "')");
}

std::string schedule_name(Schedule s) { return s == Schedule::Cosine ? "cosine" : "constant"; }

Schedule parse_schedule(const std::string& s) {
  if (s == "cosine") return Schedule::Cosine;
  if (s == "constant") return Schedule::Constant;
  throw ConfigError("schedule must be cosine or constant (got '" + s + "')");
}

std::size_t ModelConfig::total_blocks() const {
  return std::accumulate(stage_depths.begin(), stage_depths.end(), std::size_t{0});
}

double ModelConfig::resolved_alpha() const {
  if (alpha) return *alpha;
  const std::size_t m = total_blocks();
  return m ? 1.0 / static_cast<double>(m) : 0.0;
}

void ModelConfig::validate() const {
  const std::size_t s = stage_depths.size();
  if (s == 0) throw ConfigError("stage_depths must name at least one stage");
  if (channels.size() != s || heads.size() != s) {
    throw ConfigError("stage_depths, channels and heads must have equal length");
  }
  for (std::size_t i = 0; i < s; ++i) {
    if (channels[i] < 2) throw ConfigError("channels must be >= 2");
    if (heads[i] < 1 || channels[i] % heads[i] != 0) {
      throw ConfigError("heads[" + std::to_string(i) + "] must divide channels[" +
                        std::to_string(i) + "]");
    }
    if (i > 0 && channels[i] != 2 * channels[i - 1]) {
      throw ConfigError("channels must double between stages");
    }
  }
  if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
  const std::size_t reduce = patch_size << (s - 1);
  if (image_size == 0 || image_size % reduce != 0) {
    throw ConfigError("image_size " + std::to_string(image_size) +
                      " must be divisible by patch_size * 2^(stages-1) = " +
                      std::to_string(reduce));
  }
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
  if (ffn_ratio < 1) throw ConfigError("ffn_ratio must be >= 1");
  if (alpha && !std::isfinite(*alpha)) throw ConfigError("alpha must be finite");
  if (!(droppath >= 0.0 && droppath <= 1.0)) throw ConfigError("droppath must lie in [0, 1]");
  if (!(tau > 0.0 && std::isfinite(tau))) throw ConfigError("tau must be > 0");
  if (!(nu > 0.0 && std::isfinite(nu))) throw ConfigError("nu must be > 0");
  if (!(eps > 0.0 && std::isfinite(eps))) throw ConfigError("eps must be > 0");
  if (dataset.n_per_class < 5) throw ConfigError("dataset.n_per_class must be >= 5");
  if (!(dataset.noise_std >= 0.0)) throw ConfigError("dataset.noise_std must be >= 0");
  if (train.steps < 1) throw ConfigError("train.steps must be >= 1");
  if (!(train.lr >= 0.0 && std::isfinite(train.lr))) throw ConfigError("train.lr must be >= 0");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(train.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(train.label_smoothing >= 0.0 && train.label_smoothing < 1.0)) {
    throw ConfigError("train.label_smoothing must lie in [0, 1)");
  }
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + where + key + "'");
  }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + where + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("key '" + where + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("key '" + where + key + "' must be a number");
  return v.get<double>();
}

std::vector<std::size_t> get_counts(const json& obj, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(std::string("key '") + key + "' must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 0) {
      throw ConfigError(std::string("key '") + key + "' must hold nonnegative integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

}  // namespace

ModelConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"schema_version", "stage_depths", "channels", "heads", "alpha", "droppath",
                  "norm_kind", "norm_placement", "attn_kind", "init_kind", "tau", "nu", "eps",
                  "image_size", "in_channels", "patch_size", "n_classes", "ffn_ratio", "seed",
                  "freeze_scalars", "clamp_gamma", "dataset", "train"},
                 "");
  if (!doc.contains("schema_version")) throw ConfigError("missing key 'schema_version'");
  if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<int>() != kSchemaVersion) {
    throw ConfigError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  }

  ModelConfig c;
  if (doc.contains("stage_depths")) c.stage_depths = get_counts(doc, "stage_depths");
  if (doc.contains("channels")) c.channels = get_counts(doc, "channels");
  if (doc.contains("heads")) c.heads = get_counts(doc, "heads");
  if (doc.contains("alpha")) {
    const json& a = doc["alpha"];
    if (a.is_string()) {
      if (a.get<std::string>() != "auto") throw ConfigError("alpha must be \"auto\" or a number");
      c.alpha.reset();
    } else if (a.is_number()) {
      c.alpha = a.get<double>();
    } else {
      throw ConfigError("alpha must be \"auto\" or a number");
    }
  }
  if (doc.contains("droppath")) c.droppath = get_number(doc, "droppath", "");
  try {
    if (doc.contains("norm_kind")) c.norm_kind = parse_norm_kind(get_as<std::string>(doc, "norm_kind", ""));
    if (doc.contains("norm_placement"))
      c.norm_placement = parse_norm_placement(get_as<std::string>(doc, "norm_placement", ""));
    if (doc.contains("attn_kind"))
      c.attn_kind = parse_attention_kind(get_as<std::string>(doc, "attn_kind", ""));
    if (doc.contains("init_kind"))
      c.init_kind = parse_init_kind(get_as<std::string>(doc, "init_kind", ""));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (doc.contains("tau")) c.tau = get_number(doc, "tau", "");
  if (doc.contains("nu")) c.nu = get_number(doc, "nu", "");
  if (doc.contains("eps")) c.eps = get_number(doc, "eps", "");
  if (doc.contains("image_size")) c.image_size = get_count(doc, "image_size", "");
  if (doc.contains("in_channels")) c.in_channels = get_count(doc, "in_channels", "");
  if (doc.contains("patch_size")) c.patch_size = get_count(doc, "patch_size", "");
  if (doc.contains("n_classes")) c.n_classes = get_count(doc, "n_classes", "");
  if (doc.contains("ffn_ratio")) c.ffn_ratio = get_count(doc, "ffn_ratio", "");
  if (doc.contains("seed")) c.seed = get_count(doc, "seed", "");
  if (doc.contains("freeze_scalars")) c.freeze_scalars = get_as<bool>(doc, "freeze_scalars", "");
  if (doc.contains("clamp_gamma")) c.clamp_gamma = get_as<bool>(doc, "clamp_gamma", "");

  if (doc.contains("dataset")) {
    const json& d = doc["dataset"];
    if (!d.is_object()) throw ConfigError("key 'dataset' must be an object");
    reject_unknown(d, {"n_per_class", "noise_std"}, "dataset.");
    if (d.contains("n_per_class")) c.dataset.n_per_class = get_count(d, "n_per_class", "dataset.");
    if (d.contains("noise_std")) c.dataset.noise_std = get_number(d, "noise_std", "dataset.");
  }
  if (doc.contains("train")) {
    const json& t = doc["train"];
    if (!t.is_object()) throw ConfigError("key 'train' must be an object");
    reject_unknown(t,
                   {"steps", "lr", "batch_size", "warmup_steps", "weight_decay", "schedule",
                    "label_smoothing"},
                   "train.");
    if (t.contains("steps")) c.train.steps = get_count(t, "steps", "train.");
    if (t.contains("lr")) c.train.lr = get_number(t, "lr", "train.");
    if (t.contains("batch_size")) c.train.batch_size = get_count(t, "batch_size", "train.");
    if (t.contains("warmup_steps")) c.train.warmup_steps = get_count(t, "warmup_steps", "train.");
    if (t.contains("weight_decay")) c.train.weight_decay = get_number(t, "weight_decay", "train.");
    if (t.contains("schedule")) c.train.schedule = parse_schedule(get_as<std::string>(t, "schedule", "train."));
    if (t.contains("label_smoothing"))
      c.train.label_smoothing = get_number(t, "label_smoothing", "train.");
  }
  c.validate();
  return c;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ModelConfig& c, int indent) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["stage_depths"] = c.stage_depths;
  j["channels"] = c.channels;
  j["heads"] = c.heads;
  if (c.alpha) {
    j["alpha"] = *c.alpha;
  } else {
    j["alpha"] = "auto";
  }
  j["droppath"] = c.droppath;
  j["norm_kind"] = norm_kind_name(c.norm_kind);
  j["norm_placement"] = norm_placement_name(c.norm_placement);
  j["attn_kind"] = attention_kind_name(c.attn_kind);
  j["init_kind"] = init_kind_name(c.init_kind);
  j["tau"] = c.tau;
  j["nu"] = c.nu;
  j["eps"] = c.eps;
  j["image_size"] = c.image_size;
  j["in_channels"] = c.in_channels;
  j["patch_size"] = c.patch_size;
  j["n_classes"] = c.n_classes;
  j["ffn_ratio"] = c.ffn_ratio;
  j["seed"] = c.seed;
  j["freeze_scalars"] = c.freeze_scalars;
  j["clamp_gamma"] = c.clamp_gamma;
  j["dataset"] = {{"n_per_class", c.dataset.n_per_class}, {"noise_std", c.dataset.noise_std}};
  j["train"] = {{"steps", c.train.steps},
                {"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"warmup_steps", c.train.warmup_steps},
                {"weight_decay", c.train.weight_decay},
                {"schedule", schedule_name(c.train.schedule)},
                {"label_smoothing", c.train.label_smoothing}};
  return j.dump(indent);
}

}  // namespace lipscert
