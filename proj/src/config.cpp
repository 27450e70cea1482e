// Copyright 2026 The chronomerge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "chronomerge/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "chronomerge/errors.hpp"
#include "chronomerge/random.hpp"

namespace chronomerge {

namespace {

enum class Kind { Int, U64, Double, Bool, String, IntList };

struct Key {
  std::string name;
  Kind kind;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view what) {
  throw ConfigError(std::string(key) + ": cannot parse '" + std::string(value) + "' as " + std::string(what));
}

int to_int(std::string_view key, std::string_view v) {
  const auto s = trim(v);
  int out = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  const auto s = trim(v);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad_value(key, v, "an unsigned integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const auto s = trim(v);
  double out = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty() || !std::isfinite(out))
    bad_value(key, v, "a finite number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  std::string s = trim(v);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

#define CM_INT(NAME, FIELD)                                                                      \
  Key{NAME, Kind::Int, [](ExperimentConfig& c, std::string_view v) { c.FIELD = to_int(NAME, v); }, \
      [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }}
#define CM_DBL(NAME, FIELD)                                                                            \
  Key{NAME, Kind::Double, [](ExperimentConfig& c, std::string_view v) { c.FIELD = to_double(NAME, v); }, \
      [](const ExperimentConfig& c) { return fmt(c.FIELD); }}
#define CM_BOOL(NAME, FIELD)                                                                         \
  Key{NAME, Kind::Bool, [](ExperimentConfig& c, std::string_view v) { c.FIELD = to_bool(NAME, v); }, \
      [](const ExperimentConfig& c) { return fmt_bool(c.FIELD); }}

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back(Key{"seed", Kind::U64, [](ExperimentConfig& c, std::string_view v) { c.seed = to_u64("seed", v); },
                    [](const ExperimentConfig& c) { return std::to_string(c.seed); }});

    k.push_back(CM_INT("bench.input_dim", bench.input_dim));
    k.push_back(CM_INT("bench.class_count", bench.class_count));
    k.push_back(CM_INT("bench.task_count", bench.task_count));
    k.push_back(CM_INT("bench.holdout_count", bench.holdout_count));
    k.push_back(CM_INT("bench.samples_per_task", bench.samples_per_task));
    k.push_back(CM_DBL("bench.prototype_scale", bench.prototype_scale));
    k.push_back(CM_DBL("bench.noise", bench.noise));
    k.push_back(CM_DBL("bench.base_rotation", bench.base_rotation));
    k.push_back(CM_DBL("bench.base_offset", bench.base_offset));
    k.push_back(CM_DBL("bench.adapt_rotation", bench.adapt_rotation));
    k.push_back(CM_DBL("bench.adapt_offset", bench.adapt_offset));
    k.push_back(CM_INT("bench.pretrain_tasks", bench.pretrain_tasks));

    k.push_back(Key{"model.hidden", Kind::IntList,
                    [](ExperimentConfig& c, std::string_view v) {
                      std::vector<int> h;
                      for (const auto& item : split_list(v)) h.push_back(to_int("model.hidden", item));
                      c.hidden = std::move(h);
                    },
                    [](const ExperimentConfig& c) {
                      std::string s;
                      for (std::size_t i = 0; i < c.hidden.size(); ++i) s += (i ? "," : "") + std::to_string(c.hidden[i]);
                      return s;
                    }});

    k.push_back(CM_INT("pretrain.steps", pretrain.steps));
    k.push_back(CM_INT("pretrain.batch_size", pretrain.batch_size));
    k.push_back(CM_DBL("pretrain.peak_lr", pretrain.peak_lr));
    k.push_back(CM_DBL("pretrain.warmup_fraction", pretrain.warmup_fraction));
    k.push_back(CM_DBL("pretrain.clip_norm", pretrain.clip_norm));

    k.push_back(CM_INT("train.steps", pipeline.train.steps));
    k.push_back(CM_INT("train.batch_size", pipeline.train.batch_size));
    k.push_back(CM_DBL("train.peak_lr", pipeline.train.peak_lr));
    k.push_back(CM_DBL("train.warmup_fraction", pipeline.train.warmup_fraction));
    k.push_back(CM_DBL("train.clip_norm", pipeline.train.clip_norm));

    k.push_back(Key{"pipeline.init", Kind::String,
                    [](ExperimentConfig& c, std::string_view v) {
                      auto p = parse_init_protocol(trim(v));
                      if (!p) bad_value("pipeline.init", v, "one of ZS, FT, EMA");
                      c.pipeline.init = *p;
                    },
                    [](const ExperimentConfig& c) { return std::string(to_string(c.pipeline.init)); }});
    k.push_back(Key{"pipeline.deploy", Kind::String,
                    [](ExperimentConfig& c, std::string_view v) {
                      auto p = parse_deploy_protocol(trim(v));
                      if (!p) bad_value("pipeline.deploy", v, "one of FT, EMA, ALL");
                      c.pipeline.deploy = *p;
                    },
                    [](const ExperimentConfig& c) { return std::string(to_string(c.pipeline.deploy)); }});
    k.push_back(CM_BOOL("pipeline.replay", pipeline.replay));
    k.push_back(CM_DBL("pipeline.replay_fraction", pipeline.replay_fraction));

    k.push_back(Key{"merge.technique", Kind::String,
                    [](ExperimentConfig& c, std::string_view v) {
                      auto t = parse_technique(trim(v));
                      if (!t) bad_value("merge.technique", v, "a merge technique");
                      c.pipeline.merge.technique = *t;
                    },
                    [](const ExperimentConfig& c) { return std::string(to_string(c.pipeline.merge.technique)); }});
    k.push_back(CM_DBL("merge.lambda_scale", pipeline.merge.lambda_scale));
    k.push_back(CM_DBL("merge.slerp_weight", pipeline.merge.slerp_weight));
    k.push_back(CM_DBL("merge.prune_fraction", pipeline.merge.prune_fraction));
    k.push_back(CM_DBL("merge.dare_p", pipeline.merge.dare_p));
    k.push_back(CM_DBL("merge.bread_beta", pipeline.merge.bread_beta));
    k.push_back(CM_DBL("merge.bread_gamma", pipeline.merge.bread_gamma));
    k.push_back(CM_DBL("merge.lines_alpha", pipeline.merge.lines_alpha));
    k.push_back(CM_DBL("merge.lines_beta", pipeline.merge.lines_beta));
    k.push_back(CM_DBL("merge.ema_weight", pipeline.merge.ema_weight));
    k.push_back(Key{"merge.weighting", Kind::String,
                    [](ExperimentConfig& c, std::string_view v) {
                      auto w = parse_weighting(trim(v));
                      if (!w) bad_value("merge.weighting", v, "a weighting scheme");
                      c.pipeline.merge.weighting = *w;
                    },
                    [](const ExperimentConfig& c) { return std::string(to_string(c.pipeline.merge.weighting)); }});
    k.push_back(CM_BOOL("merge.reversed", pipeline.merge.reversed));

    k.push_back(Key{"output.dir", Kind::String,
                    [](ExperimentConfig& c, std::string_view v) { c.output_dir = trim(v); },
                    [](const ExperimentConfig& c) { return c.output_dir.string(); }});
    k.push_back(Key{"output.buffer", Kind::String,
                    [](ExperimentConfig& c, std::string_view v) {
                      const auto s = trim(v);
                      if (s == "memory") c.disk_buffer = false;
                      else if (s == "disk") c.disk_buffer = true;
                      else bad_value("output.buffer", v, "memory or disk");
                    },
                    [](const ExperimentConfig& c) { return std::string(c.disk_buffer ? "disk" : "memory"); }});
    k.push_back(CM_BOOL("output.record_wall_time", record_wall_time));
    return k;
  }();
  return keys;
}

#undef CM_INT
#undef CM_DBL
#undef CM_BOOL

const Key& find_key(std::string_view name) {
  for (const auto& k : key_table())
    if (k.name == name) return k;
  throw ConfigError("unknown configuration key '" + std::string(name) + "'");
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t ExperimentConfig::stream_seed() const { return derive_seed(seed, 11); }
std::uint64_t ExperimentConfig::pretrain_seed() const { return derive_seed(seed, 12); }
std::uint64_t ExperimentConfig::train_seed() const { return derive_seed(seed, 13); }
std::uint64_t ExperimentConfig::merge_seed() const { return derive_seed(seed, 14); }

ModelSpec ExperimentConfig::model_spec() const {
  ModelSpec m;
  m.input_dim = bench.input_dim;
  m.hidden = hidden;
  m.class_count = bench.class_count;
  return m;
}

PipelineConfig ExperimentConfig::resolved_pipeline() const {
  PipelineConfig p = pipeline;
  p.task_count = bench.task_count;
  p.train_seed = train_seed();
  p.merge.rng_seed = merge_seed();
  return p;
}

BenchSpec ExperimentConfig::resolved_bench() const {
  BenchSpec b = bench;
  b.stream_seed = stream_seed();
  return b;
}

void ExperimentConfig::validate() const {
  if (bench.input_dim < 1) throw ConfigError("bench.input_dim must be >= 1");
  if (bench.class_count < 2) throw ConfigError("bench.class_count must be >= 2");
  if (bench.task_count < 1) throw ConfigError("bench.task_count must be >= 1");
  if (bench.holdout_count < 1) throw ConfigError("bench.holdout_count must be >= 1");
  if (bench.samples_per_task < 1) throw ConfigError("bench.samples_per_task must be >= 1");
  if (bench.pretrain_tasks < 1) throw ConfigError("bench.pretrain_tasks must be >= 1");
  if (!(bench.noise >= 0.0)) throw ConfigError("bench.noise must be >= 0");
  for (int h : hidden)
    if (h < 1) throw ConfigError("model.hidden entries must be >= 1");
  if (pretrain.steps < 0) throw ConfigError("pretrain.steps must be >= 0");
  if (pretrain.batch_size < 1) throw ConfigError("pretrain.batch_size must be >= 1");
  if (!(pretrain.peak_lr > 0.0)) throw ConfigError("pretrain.peak_lr must be > 0");
  if (!(pretrain.warmup_fraction >= 0.0 && pretrain.warmup_fraction <= 1.0))
    throw ConfigError("pretrain.warmup_fraction must lie in [0, 1]");
  if (!(pretrain.clip_norm > 0.0)) throw ConfigError("pretrain.clip_norm must be > 0");
  resolved_pipeline().validate();
}

std::filesystem::path default_output_root() {
  const char* env = std::getenv("CHRONOMERGE_OUT");
  if (env && *env) return env;
  return "chronomerge_out";
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& k : key_table()) n.push_back(k.name);
    return n;
  }();
  return names;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  find_key(trim(key)).set(config, value);
}

std::string get_config_value(const ExperimentConfig& config, std::string_view key) {
  return find_key(trim(key)).get(config);
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  set_config_value(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

ExperimentConfig parse_config_text(std::string_view text, ExperimentConfig base) {
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find_first_of("#;");
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto full = section.empty() ? key : section + "." + key;
    set_config_value(base, full, std::string_view(line).substr(eq + 1));
  }
  return base;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : key_table()) {
    const auto v = k.get(config);
    switch (k.kind) {
      case Kind::Int: j[k.name] = std::stoll(v); break;
      case Kind::U64: j[k.name] = config.seed; break;
      case Kind::Double: j[k.name] = to_double(k.name, v); break;
      case Kind::Bool: j[k.name] = (v == "true"); break;
      case Kind::String: j[k.name] = v; break;
      case Kind::IntList: j[k.name] = config.hidden; break;
    }
  }
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base) {
  const nlohmann::json& obj = (j.is_object() && j.contains("config")) ? j.at("config") : j;
  if (!obj.is_object()) throw ConfigError("JSON configuration must be an object");
  for (const auto& [key, value] : obj.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + value[i].dump();
    } else if (value.is_number() || value.is_boolean()) {
      text = value.dump();
    } else {
      throw ConfigError(key + ": unsupported JSON value");
    }
    set_config_value(base, key, text);
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (path.extension() == ".json" || (first != std::string::npos && text[first] == '{')) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid JSON config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
  }
  return parse_config_text(text);
}

std::string config_to_text(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : key_table()) {
    const auto dot = k.name.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.name.substr(0, dot);
    const std::string key = dot == std::string::npos ? k.name : k.name.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += key + " = " + k.get(config) + "\n";
  }
  return out;
}

}  // namespace chronomerge
