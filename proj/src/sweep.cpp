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

#include "chronomerge/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "chronomerge/errors.hpp"

namespace chronomerge {

namespace {

std::vector<std::string> tenths() {
  return {"0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9", "1"};
}

std::string normalise_key(std::string key) {
  if (key.find('.') == std::string::npos) key = "merge." + key;
  return key;
}

void check_axis(const SweepAxis& axis) {
  if (axis.values.empty()) throw ConfigError("sweep axis " + axis.key + " has no values");
  if (axis.key == "merge.technique" || axis.key == "seed")
    throw ConfigError("sweep axis " + axis.key + " is controlled by the grid itself");
  ExperimentConfig probe;
  for (const auto& v : axis.values) set_config_value(probe, axis.key, v);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

// Everything that changes the prepared bench or base model.
std::string prepare_key(const ExperimentConfig& c) {
  std::string k = "seed=" + std::to_string(c.seed);
  for (const auto& name : config_keys()) {
    if (name.rfind("bench.", 0) == 0 || name.rfind("model.", 0) == 0 || name.rfind("pretrain.", 0) == 0)
      k += ";" + name + "=" + get_config_value(c, name);
  }
  return k;
}

template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) fn(i);
  };
  const int n = std::max(1, std::min(jobs, count));
  std::vector<std::thread> pool;
  for (int j = 1; j < n; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<SweepAxis> default_technique_axes(Technique technique) {
  switch (technique) {
    case Technique::WA:
    case Technique::MODEL_STOCK:
      return {};
    case Technique::SLERP:
      return {{"merge.slerp_weight", {"0.1", "0.3", "0.5", "0.7", "0.9"}}};
    case Technique::TA:
      return {{"merge.lambda_scale", tenths()}};
    case Technique::TIES:
    case Technique::BREADCRUMBS_TIES:
      return {{"merge.lambda_scale", tenths()}, {"merge.prune_fraction", tenths()}};
    case Technique::DARE_TIES: {
      auto p = tenths();
      p.pop_back();  // drop probability must stay below 1
      return {{"merge.lambda_scale", tenths()}, {"merge.dare_p", p}};
    }
    case Technique::MAGMAX:
      return {{"merge.lambda_scale", {"0.2", "0.4", "0.8", "1"}}};
    case Technique::LINES_TIES:
      return {{"merge.lines_alpha", {"0.5"}},
              {"merge.lines_beta", {"0.2", "0.5", "0.8"}},
              {"merge.prune_fraction", {"0.2", "0.5", "0.8"}}};
  }
  return {};
}

SweepGrid default_grid() {
  SweepGrid g;
  for (auto t : {Technique::WA, Technique::SLERP, Technique::TA, Technique::TIES, Technique::DARE_TIES,
                 Technique::BREADCRUMBS_TIES, Technique::MODEL_STOCK, Technique::MAGMAX, Technique::LINES_TIES})
    g.techniques.emplace_back(t, default_technique_axes(t));
  return g;
}

SweepGrid parse_grid_text(std::string_view text) {
  SweepGrid grid;
  std::vector<Technique> order;
  std::map<Technique, std::vector<SweepAxis>> sections;
  bool defaults = false;
  std::optional<Technique> section;

  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find_first_of("#;");
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "grid line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      const auto name = trim(std::string_view(line).substr(1, line.size() - 2));
      section = parse_technique(name);
      if (!section) throw ConfigError(where + "unknown technique '" + name + "'");
      sections[*section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const auto values = split_list(std::string_view(line).substr(eq + 1));

    if (section) {
      SweepAxis axis{normalise_key(key), values};
      check_axis(axis);
      sections[*section].push_back(std::move(axis));
    } else if (key == "techniques") {
      for (const auto& v : values) {
        auto t = parse_technique(v);
        if (!t) throw ConfigError(where + "unknown technique '" + v + "'");
        if (std::find(order.begin(), order.end(), *t) == order.end()) order.push_back(*t);
      }
    } else if (key == "seeds") {
      for (const auto& v : values) {
        std::uint64_t s = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
        if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(where + "bad seed '" + v + "'");
        grid.seeds.push_back(s);
      }
    } else if (key == "defaults") {
      if (values.size() != 1 || (values[0] != "true" && values[0] != "false"))
        throw ConfigError(where + "defaults must be true or false");
      defaults = values[0] == "true";
    } else {
      if (key.find('.') == std::string::npos) throw ConfigError(where + "unknown grid key '" + key + "'");
      SweepAxis axis{key, values};
      check_axis(axis);
      grid.common.push_back(std::move(axis));
    }
  }

  if (order.empty()) {
    for (const auto& [t, axes] : sections) order.push_back(t);
    if (order.empty() && defaults)
      for (const auto& [t, axes] : default_grid().techniques) order.push_back(t);
  }
  for (auto t : order) {
    auto it = sections.find(t);
    if (it != sections.end()) grid.techniques.emplace_back(t, it->second);
    else grid.techniques.emplace_back(t, defaults ? default_technique_axes(t) : std::vector<SweepAxis>{});
  }
  return grid;
}

SweepGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open grid file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid_text(ss.str());
}

std::vector<SweepCell> enumerate_cells(const ExperimentConfig& base, const SweepGrid& grid) {
  std::vector<std::pair<Technique, std::vector<SweepAxis>>> techniques = grid.techniques;
  if (techniques.empty()) techniques.emplace_back(base.pipeline.merge.technique, std::vector<SweepAxis>{});
  const std::vector<std::uint64_t> seeds = grid.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : grid.seeds;

  std::vector<SweepCell> cells;
  for (const auto& [technique, own] : techniques) {
    std::vector<SweepAxis> axes = grid.common;
    axes.insert(axes.end(), own.begin(), own.end());
    std::vector<std::size_t> idx(axes.size(), 0);
    bool done = false;
    while (!done) {
      ParamList params;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        auto it = std::find_if(params.begin(), params.end(), [&](const auto& p) { return p.first == axes[a].key; });
        if (it != params.end()) it->second = axes[a].values[idx[a]];
        else params.emplace_back(axes[a].key, axes[a].values[idx[a]]);
      }
      std::sort(params.begin(), params.end());
      for (auto s : seeds) {
        SweepCell c;
        c.index = static_cast<int>(cells.size());
        c.technique = technique;
        c.seed = s;
        c.params = params;
        cells.push_back(std::move(c));
      }
      done = true;
      for (std::size_t a = axes.size(); a-- > 0;) {
        if (++idx[a] < axes[a].values.size()) {
          done = false;
          break;
        }
        idx[a] = 0;
      }
    }
  }
  return cells;
}

ExperimentConfig cell_config(const ExperimentConfig& base, const SweepCell& cell) {
  ExperimentConfig c = base;
  c.seed = cell.seed;
  c.pipeline.merge.technique = cell.technique;
  for (const auto& [k, v] : cell.params) set_config_value(c, k, v);
  return c;
}

std::string params_label(Technique technique, const ParamList& params) {
  std::string s(to_string(technique));
  for (const auto& [k, v] : params) s += ";" + k + "=" + v;
  return s;
}

void select_best(SweepResult& result) {
  result.groups.clear();
  result.best.reset();
  result.best_per_technique.clear();

  std::vector<std::string> labels;
  std::map<std::string, SweepSelection> acc;
  std::set<std::string> failed;
  for (const auto& row : result.rows) {
    const auto label = params_label(row.cell.technique, row.cell.params);
    if (!row.ok) {
      failed.insert(label);
      continue;
    }
    auto [it, inserted] = acc.try_emplace(label);
    if (inserted) {
      labels.push_back(label);
      it->second.technique = row.cell.technique;
      it->second.params = row.cell.params;
    }
    it->second.knowledge_accumulation += row.final_row.knowledge_accumulation;
    it->second.zero_shot_retention += row.final_row.zero_shot_retention;
    it->second.geo_mean += row.final_row.geo_mean;
    it->second.seeds += 1;
  }
  // A group with any failed replicate is not eligible.
  for (const auto& label : labels) {
    if (failed.count(label)) continue;
    SweepSelection s = acc.at(label);
    s.knowledge_accumulation /= s.seeds;
    s.zero_shot_retention /= s.seeds;
    s.geo_mean /= s.seeds;
    result.groups.push_back(std::move(s));
  }

  auto better = [](const SweepSelection& a, const SweepSelection& b) {
    if (a.geo_mean != b.geo_mean) return a.geo_mean > b.geo_mean;
    return params_label(a.technique, a.params) < params_label(b.technique, b.params);
  };
  for (const auto& g : result.groups) {
    if (!result.best || better(g, *result.best)) result.best = g;
    auto it = std::find_if(result.best_per_technique.begin(), result.best_per_technique.end(),
                           [&](const SweepSelection& s) { return s.technique == g.technique; });
    if (it == result.best_per_technique.end()) result.best_per_technique.push_back(g);
    else if (better(g, *it)) *it = g;
  }
}

SweepResult run_sweep(const ExperimentConfig& base, const SweepGrid& grid, const SweepOptions& options) {
  const auto cells = enumerate_cells(base, grid);
  std::vector<ExperimentConfig> configs;
  configs.reserve(cells.size());
  for (const auto& c : cells) configs.push_back(cell_config(base, c));

  // Shared benches and base models, one per distinct preparation key.
  std::vector<std::string> keys;
  std::map<std::string, std::size_t> key_slot;
  std::vector<std::size_t> cell_slot(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto k = prepare_key(configs[i]);
    auto [it, inserted] = key_slot.try_emplace(k, keys.size());
    if (inserted) keys.push_back(k);
    cell_slot[i] = it->second;
  }
  std::vector<std::shared_ptr<PreparedBench>> prepared(keys.size());
  std::vector<std::string> prepare_error(keys.size());
  std::vector<std::size_t> first_cell(keys.size());
  for (std::size_t i = cells.size(); i-- > 0;) first_cell[cell_slot[i]] = i;
  parallel_for(static_cast<int>(keys.size()), options.jobs, [&](int k) {
    try {
      prepared[static_cast<std::size_t>(k)] = std::make_shared<PreparedBench>(prepare_bench(configs[first_cell[k]]));
    } catch (const std::exception& e) {
      prepare_error[static_cast<std::size_t>(k)] = e.what();
    }
  });

  SweepResult result;
  result.rows.resize(cells.size());
  parallel_for(static_cast<int>(cells.size()), options.jobs, [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    SweepRow& row = result.rows[ui];
    row.cell = cells[ui];
    const auto slot = cell_slot[ui];
    if (!prepared[slot]) {
      row.error = prepare_error[slot];
      return;
    }
    try {
      RunOptions ro;
      ro.with_multitask = false;
      if (options.out_dir) ro.out_dir = *options.out_dir / "cells" / std::to_string(i);
      const auto r = run_experiment(configs[ui], *prepared[slot], ro);
      row.final_row = r.trajectory.back();
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  select_best(result);

  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    {
      std::ofstream csv(*options.out_dir / "sweep.csv", std::ios::binary | std::ios::trunc);
      if (!csv) throw IoError("cannot write sweep.csv");
      write_sweep_csv(csv, result);
    }
    std::ofstream js(*options.out_dir / "best.json", std::ios::binary | std::ios::trunc);
    if (!js) throw IoError("cannot write best.json");
    js << best_json(result).dump(2) << '\n';
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  std::set<std::string> keys;
  for (const auto& r : result.rows)
    for (const auto& [k, v] : r.cell.params) keys.insert(k);

  out << "cell,technique,seed";
  for (const auto& k : keys) out << ',' << k;
  out << ",status,A_KA,A_ZS,geo_mean,error\n";
  for (const auto& r : result.rows) {
    out << r.cell.index << ',' << to_string(r.cell.technique) << ',' << r.cell.seed;
    for (const auto& k : keys) {
      out << ',';
      for (const auto& [pk, pv] : r.cell.params)
        if (pk == k) out << csv_escape(pv);
    }
    if (r.ok) {
      out << ",ok," << format_fixed6(r.final_row.knowledge_accumulation) << ','
          << format_fixed6(r.final_row.zero_shot_retention) << ',' << format_fixed6(r.final_row.geo_mean) << ",\n";
    } else {
      out << ",failed,,,," << csv_escape(r.error) << '\n';
    }
  }
}

nlohmann::json best_json(const SweepResult& result) {
  auto sel = [](const SweepSelection& s) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : s.params) params[k] = v;
    return nlohmann::json{{"technique", std::string(to_string(s.technique))},
                          {"params", params},
                          {"seeds", s.seeds},
                          {"A_KA", s.knowledge_accumulation},
                          {"A_ZS", s.zero_shot_retention},
                          {"geo_mean", s.geo_mean}};
  };
  nlohmann::json j;
  j["best"] = result.best ? sel(*result.best) : nlohmann::json();
  j["per_technique"] = nlohmann::json::array();
  for (const auto& s : result.best_per_technique) j["per_technique"].push_back(sel(s));
  std::size_t failed = 0;
  for (const auto& r : result.rows) failed += r.ok ? 0 : 1;
  j["cells"] = result.rows.size();
  j["failed_cells"] = failed;
  return j;
}

}  // namespace chronomerge
