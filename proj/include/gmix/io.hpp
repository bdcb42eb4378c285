// Copyright 2026 The gmix Authors.
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

// Graph file format:
//   {"n": int, "edges": [[i, j, w], ...], "labels": [int, ...]}
// with i < j, edges in lexicographic order, integer weights, and "labels"
// present only for labelled graphs. A dataset is a JSON array of graphs.

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmix/graphs.hpp"

namespace gmix {

using Json = nlohmann::ordered_json;

inline Json to_json(const LabeledGraph& g) {
  Json j;
  j["n"] = g.n();
  Json edges = Json::array();
  for (int a = 0; a < g.n(); ++a)
    for (int b = a + 1; b < g.n(); ++b)
      if (g(a, b) != 0) edges.push_back(Json::array({a, b, g(a, b)}));
  j["edges"] = std::move(edges);
  if (g.has_labels()) j["labels"] = g.labels();
  return j;
}

inline LabeledGraph graph_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("edges")) {
    throw std::runtime_error("graph JSON: expected object with 'n' and 'edges'");
  }
  const int n = j.at("n").get<int>();
  LabeledGraph g(n);
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 3) throw std::runtime_error("graph JSON: edge must be [i,j,w]");
    const int a = e[0].get<int>(), b = e[1].get<int>(), w = e[2].get<int>();
    if (a >= b) throw std::runtime_error("graph JSON: edges require i < j");
    if (w <= 0) throw std::runtime_error("graph JSON: edge weight must be positive");
    g.set_edge(a, b, w);
  }
  if (j.contains("labels")) {
    auto labels = j.at("labels").get<std::vector<int>>();
    for (int l : labels)
      if (l < 0) throw std::runtime_error("graph JSON: labels must be nonnegative");
    g.set_labels(std::move(labels));
  }
  return g;
}

inline Json to_json(const std::vector<LabeledGraph>& graphs) {
  Json arr = Json::array();
  for (const auto& g : graphs) arr.push_back(to_json(g));
  return arr;
}

inline std::vector<LabeledGraph> graphs_from_json(const Json& j) {
  if (!j.is_array()) throw std::runtime_error("dataset JSON: expected an array of graphs");
  std::vector<LabeledGraph> out;
  out.reserve(j.size());
  for (const auto& g : j) out.push_back(graph_from_json(g));
  return out;
}

/// Compact single-line rendering followed by a newline.
inline std::string dump_graphs(const std::vector<LabeledGraph>& graphs) {
  return to_json(graphs).dump() + "\n";
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline std::vector<LabeledGraph> load_graphs(const std::string& path) {
  try {
    return graphs_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
}

inline void save_graphs(const std::string& path, const std::vector<LabeledGraph>& graphs) {
  write_file(path, dump_graphs(graphs));
}

}  // namespace gmix
