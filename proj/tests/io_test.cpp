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

#include "gmix/io.hpp"

#include <gtest/gtest.h>

namespace gmix {
namespace {

TEST(GraphJson, RoundTrip) {
  LabeledGraph g(4);
  g.set_edge(0, 2, 2);
  g.set_edge(1, 3);
  g.set_labels({3, 0, 1, 1});
  const std::vector<LabeledGraph> set{g, make_cycle(5), LabeledGraph(0)};
  const auto text = dump_graphs(set);
  EXPECT_EQ(graphs_from_json(Json::parse(text)), set);
  EXPECT_EQ(dump_graphs(graphs_from_json(Json::parse(text))), text);
}

TEST(GraphJson, Layout) {
  EXPECT_EQ(to_json(make_path(3)).dump(), R"({"n":3,"edges":[[0,1,1],[1,2,1]]})");
}

TEST(GraphJson, RejectsMalformed) {
  for (const char* bad : {R"({"edges":[]})", R"({"n":3,"edges":[[1,0,1]]})",
                          R"({"n":3,"edges":[[0,1,0]]})", R"({"n":3,"edges":[[0,1]]})",
                          R"({"n":2,"edges":[],"labels":[0]})",
                          R"({"n":2,"edges":[],"labels":[0,-1]})"}) {
    EXPECT_ANY_THROW(graph_from_json(Json::parse(bad))) << bad;
  }
  EXPECT_THROW(graphs_from_json(Json::parse("{}")), std::runtime_error);
}

TEST(Files, MissingFileReported) {
  EXPECT_THROW(load_graphs("/nonexistent/graphs.json"), std::runtime_error);
}

TEST(Files, SaveLoad) {
  const std::string path = ::testing::TempDir() + "gmix_io_test.json";
  const std::vector<LabeledGraph> set{make_star(5), make_grid(2, 3)};
  save_graphs(path, set);
  EXPECT_EQ(load_graphs(path), set);
  write_file(path, "[{\"n\":");
  EXPECT_THROW(load_graphs(path), std::runtime_error);
}

}  // namespace
}  // namespace gmix
