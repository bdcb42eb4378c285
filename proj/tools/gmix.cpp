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

// gmix command-line tool. Exit codes: 0 ok, 1 runtime failure, 2 usage.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gmix/config.hpp"
#include "gmix/io.hpp"
#include "gmix/metrics.hpp"
#include "gmix/model.hpp"
#include "gmix/sampler.hpp"

namespace {

using namespace gmix;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NodeSpec {
  int lo = 0, hi = 0;
};

// "N" or "LO:HI".
NodeSpec parse_nodes(const std::string& s) {
  NodeSpec spec;
  const auto colon = s.find(':');
  try {
    size_t used = 0;
    if (colon == std::string::npos) {
      spec.lo = spec.hi = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } else {
      spec.lo = std::stoi(s.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument(s);
      const std::string rest = s.substr(colon + 1);
      spec.hi = std::stoi(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(s);
    }
  } catch (const std::logic_error&) {
    throw UsageError("--nodes: expected N or LO:HI, got '" + s + "'");
  }
  if (spec.lo < 1 || spec.hi < spec.lo) throw UsageError("--nodes: empty or non-positive range");
  return spec;
}

std::string format_json(const Json& j) { return j.dump() + "\n"; }

// ---------------------------------------------------------------------------

struct GenDataOptions {
  std::string kind, family = "cycles-paths", nodes, out;
  int count = 0;
  std::uint64_t seed = 0;
};

void gen_data(const GenDataOptions& o) {
  Rng rng(o.seed);
  std::vector<LabeledGraph> graphs;
  if (o.kind == "sbm") {
    if (!o.nodes.empty()) throw UsageError("gen-data: --nodes does not apply to sbm");
    for (int i = 0; i < o.count; ++i) graphs.push_back(gen_sbm({}, rng));
  } else {
    if (o.nodes.empty()) throw UsageError("gen-data: --nodes is required for " + o.kind);
    const NodeSpec spec = parse_nodes(o.nodes);
    if (o.kind == "toy") {
      if (spec.lo != spec.hi) throw UsageError("gen-data: toy data needs a single node count");
      ToyFamily family;
      try {
        family = parse_toy_family(o.family);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      graphs = gen_toy(family, spec.lo, o.count, rng);
    } else {
      std::uniform_int_distribution<int> size(spec.lo, spec.hi);
      for (int i = 0; i < o.count; ++i) graphs.push_back(gen_planar(size(rng), rng));
    }
  }
  save_graphs(o.out, graphs);
}

// ---------------------------------------------------------------------------

struct SampleOptions {
  std::string data, model, config, traj, out;
  int steps = 1000, num = 1, jobs = 1;
  std::uint64_t seed = 0;
  bool pc = false, ode = false;
  int corrector_steps = 1;
  double snr = 0.1;
  double early_stop = 1.0;
};

Json trajectory_record(int index, const SampleResult& r, int steps, int stop,
                       const FeatureKind& kind, double terminal_error) {
  Json j;
  j["index"] = index;
  j["n"] = r.quantized.n();
  j["steps"] = steps;
  j["stop_step"] = stop;
  j["convergence_step"] = r.trajectory ? r.trajectory->convergence_step : 0;
  j["terminal_error"] = terminal_error;
  j["graph"] = to_json(to_graph(r.quantized, kind));
  return j;
}

// Smallest mean absolute deviation from a same-size dataset graph.
double nearest_error(const GraphState& raw, const Dataset& data) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i : data.group(raw.n())) best = std::min(best, mean_abs_distance(raw, data.state(i)));
  return best;
}

template <typename Run>
void run_samples(const SampleOptions& o, const Dataset& nodes_from, const FeatureKind& kind,
                 Run&& run) {
  const int stop = o.early_stop < 1.0 ? static_cast<int>(std::ceil(o.early_stop * o.steps)) : o.steps;
  std::vector<LabeledGraph> graphs(o.num);
  std::vector<std::string> lines(o.num);
  parallel_for(o.num, o.jobs, [&](int i) {
    Rng rng = stream_rng(o.seed, static_cast<std::uint64_t>(i));
    const int n = nodes_from.sample_node_count(rng);
    const SampleResult r = run(n, rng);
    graphs[i] = to_graph(r.quantized, kind);
    if (!o.traj.empty()) {
      lines[i] = trajectory_record(i, r, o.steps, stop, kind, run.terminal_error(r)).dump() + "\n";
    }
  });
  save_graphs(o.out, graphs);
  if (!o.traj.empty()) {
    std::string traj;
    for (const auto& l : lines) traj += l;
    write_file(o.traj, traj);
  }
}

SamplerConfig sampler_config(const SampleOptions& o) {
  SamplerConfig cfg;
  cfg.steps = o.steps;
  cfg.corrector_steps = o.pc ? o.corrector_steps : 0;
  cfg.snr = o.snr;
  cfg.early_stop_fraction = o.early_stop;
  cfg.record = !o.traj.empty();
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : parse_config(read_file(path));
  for (const auto& s : overrides) {
    const auto [key, value] = split_assignment(s);
    set_config_value(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

void oracle_sample(const SampleOptions& o, const std::vector<std::string>& overrides) {
  const Dataset data(load_graphs(o.data));
  const GraphBridgeParams bridge = load_config(o.config, overrides).bridge();
  const SamplerConfig cfg = sampler_config(o);
  if (o.ode && o.early_stop < 1.0) throw UsageError("--early-stop does not apply to --ode");
  cfg.validate(bridge.a.terminal());
  struct Run {
    const Dataset& data;
    const GraphBridgeParams& bridge;
    const SamplerConfig& cfg;
    bool ode;
    SampleResult operator()(int n, Rng& rng) const {
      return ode ? ode_sample(data, n, bridge, cfg, rng) : pc_sample(data, n, bridge, cfg, rng);
    }
    double terminal_error(const SampleResult& r) const { return nearest_error(r.raw, data); }
  };
  run_samples(o, data, data.kind(), Run{data, bridge, cfg, o.ode});
}

void model_sample(const SampleOptions& o) {
  const ModelFile model = model_from_json(Json::parse(read_file(o.model)));
  const Dataset nodes(load_graphs(o.data), model.net.kind());
  const SamplerConfig cfg = sampler_config(o);
  cfg.validate(model.bridge.a.terminal());
  struct Run {
    const ModelFile& model;
    const SamplerConfig& cfg;
    SampleResult operator()(int n, Rng& rng) const {
      return sample(model.net, n, model.bridge, model.net.kind(), cfg, rng);
    }
    double terminal_error(const SampleResult& r) const { return mean_abs_distance(r.raw, r.quantized); }
  };
  run_samples(o, nodes, model.net.kind(), Run{model, cfg});
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string data, config, out;
  std::uint64_t seed = 0;
};

void train_model(const TrainOptions& o, const std::vector<std::string>& overrides) {
  const RunConfig cfg = load_config(o.config, overrides);
  const Dataset data(load_graphs(o.data));
  Rng rng(o.seed);
  ModelFile model{MixtureNet(data.kind(), cfg.hidden, cfg.layers, rng), cfg.bridge()};
  const TrainResult result = train(model.net, data, model.bridge, cfg.train, rng);
  const size_t total = result.losses.size();
  const size_t window = std::max<size_t>(1, total / 10);
  for (size_t start = 0; start < total; start += window) {
    const size_t end = std::min(total, start + window);
    double mean = 0.0;
    for (size_t k = start; k < end; ++k) mean += result.losses[k];
    std::cerr << "steps " << start << "-" << end - 1 << "  mean loss " << mean / (end - start) << "\n";
  }
  write_file(o.out, format_json(to_json(model)));
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string ref, gen, rule, out;
  int jobs = 1;
};

void evaluate(const EvalOptions& o) {
  const auto ref = load_graphs(o.ref);
  const auto gen = load_graphs(o.gen);
  if (ref.empty() || gen.empty()) throw std::runtime_error("eval: empty graph set");
  ValidityRule rule;
  try {
    rule = parse_validity_rule(o.rule);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto parallel = [&](int count, const std::function<void(int)>& f) { parallel_for(count, o.jobs, f); };
  Json report;
  report["num_ref"] = ref.size();
  report["num_gen"] = gen.size();
  report["rule"] = to_string(rule);
  Json mmd = Json::object();
  for (Statistic s : kAllStatistics) {
    std::vector<Histogram> x(ref.size()), y(gen.size());
    parallel(static_cast<int>(ref.size()), [&](int i) { x[i] = descriptor(ref[i], s); });
    parallel(static_cast<int>(gen.size()), [&](int i) { y[i] = descriptor(gen[i], s); });
    mmd[to_string(s)] = mmd_tv(x, y, 1.0, parallel);
  }
  report["mmd"] = std::move(mmd);
  const VunReport v = vun(gen, ref, rule);
  report["valid"] = v.valid;
  report["unique"] = v.unique;
  report["novel"] = v.novel;
  report["vun"] = v.vun;
  Json flags = Json::array();
  for (const auto& f : v.flags) flags.push_back({{"valid", f.valid}, {"unique", f.unique}, {"novel", f.novel}});
  report["graphs"] = std::move(flags);
  write_file(o.out, report.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct InspectOptions {
  std::string traj, out;
};

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const size_t k = static_cast<size_t>(std::ceil(q * v.size()));
  return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
}

void inspect(const InspectOptions& o) {
  std::istringstream in(read_file(o.traj));
  std::string line;
  std::vector<double> conv, frac, err;
  int steps = -1;
  bool uniform_steps = true;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
      const int k = j.at("steps").get<int>();
      if (steps >= 0 && k != steps) uniform_steps = false;
      steps = k;
      conv.push_back(j.at("convergence_step").get<int>());
      frac.push_back(conv.back() / k);
      err.push_back(j.at("terminal_error").get<double>());
    } catch (const Json::exception& e) {
      throw std::runtime_error(o.traj + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (conv.empty()) throw std::runtime_error(o.traj + ": no trajectories");
  Json s;
  s["trajectories"] = conv.size();
  if (uniform_steps) s["steps"] = steps;
  double mean = 0.0;
  for (double c : conv) mean += c;
  std::vector<int> deciles(10, 0);
  for (double f : frac) ++deciles[std::min(9, static_cast<int>(std::floor(f * 10)))];
  s["convergence_step"] = {{"mean", mean / conv.size()},
                           {"median", quantile(conv, 0.5)},
                           {"q90", quantile(conv, 0.9)},
                           {"max", *std::max_element(conv.begin(), conv.end())},
                           {"decile_histogram", deciles}};
  const double stable = std::count_if(frac.begin(), frac.end(), [](double f) { return f <= 0.8; });
  s["stable_by_0.8K"] = stable / frac.size();
  // Earliest stopping fraction at which 90% of the runs had converged.
  s["early_stop_fraction"] = quantile(frac, 0.9);
  double err_mean = 0.0;
  for (double e : err) err_mean += e;
  const double below = std::count_if(err.begin(), err.end(), [](double e) { return e < 1e-2; });
  s["terminal_error"] = {{"mean", err_mean / err.size()},
                         {"max", *std::max_element(err.begin(), err.end())},
                         {"below_1e-2", below / err.size()}};
  write_file(o.out, s.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmix: graph diffusion-mixture generation"};
  app.require_subcommand(1);

  GenDataOptions gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a graph dataset");
  gen->add_option("--kind", gd.kind, "toy, sbm or planar")->required()->check(CLI::IsMember({"toy", "sbm", "planar"}));
  gen->add_option("--count", gd.count, "Number of graphs")->required()->check(CLI::PositiveNumber);
  gen->add_option("--nodes", gd.nodes, "Node count N or range LO:HI (toy, planar)");
  gen->add_option("--family", gd.family, "Toy family: cycles, paths, cycles-paths, triangles-stars, trio");
  gen->add_option("--seed", gd.seed, "Random seed")->required();
  gen->add_option("--out", gd.out, "Output JSON")->required();

  SampleOptions os;
  std::vector<std::string> os_set;
  auto* osample = app.add_subcommand("oracle-sample", "Sample with the exact mixture oracle");
  osample->add_option("--data", os.data, "Dataset JSON")->required();
  osample->add_option("--steps", os.steps, "Integration steps K")->required()->check(CLI::PositiveNumber);
  osample->add_option("--num", os.num, "Number of samples")->required()->check(CLI::PositiveNumber);
  osample->add_option("--seed", os.seed, "Random seed")->required();
  auto* pc = osample->add_flag("--pc", os.pc, "Predictor-corrector sampling");
  osample->add_option("--corrector-steps", os.corrector_steps, "Langevin steps per predictor step")
      ->check(CLI::NonNegativeNumber)->needs(pc);
  osample->add_option("--snr", os.snr, "Corrector signal-to-noise ratio")->check(CLI::PositiveNumber)->needs(pc);
  osample->add_flag("--ode", os.ode, "Probability-flow ODE")->excludes(pc);
  osample->add_option("--early-stop", os.early_stop, "Stop at this fraction of K")->check(CLI::Range(0.0, 1.0));
  osample->add_option("--config", os.config, "Config file for the process parameters");
  osample->add_option("--set", os_set, "Config override key=value");
  osample->add_option("--traj", os.traj, "Trajectory summary JSONL");
  osample->add_option("--jobs", os.jobs, "Worker threads")->check(CLI::PositiveNumber);
  osample->add_option("--out", os.out, "Output graphs JSON")->required();

  TrainOptions to;
  std::vector<std::string> to_set;
  auto* tr = app.add_subcommand("train", "Train a MixtureNet");
  tr->add_option("--data", to.data, "Dataset JSON")->required();
  tr->add_option("--config", to.config, "Config file")->required();
  tr->add_option("--set", to_set, "Config override key=value");
  tr->add_option("--seed", to.seed, "Random seed")->required();
  tr->add_option("--out", to.out, "Output model JSON")->required();

  SampleOptions ms;
  auto* msample = app.add_subcommand("sample", "Sample with a trained model");
  msample->add_option("--model", ms.model, "Model JSON")->required();
  msample->add_option("--data", ms.data, "Dataset JSON (node-count source)")->required();
  msample->add_option("--steps", ms.steps, "Integration steps K")->required()->check(CLI::PositiveNumber);
  msample->add_option("--num", ms.num, "Number of samples")->required()->check(CLI::PositiveNumber);
  msample->add_option("--seed", ms.seed, "Random seed")->required();
  msample->add_option("--early-stop", ms.early_stop, "Stop at this fraction of K")->check(CLI::Range(0.0, 1.0));
  msample->add_option("--traj", ms.traj, "Trajectory summary JSONL");
  msample->add_option("--jobs", ms.jobs, "Worker threads")->check(CLI::PositiveNumber);
  msample->add_option("--out", ms.out, "Output graphs JSON")->required();

  EvalOptions eo;
  auto* ev = app.add_subcommand("eval", "MMD and V.U.N. report");
  ev->add_option("--ref", eo.ref, "Reference graphs JSON")->required();
  ev->add_option("--gen", eo.gen, "Generated graphs JSON")->required();
  ev->add_option("--rule", eo.rule, "Validity rule")->required()->check(CLI::IsMember({"planar", "sbm", "none"}));
  ev->add_option("--jobs", eo.jobs, "Worker threads")->check(CLI::PositiveNumber);
  ev->add_option("--out", eo.out, "Report JSON")->required();

  InspectOptions io;
  auto* ins = app.add_subcommand("inspect", "Summarize a trajectory file");
  ins->add_option("--traj", io.traj, "Trajectory JSONL")->required();
  ins->add_option("--out", io.out, "Summary JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) gen_data(gd);
    if (*osample) oracle_sample(os, os_set);
    if (*tr) train_model(to, to_set);
    if (*msample) model_sample(ms);
    if (*ev) evaluate(eo);
    if (*ins) inspect(io);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
