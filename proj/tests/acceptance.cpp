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

// Acceptance run. One PASS/FAIL line per criterion; exit status is the
// number of failures. Runtime limits are part of each criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "density_oracle.hpp"
#include "gmix/metrics.hpp"
#include "gmix/model.hpp"
#include "gmix/sampler.hpp"
#include "gradient_check.hpp"
#include "metrics_corpus.hpp"

namespace gmix {
namespace {

struct Outcome {
  bool ok;
  std::string detail;
};

GraphBridgeParams default_params() {
  const BridgeParams p{-0.5, NoiseSchedule(1.0, 0.04)};
  return {p, p};
}

Dataset trio() {
  Rng rng(0);
  return Dataset(gen_toy(ToyFamily::trio, 6, 3, rng, false));
}

int member_of(const GraphState& q, const Dataset& data) {
  for (size_t i = 0; i < data.size(); ++i)
    if (same_state(q, data.state(i))) return static_cast<int>(i);
  return -1;
}

double nearest_distance(const GraphState& raw, const Dataset& data) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < data.size(); ++i) best = std::min(best, mean_abs_distance(raw, data.state(i)));
  return best;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Frequencies in percent; every member must sit within 5 points of 100/3.
Outcome frequency_bound(const std::vector<int>& hits, int runs) {
  bool ok = true;
  std::ostringstream out;
  out << "freq";
  for (int h : hits) {
    const double pct = 100.0 * h / runs;
    ok = ok && std::abs(pct - 100.0 / 3.0) <= 5.0;
    out << ' ' << fmt("%.1f", pct);
  }
  return {ok, out.str()};
}

// Chapman-Kolmogorov, posterior vs Bayes product, Brownian limit, terminal u/v.
Outcome bridge_math() {
  Rng rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double ck = 0.0, bayes = 0.0, brown = 0.0;
  bool terminal = true;
  for (double alpha : {-0.5, -2.0, 0.8, 1e-8, -1e-8}) {
    const BridgeParams p{alpha, NoiseSchedule(1.0, 0.04)};
    const auto end = uv(p, p.terminal());
    terminal = terminal && end.u == 1.0 && end.v == 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      double a = unit(rng), m = unit(rng), b = unit(rng);
      if (a > m) std::swap(a, m);
      if (m > b) std::swap(m, b);
      if (a > m) std::swap(a, m);
      const auto am = transition_scalars(p, a, m), mb = transition_scalars(p, m, b);
      const auto ab = transition_scalars(p, a, b);
      ck = std::max({ck, std::abs(mb.scale * am.scale - ab.scale),
                     std::abs(mb.scale * mb.scale * am.var + mb.var - ab.var)});

      const double t = 0.01 + 0.98 * unit(rng);
      const auto fwd = transition_scalars(p, 0.0, t), bwd = transition_scalars(p, t, p.terminal());
      const double prec = 1.0 / fwd.var + bwd.scale * bwd.scale / bwd.var;
      const Matrix g0 = Matrix::Random(3, 3), gT = Matrix::Random(3, 3);
      const auto law = bridge_posterior(p, t, g0, gT);
      const Matrix mean = fwd.scale / fwd.var / prec * g0 + bwd.scale / bwd.var / prec * gT;
      bayes = std::max({bayes, (law.mean - mean).cwiseAbs().maxCoeff(), std::abs(law.var - 1.0 / prec)});
    }
  }
  for (double alpha : {1e-8, -1e-8}) {
    const BridgeParams p{alpha, NoiseSchedule(1.0, 0.04)};
    const BridgeParams zero{0.0, NoiseSchedule(1.0, 0.04)};
    const double bT = beta(zero, 1.0);
    for (int k = 1; k < 20; ++k) {
      const double t = k / 20.0, bt = beta(zero, t);
      const auto c = bridge_coefficients(p, t);
      const auto s = uv(p, t);
      brown = std::max({brown, std::abs(c.start - (bT - bt) / bT), std::abs(c.end - bt / bT),
                        std::abs(c.var - bt * (bT - bt) / bT), std::abs(s.u - 1.0),
                        std::abs(s.v - (bT - bt))});
    }
  }
  const bool ok = ck < 1e-10 && bayes < 1e-9 && brown < 1e-6 && terminal;
  return {ok, fmt("ck %.1e bayes %.1e brownian %.1e terminal %s", ck, bayes, brown,
                  terminal ? "exact" : "inexact")};
}

Outcome score_consistency() {
  const Dataset data = trio();
  const auto p = default_params();
  Rng rng(102);
  std::uniform_real_distribution<double> unit(0.02, 0.98);
  const int n = 6;
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double t = unit(rng);
    GraphState G = sample_prior(n, 0, rng);
    G.A *= 0.5;
    G.A.array() += 0.3;
    G.A.diagonal().setZero();
    const GraphState s = exact_score(G, t, data, p);
    std::vector<double> fdv, anv;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        GraphState up = G, dn = G;
        up.A(i, j) += h;
        up.A(j, i) += h;
        dn.A(i, j) -= h;
        dn.A(j, i) -= h;
        fdv.push_back((testing::direct_log_density(up, t, data, p) -
                       testing::direct_log_density(dn, t, data, p)) / (2 * h));
        anv.push_back(s.A(i, j));
      }
    const Eigen::Map<Vector> fd(fdv.data(), fdv.size()), an(anv.data(), anv.size());
    worst = std::max(worst, (fd - an).norm() / std::max(fd.norm(), 1e-12));
  }
  return {worst < 1e-5, fmt("max rel %.2e over 100 probes", worst)};
}

Outcome exact_transport() {
  const Dataset data = trio();
  const auto p = default_params();
  const OraclePredictor oracle{&data, p};
  const SamplerConfig cfg;
  const int runs = 1000;
  std::vector<int> hits(3, 0);
  int close = 0, unmatched = 0;
  for (int i = 0; i < runs; ++i) {
    Rng rng = stream_rng(103, i);
    const auto r = sample(oracle, 6, p, data.kind(), cfg, rng);
    const int m = member_of(r.quantized, data);
    if (m < 0) ++unmatched; else ++hits[m];
    close += nearest_distance(r.raw, data) < 1e-2;
  }
  auto f = frequency_bound(hits, runs);
  const double pct = 100.0 * close / runs;
  return {f.ok && pct >= 99.0 && unmatched == 0,
          f.detail + fmt("; within 1e-2: %.1f%%; off-data %d", pct, unmatched)};
}

Outcome pc_equivalence() {
  const Dataset data = trio();
  const auto p = default_params();
  const OraclePredictor oracle{&data, p};
  SamplerConfig cfg;
  bool bitwise = true;
  for (int i = 0; i < 50; ++i) {
    Rng a = stream_rng(104, i), b = stream_rng(104, i);
    bitwise = bitwise && same_state(pc_sample(data, 6, p, cfg, a).raw,
                                    sample(oracle, 6, p, data.kind(), cfg, b).raw);
  }
  const int runs = 1000;
  std::vector<int> pc(3, 0), ode(3, 0);
  int off = 0;
  SamplerConfig corr = cfg;
  corr.corrector_steps = 1;
  corr.snr = 0.1;
  for (int i = 0; i < runs; ++i) {
    Rng a = stream_rng(105, i), b = stream_rng(106, i);
    const int m = member_of(pc_sample(data, 6, p, corr, a).quantized, data);
    const int k = member_of(ode_sample(data, 6, p, cfg, b).quantized, data);
    if (m < 0) ++off; else ++pc[m];
    if (k < 0) ++off; else ++ode[k];
  }
  const auto fp = frequency_bound(pc, runs), fo = frequency_bound(ode, runs);
  return {bitwise && fp.ok && fo.ok && off == 0,
          fmt("M=0 bitwise %s; ", bitwise ? "yes" : "no") + "pc " + fp.detail + "; ode " +
              fo.detail + fmt("; off-data %d", off)};
}

std::vector<TrainExample> probe_batch(const MixtureNet& net, Rng& rng) {
  const int n = 4, f = net.shape().categories;
  LabeledGraph g = make_cycle(n);
  if (f > 0) {
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i % f;
    g.set_labels(labels);
  }
  const GraphState target = to_state(g, net.kind());
  std::vector<TrainExample> batch;
  for (double t : {0.21, 0.63}) {
    GraphState s = sample_prior(n, f, rng);
    s.A.array() += 0.4;
    s.A.diagonal().setZero();
    batch.push_back({s, t, target});
  }
  return batch;
}

// Every coordinate of a small net, and a coordinate sample of every block of
// the default-size net, under both loss modes.
Outcome gradients() {
  Rng rng(107);
  double worst = 0.0;
  std::string where;
  int blocks = 0;
  for (const auto& [hidden, layers, coords] : {std::tuple{12, 2, 0}, std::tuple{64, 3, 48}}) {
    for (const FeatureKind kind : {FeatureKind{EdgeKind::binary, 3}, FeatureKind{}}) {
      MixtureNet net(kind, hidden, layers, rng);
      const auto batch = probe_batch(net, rng);
      for (LossMode mode : {LossMode::weighted_gamma, LossMode::simplified_c}) {
        TrainConfig cfg;
        cfg.loss_mode = mode;
        cfg.c = 1.0;
        for (const auto& b : testing::check_gradients(net, batch, default_params(), cfg, coords, 7)) {
          ++blocks;
          if (b.rel_error >= worst) {
            worst = b.rel_error;
            where = b.name;
          }
        }
      }
    }
  }
  return {worst < 1e-4, fmt("max rel %.2e (%s) over %d block checks", worst, where.c_str(), blocks)};
}

Outcome toy_learning() {
  const auto p = default_params();
  Rng rng(7);
  const auto train_set = gen_toy(ToyFamily::cycles_paths, 6, 20, rng);
  const Dataset data(train_set);
  MixtureNet net(data.kind(), 64, 3, rng);
  TrainConfig cfg;
  cfg.loss_mode = LossMode::simplified_c;
  cfg.c = 100.0;
  cfg.optimizer = OptimizerKind::adam;
  cfg.lr = 3e-3;
  cfg.cosine = true;
  cfg.batch = 64;
  cfg.epochs = 2000;
  const auto res = train(net, data, p, cfg, rng);
  std::vector<LabeledGraph> gen;
  int valid = 0;
  const SamplerConfig sc;
  for (int i = 0; i < 200; ++i) {
    Rng r = stream_rng(1, i);
    gen.push_back(to_graph(sample(net, 6, p, data.kind(), sc, r).quantized, data.kind()));
    valid += is_isomorphic(gen.back(), make_cycle(6)) || is_isomorphic(gen.back(), make_path(6));
  }
  const auto report = vun(gen, train_set, ValidityRule::none);
  const double pct = 100.0 * valid / gen.size();
  return {pct >= 90.0 && res.losses.size() == 2000u,
          fmt("%zu steps; valid %.1f%%; unique %.1f%%; novel %.1f%%", res.losses.size(), pct,
              report.unique, report.novel)};
}

Outcome early_stop() {
  const Dataset data = trio();
  const auto p = default_params();
  const OraclePredictor oracle{&data, p};
  SamplerConfig cfg;
  cfg.record = true;
  int stable = 0, worst = 0;
  for (int i = 0; i < 100; ++i) {
    Rng rng = stream_rng(108, i);
    const int step = sample(oracle, 6, p, data.kind(), cfg, rng).trajectory->convergence_step;
    stable += step <= 0.8 * cfg.steps;
    worst = std::max(worst, step);
  }
  return {stable >= 90, fmt("%d/100 stable by step 800 (latest %d)", stable, worst)};
}

Outcome metrics_suite() {
  Rng rng(109);
  const auto set = testing::corpus();
  bool mmd = true, orbits = true, invariant = true;
  for (Statistic s : kAllStatistics) mmd = mmd && mmd_tv(set, set, s) == 0.0;
  for (const auto& g : set) {
    if (g.n() > 10) continue;
    const auto a = node_orbit_counts(g), b = testing::independent_orbits(g);
    orbits = orbits && a == b;
    for (Statistic s : kAllStatistics) {
      const auto ref = descriptor(g, s);
      for (int r = 0; r < 20; ++r) {
        const auto h = descriptor(permute(g, random_permutation(g.n(), rng)), s);
        if (h.size() != ref.size()) invariant = false;
        for (size_t i = 0; invariant && i < h.size(); ++i) invariant = std::abs(h[i] - ref[i]) < 1e-12;
      }
    }
  }
  bool planar = is_planar(make_complete(4)) && !is_planar(make_complete(5)) &&
                !is_planar(make_complete_bipartite(3, 3)) && !is_planar(make_complete(6));
  for (int n : {1, 2, 5, 12, 40}) planar = planar && is_planar(testing::random_tree(n, rng));
  for (int n : {3, 4, 9, 30}) planar = planar && is_planar(make_cycle(n));
  for (auto [r, c] : {std::pair{2, 2}, {3, 5}, {6, 6}, {1, 9}}) planar = planar && is_planar(make_grid(r, c));
  const auto train_set = gen_toy(ToyFamily::cycles_paths, 6, 20, rng);
  const double novel = vun(train_set, train_set, ValidityRule::none).novel;
  auto yn = [](bool b) { return b ? "ok" : "FAIL"; };
  return {mmd && orbits && invariant && planar && novel == 0.0,
          fmt("mmd %s; orbits %s; planarity %s; novelty %.0f; invariance %s", yn(mmd), yn(orbits),
              yn(planar), novel, yn(invariant))};
}

Outcome regularized_decay() {
  const auto p = default_params();
  double ratio = 0.0;
  for (const BridgeParams& c : {p.x, p.a}) {
    ratio = std::max(ratio, prior_force_weight(c, c.terminal() - 1e-6) / prior_force_weight(c, 0.0));
  }
  return {ratio < 1e-4, fmt("weight ratio %.2e", ratio)};
}

}  // namespace
}  // namespace gmix

int main() {
  using namespace gmix;
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double limit_s;  // 0: no runtime limit
  };
  const std::vector<Criterion> criteria{
      {"bridge math", bridge_math, 5},
      {"score consistency", score_consistency, 10},
      {"exact transport", exact_transport, 120},
      {"pc and ode samplers", pc_equivalence, 0},
      {"gradient correctness", gradients, 30},
      {"toy learning", toy_learning, 600},
      {"early-stop stability", early_stop, 0},
      {"metrics suite", metrics_suite, 0},
      {"regularized mixture decay", regularized_decay, 0},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out{false, ""};
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s == 0 || secs < c.limit_s;
    const bool pass = out.ok && in_time;
    failures += !pass;
    std::string timing = c.limit_s > 0 ? fmt("%.1f s, limit %.0f s", secs, c.limit_s) : fmt("%.1f s", secs);
    std::printf("%s %zu %s: %s (%s)\n", pass ? "PASS" : "FAIL", i + 1, c.name, out.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  return failures;
}
