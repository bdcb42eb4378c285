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

// Exact graph mixture of a finite dataset under a standard-normal prior.
//
// With G0 ~ N(0, I) the bridge marginal pinned at g is
//   p^g_t(z) = N(z; a_t g, (b_t^2 + s_t) I)
// where (b_t, a_t, s_t) are the bridge-posterior coefficients, so every
// quantity below (posterior weights, forward and reverse mixtures, score)
// is a finite Gaussian-mixture computation. Adjacency channels carry one
// free coordinate per unordered node pair; distances on A are taken over the
// strict upper triangle.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmix/core_sde.hpp"
#include "gmix/graphs.hpp"

namespace gmix {

enum class EdgeKind { binary, bond };

/// Value ranges of the two channels. Bond orders 1..3 are scaled by 1/3;
/// node categories are one-hot (categories = 0 means no node features).
struct FeatureKind {
  EdgeKind edges = EdgeKind::binary;
  int categories = 0;

  double edge_scale() const { return edges == EdgeKind::bond ? 3.0 : 1.0; }
  int max_edge_value() const { return edges == EdgeKind::bond ? 3 : 1; }
  friend bool operator==(const FeatureKind&, const FeatureKind&) = default;
};

inline std::string to_string(EdgeKind k) { return k == EdgeKind::bond ? "bond" : "binary"; }

inline EdgeKind parse_edge_kind(const std::string& s) {
  if (s == "binary") return EdgeKind::binary;
  if (s == "bond") return EdgeKind::bond;
  throw std::invalid_argument("unknown edge kind '" + s + "'");
}

inline GraphState to_state(const LabeledGraph& g, const FeatureKind& kind) {
  const int n = g.n();
  GraphState s;
  s.A = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s.A(i, j) = g(i, j) / kind.edge_scale();
  s.X = Matrix::Zero(n, kind.categories);
  if (kind.categories > 0) {
    if (!g.has_labels()) throw std::invalid_argument("to_state: graph has no node labels");
    for (int i = 0; i < n; ++i) s.X(i, g.labels()[i]) = 1.0;
  }
  return s;
}

/// Converts an already-quantized state back to integer form.
inline LabeledGraph to_graph(const GraphState& s, const FeatureKind& kind) {
  const int n = s.n();
  LabeledGraph g(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int w = static_cast<int>(std::lround(s.A(i, j) * kind.edge_scale()));
      if (w > 0) g.set_edge(i, j, w);
    }
  if (kind.categories > 0) {
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      Eigen::Index best;
      s.X.row(i).maxCoeff(&best);
      labels[i] = static_cast<int>(best);
    }
    g.set_labels(std::move(labels));
  }
  return g;
}

/// Finite empirical distribution of graphs grouped by node count.
class Dataset {
 public:
  Dataset() = default;

  /// Infers the feature kind: bond edges if any weight exceeds 1, one-hot
  /// node categories if graphs carry labels.
  explicit Dataset(std::vector<LabeledGraph> graphs) : Dataset(graphs, infer_kind(graphs)) {}

  Dataset(std::vector<LabeledGraph> graphs, FeatureKind kind)
      : graphs_(std::move(graphs)), kind_(kind) {
    if (graphs_.empty()) throw std::invalid_argument("Dataset: no graphs");
    states_.reserve(graphs_.size());
    for (size_t i = 0; i < graphs_.size(); ++i) {
      const auto& g = graphs_[i];
      if (g.max_weight() > kind_.max_edge_value()) {
        throw std::invalid_argument("Dataset: edge weight outside declared range");
      }
      if (kind_.categories > 0) {
        if (!g.has_labels()) throw std::invalid_argument("Dataset: graph without labels");
        for (int l : g.labels())
          if (l >= kind_.categories) throw std::invalid_argument("Dataset: label out of range");
      }
      states_.push_back(to_state(g, kind_));
      groups_[g.n()].push_back(i);
    }
  }

  static FeatureKind infer_kind(const std::vector<LabeledGraph>& graphs) {
    FeatureKind kind;
    int max_w = 0, max_label = -1;
    bool any_labels = false, all_labels = true;
    for (const auto& g : graphs) {
      max_w = std::max(max_w, g.max_weight());
      any_labels |= g.has_labels();
      all_labels &= g.has_labels();
      for (int l : g.labels()) max_label = std::max(max_label, l);
    }
    if (max_w > 3) throw std::invalid_argument("Dataset: edge weights above 3 unsupported");
    if (any_labels && !all_labels) throw std::invalid_argument("Dataset: mixed labelled graphs");
    kind.edges = max_w > 1 ? EdgeKind::bond : EdgeKind::binary;
    kind.categories = any_labels ? max_label + 1 : 0;
    return kind;
  }

  size_t size() const { return graphs_.size(); }
  const FeatureKind& kind() const { return kind_; }
  const std::vector<LabeledGraph>& graphs() const { return graphs_; }
  const std::vector<GraphState>& states() const { return states_; }
  const GraphState& state(size_t i) const { return states_[i]; }

  std::span<const size_t> group(int n) const {
    auto it = groups_.find(n);
    if (it == groups_.end()) {
      throw std::invalid_argument("Dataset: no graph with " + std::to_string(n) + " nodes");
    }
    return it->second;
  }

  /// Node count of a uniformly drawn dataset graph.
  int sample_node_count(Rng& rng) const {
    std::uniform_int_distribution<size_t> pick(0, graphs_.size() - 1);
    return graphs_[pick(rng)].n();
  }

 private:
  std::vector<LabeledGraph> graphs_;
  std::vector<GraphState> states_;
  FeatureKind kind_;
  std::map<int, std::vector<size_t>> groups_;
};

/// Predicted graph mixture. For the exact oracle `weights[k]` is the
/// posterior weight of dataset graph `members[k]`.
struct MixturePrediction {
  Matrix DX;
  Matrix DA;
  std::vector<double> weights;
  std::vector<size_t> members;
};

/// p^g_t(z) = N(z; end * g, total_var * I) when the start is standard normal.
struct EndpointMarginal {
  double end;       // a_t
  double start;     // b_t
  double total_var; // b_t^2 + s_t
};

inline EndpointMarginal endpoint_marginal(const BridgeParams& params, double t) {
  if (t == params.terminal()) return {1.0, 0.0, 0.0};
  const auto c = bridge_coefficients(params, t);
  return {c.end, c.start, c.start * c.start + c.var};
}

/// Squared distance over free coordinates: all entries of X, strict upper
/// triangle of A.
inline double squared_distance(const Matrix& a, const Matrix& b, Channel channel) {
  if (channel == Channel::features) return (a - b).squaredNorm();
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      const double e = a(i, j) - b(i, j);
      d += e * e;
    }
  return d;
}

namespace detail {

inline void check_open_time(const GraphBridgeParams& params, double t, const char* op) {
  if (!(t >= 0.0 && t < params.a.terminal() && t < params.x.terminal())) {
    throw std::domain_error(std::string(op) + ": t=" + std::to_string(t) + " outside [0, T)");
  }
}

inline void check_shape(const GraphState& g, const Dataset& data, const char* op) {
  if (g.A.rows() != g.A.cols()) throw std::invalid_argument(std::string(op) + ": A not square");
  if (g.X.rows() != g.A.rows() || g.features() != data.kind().categories) {
    throw std::invalid_argument(std::string(op) + ": state shape does not match dataset");
  }
}

}  // namespace detail

/// Posterior weights over the dataset group matching the node count of G_t,
/// normalized in log space. Weights below 1e-300 are flushed to zero.
inline MixturePrediction exact_graph_mixture(const GraphState& G, double t, const Dataset& data,
                                             const GraphBridgeParams& params) {
  detail::check_open_time(params, t, "exact_graph_mixture");
  detail::check_shape(G, data, "exact_graph_mixture");
  const auto members = data.group(G.n());
  const auto mx = endpoint_marginal(params.x, t);
  const auto ma = endpoint_marginal(params.a, t);
  const bool has_x = G.features() > 0;

  std::vector<double> logw(members.size());
  for (size_t k = 0; k < members.size(); ++k) {
    const GraphState& g = data.state(members[k]);
    double lw = -squared_distance(G.A, ma.end * g.A, Channel::adjacency) / (2.0 * ma.total_var);
    if (has_x) lw -= squared_distance(G.X, mx.end * g.X, Channel::features) / (2.0 * mx.total_var);
    logw[k] = lw;
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  MixturePrediction out;
  out.members.assign(members.begin(), members.end());
  out.weights.resize(members.size());
  double sum = 0.0;
  for (size_t k = 0; k < members.size(); ++k) {
    double w = std::exp(logw[k] - top);
    if (w < 1e-300) w = 0.0;
    out.weights[k] = w;
    sum += w;
  }
  out.DX = Matrix::Zero(G.n(), G.features());
  out.DA = Matrix::Zero(G.n(), G.n());
  for (size_t k = 0; k < members.size(); ++k) {
    out.weights[k] /= sum;
    if (out.weights[k] == 0.0) continue;
    const GraphState& g = data.state(members[k]);
    out.DA += out.weights[k] * g.A;
    if (has_x) out.DX += out.weights[k] * g.X;
  }
  return out;
}

/// eta = alpha sigma^2 G + (sigma^2 / v)(D / u - G) for one channel.
inline Matrix channel_drift(const BridgeParams& params, double t, const Matrix& G,
                            const Matrix& target) {
  const auto s = uv(params, t);
  const double var = params.schedule.variance(t);
  return params.alpha * var * G + (var / s.v) * (target / s.u - G);
}

inline constexpr double kDriftGuard = 1e-6;

namespace detail {

inline void check_drift_time(const GraphBridgeParams& params, double t, const char* op) {
  const double T = std::min(params.x.terminal(), params.a.terminal());
  if (!(t >= 0.0 && t < T - kDriftGuard)) {
    throw std::domain_error(std::string(op) + ": t=" + std::to_string(t) +
                            " too close to T (v_t vanishes)");
  }
}

}  // namespace detail

/// Drift of the mixture process parameterized by a predicted mixture.
inline GraphState mixture_drift(const GraphState& G, double t, const Matrix& DX,
                                const Matrix& DA, const GraphBridgeParams& params) {
  detail::check_drift_time(params, t, "mixture_drift");
  return {channel_drift(params.x, t, G.X, DX), channel_drift(params.a, t, G.A, DA)};
}

inline GraphState mixture_drift(const GraphState& G, double t, const MixturePrediction& D,
                                const GraphBridgeParams& params) {
  return mixture_drift(G, t, D.DX, D.DA, params);
}

/// Drift of the single bridge pinned at g.
inline GraphState bridge_drift(const GraphState& G, double t, const GraphState& g,
                               const GraphBridgeParams& params) {
  return mixture_drift(G, t, g.X, g.A, params);
}

/// E[G0 | G_t] under the standard-normal prior.
inline GraphState reverse_graph_mixture(const GraphState& G, double t,
                                        const MixturePrediction& D,
                                        const GraphBridgeParams& params) {
  if (t == 0.0) return G;
  if (t == params.a.terminal()) {
    return {Matrix::Zero(G.X.rows(), G.X.cols()), Matrix::Zero(G.n(), G.n())};
  }
  const auto mx = endpoint_marginal(params.x, t);
  const auto ma = endpoint_marginal(params.a, t);
  return {(mx.start / mx.total_var) * (G.X - mx.end * D.DX),
          (ma.start / ma.total_var) * (G.A - ma.end * D.DA)};
}

inline GraphState reverse_graph_mixture(const GraphState& G, double t, const Dataset& data,
                                        const GraphBridgeParams& params) {
  if (t == 0.0) return G;
  if (t == params.a.terminal()) return reverse_graph_mixture(G, t, MixturePrediction{}, params);
  return reverse_graph_mixture(G, t, exact_graph_mixture(G, t, data, params), params);
}

namespace detail {

// Forward bridge term plus reversed-time term, evaluated with the reverse
// scalars ubar = exp(alpha beta_t), ubar^2 vbar = (exp(2 alpha beta_t) - 1) / (2 alpha).
inline Matrix channel_score(const BridgeParams& params, double t, const Matrix& G,
                            const Matrix& forward, const Matrix& reverse) {
  const auto s = uv(params, t);
  const double elapsed = beta(params, t);
  double ubar = 1.0, ubar2vbar = elapsed;
  if (!params.brownian()) {
    ubar = std::exp(params.alpha * elapsed);
    ubar2vbar = growth_var(params.alpha, elapsed);
  }
  return (forward / s.u - G) / s.v + (ubar * reverse - G) / ubar2vbar;
}

inline void check_interior(const GraphBridgeParams& params, double t, const char* op) {
  if (!(t > 0.0 && t < params.a.terminal() && t < params.x.terminal())) {
    throw std::domain_error(std::string(op) + ": t=" + std::to_string(t) + " outside (0, T)");
  }
}

}  // namespace detail

/// Score of the mixture marginal from a precomputed forward mixture.
inline GraphState exact_score(const GraphState& G, double t, const MixturePrediction& D,
                              const GraphBridgeParams& params) {
  detail::check_interior(params, t, "exact_score");
  const GraphState rev = reverse_graph_mixture(G, t, D, params);
  return {detail::channel_score(params.x, t, G.X, D.DX, rev.X),
          detail::channel_score(params.a, t, G.A, D.DA, rev.A)};
}

inline GraphState exact_score(const GraphState& G, double t, const Dataset& data,
                              const GraphBridgeParams& params) {
  detail::check_interior(params, t, "exact_score");
  return exact_score(G, t, exact_graph_mixture(G, t, data, params), params);
}

/// Right-hand side of the probability-flow ODE: drift - sigma^2 / 2 * score.
inline GraphState prob_flow_rhs(const GraphState& G, double t, const MixturePrediction& D,
                                const GraphBridgeParams& params) {
  const GraphState score = exact_score(G, t, D, params);
  GraphState drift = mixture_drift(G, t, D, params);
  drift.X -= 0.5 * params.x.schedule.variance(t) * score.X;
  drift.A -= 0.5 * params.a.schedule.variance(t) * score.A;
  return drift;
}

inline GraphState prob_flow_rhs(const GraphState& G, double t, const Dataset& data,
                                const GraphBridgeParams& params) {
  detail::check_interior(params, t, "prob_flow_rhs");
  return prob_flow_rhs(G, t, exact_graph_mixture(G, t, data, params), params);
}

/// u_t v_t / sigma_t, the weight of an additive prior force.
inline double prior_force_weight(const BridgeParams& params, double t) {
  const double rest = beta_remaining(params, t);
  const double uv_product = params.brownian() ? rest : detail::sinh_over_alpha(params.alpha, rest);
  return uv_product / params.schedule.stddev(t);
}

using ForceField = std::function<GraphState(const GraphState&, double)>;

/// D_R = D + (u_t v_t / sigma_t) f(G_t, t), per channel.
inline MixturePrediction regularized_mixture(const MixturePrediction& D, const GraphState& G,
                                             double t, const ForceField& force,
                                             const GraphBridgeParams& params) {
  const GraphState f = force(G, t);
  if (!f.X.allFinite() || !f.A.allFinite()) {
    throw std::invalid_argument("regularized_mixture: force returned non-finite values");
  }
  MixturePrediction out = D;
  if (f.X.size() > 0) out.DX += prior_force_weight(params.x, t) * f.X;
  out.DA += prior_force_weight(params.a, t) * f.A;
  return out;
}

/// Predictor backed by the exact mixture of a dataset.
struct OraclePredictor {
  const Dataset* data;
  GraphBridgeParams params;

  MixturePrediction operator()(const GraphState& G, double t) const {
    return exact_graph_mixture(G, t, *data, params);
  }
};

}  // namespace gmix
