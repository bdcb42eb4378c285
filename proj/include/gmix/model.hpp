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

// MixtureNet: a small message-passing network that predicts the graph
// mixture E[G_T | G_t], trained by mixture matching with hand-written
// reverse-mode gradients.
//
// Node states are stored one column per node and edge states one column per
// unordered pair. Every reduction over nodes sums its terms in sorted order
// and every per-node or per-pair product is a separate mat-vec of fixed
// shape, so forward(P G) equals P forward(G) bit for bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmix/core_sde.hpp"
#include "gmix/graphs.hpp"
#include "gmix/mixture.hpp"

namespace gmix {

using Vector = Eigen::VectorXd;

namespace detail {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline Matrix silu(const Matrix& m) { return m.unaryExpr([](double x) { return silu(x); }); }
inline Matrix silu_grad(const Matrix& m) {
  return m.unaryExpr([](double x) { return silu_grad(x); });
}

inline double sorted_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

struct NetShape {
  int categories = 0;
  int hidden = 64;
  int layers = 3;
  int max_degree = 10;
  int time_features = 8;

  int input_dim() const { return categories + (max_degree + 1) + 1 + time_features; }
  friend bool operator==(const NetShape&, const NetShape&) = default;
};

struct Param {
  std::string name;
  Matrix value;
};

/// Gradient buffers aligned with MixtureNet::params().
using Gradients = std::vector<Matrix>;

/// Intermediate values of one forward pass, kept for backward().
struct ForwardCache {
  int n = 0;
  Matrix A;                    // input adjacency
  Vector tau;                  // time features
  Matrix inputs;               // d_in x n
  Matrix z0;                   // H x n
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> pair_index;  // n x n lookup, -1 on the diagonal
  Vector pair_adj;              // A_ij per pair
  Matrix y0;                    // edge-state pre-activation, H x P
  std::vector<Matrix> states;   // node states, layers + 1 entries, H x n
  std::vector<Matrix> edges;    // edge states, layers + 1 entries, H x P
  std::vector<Matrix> msg;      // W_m h per layer, H x n
  std::vector<Matrix> aggs;     // gated neighbour means per layer
  std::vector<Vector> globals;  // node means per layer
  std::vector<Matrix> pre;      // node pre-activations per layer
  std::vector<Matrix> edge_pre; // edge pre-activations per layer
  std::vector<Matrix> paths;    // two-path means per layer, H x P
  Matrix pair_sum, pair_prod, q;  // head inputs and pre-activation, H x P
  Vector edge_out;                // sigmoid outputs per pair
  Matrix node_out;                // F x n, softmax rows
  MixturePrediction prediction;
};

/// Per layer l, with node states h and edge states e on unordered pairs:
///   h_i <- h_i + silu(W_s h_i + (1/n) sum_j e_ij * (W_m h_j) + W_g mean(h) + b)
///   e_ij <- e_ij + silu(U_e e_ij + U_n (h_i + h_j) + U_p (1/n) sum_m e_im * e_mj + c)
/// Edge states start from silu(w A_ij + W_t tau + b). The edge head reads
/// (h_i + h_j, h_i * h_j, e_ij, A_ij, tau).
class MixtureNet {
 public:
  MixtureNet() = default;

  /// All parameters zero.
  MixtureNet(FeatureKind kind, int hidden, int layers) : kind_(kind) {
    if (hidden < 1 || layers < 0) throw std::invalid_argument("MixtureNet: bad dimensions");
    shape_.categories = kind.categories;
    shape_.hidden = hidden;
    shape_.layers = layers;
    build();
  }

  MixtureNet(FeatureKind kind, int hidden, int layers, Rng& rng) : MixtureNet(kind, hidden, layers) {
    init(rng);
  }

  const NetShape& shape() const { return shape_; }
  const FeatureKind& kind() const { return kind_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  size_t parameter_count() const {
    size_t c = 0;
    for (const auto& p : params_) c += static_cast<size_t>(p.value.size());
    return c;
  }

  /// Uniform fan-in initialization; biases zero.
  void init(Rng& rng) {
    for (auto& p : params_) {
      if (p.name.ends_with(".b") || p.name.ends_with(".c") || p.name == "edge.bo") continue;
      const double bound = 1.0 / std::sqrt(static_cast<double>(p.value.cols()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = u(rng);
    }
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const auto& p : params_) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    return g;
  }

  Vector time_features(double t) const {
    Vector tau(shape_.time_features);
    for (int k = 0; k < shape_.time_features / 2; ++k) {
      const double w = std::numbers::pi * std::pow(2.0, k) * t;
      tau(2 * k) = std::sin(w);
      tau(2 * k + 1) = std::cos(w);
    }
    return tau;
  }

  ForwardCache forward(const GraphState& G, double t) const {
    check_input(G);
    const int n = G.n(), H = shape_.hidden, F = shape_.categories;
    ForwardCache c;
    c.n = n;
    c.A = G.A;
    c.tau = time_features(t);
    c.inputs = node_inputs(G, c.tau);

    c.z0.resize(H, n);
    for (int i = 0; i < n; ++i) c.z0.col(i) = param(kInW) * c.inputs.col(i) + param(kInB);
    c.states.push_back(detail::silu(c.z0));

    c.pair_index.assign(static_cast<size_t>(n) * n, -1);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        c.pair_index[i * n + j] = c.pair_index[j * n + i] = static_cast<int>(c.pairs.size());
        c.pairs.emplace_back(i, j);
      }
    const int P = static_cast<int>(c.pairs.size());
    c.pair_adj.resize(P);
    c.y0.resize(H, P);
    const Vector base0 = param(kInitWt) * c.tau + param(kInitB);
    for (int k = 0; k < P; ++k) {
      c.pair_adj(k) = G.A(c.pairs[k].first, c.pairs[k].second);
      c.y0.col(k) = c.pair_adj(k) * param(kInitWa).col(0) + base0;
    }
    c.edges.push_back(detail::silu(c.y0));

    std::vector<double> buf(n);
    for (int l = 0; l < shape_.layers; ++l) {
      const Matrix& h = c.states.back();
      const Matrix& e = c.edges.back();
      Matrix msg(H, n);
      for (int j = 0; j < n; ++j) msg.col(j) = param(layer(l, kWm)) * h.col(j);
      Matrix agg(H, n);
      Vector glob(H);
      for (int ch = 0; ch < H; ++ch) {
        for (int i = 0; i < n; ++i) {
          buf.clear();
          for (int j = 0; j < n; ++j)
            if (j != i) buf.push_back(e(ch, c.pair_index[i * n + j]) * msg(ch, j));
          agg(ch, i) = detail::sorted_sum(buf) / n;
        }
        buf.clear();
        for (int j = 0; j < n; ++j) buf.push_back(h(ch, j));
        glob(ch) = detail::sorted_sum(buf) / n;
      }
      const Vector shared = param(layer(l, kWg)) * glob + param(layer(l, kB));
      Matrix pre(H, n);
      for (int i = 0; i < n; ++i) pre.col(i) = param(layer(l, kWs)) * h.col(i) + agg.col(i) + shared;
      Matrix paths(H, P);
      for (int k = 0; k < P; ++k) {
        const auto [i, j] = c.pairs[k];
        for (int ch = 0; ch < H; ++ch) {
          buf.clear();
          for (int m = 0; m < n; ++m)
            if (m != i && m != j) {
              buf.push_back(e(ch, c.pair_index[i * n + m]) * e(ch, c.pair_index[m * n + j]));
            }
          paths(ch, k) = detail::sorted_sum(buf) / n;
        }
      }
      Matrix epre(H, P);
      for (int k = 0; k < P; ++k) {
        const auto [i, j] = c.pairs[k];
        epre.col(k) = param(layer(l, kUe)) * e.col(k) +
                      param(layer(l, kUn)) * Vector(h.col(i) + h.col(j)) +
                      param(layer(l, kUp)) * paths.col(k) + param(layer(l, kC));
      }
      c.states.push_back(h + detail::silu(pre));
      c.edges.push_back(e + detail::silu(epre));
      c.msg.push_back(std::move(msg));
      c.aggs.push_back(std::move(agg));
      c.globals.push_back(std::move(glob));
      c.pre.push_back(std::move(pre));
      c.edge_pre.push_back(std::move(epre));
      c.paths.push_back(std::move(paths));
    }
    const Matrix& h = c.states.back();
    const Matrix& e = c.edges.back();

    // Edge head.
    c.pair_sum.resize(H, P);
    c.pair_prod.resize(H, P);
    c.q.resize(H, P);
    c.edge_out.resize(P);
    const Vector base = param(head(kEdgeWt)) * c.tau + param(head(kEdgeC));
    const Vector wo = param(head(kEdgeWo)).row(0).transpose();
    const double bo = param(head(kEdgeBo))(0, 0);
    c.prediction.DA = Matrix::Zero(n, n);
    for (int k = 0; k < P; ++k) {
      const auto [i, j] = c.pairs[k];
      c.pair_sum.col(k) = h.col(i) + h.col(j);
      c.pair_prod.col(k) = h.col(i).cwiseProduct(h.col(j));
      c.q.col(k) = param(head(kEdgeW1)) * c.pair_sum.col(k) +
                   param(head(kEdgeW2)) * c.pair_prod.col(k) + param(head(kEdgeW3)) * e.col(k) +
                   c.pair_adj(k) * param(head(kEdgeWa)).col(0) + base;
      const double logit = wo.dot(detail::silu(Matrix(c.q.col(k))).col(0)) + bo;
      const double y = detail::sigmoid(logit);
      c.edge_out(k) = y;
      c.prediction.DA(i, j) = c.prediction.DA(j, i) = y;
    }

    // Node head.
    c.prediction.DX = Matrix::Zero(n, F);
    if (F > 0) {
      c.node_out.resize(F, n);
      for (int i = 0; i < n; ++i) {
        Vector r = param(head(kNodeV)) * h.col(i) + param(head(kNodeC));
        r.array() -= r.maxCoeff();
        r = r.array().exp().matrix();
        r /= r.sum();
        c.node_out.col(i) = r;
        c.prediction.DX.row(i) = r.transpose();
      }
    }
    return c;
  }

  MixturePrediction operator()(const GraphState& G, double t) const {
    return forward(G, t).prediction;
  }

  /// Accumulates dL/dtheta into `grads` given upstream gradients with respect
  /// to the prediction. Only the strict upper triangle of dDA is read.
  void backward(const ForwardCache& c, const Matrix& dDX, const Matrix& dDA,
                Gradients& grads) const {
    const int n = c.n, H = shape_.hidden, F = shape_.categories;
    const int P = static_cast<int>(c.pairs.size());
    const Matrix& h = c.states.back();
    Matrix dh = Matrix::Zero(H, n);
    Matrix de = Matrix::Zero(H, P);

    // Edge head.
    if (P > 0) {
      const Vector wo = param(head(kEdgeWo)).row(0).transpose();
      Matrix dq(H, P);
      for (int k = 0; k < P; ++k) {
        const auto [i, j] = c.pairs[k];
        const double y = c.edge_out(k);
        const double dlogit = dDA(i, j) * y * (1.0 - y);
        const Matrix p = detail::silu(Matrix(c.q.col(k)));
        grads[head(kEdgeWo)].row(0) += dlogit * p.col(0).transpose();
        grads[head(kEdgeBo)](0, 0) += dlogit;
        dq.col(k) = (dlogit * wo).cwiseProduct(detail::silu_grad(Matrix(c.q.col(k))).col(0));
      }
      grads[head(kEdgeW1)] += dq * c.pair_sum.transpose();
      grads[head(kEdgeW2)] += dq * c.pair_prod.transpose();
      grads[head(kEdgeW3)] += dq * c.edges.back().transpose();
      grads[head(kEdgeWa)].col(0) += dq * c.pair_adj;
      const Vector dbase = dq.rowwise().sum();
      grads[head(kEdgeWt)] += dbase * c.tau.transpose();
      grads[head(kEdgeC)] += dbase;
      de += param(head(kEdgeW3)).transpose() * dq;
      const Matrix g1 = param(head(kEdgeW1)).transpose() * dq;
      const Matrix g2 = param(head(kEdgeW2)).transpose() * dq;
      for (int k = 0; k < P; ++k) {
        const auto [i, j] = c.pairs[k];
        dh.col(i) += g1.col(k) + g2.col(k).cwiseProduct(h.col(j));
        dh.col(j) += g1.col(k) + g2.col(k).cwiseProduct(h.col(i));
      }
    }

    // Node head.
    if (F > 0) {
      Matrix dr(F, n);
      for (int i = 0; i < n; ++i) {
        const Vector y = c.node_out.col(i);
        const Vector dy = dDX.row(i).transpose();
        dr.col(i) = y.cwiseProduct(dy - Vector::Constant(F, dy.dot(y)));
      }
      grads[head(kNodeV)] += dr * h.transpose();
      grads[head(kNodeC)] += dr.rowwise().sum();
      dh += param(head(kNodeV)).transpose() * dr;
    }

    // Layers, last to first. dh and de hold gradients w.r.t. the outputs of
    // layer l and are turned into gradients w.r.t. its inputs.
    for (int l = shape_.layers - 1; l >= 0; --l) {
      const Matrix& hl = c.states[l];
      const Matrix& el = c.edges[l];
      const Matrix& msg = c.msg[l];

      // Edge update.
      const Matrix depre = de.cwiseProduct(detail::silu_grad(c.edge_pre[l]));
      grads[layer(l, kUe)] += depre * el.transpose();
      grads[layer(l, kC)] += depre.rowwise().sum();
      Matrix dh_in = dh;
      Matrix de_in = de + param(layer(l, kUe)).transpose() * depre;
      const Matrix dn = param(layer(l, kUn)).transpose() * depre;
      grads[layer(l, kUp)] += depre * c.paths[l].transpose();
      const Matrix dpath = param(layer(l, kUp)).transpose() * depre / n;
      for (int k = 0; k < P; ++k) {
        const auto [i, j] = c.pairs[k];
        for (int m = 0; m < n; ++m) {
          if (m == i || m == j) continue;
          const int im = c.pair_index[i * n + m], mj = c.pair_index[m * n + j];
          de_in.col(im) += dpath.col(k).cwiseProduct(el.col(mj));
          de_in.col(mj) += dpath.col(k).cwiseProduct(el.col(im));
        }
      }
      for (int k = 0; k < P; ++k) {
        const auto [i, j] = c.pairs[k];
        grads[layer(l, kUn)] += depre.col(k) * Vector(hl.col(i) + hl.col(j)).transpose();
        dh_in.col(i) += dn.col(k);
        dh_in.col(j) += dn.col(k);
      }

      // Node update.
      const Matrix dpre = dh.cwiseProduct(detail::silu_grad(c.pre[l]));
      grads[layer(l, kWs)] += dpre * hl.transpose();
      dh_in += param(layer(l, kWs)).transpose() * dpre;
      Matrix dmsg = Matrix::Zero(H, n);
      for (int k = 0; k < P; ++k) {
        const auto [i, j] = c.pairs[k];
        de_in.col(k) += (dpre.col(i).cwiseProduct(msg.col(j)) +
                         dpre.col(j).cwiseProduct(msg.col(i))) / n;
        dmsg.col(j) += el.col(k).cwiseProduct(dpre.col(i)) / n;
        dmsg.col(i) += el.col(k).cwiseProduct(dpre.col(j)) / n;
      }
      grads[layer(l, kWm)] += dmsg * hl.transpose();
      dh_in += param(layer(l, kWm)).transpose() * dmsg;
      const Vector dshared = dpre.rowwise().sum();
      grads[layer(l, kWg)] += dshared * c.globals[l].transpose();
      grads[layer(l, kB)] += dshared;
      const Vector dglob = param(layer(l, kWg)).transpose() * dshared / n;
      dh_in.colwise() += dglob;

      dh = std::move(dh_in);
      de = std::move(de_in);
    }

    // Edge-state initialization.
    if (P > 0) {
      const Matrix dy0 = de.cwiseProduct(detail::silu_grad(c.y0));
      grads[kInitWa].col(0) += dy0 * c.pair_adj;
      const Vector dbase0 = dy0.rowwise().sum();
      grads[kInitWt] += dbase0 * c.tau.transpose();
      grads[kInitB] += dbase0;
    }

    const Matrix dz0 = dh.cwiseProduct(detail::silu_grad(c.z0));
    grads[kInW] += dz0 * c.inputs.transpose();
    grads[kInB] += dz0.rowwise().sum();
  }

  /// Node inputs, one column per node: features, one-hot degree of the
  /// quantized adjacency (capped), mean adjacency row value, time features.
  Matrix node_inputs(const GraphState& G, const Vector& tau) const {
    const int n = G.n(), F = shape_.categories;
    Matrix in = Matrix::Zero(shape_.input_dim(), n);
    const double scale = kind_.edge_scale();
    std::vector<double> buf(n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < F; ++c) in(c, i) = G.X(i, c);
      int degree = 0;
      for (int j = 0; j < n; ++j) {
        if (j != i && G.A(i, j) * scale >= 0.5) ++degree;
        buf[j] = G.A(i, j);
      }
      in(F + std::min(degree, shape_.max_degree), i) = 1.0;
      in(F + shape_.max_degree + 1, i) = detail::sorted_sum(buf) / n;
      in.block(F + shape_.max_degree + 2, i, shape_.time_features, 1) = tau;
    }
    return in;
  }

  void check_input(const GraphState& G) const {
    if (G.A.rows() != G.A.cols() || G.X.rows() != G.A.rows() || G.features() != shape_.categories) {
      throw std::invalid_argument("MixtureNet: state shape does not match network (features=" +
                                  std::to_string(G.features()) + ", expected " +
                                  std::to_string(shape_.categories) + ")");
    }
    if (G.n() < 1) throw std::invalid_argument("MixtureNet: empty graph");
  }

  const Matrix& param(size_t i) const { return params_[i].value; }

  /// Rebuilds the parameter layout for `shape`, all zeros.
  void reset(FeatureKind kind, const NetShape& shape) {
    kind_ = kind;
    shape_ = shape;
    shape_.categories = kind.categories;
    build();
  }

 private:
  enum : size_t { kInW, kInB, kInitWa, kInitWt, kInitB, kLayerBase };
  enum : size_t { kWs, kWm, kWg, kB, kUe, kUn, kUp, kC, kPerLayer };
  enum : size_t {
    kEdgeW1, kEdgeW2, kEdgeW3, kEdgeWa, kEdgeWt, kEdgeC, kEdgeWo, kEdgeBo, kNodeV, kNodeC
  };
  size_t layer(int l, size_t which) const { return kLayerBase + kPerLayer * l + which; }
  size_t head(size_t k) const { return kLayerBase + kPerLayer * shape_.layers + k; }

  void build() {
    const int H = shape_.hidden, D = shape_.input_dim(), F = shape_.categories;
    params_.clear();
    auto add = [&](std::string name, int r, int c) {
      params_.push_back({std::move(name), Matrix::Zero(r, c)});
    };
    add("in.W", H, D);
    add("in.b", H, 1);
    add("init.wa", H, 1);
    add("init.Wt", H, shape_.time_features);
    add("init.b", H, 1);
    for (int l = 0; l < shape_.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      add(p + "Ws", H, H);
      add(p + "Wm", H, H);
      add(p + "Wg", H, H);
      add(p + "b", H, 1);
      add(p + "Ue", H, H);
      add(p + "Un", H, H);
      add(p + "Up", H, H);
      add(p + "c", H, 1);
    }
    add("edge.W1", H, H);
    add("edge.W2", H, H);
    add("edge.W3", H, H);
    add("edge.wa", H, 1);
    add("edge.Wt", H, shape_.time_features);
    add("edge.c", H, 1);
    add("edge.wo", 1, H);
    add("edge.bo", 1, 1);
    add("node.V", F, H);
    add("node.c", F, 1);
  }

  NetShape shape_;
  FeatureKind kind_;
  std::vector<Param> params_;
};

// ---------------------------------------------------------------------------
// Training objective

enum class LossMode { weighted_gamma, simplified_c };

inline std::string to_string(LossMode m) {
  return m == LossMode::weighted_gamma ? "weighted_gamma" : "simplified_c";
}

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "weighted_gamma") return LossMode::weighted_gamma;
  if (s == "simplified_c") return LossMode::simplified_c;
  throw std::invalid_argument("unknown loss_mode '" + s + "'");
}

enum class OptimizerKind { sgd, adam };

inline std::string to_string(OptimizerKind o) { return o == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

struct TrainConfig {
  double epsilon = 1e-3;
  LossMode loss_mode = LossMode::weighted_gamma;
  double c = 100.0;
  double lambda = 5.0;
  double lr = 1e-3;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::sgd;
  int epochs = 100;
  int batch = 16;
  /// Cosine decay of the learning rate to lr * lr_floor over the run.
  bool cosine = false;
  double lr_floor = 0.1;

  /// ceil(|data| / batch) optimizer steps per epoch.
  long steps(size_t data_size) const {
    return static_cast<long>(epochs) * static_cast<long>((data_size + batch - 1) / batch);
  }

  double lr_at(long step, long total) const {
    if (!cosine || total <= 1) return lr;
    const double frac = static_cast<double>(step) / static_cast<double>(total - 1);
    return lr * (lr_floor + (1.0 - lr_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
  }

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("TrainConfig: epsilon must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("TrainConfig: lambda must be positive");
    if (!(c > 0.0)) throw std::invalid_argument("TrainConfig: c must be positive");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw std::invalid_argument("TrainConfig: momentum must lie in [0, 1)");
    }
    if (epochs < 0 || batch < 1) throw std::invalid_argument("TrainConfig: bad epochs or batch");
    if (!(lr_floor > 0.0 && lr_floor <= 1.0)) {
      throw std::invalid_argument("TrainConfig: lr_floor must lie in (0, 1]");
    }
  }
};

/// gamma_t = sigma_t / (u_t v_t), finite for t <= T - epsilon.
inline double loss_gamma(const BridgeParams& params, double t, double epsilon) {
  if (!(t >= 0.0 && t <= params.terminal() - epsilon)) {
    throw std::domain_error("loss: t=" + std::to_string(t) + " beyond T - epsilon");
  }
  return 1.0 / prior_force_weight(params, t);
}

struct TrainExample {
  GraphState state;
  double t;
  GraphState target;
};

struct LossTerms {
  double loss = 0.0;
  Matrix dDX, dDA;
};

/// Loss of one example: 1/2 w_x |DX - X_T|^2 + lambda/2 w_a |DA - A_T|^2 over
/// free coordinates, with w = gamma_t^2 (weighted) or c (simplified).
inline LossTerms example_loss(const MixturePrediction& D, const TrainExample& ex,
                              const GraphBridgeParams& bridge, const TrainConfig& cfg) {
  double wx = cfg.c, wa = cfg.c;
  if (cfg.loss_mode == LossMode::weighted_gamma) {
    wx = std::pow(loss_gamma(bridge.x, ex.t, cfg.epsilon), 2);
    wa = std::pow(loss_gamma(bridge.a, ex.t, cfg.epsilon), 2);
  } else if (ex.t > bridge.a.terminal() - cfg.epsilon) {
    throw std::domain_error("loss: t beyond T - epsilon");
  }
  LossTerms out;
  const Matrix ex_x = D.DX - ex.target.X;
  out.dDX = wx * ex_x;
  out.loss = 0.5 * wx * ex_x.squaredNorm();
  const int n = ex.state.n();
  out.dDA = Matrix::Zero(n, n);
  double sa = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double e = D.DA(i, j) - ex.target.A(i, j);
      sa += e * e;
      out.dDA(i, j) = cfg.lambda * wa * e;
    }
  out.loss += 0.5 * cfg.lambda * wa * sa;
  return out;
}

/// Mean loss over a batch; gradients (also averaged) are written to `grads`
/// when non-null.
inline double batch_loss(const MixtureNet& net, const std::vector<TrainExample>& batch,
                         const GraphBridgeParams& bridge, const TrainConfig& cfg,
                         Gradients* grads) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (grads) *grads = net.zero_gradients();
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const ForwardCache c = net.forward(ex.state, ex.t);
    LossTerms terms = example_loss(c.prediction, ex, bridge, cfg);
    total += terms.loss;
    if (grads) net.backward(c, terms.dDX * scale, terms.dDA * scale, *grads);
  }
  return total * scale;
}

/// Draws a training example per the mixture-matching recipe: fresh node
/// permutation, t ~ U[0, T - eps], G0 ~ prior, G_t from the bridge.
inline TrainExample draw_example(const GraphState& graph, const GraphBridgeParams& bridge,
                                 double epsilon, Rng& rng) {
  GraphState target = permute(graph, random_permutation(graph.n(), rng));
  std::uniform_real_distribution<double> time(0.0, bridge.a.terminal() - epsilon);
  const double t = time(rng);
  const GraphState G0 = sample_prior(target.n(), target.features(), rng);
  GraphState Gt = sample_interpolant(bridge, t, G0, target, rng);
  return {std::move(Gt), t, std::move(target)};
}

class Optimizer {
 public:
  Optimizer(const MixtureNet& net, const TrainConfig& cfg)
      : cfg_(cfg), m_(net.zero_gradients()), v_(net.zero_gradients()) {}

  void step(MixtureNet& net, const Gradients& g, double lr) {
    ++t_;
    auto& params = net.params();
    for (size_t i = 0; i < params.size(); ++i) {
      if (cfg_.optimizer == OptimizerKind::sgd) {
        m_[i] = cfg_.momentum * m_[i] + g[i];
        params[i].value -= lr * m_[i];
      } else {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        m_[i] = b1 * m_[i] + (1 - b1) * g[i];
        v_[i] = b2 * v_[i] + (1 - b2) * g[i].cwiseAbs2();
        const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
        params[i].value.array() -=
            lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
      }
    }
  }

 private:
  TrainConfig cfg_;
  Gradients m_, v_;
  int t_ = 0;
};

struct TrainResult {
  std::vector<double> losses;  // one entry per optimizer step
};

/// Graphs are drawn from a stream of shuffled passes over the dataset,
/// cfg.batch per step, for cfg.steps(|data|) steps.
inline TrainResult train(MixtureNet& net, const Dataset& data, const GraphBridgeParams& bridge,
                         const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (data.kind() != net.kind()) throw std::invalid_argument("train: feature kind mismatch");
  Optimizer opt(net, cfg);
  TrainResult result;
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();
  Gradients grads;
  const long total = cfg.steps(data.size());
  for (long step = 0; step < total; ++step) {
    std::vector<TrainExample> batch;
    for (int k = 0; k < cfg.batch; ++k) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(draw_example(data.state(order[cursor++]), bridge, cfg.epsilon, rng));
    }
    const double loss = batch_loss(net, batch, bridge, cfg, &grads);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
    }
    result.losses.push_back(loss);
    opt.step(net, grads, cfg.lr_at(step, total));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json bridge_to_json(const BridgeParams& p) {
  return {{"alpha", p.alpha},
          {"sigma0_sq", p.schedule.sigma0_sq()},
          {"sigma1_sq", p.schedule.sigma1_sq()},
          {"T", p.terminal()}};
}

inline BridgeParams bridge_from_json(const nlohmann::ordered_json& j) {
  return {j.at("alpha").get<double>(),
          NoiseSchedule(j.at("sigma0_sq").get<double>(), j.at("sigma1_sq").get<double>(),
                        j.at("T").get<double>())};
}

struct ModelFile {
  MixtureNet net;
  GraphBridgeParams bridge;
};

inline nlohmann::ordered_json to_json(const ModelFile& m) {
  const auto& s = m.net.shape();
  nlohmann::ordered_json j;
  j["format"] = "gmix-mixturenet";
  j["version"] = 1;
  j["hidden"] = s.hidden;
  j["layers"] = s.layers;
  j["max_degree"] = s.max_degree;
  j["time_features"] = s.time_features;
  j["feature_kind"] = {{"edges", to_string(m.net.kind().edges)},
                       {"categories", m.net.kind().categories}};
  j["bridge"] = {{"x", bridge_to_json(m.bridge.x)}, {"a", bridge_to_json(m.bridge.a)}};
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& p : m.net.params()) {
    std::vector<double> flat(p.value.data(), p.value.data() + p.value.size());
    params[p.name] = {{"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", flat}};
  }
  j["params"] = std::move(params);
  return j;
}

inline ModelFile model_from_json(const nlohmann::ordered_json& j) {
  if (j.value("format", "") != "gmix-mixturenet") {
    throw std::runtime_error("model JSON: not a gmix-mixturenet document");
  }
  FeatureKind kind{parse_edge_kind(j.at("feature_kind").at("edges").get<std::string>()),
                   j.at("feature_kind").at("categories").get<int>()};
  NetShape shape;
  shape.hidden = j.at("hidden").get<int>();
  shape.layers = j.at("layers").get<int>();
  shape.max_degree = j.at("max_degree").get<int>();
  shape.time_features = j.at("time_features").get<int>();
  ModelFile m{MixtureNet(), {bridge_from_json(j.at("bridge").at("x")),
                             bridge_from_json(j.at("bridge").at("a"))}};
  m.net.reset(kind, shape);
  const auto& params = j.at("params");
  for (auto& p : m.net.params()) {
    if (!params.contains(p.name)) throw std::runtime_error("model JSON: missing " + p.name);
    const auto& e = params.at(p.name);
    const auto data = e.at("data").get<std::vector<double>>();
    if (e.at("rows").get<Eigen::Index>() != p.value.rows() ||
        e.at("cols").get<Eigen::Index>() != p.value.cols() ||
        static_cast<Eigen::Index>(data.size()) != p.value.size()) {
      throw std::runtime_error("model JSON: shape mismatch for " + p.name);
    }
    std::copy(data.begin(), data.end(), p.value.data());
  }
  if (params.size() != m.net.params().size()) {
    throw std::runtime_error("model JSON: unexpected parameter blocks");
  }
  return m;
}

}  // namespace gmix
