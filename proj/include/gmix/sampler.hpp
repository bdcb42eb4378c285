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

// Generation by integrating the mixture SDE (or its probability-flow ODE)
// from the standard-normal prior.
//
// A predictor is any callable `MixturePrediction(const GraphState&, double t)`:
// OraclePredictor for the exact mixture, MixtureNet for a trained model.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gmix/core_sde.hpp"
#include "gmix/mixture.hpp"

namespace gmix {

template <typename P>
concept Predictor = requires(const P& p, const GraphState& g, double t) {
  { p(g, t) } -> std::convertible_to<MixturePrediction>;
};

struct SamplerConfig {
  int steps = 1000;
  int corrector_steps = 0;
  double snr = 0.1;
  /// Stop after this fraction of the steps and return the quantized mixture
  /// prediction instead of the state.
  double early_stop_fraction = 1.0;
  bool record = false;

  void validate(double T) const {
    if (steps < 1) throw std::invalid_argument("SamplerConfig: steps must be >= 1");
    if (T / steps < 1e-6) throw std::invalid_argument("SamplerConfig: dt below 1e-6");
    if (corrector_steps < 0) throw std::invalid_argument("SamplerConfig: corrector_steps < 0");
    if (!(snr > 0.0)) throw std::invalid_argument("SamplerConfig: snr must be positive");
    if (!(early_stop_fraction > 0.0 && early_stop_fraction <= 1.0)) {
      throw std::invalid_argument("SamplerConfig: early_stop_fraction must lie in (0, 1]");
    }
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<GraphState> states;
  std::vector<MixturePrediction> predictions;
  int convergence_step = 0;
};

struct SampleResult {
  GraphState raw;        // state before quantization
  GraphState quantized;
  std::optional<Trajectory> trajectory;
};

/// Projects a state onto the discrete graph space of `kind`.
inline GraphState quantize(const GraphState& G, const FeatureKind& kind) {
  const int n = G.n();
  GraphState q;
  q.A = Matrix::Zero(n, n);
  const double scale = kind.edge_scale();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v;
      if (kind.edges == EdgeKind::binary) {
        v = G.A(i, j) > 0.5 ? 1.0 : 0.0;
      } else {
        v = std::clamp(std::round(G.A(i, j) * scale), 0.0, scale) / scale;
      }
      q.A(i, j) = q.A(j, i) = v;
    }
  if (kind.categories > 0 && G.features() > 0) {
    q.X = Matrix::Zero(n, G.features());
    for (int i = 0; i < n; ++i) {
      Eigen::Index best;
      G.X.row(i).maxCoeff(&best);
      q.X(i, best) = 1.0;
    }
  } else {
    q.X = G.X;
  }
  return q;
}

inline bool same_state(const GraphState& a, const GraphState& b) {
  return a.A == b.A && a.X == b.X;
}

/// Per-trajectory random stream derived from a run seed.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

/// First index after which the quantized prediction never changes.
inline int convergence_step(const std::vector<MixturePrediction>& preds, const FeatureKind& kind) {
  int last_change = 0;
  GraphState prev;
  for (size_t k = 0; k < preds.size(); ++k) {
    GraphState q = quantize({preds[k].DX, preds[k].DA}, kind);
    if (k > 0 && !same_state(q, prev)) last_change = static_cast<int>(k);
    prev = std::move(q);
  }
  return last_change;
}

namespace detail {

inline double free_norm_sq(const GraphState& g) {
  return g.X.squaredNorm() + squared_distance(g.A, Matrix::Zero(g.n(), g.n()), Channel::adjacency);
}

inline void check_finite(const GraphState& g, int step) {
  if (!g.X.allFinite() || !g.A.allFinite()) {
    throw std::runtime_error("sampler: non-finite state at step " + std::to_string(step));
  }
}

inline double terminal_time(const GraphBridgeParams& params) {
  if (params.x.terminal() != params.a.terminal()) {
    throw std::invalid_argument("sampler: channels must share the terminal time");
  }
  return params.a.terminal();
}

// Corrector hook: (state, t, rng) modifies the state in place.
using Corrector = std::function<void(GraphState&, double, Rng&)>;

template <Predictor P>
SampleResult integrate_sde(const P& predict, int n, const GraphBridgeParams& params,
                           const FeatureKind& kind, const SamplerConfig& cfg, Rng& rng,
                           const Corrector& corrector) {
  const double T = terminal_time(params);
  cfg.validate(T);
  const int K = cfg.steps;
  const double dt = T / K;
  const double sqrt_dt = std::sqrt(dt);
  const int stop = cfg.early_stop_fraction < 1.0
                       ? static_cast<int>(std::ceil(cfg.early_stop_fraction * K))
                       : K;

  GraphState G = sample_prior(n, kind.categories, rng);
  SampleResult result;
  Trajectory traj;
  for (int k = 0; k < K; ++k) {
    const double t = k * dt;
    MixturePrediction D = predict(G, t);
    if (k == stop) {
      result.raw = {D.DX, D.DA};
      result.quantized = quantize(result.raw, kind);
      if (cfg.record) {
        traj.convergence_step = convergence_step(traj.predictions, kind);
        result.trajectory = std::move(traj);
      }
      return result;
    }
    const GraphState eta = mixture_drift(G, t, D, params);
    if (cfg.record) {
      traj.times.push_back(t);
      traj.states.push_back(G);
      traj.predictions.push_back(std::move(D));
    }
    const Matrix wx = gaussian_matrix(n, G.features(), rng);
    const Matrix wa = symmetric_gaussian(n, rng);
    G.X += eta.X * dt + params.x.schedule.stddev(t) * sqrt_dt * wx;
    G.A += eta.A * dt + params.a.schedule.stddev(t) * sqrt_dt * wa;
    if (corrector && k + 1 < K) corrector(G, (k + 1) * dt, rng);
    check_finite(G, k);
  }
  result.raw = G;
  result.quantized = quantize(G, kind);
  if (cfg.record) {
    traj.convergence_step = convergence_step(traj.predictions, kind);
    result.trajectory = std::move(traj);
  }
  return result;
}

}  // namespace detail

/// Euler-Maruyama integration of the mixture SDE. The drift is evaluated at
/// the left endpoints t_k = k dt, k = 0..K-1.
template <Predictor P>
SampleResult sample(const P& predict, int n, const GraphBridgeParams& params,
                    const FeatureKind& kind, const SamplerConfig& cfg, Rng& rng) {
  return detail::integrate_sde(predict, n, params, kind, cfg, rng, {});
}

/// One Langevin corrector step with the exact score:
///   eps = 2 (r |w| / |s|)^2,  G <- G + eps s + sqrt(2 eps) w.
/// Norms run over free coordinates. A zero score skips the step.
inline void langevin_correct(GraphState& G, double t, const Dataset& data,
                             const GraphBridgeParams& params, double snr, Rng& rng) {
  const GraphState s = exact_score(G, t, data, params);
  GraphState w{gaussian_matrix(G.n(), G.features(), rng), symmetric_gaussian(G.n(), rng)};
  const double s_norm = std::sqrt(detail::free_norm_sq(s));
  if (!(s_norm > 0.0)) return;
  const double w_norm = std::sqrt(detail::free_norm_sq(w));
  const double ratio = snr * w_norm / s_norm;
  const double eps = 2.0 * ratio * ratio;
  const double noise = std::sqrt(2.0 * eps);
  G.X += eps * s.X + noise * w.X;
  G.A += eps * s.A + noise * w.A;
}

/// Predictor-corrector sampling with the exact oracle: each Euler-Maruyama
/// step is followed by `corrector_steps` Langevin steps at the new time.
/// The final predictor step lands on T where the score is undefined, so it
/// is not corrected.
inline SampleResult pc_sample(const Dataset& data, int n, const GraphBridgeParams& params,
                              const SamplerConfig& cfg, Rng& rng) {
  const OraclePredictor oracle{&data, params};
  if (cfg.corrector_steps == 0) return sample(oracle, n, params, data.kind(), cfg, rng);
  detail::Corrector corrector = [&](GraphState& G, double t, Rng& r) {
    for (int m = 0; m < cfg.corrector_steps; ++m) langevin_correct(G, t, data, params, cfg.snr, r);
  };
  return detail::integrate_sde(oracle, n, params, data.kind(), cfg, rng, corrector);
}

/// Deterministic probability-flow integration (Euler at interval midpoints,
/// which keeps every evaluation inside (0, T)). The prior draw is the only
/// random input.
inline SampleResult ode_sample(const Dataset& data, int n, const GraphBridgeParams& params,
                               const SamplerConfig& cfg, Rng& rng) {
  const double T = detail::terminal_time(params);
  cfg.validate(T);
  const int K = cfg.steps;
  const double dt = T / K;
  GraphState G = sample_prior(n, data.kind().categories, rng);
  Trajectory traj;
  for (int k = 0; k < K; ++k) {
    const double t = (k + 0.5) * dt;
    MixturePrediction D = exact_graph_mixture(G, t, data, params);
    const GraphState rhs = prob_flow_rhs(G, t, D, params);
    if (cfg.record) {
      traj.times.push_back(t);
      traj.states.push_back(G);
      traj.predictions.push_back(std::move(D));
    }
    G.X += dt * rhs.X;
    G.A += dt * rhs.A;
    detail::check_finite(G, k);
  }
  SampleResult result{G, quantize(G, data.kind()), std::nullopt};
  if (cfg.record) {
    traj.convergence_step = convergence_step(traj.predictions, data.kind());
    result.trajectory = std::move(traj);
  }
  return result;
}

struct ConvergenceProfile {
  std::vector<double> distances;  // L2 over free coordinates, prediction vs ref
  std::vector<bool> changed;      // quantized prediction differs from the previous step
  int convergence_step = 0;
};

inline ConvergenceProfile convergence_profile(const Trajectory& traj, const GraphState& ref,
                                              const FeatureKind& kind) {
  if (traj.predictions.empty()) throw std::invalid_argument("convergence_profile: no predictions");
  ConvergenceProfile p;
  GraphState prev;
  for (size_t k = 0; k < traj.predictions.size(); ++k) {
    const auto& D = traj.predictions[k];
    GraphState diff{D.DX - ref.X, D.DA - ref.A};
    p.distances.push_back(std::sqrt(detail::free_norm_sq(diff)));
    GraphState q = quantize({D.DX, D.DA}, kind);
    const bool changed = k > 0 && !same_state(q, prev);
    p.changed.push_back(changed);
    if (changed) p.convergence_step = static_cast<int>(k);
    prev = std::move(q);
  }
  return p;
}

/// Mean absolute deviation over free coordinates.
inline double mean_abs_distance(const GraphState& a, const GraphState& b) {
  const int n = a.n();
  double sum = (a.X - b.X).cwiseAbs().sum();
  long count = static_cast<long>(a.X.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) sum += std::abs(a.A(i, j) - b.A(i, j));
  count += static_cast<long>(n) * (n - 1) / 2;
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

/// Runs `fn(i)` for i in [0, count) on up to `jobs` threads. Work is split
/// by index, so results are independent of the thread count.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += jobs) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gmix
