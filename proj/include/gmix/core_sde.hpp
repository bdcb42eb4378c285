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

// Closed-form scalar functions and Gaussian laws of the Ornstein-Uhlenbeck
// reference process  dG = alpha * sigma_t^2 * G dt + sigma_t dW  and of its
// endpoint-pinned bridge.
//
// Time-integrated variance is written beta_t = int_0^t sigma^2, and every
// hyperbolic argument is formed from a beta *difference* evaluated directly
// (never as a difference of two separately rounded phi values).

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gmix {

using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Below this |alpha * beta_T| the Brownian-bridge closed forms are used.
inline constexpr double kBrownianThreshold = 1e-6;

/// Linear variance schedule sigma^2(t) = (1 - t/T) sigma0^2 + (t/T) sigma1^2.
class NoiseSchedule {
 public:
  NoiseSchedule() : NoiseSchedule(1.0, 0.04, 1.0) {}

  NoiseSchedule(double sigma0_sq, double sigma1_sq, double terminal = 1.0)
      : sigma0_sq_(sigma0_sq), sigma1_sq_(sigma1_sq), terminal_(terminal) {
    if (!(std::isfinite(terminal) && terminal > 0.0)) {
      throw std::invalid_argument("NoiseSchedule: T must be positive");
    }
    if (!(sigma1_sq > 0.0 && sigma1_sq <= sigma0_sq && sigma0_sq <= 1.0)) {
      throw std::invalid_argument(
          "NoiseSchedule: require 0 < sigma1_sq <= sigma0_sq <= 1, got sigma0_sq=" +
          std::to_string(sigma0_sq) + " sigma1_sq=" + std::to_string(sigma1_sq));
    }
  }

  double sigma0_sq() const { return sigma0_sq_; }
  double sigma1_sq() const { return sigma1_sq_; }
  double terminal() const { return terminal_; }

  double variance(double t) const {
    const double s = t / terminal_;
    return (1.0 - s) * sigma0_sq_ + s * sigma1_sq_;
  }
  double stddev(double t) const { return std::sqrt(variance(t)); }

  /// int_0^t sigma^2.
  double integral(double t) const {
    return sigma0_sq_ * t + (sigma1_sq_ - sigma0_sq_) * t * t / (2.0 * terminal_);
  }

  /// int_a^b sigma^2, exact for a linear integrand (trapezoid rule).
  double integral(double a, double b) const {
    return 0.5 * (b - a) * (variance(a) + variance(b));
  }

 private:
  double sigma0_sq_;
  double sigma1_sq_;
  double terminal_;
};

/// OU coefficient and schedule of one channel.
struct BridgeParams {
  double alpha = -0.5;
  NoiseSchedule schedule;

  double terminal() const { return schedule.terminal(); }
  bool brownian() const {
    return std::abs(alpha * schedule.integral(schedule.terminal())) < kBrownianThreshold;
  }
};

/// Per-channel process parameters: node features X and adjacency A.
struct GraphBridgeParams {
  BridgeParams x;
  BridgeParams a;
};

/// Isotropic Gaussian: every entry independent with variance `var`.
struct GaussianLaw {
  Matrix mean;
  double var = 0.0;
};

/// One point of a trajectory. F = X.cols() may be zero.
struct GraphState {
  Matrix X;
  Matrix A;

  int n() const { return static_cast<int>(A.rows()); }
  int features() const { return static_cast<int>(X.cols()); }
};

enum class Channel { features, adjacency };

namespace detail {

inline void check_time(const BridgeParams& params, double t, const char* op) {
  if (!(t >= 0.0 && t <= params.terminal())) {
    throw std::domain_error(std::string(op) + ": t=" + std::to_string(t) +
                            " outside [0, T]");
  }
}

// sinh(alpha * x) / alpha, tending to x as alpha -> 0.
inline double sinh_over_alpha(double alpha, double x) {
  if (alpha == 0.0) return x;
  return std::sinh(alpha * x) / alpha;
}

// (exp(2 alpha x) - 1) / (2 alpha).
inline double growth_var(double alpha, double x) {
  if (alpha == 0.0) return x;
  return std::expm1(2.0 * alpha * x) / (2.0 * alpha);
}

}  // namespace detail

inline double beta(const BridgeParams& params, double t) {
  detail::check_time(params, t, "beta");
  return params.schedule.integral(t);
}

/// int_t^T sigma^2.
inline double beta_remaining(const BridgeParams& params, double t) {
  detail::check_time(params, t, "beta_remaining");
  return params.schedule.integral(t, params.terminal());
}

struct UV {
  double u;
  double v;
};

/// u_t = exp(alpha int_t^T sigma^2), v_t = (1 - u_t^-2) / (2 alpha).
inline UV uv(const BridgeParams& params, double t) {
  detail::check_time(params, t, "uv");
  if (t == params.terminal()) return {1.0, 0.0};
  const double rest = beta_remaining(params, t);
  if (params.brownian()) return {1.0, rest};
  const double u = std::exp(params.alpha * rest);
  const double v = -std::expm1(-2.0 * params.alpha * rest) / (2.0 * params.alpha);
  return {u, v};
}

/// Scalars of the reference OU transition from time a to b:
/// G_b | G_a ~ N(scale * G_a, var * I), var = u_{b|a}^2 v_{b|a}.
struct TransitionScalars {
  double scale;
  double var;
};

inline TransitionScalars transition_scalars(const BridgeParams& params, double a, double b) {
  detail::check_time(params, a, "transition");
  detail::check_time(params, b, "transition");
  if (a > b) {
    throw std::domain_error("transition: a > b");
  }
  if (a == b) return {1.0, 0.0};
  const double db = params.schedule.integral(a, b);
  if (params.brownian()) return {1.0, db};
  return {std::exp(params.alpha * db), detail::growth_var(params.alpha, db)};
}

inline GaussianLaw transition(const BridgeParams& params, double a, double b,
                              const Matrix& state) {
  const auto s = transition_scalars(params, a, b);
  return {s.scale * state, s.var};
}

/// Law of G_t given both endpoints: mean = start * G0 + end * GT.
struct BridgeCoefficients {
  double start;
  double end;
  double var;
};

inline BridgeCoefficients bridge_coefficients(const BridgeParams& params, double t) {
  detail::check_time(params, t, "bridge_posterior");
  const double T = params.terminal();
  if (t == 0.0) return {1.0, 0.0, 0.0};
  if (t == T) return {0.0, 1.0, 0.0};
  const double elapsed = params.schedule.integral(t);
  const double rest = params.schedule.integral(t, T);
  const double total = params.schedule.integral(T);
  if (params.brownian()) {
    return {rest / total, elapsed / total, elapsed * rest / total};
  }
  const double alpha = params.alpha;
  const double sinh_total = std::sinh(alpha * total);
  const double sinh_rest = std::sinh(alpha * rest);
  const double sinh_elapsed = std::sinh(alpha * elapsed);
  return {sinh_rest / sinh_total, sinh_elapsed / sinh_total,
          sinh_rest * sinh_elapsed / (alpha * sinh_total)};
}

inline GaussianLaw bridge_posterior(const BridgeParams& params, double t, const Matrix& start,
                                    const Matrix& end) {
  if (start.rows() != end.rows() || start.cols() != end.cols()) {
    throw std::invalid_argument("bridge_posterior: endpoint shapes differ");
  }
  const auto c = bridge_coefficients(params, t);
  return {c.start * start + c.end * end, c.var};
}

/// Standard normal matrix of the given shape.
inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = normal(rng);
  return z;
}

/// Symmetric standard normal noise with zero diagonal: the upper triangle is
/// drawn row by row and mirrored.
inline Matrix symmetric_gaussian(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) z(i, j) = z(j, i) = normal(rng);
  return z;
}

inline Matrix channel_noise(Channel channel, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return channel == Channel::adjacency ? symmetric_gaussian(rows, rng)
                                       : gaussian_matrix(rows, cols, rng);
}

/// Draw from the prior N(0, I) with adjacency symmetrized.
inline GraphState sample_prior(int n, int features, Rng& rng) {
  GraphState g;
  g.X = gaussian_matrix(n, features, rng);
  g.A = symmetric_gaussian(n, rng);
  return g;
}

/// Stochastic interpolant for one channel: bridge mean plus sqrt(var) * Z.
inline Matrix sample_interpolant(const BridgeParams& params, double t, const Matrix& start,
                                 const Matrix& end, Channel channel, Rng& rng) {
  const auto law = bridge_posterior(params, t, start, end);
  if (law.var == 0.0) return law.mean;
  return law.mean + std::sqrt(law.var) * channel_noise(channel, start.rows(), start.cols(), rng);
}

inline GraphState sample_interpolant(const GraphBridgeParams& params, double t,
                                     const GraphState& start, const GraphState& end, Rng& rng) {
  GraphState g;
  g.X = sample_interpolant(params.x, t, start.X, end.X, Channel::features, rng);
  g.A = sample_interpolant(params.a, t, start.A, end.A, Channel::adjacency, rng);
  return g;
}

}  // namespace gmix
