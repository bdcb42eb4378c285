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

// Graph statistics, MMD with a total-variation kernel, validity rules and
// V.U.N. All statistics read edge presence only; bond orders are ignored.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmix/graphs.hpp"

namespace gmix {

using Histogram = std::vector<double>;

inline Histogram normalized(Histogram h) {
  double s = 0.0;
  for (double v : h) s += v;
  if (s > 0.0)
    for (double& v : h) v /= s;
  return h;
}

/// Degree distribution over bins 0..n-1.
inline Histogram degree_hist(const LabeledGraph& g) {
  if (g.n() == 0) return {};
  Histogram h(g.n(), 0.0);
  for (int i = 0; i < g.n(); ++i) h[g.degree(i)] += 1.0;
  return normalized(std::move(h));
}

inline double local_clustering(const LabeledGraph& g, int i) {
  std::vector<int> nb;
  for (int j = 0; j < g.n(); ++j)
    if (g.has_edge(i, j)) nb.push_back(j);
  const size_t d = nb.size();
  if (d < 2) return 0.0;
  int links = 0;
  for (size_t a = 0; a < d; ++a)
    for (size_t b = a + 1; b < d; ++b) links += g.has_edge(nb[a], nb[b]);
  return 2.0 * links / (static_cast<double>(d) * (d - 1));
}

/// Local clustering coefficients in 100 uniform bins on [0, 1].
inline Histogram clustering_hist(const LabeledGraph& g, int bins = 100) {
  Histogram h(bins, 0.0);
  for (int i = 0; i < g.n(); ++i) {
    const int b = std::min(bins - 1, static_cast<int>(std::floor(local_clustering(g, i) * bins)));
    h[b] += 1.0;
  }
  return normalized(std::move(h));
}

/// Orbits of connected 4-node graphlets, numbered 0..10:
///   path: 0 end, 1 middle;  star: 2 leaf, 3 centre;  cycle: 4;
///   paw: 5 tail, 6 triangle (degree 2), 7 hub;  diamond: 8 degree 2,
///   9 degree 3;  clique: 10.
inline constexpr int kOrbitCount = 11;

/// Per-node orbit counts by enumeration of all 4-subsets.
inline std::vector<std::array<double, kOrbitCount>> node_orbit_counts(const LabeledGraph& g) {
  const int n = g.n();
  std::vector<std::array<double, kOrbitCount>> counts(n);
  for (auto& c : counts) c.fill(0.0);
  auto connected = [&](const std::array<int, 4>& s) {
    int seen = 1, frontier = 1;
    while (frontier) {
      frontier = 0;
      for (int a = 0; a < 4; ++a) {
        if (!(seen >> a & 1)) continue;
        for (int b = 0; b < 4; ++b)
          if (!(seen >> b & 1) && g.has_edge(s[a], s[b])) {
            seen |= 1 << b;
            frontier = 1;
          }
      }
    }
    return seen == 0xF;
  };
  std::array<int, 4> s;
  for (s[0] = 0; s[0] < n; ++s[0])
    for (s[1] = s[0] + 1; s[1] < n; ++s[1])
      for (s[2] = s[1] + 1; s[2] < n; ++s[2])
        for (s[3] = s[2] + 1; s[3] < n; ++s[3]) {
          std::array<int, 4> deg{};
          int m = 0;
          for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b)
              if (g.has_edge(s[a], s[b])) {
                ++deg[a];
                ++deg[b];
                ++m;
              }
          if (m < 3 || !connected(s)) continue;
          const int max_deg = *std::max_element(deg.begin(), deg.end());
          for (int a = 0; a < 4; ++a) {
            int orbit = -1;
            const int d = deg[a];
            switch (m) {
              case 3: orbit = max_deg == 3 ? (d == 3 ? 3 : 2) : (d == 1 ? 0 : 1); break;
              case 4: orbit = max_deg == 2 ? 4 : (d == 1 ? 5 : d == 2 ? 6 : 7); break;
              case 5: orbit = d == 2 ? 8 : 9; break;
              case 6: orbit = 10; break;
            }
            counts[s[a]][orbit] += 1.0;
          }
        }
  return counts;
}

/// Mean per-node orbit counts.
inline std::vector<double> orbit_counts(const LabeledGraph& g) {
  std::vector<double> mean(kOrbitCount, 0.0);
  if (g.n() == 0) return mean;
  for (const auto& c : node_orbit_counts(g))
    for (int o = 0; o < kOrbitCount; ++o) mean[o] += c[o];
  for (double& v : mean) v /= g.n();
  return mean;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Iterates until the off-diagonal Frobenius norm is below tol times the
/// matrix norm.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a,
                                              double tol = 1e-10, int max_sweeps = 100) {
  const int n = static_cast<int>(a.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) total += a[i][j] * a[i][j];
  const double target = tol * std::sqrt(total);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * a[i][j] * a[i][j];
    if (std::sqrt(off) <= target) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Normalized Laplacian I - D^{-1/2} A D^{-1/2}; isolated nodes get a zero
/// row and column, hence eigenvalue 0.
inline std::vector<std::vector<double>> normalized_laplacian(const LabeledGraph& g) {
  const int n = g.n();
  std::vector<std::vector<double>> L(n, std::vector<double>(n, 0.0));
  std::vector<double> inv_sqrt(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const int d = g.degree(i);
    if (d > 0) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(d));
  }
  for (int i = 0; i < n; ++i) {
    if (g.degree(i) > 0) L[i][i] = 1.0;
    for (int j = 0; j < n; ++j)
      if (i != j && g.has_edge(i, j)) L[i][j] = -inv_sqrt[i] * inv_sqrt[j];
  }
  return L;
}

inline std::vector<double> laplacian_spectrum(const LabeledGraph& g) {
  return jacobi_eigenvalues(normalized_laplacian(g));
}

/// Normalized-Laplacian eigenvalues in 200 uniform bins on [0, 2].
/// Eigenvalues within 1e-8 below a bin edge (0, 1/2, 1 in most small graphs)
/// are counted in the upper bin, so rounding noise cannot split them.
inline Histogram laplacian_spectrum_hist(const LabeledGraph& g, int bins = 200) {
  Histogram h(bins, 0.0);
  for (double ev : laplacian_spectrum(g)) {
    const double x = std::clamp(ev, 0.0, 2.0);
    h[std::min(bins - 1, static_cast<int>(std::floor(x / 2.0 * bins + 1e-8)))] += 1.0;
  }
  return normalized(std::move(h));
}

enum class Statistic { degree, clustering, orbit, spectrum };

inline std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::degree: return "degree";
    case Statistic::clustering: return "clustering";
    case Statistic::orbit: return "orbit";
    case Statistic::spectrum: return "spectrum";
  }
  return "?";
}

inline constexpr std::array<Statistic, 4> kAllStatistics{Statistic::degree, Statistic::clustering,
                                                          Statistic::orbit, Statistic::spectrum};

/// Descriptor fed to the kernel. Orbit counts are normalized to sum 1.
inline Histogram descriptor(const LabeledGraph& g, Statistic s) {
  switch (s) {
    case Statistic::degree: return degree_hist(g);
    case Statistic::clustering: return clustering_hist(g);
    case Statistic::orbit: return normalized(orbit_counts(g));
    case Statistic::spectrum: return laplacian_spectrum_hist(g);
  }
  throw std::invalid_argument("descriptor: unknown statistic");
}

/// 1/2 sum |p - q|, shorter vector zero-padded.
inline double tv_distance(const Histogram& p, const Histogram& q) {
  const size_t n = std::max(p.size(), q.size());
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p[i] : 0.0, b = i < q.size() ? q[i] : 0.0;
    s += std::abs(a - b);
  }
  return 0.5 * s;
}

inline double tv_kernel(const Histogram& p, const Histogram& q, double sigma = 1.0) {
  const double d = tv_distance(p, q);
  return std::exp(-d * d / (2.0 * sigma * sigma));
}

/// Sum of kernel values over all ordered pairs, row by row. `parallel` may
/// run f(i) for all rows concurrently; the sum order is fixed.
inline double kernel_sum(const std::vector<Histogram>& a, const std::vector<Histogram>& b,
                         double sigma,
                         const std::function<void(int, const std::function<void(int)>&)>& parallel) {
  std::vector<double> rows(a.size(), 0.0);
  auto row = [&](int i) {
    double s = 0.0;
    for (const auto& y : b) s += tv_kernel(a[i], y, sigma);
    rows[i] = s;
  };
  if (parallel) {
    parallel(static_cast<int>(a.size()), row);
  } else {
    for (int i = 0; i < static_cast<int>(a.size()); ++i) row(i);
  }
  double s = 0.0;
  for (double r : rows) s += r;
  return s;
}

/// Squared MMD (biased estimator, all pairs including i = j), clamped at 0.
inline double mmd_tv(const std::vector<Histogram>& x, const std::vector<Histogram>& y,
                     double sigma = 1.0,
                     const std::function<void(int, const std::function<void(int)>&)>& parallel = {}) {
  if (x.empty() || y.empty()) throw std::invalid_argument("mmd_tv: empty set");
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  const double kxx = kernel_sum(x, x, sigma, parallel) / (nx * nx);
  const double kyy = kernel_sum(y, y, sigma, parallel) / (ny * ny);
  const double kxy = kernel_sum(x, y, sigma, parallel) / (nx * ny);
  return std::max(0.0, kxx + kyy - 2.0 * kxy);
}

inline double mmd_tv(const std::vector<LabeledGraph>& ref, const std::vector<LabeledGraph>& gen,
                     Statistic s, double sigma = 1.0) {
  std::vector<Histogram> x, y;
  for (const auto& g : ref) x.push_back(descriptor(g, s));
  for (const auto& g : gen) y.push_back(descriptor(g, s));
  return mmd_tv(x, y, sigma);
}

// ---------------------------------------------------------------------------
// Planarity: left-right criterion over a DFS orientation.

inline bool is_connected(const LabeledGraph& g) {
  if (g.n() == 0) return true;
  std::vector<char> seen(g.n(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w = 0; w < g.n(); ++w)
      if (!seen[w] && g.has_edge(v, w)) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
  }
  return count == g.n();
}

namespace detail {

class LeftRightPlanarity {
 public:
  explicit LeftRightPlanarity(const LabeledGraph& g) : n_(g.n()), adj_(g.n()) {
    edge_id_.assign(static_cast<size_t>(n_) * n_, -1);
    for (int u = 0; u < n_; ++u)
      for (int v = u + 1; v < n_; ++v)
        if (g.has_edge(u, v)) {
          edge_id_[u * n_ + v] = edge_id_[v * n_ + u] = static_cast<int>(src_.size());
          src_.push_back(-1);
          dst_.push_back(-1);
          adj_[u].push_back(v);
          adj_[v].push_back(u);
        }
  }

  bool run() {
    const int m = static_cast<int>(src_.size());
    if (n_ > 2 && m > 3 * n_ - 6) return false;
    height_.assign(n_, -1);
    parent_edge_.assign(n_, -1);
    lowpt_.assign(m, 0);
    lowpt2_.assign(m, 0);
    nesting_.assign(m, 0);
    for (int v = 0; v < n_; ++v) {
      if (height_[v] != -1) continue;
      height_[v] = 0;
      roots_.push_back(v);
      orient(v);
    }
    // Outgoing oriented edges sorted by nesting depth.
    out_.assign(n_, {});
    for (int e = 0; e < m; ++e) out_[src_[e]].push_back(e);
    for (auto& list : out_) {
      std::stable_sort(list.begin(), list.end(),
                       [&](int a, int b) { return nesting_[a] < nesting_[b]; });
    }
    lowpt_edge_.assign(m, -1);
    ref_.assign(m, -1);
    stack_bottom_.assign(m, -1);
    for (int root : roots_) {
      stack_.clear();
      if (!test(root)) return false;
    }
    return true;
  }

 private:
  struct Interval {
    int low = -1, high = -1;
    bool empty() const { return low == -1 && high == -1; }
  };
  struct ConflictPair {
    int id;
    Interval left, right;
    void swap() { std::swap(left, right); }
  };

  void orient(int v) {
    const int e = parent_edge_[v];
    for (int w : adj_[v]) {
      const int id = edge_id_[v * n_ + w];
      if (src_[id] != -1) continue;
      src_[id] = v;
      dst_[id] = w;
      lowpt_[id] = height_[v];
      lowpt2_[id] = height_[v];
      if (height_[w] == -1) {
        parent_edge_[w] = id;
        height_[w] = height_[v] + 1;
        orient(w);
      } else {
        lowpt_[id] = height_[w];
      }
      nesting_[id] = 2 * lowpt_[id] + (lowpt2_[id] < height_[v] ? 1 : 0);
      if (e != -1) {
        if (lowpt_[id] < lowpt_[e]) {
          lowpt2_[e] = std::min(lowpt_[e], lowpt2_[id]);
          lowpt_[e] = lowpt_[id];
        } else if (lowpt_[id] > lowpt_[e]) {
          lowpt2_[e] = std::min(lowpt2_[e], lowpt_[id]);
        } else {
          lowpt2_[e] = std::min(lowpt2_[e], lowpt2_[id]);
        }
      }
    }
  }

  int top_id() const { return stack_.empty() ? -1 : stack_.back().id; }

  bool conflicting(const Interval& i, int b) const {
    return !i.empty() && lowpt_[i.high] > lowpt_[b];
  }

  int lowest(const ConflictPair& p) const {
    if (p.left.empty()) return lowpt_[p.right.low];
    if (p.right.empty()) return lowpt_[p.left.low];
    return std::min(lowpt_[p.left.low], lowpt_[p.right.low]);
  }

  bool test(int v) {
    const int e = parent_edge_[v];
    const auto& out = out_[v];
    for (size_t k = 0; k < out.size(); ++k) {
      const int ei = out[k];
      const int w = dst_[ei];
      stack_bottom_[ei] = top_id();
      if (ei == parent_edge_[w]) {
        if (!test(w)) return false;
      } else {
        lowpt_edge_[ei] = ei;
        stack_.push_back({next_id_++, {}, {ei, ei}});
      }
      if (lowpt_[ei] < height_[v]) {
        if (k == 0) {
          lowpt_edge_[e] = lowpt_edge_[ei];
        } else if (!add_constraints(ei, e)) {
          return false;
        }
      }
    }
    if (e != -1) remove_back_edges(e);
    return true;
  }

  bool add_constraints(int ei, int e) {
    ConflictPair P{next_id_++, {}, {}};
    do {
      ConflictPair Q = stack_.back();
      stack_.pop_back();
      if (!Q.left.empty()) Q.swap();
      if (!Q.left.empty()) return false;
      if (lowpt_[Q.right.low] > lowpt_[e]) {
        if (P.right.empty()) {
          P.right = Q.right;
        } else {
          ref_[P.right.low] = Q.right.high;
        }
        P.right.low = Q.right.low;
      } else {
        ref_[Q.right.low] = lowpt_edge_[e];
      }
    } while (top_id() != stack_bottom_[ei]);
    while (!stack_.empty() &&
           (conflicting(stack_.back().left, ei) || conflicting(stack_.back().right, ei))) {
      ConflictPair Q = stack_.back();
      stack_.pop_back();
      if (conflicting(Q.right, ei)) Q.swap();
      if (conflicting(Q.right, ei)) return false;
      ref_[P.right.low] = Q.right.high;
      if (Q.right.low != -1) P.right.low = Q.right.low;
      if (P.left.empty()) {
        P.left = Q.left;
      } else {
        ref_[P.left.low] = Q.left.high;
      }
      P.left.low = Q.left.low;
    }
    if (!(P.left.empty() && P.right.empty())) stack_.push_back(P);
    return true;
  }

  void remove_back_edges(int e) {
    const int u = src_[e];
    while (!stack_.empty() && lowest(stack_.back()) == height_[u]) stack_.pop_back();
    if (!stack_.empty()) {
      ConflictPair P = stack_.back();
      stack_.pop_back();
      while (P.left.high != -1 && dst_[P.left.high] == u) P.left.high = ref_[P.left.high];
      if (P.left.high == -1 && P.left.low != -1) {
        ref_[P.left.low] = P.right.low;
        P.left.low = -1;
      }
      while (P.right.high != -1 && dst_[P.right.high] == u) P.right.high = ref_[P.right.high];
      if (P.right.high == -1 && P.right.low != -1) {
        ref_[P.right.low] = P.left.low;
        P.right.low = -1;
      }
      stack_.push_back(P);
    }
    if (lowpt_[e] < height_[u] && !stack_.empty()) {
      const int hl = stack_.back().left.high, hr = stack_.back().right.high;
      ref_[e] = (hl != -1 && (hr == -1 || lowpt_[hl] > lowpt_[hr])) ? hl : hr;
    }
  }

  int n_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> edge_id_;
  std::vector<int> src_, dst_;
  std::vector<int> height_, parent_edge_, roots_;
  std::vector<int> lowpt_, lowpt2_, nesting_;
  std::vector<std::vector<int>> out_;
  std::vector<int> lowpt_edge_, ref_, stack_bottom_;
  std::vector<ConflictPair> stack_;
  int next_id_ = 0;
};

}  // namespace detail

inline bool is_planar(const LabeledGraph& g) { return detail::LeftRightPlanarity(g).run(); }

// ---------------------------------------------------------------------------
// SBM validity surrogate.

namespace detail {

using WeightMatrix = std::vector<std::vector<double>>;

inline int compact_labels(std::vector<int>& part) {
  std::vector<int> relabel(part.size(), -1);
  int next = 0;
  for (int& c : part) {
    if (relabel[c] < 0) relabel[c] = next++;
    c = relabel[c];
  }
  return next;
}

// Moves nodes, visited in `order`, to the neighbouring community with the
// largest modularity gain until no move helps. Returns whether any moved.
inline bool local_moves(const WeightMatrix& w, std::vector<int>& part, const std::vector<int>& order,
                        double resolution) {
  const int k = static_cast<int>(w.size());
  std::vector<double> deg(k, 0.0), tot(k, 0.0);
  double two_m = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) deg[i] += w[i][j];
    tot[part[i]] += deg[i];
    two_m += deg[i];
  }
  bool improved = false;
  std::vector<double> links(k);
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool moved = false;
    for (int i : order) {
      std::fill(links.begin(), links.end(), 0.0);
      for (int j = 0; j < k; ++j)
        if (j != i && w[i][j] != 0.0) links[part[j]] += w[i][j];
      const int own = part[i];
      tot[own] -= deg[i];
      auto gain = [&](int c) { return links[c] - resolution * tot[c] * deg[i] / two_m; };
      int best = own;
      double best_gain = gain(own);
      for (int c = 0; c < k; ++c)
        if (links[c] > 0.0 && gain(c) > best_gain + 1e-12) {
          best_gain = gain(c);
          best = c;
        }
      tot[best] += deg[i];
      if (best != own) {
        part[i] = best;
        moved = improved = true;
      }
    }
    if (!moved) break;
  }
  return improved;
}

// One multi-level run: local moves, contraction into weighted super-nodes,
// repeat; then a final round of single-node moves on the original graph.
inline std::vector<int> louvain(const WeightMatrix& graph, const std::vector<int>& order,
                                double resolution) {
  const int n = static_cast<int>(graph.size());
  std::vector<int> comm(n);
  std::iota(comm.begin(), comm.end(), 0);
  WeightMatrix w = graph;
  std::vector<int> visit = order;
  while (true) {
    const int k = static_cast<int>(w.size());
    std::vector<int> part(k);
    std::iota(part.begin(), part.end(), 0);
    if (!local_moves(w, part, visit, resolution)) break;
    const int next = compact_labels(part);
    for (int& c : comm) c = part[c];
    WeightMatrix contracted(next, std::vector<double>(next, 0.0));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) contracted[part[i]][part[j]] += w[i][j];
    w = std::move(contracted);
    visit.resize(next);
    std::iota(visit.begin(), visit.end(), 0);
  }
  local_moves(graph, comm, order, resolution);
  compact_labels(comm);
  return comm;
}

inline double modularity(const WeightMatrix& w, const std::vector<int>& part, double resolution) {
  const int n = static_cast<int>(w.size());
  const int k = part.empty() ? 0 : *std::max_element(part.begin(), part.end()) + 1;
  std::vector<double> inside(k, 0.0), tot(k, 0.0);
  double two_m = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      tot[part[i]] += w[i][j];
      two_m += w[i][j];
      if (part[i] == part[j]) inside[part[i]] += w[i][j];
    }
  double q = 0.0;
  for (int c = 0; c < k; ++c) q += inside[c] / two_m - resolution * (tot[c] / two_m) * (tot[c] / two_m);
  return q;
}

}  // namespace detail

/// Greedy modularity maximisation in the multi-level style (local node
/// moves, contraction, repeat), restarted over `restarts` seeded visit
/// orders; the partition with the highest modularity wins. Deterministic.
/// Returns a community per node, numbered 0..k-1 in order of first
/// appearance.
inline std::vector<int> modularity_communities(const LabeledGraph& g, double resolution = 1.0,
                                               int restarts = 8) {
  const int n = g.n();
  std::vector<int> best(n);
  std::iota(best.begin(), best.end(), 0);
  if (g.edge_count() == 0) return best;
  detail::WeightMatrix w(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && g.has_edge(i, j)) w[i][j] = 1.0;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(0);
  double best_q = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    if (r > 0) std::shuffle(order.begin(), order.end(), rng);
    auto part = detail::louvain(w, order, resolution);
    const double q = detail::modularity(w, part, resolution);
    if (q > best_q + 1e-12) {
      best_q = q;
      best = std::move(part);
    }
  }
  return best;
}

struct SbmRule {
  int min_communities = 2, max_communities = 5;
  int min_size = 20, max_size = 40;
  double p_intra = 0.3, p_inter = 0.05;
  double sigmas = 3.0;
};

namespace detail {

// Refines a partition under the planted (p_intra, p_inter) model until
// stable, alternating two steps: merge the pair with the largest gain in
// penalized likelihood, and move single nodes to their most likely block
// (blocks may empty out). The penalty n log k is the cost of naming each
// node's block, without which splitting a sparse block always pays.
inline std::vector<int> refine_blocks(const LabeledGraph& g, std::vector<int> comm,
                                      const SbmRule& rule) {
  const int n = g.n();
  const double edge_score = std::log(rule.p_intra / rule.p_inter);
  const double gap_score = std::log((1.0 - rule.p_intra) / (1.0 - rule.p_inter));
  auto blocks = [&] { return comm.empty() ? 0 : *std::max_element(comm.begin(), comm.end()) + 1; };
  for (int round = 0; round < 100; ++round) {
    bool changed = false;
    while (true) {
      const int k = blocks();
      std::vector<double> size(k, 0.0);
      for (int c : comm) size[c] += 1.0;
      std::vector<std::vector<double>> edges(k, std::vector<double>(k, 0.0));
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (g.has_edge(i, j) && comm[i] != comm[j]) {
            edges[comm[i]][comm[j]] += 1.0;
            edges[comm[j]][comm[i]] += 1.0;
          }
      double best = 0.0;
      int ba = -1, bb = -1;
      const double saved = k > 1 ? n * std::log(static_cast<double>(k) / (k - 1)) : 0.0;
      for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) {
          const double gain = edges[a][b] * edge_score +
                              (size[a] * size[b] - edges[a][b]) * gap_score + saved;
          if (gain > best) {
            best = gain;
            ba = a;
            bb = b;
          }
        }
      if (ba < 0) break;
      for (int& c : comm)
        if (c == bb) c = ba;
      detail::compact_labels(comm);
      changed = true;
    }
    const int k = blocks();
    std::vector<int> size(k, 0);
    for (int c : comm) ++size[c];
    for (int sweep = 0; sweep < 50; ++sweep) {
      bool moved = false;
      for (int i = 0; i < n; ++i) {
        std::vector<int> links(k, 0);
        for (int j = 0; j < n; ++j)
          if (j != i && g.has_edge(i, j)) ++links[comm[j]];
        const int own = comm[i];
        --size[own];
        auto score = [&](int c) { return links[c] * edge_score + (size[c] - links[c]) * gap_score; };
        int best = own;
        for (int c = 0; c < k; ++c)
          if (size[c] > 0 && score(c) > score(best) + 1e-12) best = c;
        ++size[best];
        if (best != own) {
          comm[i] = best;
          moved = changed = true;
        }
      }
      if (!moved) break;
    }
    detail::compact_labels(comm);
    if (!changed) break;
  }
  return comm;
}

inline double penalized_log_likelihood(const LabeledGraph& g, const std::vector<int>& comm,
                                     const SbmRule& rule) {
  const int k = comm.empty() ? 0 : *std::max_element(comm.begin(), comm.end()) + 1;
  double ll = k > 0 ? -g.n() * std::log(static_cast<double>(k)) : 0.0;
  for (int i = 0; i < g.n(); ++i)
    for (int j = i + 1; j < g.n(); ++j) {
      const double p = comm[i] == comm[j] ? rule.p_intra : rule.p_inter;
      ll += std::log(g.has_edge(i, j) ? p : 1.0 - p);
    }
  return ll;
}

}  // namespace detail

/// Block assignment for the validity check. Modularity communities at
/// resolutions 1, 0.8, 0.6 and 0.5 (modularity tends to split sparse
/// blocks) are each refined under the planted model; the refinement with
/// the highest penalized likelihood wins.
inline std::vector<int> sbm_blocks(const LabeledGraph& g, const SbmRule& rule = {}) {
  std::vector<int> best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double resolution : {1.0, 0.8, 0.6, 0.5}) {
    auto comm = detail::refine_blocks(g, modularity_communities(g, resolution), rule);
    const double ll = detail::penalized_log_likelihood(g, comm, rule);
    if (ll > best_ll + 1e-9) {
      best_ll = ll;
      best = std::move(comm);
    }
  }
  return best;
}

inline bool sbm_valid(const LabeledGraph& g, const SbmRule& rule = {}) {
  const auto comm = sbm_blocks(g, rule);
  const int k = comm.empty() ? 0 : *std::max_element(comm.begin(), comm.end()) + 1;
  if (k < rule.min_communities || k > rule.max_communities) return false;
  std::vector<int> size(k, 0);
  for (int c : comm) ++size[c];
  for (int s : size)
    if (s < rule.min_size || s > rule.max_size) return false;
  std::vector<std::vector<double>> edges(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < g.n(); ++i)
    for (int j = i + 1; j < g.n(); ++j)
      if (g.has_edge(i, j)) {
        edges[comm[i]][comm[j]] += 1.0;
        if (comm[i] != comm[j]) edges[comm[j]][comm[i]] += 1.0;
      }
  auto within_band = [&](double count, double trials, double p) {
    return std::abs(count / trials - p) <= rule.sigmas * std::sqrt(p * (1.0 - p) / trials);
  };
  for (int a = 0; a < k; ++a) {
    if (!within_band(edges[a][a], size[a] * (size[a] - 1) / 2.0, rule.p_intra)) return false;
    for (int b = a + 1; b < k; ++b)
      if (!within_band(edges[a][b], static_cast<double>(size[a]) * size[b], rule.p_inter)) {
        return false;
      }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Validity, uniqueness, novelty.

enum class ValidityRule { planar, sbm, none };

inline ValidityRule parse_validity_rule(const std::string& s) {
  if (s == "planar") return ValidityRule::planar;
  if (s == "sbm") return ValidityRule::sbm;
  if (s == "none") return ValidityRule::none;
  throw std::invalid_argument("unknown validity rule '" + s + "'");
}

inline std::string to_string(ValidityRule r) {
  switch (r) {
    case ValidityRule::planar: return "planar";
    case ValidityRule::sbm: return "sbm";
    case ValidityRule::none: return "none";
  }
  return "?";
}

inline bool is_valid(const LabeledGraph& g, ValidityRule rule) {
  switch (rule) {
    case ValidityRule::planar: return is_connected(g) && is_planar(g);
    case ValidityRule::sbm: return sbm_valid(g);
    case ValidityRule::none: return true;
  }
  return false;
}

struct GraphFlags {
  bool valid, unique, novel;
};

/// Percentages over the generated set. A graph is unique if no earlier
/// generated graph is isomorphic to it, novel if no training graph is.
struct VunReport {
  double valid = 0, unique = 0, novel = 0, vun = 0;
  std::vector<GraphFlags> flags;
};

inline VunReport vun(const std::vector<LabeledGraph>& gen, const std::vector<LabeledGraph>& train,
                     ValidityRule rule) {
  VunReport r;
  if (gen.empty()) return r;
  int v = 0, u = 0, nv = 0, all = 0;
  for (size_t i = 0; i < gen.size(); ++i) {
    GraphFlags f{is_valid(gen[i], rule), true, true};
    for (size_t j = 0; j < i && f.unique; ++j) f.unique = !is_isomorphic(gen[i], gen[j]);
    for (size_t j = 0; j < train.size() && f.novel; ++j) f.novel = !is_isomorphic(gen[i], train[j]);
    v += f.valid;
    u += f.unique;
    nv += f.novel;
    all += f.valid && f.unique && f.novel;
    r.flags.push_back(f);
  }
  const double n = static_cast<double>(gen.size());
  r.valid = 100.0 * v / n;
  r.unique = 100.0 * u / n;
  r.novel = 100.0 * nv / n;
  r.vun = 100.0 * all / n;
  return r;
}

}  // namespace gmix
