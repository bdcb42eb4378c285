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

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gmix/core_sde.hpp"

namespace gmix {

/// Quantized graph: symmetric integer adjacency with zero diagonal and
/// optional per-node categories.
class LabeledGraph {
 public:
  LabeledGraph() = default;
  explicit LabeledGraph(int n) : n_(n), adj_(static_cast<size_t>(n) * n, 0) {
    if (n < 0) throw std::invalid_argument("LabeledGraph: negative node count");
  }

  int n() const { return n_; }
  int operator()(int i, int j) const { return adj_[index(i, j)]; }
  bool has_edge(int i, int j) const { return (*this)(i, j) != 0; }

  void set_edge(int i, int j, int w = 1) {
    if (i == j) throw std::invalid_argument("LabeledGraph: self loop");
    if (i < 0 || j < 0 || i >= n_ || j >= n_) throw std::out_of_range("LabeledGraph: node index");
    adj_[index(i, j)] = w;
    adj_[index(j, i)] = w;
  }

  const std::vector<int>& labels() const { return labels_; }
  bool has_labels() const { return !labels_.empty(); }
  void set_labels(std::vector<int> labels) {
    if (!labels.empty() && static_cast<int>(labels.size()) != n_) {
      throw std::invalid_argument("LabeledGraph: label count must equal n");
    }
    labels_ = std::move(labels);
  }

  int degree(int i) const {
    int d = 0;
    for (int j = 0; j < n_; ++j) d += has_edge(i, j) ? 1 : 0;
    return d;
  }

  int edge_count() const {
    int m = 0;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j) m += has_edge(i, j) ? 1 : 0;
    return m;
  }

  int max_weight() const {
    return adj_.empty() ? 0 : *std::max_element(adj_.begin(), adj_.end());
  }

  std::vector<std::vector<int>> neighbors() const {
    std::vector<std::vector<int>> nb(n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (has_edge(i, j)) nb[i].push_back(j);
    return nb;
  }

  friend bool operator==(const LabeledGraph&, const LabeledGraph&) = default;

 private:
  size_t index(int i, int j) const { return static_cast<size_t>(i) * n_ + j; }

  int n_ = 0;
  std::vector<int> adj_;
  std::vector<int> labels_;
};

// ---------------------------------------------------------------------------
// Fixed families.

inline LabeledGraph make_path(int n) {
  LabeledGraph g(n);
  for (int i = 0; i + 1 < n; ++i) g.set_edge(i, i + 1);
  return g;
}

inline LabeledGraph make_cycle(int n) {
  if (n < 3) throw std::invalid_argument("make_cycle: n must be at least 3");
  LabeledGraph g = make_path(n);
  g.set_edge(n - 1, 0);
  return g;
}

inline LabeledGraph make_star(int n) {
  LabeledGraph g(n);
  for (int i = 1; i < n; ++i) g.set_edge(0, i);
  return g;
}

inline LabeledGraph make_complete(int n) {
  LabeledGraph g(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.set_edge(i, j);
  return g;
}

inline LabeledGraph make_complete_bipartite(int a, int b) {
  LabeledGraph g(a + b);
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < b; ++j) g.set_edge(i, a + j);
  return g;
}

inline LabeledGraph make_grid(int rows, int cols) {
  LabeledGraph g(rows * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) g.set_edge(v, v + 1);
      if (r + 1 < rows) g.set_edge(v, v + cols);
    }
  return g;
}

/// floor(n/3) disjoint triangles; leftover nodes stay isolated.
inline LabeledGraph make_triangles(int n) {
  LabeledGraph g(n);
  for (int b = 0; b + 2 < n; b += 3) {
    g.set_edge(b, b + 1);
    g.set_edge(b + 1, b + 2);
    g.set_edge(b, b + 2);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Permutations. `perm[i]` is the new index of node i.

using Permutation = std::vector<int>;

inline Permutation identity_permutation(int n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

inline Permutation random_permutation(int n, Rng& rng) {
  Permutation p = identity_permutation(n);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

inline Permutation inverse(const Permutation& p) {
  Permutation inv(p.size());
  for (size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
  return inv;
}

inline void check_permutation(const Permutation& p, int n) {
  if (static_cast<int>(p.size()) != n) throw std::invalid_argument("permute: size mismatch");
  std::vector<char> seen(n, 0);
  for (int v : p) {
    if (v < 0 || v >= n || seen[v]) throw std::invalid_argument("permute: not a permutation");
    seen[v] = 1;
  }
}

inline LabeledGraph permute(const LabeledGraph& g, const Permutation& p) {
  check_permutation(p, g.n());
  LabeledGraph out(g.n());
  for (int i = 0; i < g.n(); ++i)
    for (int j = i + 1; j < g.n(); ++j)
      if (g(i, j) != 0) out.set_edge(p[i], p[j], g(i, j));
  if (g.has_labels()) {
    std::vector<int> labels(g.n());
    for (int i = 0; i < g.n(); ++i) labels[p[i]] = g.labels()[i];
    out.set_labels(std::move(labels));
  }
  return out;
}

/// Row/column permutation of a dense matrix: out(p[i], p[j]) = m(i, j).
inline Matrix permute_square(const Matrix& m, const Permutation& p) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(p[i], p[j]) = m(i, j);
  return out;
}

inline Matrix permute_rows(const Matrix& m, const Permutation& p) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(p[i]) = m.row(i);
  return out;
}

inline GraphState permute(const GraphState& g, const Permutation& p) {
  check_permutation(p, g.n());
  return {permute_rows(g.X, p), permute_square(g.A, p)};
}

// ---------------------------------------------------------------------------
// Random generators.

struct SbmOptions {
  int min_communities = 2;
  int max_communities = 5;
  int min_size = 20;
  int max_size = 40;
  double p_intra = 0.3;
  double p_inter = 0.05;
};

struct SbmDraw {
  LabeledGraph graph;
  std::vector<int> community;  // block id per node
};

inline SbmDraw gen_sbm_with_blocks(const SbmOptions& opt, Rng& rng) {
  if (opt.min_communities < 1 || opt.max_communities < opt.min_communities ||
      opt.min_size < 1 || opt.max_size < opt.min_size) {
    throw std::invalid_argument("gen_sbm: invalid ranges");
  }
  std::uniform_int_distribution<int> k_dist(opt.min_communities, opt.max_communities);
  std::uniform_int_distribution<int> size_dist(opt.min_size, opt.max_size);
  const int k = k_dist(rng);
  std::vector<int> community;
  for (int c = 0; c < k; ++c) {
    const int size = size_dist(rng);
    community.insert(community.end(), size, c);
  }
  const int n = static_cast<int>(community.size());
  LabeledGraph g(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double p = community[i] == community[j] ? opt.p_intra : opt.p_inter;
      if (unit(rng) < p) g.set_edge(i, j);
    }
  return {std::move(g), std::move(community)};
}

inline LabeledGraph gen_sbm(const SbmOptions& opt, Rng& rng) {
  return gen_sbm_with_blocks(opt, rng).graph;
}

struct Point2 {
  double x;
  double y;
};

namespace detail {

// Positive when d lies strictly inside the circumcircle of the
// counter-clockwise triangle (a, b, c).
inline double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

inline double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

}  // namespace detail

/// Delaunay graph of a point set by testing every triple against every other
/// point. O(n^4); intended for n up to a few hundred.
///
/// Throws std::runtime_error when a cocircular quadruple is encountered, so
/// the caller can perturb and retry.
inline LabeledGraph delaunay_graph(std::span<const Point2> pts, double tol = 1e-12) {
  const int n = static_cast<int>(pts.size());
  LabeledGraph g(n);
  if (n == 2) g.set_edge(0, 1);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        int a = i, b = j, c = k;
        const double o = detail::orient(pts[a], pts[b], pts[c]);
        if (std::abs(o) <= tol) continue;
        if (o < 0) std::swap(b, c);
        bool empty = true;
        for (int d = 0; d < n && empty; ++d) {
          if (d == a || d == b || d == c) continue;
          const double s = detail::incircle(pts[a], pts[b], pts[c], pts[d]);
          if (std::abs(s) <= tol) throw std::runtime_error("delaunay_graph: cocircular points");
          if (s > 0) empty = false;
        }
        if (empty) {
          g.set_edge(a, b);
          g.set_edge(b, c);
          g.set_edge(a, c);
        }
      }
  return g;
}

/// Random planar graph: Delaunay triangulation of n uniform points in the
/// unit square. Degenerate configurations are jittered by 1e-9 and retried.
inline LabeledGraph gen_planar(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("gen_planar: n must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {unit(rng), unit(rng)};
  std::uniform_real_distribution<double> jitter(-1e-9, 1e-9);
  for (int attempt = 0; attempt < 100; ++attempt) {
    try {
      return delaunay_graph(pts);
    } catch (const std::runtime_error&) {
      for (auto& p : pts) p = {p.x + jitter(rng), p.y + jitter(rng)};
    }
  }
  throw std::runtime_error("gen_planar: could not resolve degenerate point set");
}

enum class ToyFamily { cycles, paths, cycles_paths, triangles_stars, trio };

inline ToyFamily parse_toy_family(const std::string& s) {
  if (s == "cycles") return ToyFamily::cycles;
  if (s == "paths") return ToyFamily::paths;
  if (s == "cycles-paths") return ToyFamily::cycles_paths;
  if (s == "triangles-stars") return ToyFamily::triangles_stars;
  if (s == "trio") return ToyFamily::trio;
  throw std::invalid_argument("unknown toy family '" + s + "'");
}

/// Toy datasets for oracle and learning tests. Mixed families alternate
/// members; with `relabel` every graph gets a fresh random node order.
/// `trio` cycles through cycle, path and star on n nodes.
inline std::vector<LabeledGraph> gen_toy(ToyFamily family, int n, int count, Rng& rng,
                                         bool relabel = true) {
  std::vector<LabeledGraph> members;
  switch (family) {
    case ToyFamily::cycles: members = {make_cycle(n)}; break;
    case ToyFamily::paths: members = {make_path(n)}; break;
    case ToyFamily::cycles_paths: members = {make_cycle(n), make_path(n)}; break;
    case ToyFamily::triangles_stars: members = {make_triangles(n), make_star(n)}; break;
    case ToyFamily::trio: members = {make_cycle(n), make_path(n), make_star(n)}; break;
  }
  std::vector<LabeledGraph> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const LabeledGraph& g = members[i % members.size()];
    out.push_back(relabel ? permute(g, random_permutation(n, rng)) : g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Isomorphism.

namespace detail {

inline int triangle_count(const LabeledGraph& g) {
  int t = 0;
  const int n = g.n();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (!g.has_edge(i, j)) continue;
      for (int k = j + 1; k < n; ++k) t += (g.has_edge(i, k) && g.has_edge(j, k)) ? 1 : 0;
    }
  return t;
}

// Colour refinement (1-WL) on weighted edges and labels. Colours are dense
// ids assigned from sorted signatures, so two graphs refined side by side
// share a colour vocabulary.
inline void refine_jointly(const LabeledGraph& g1, const LabeledGraph& g2, std::vector<int>& c1,
                           std::vector<int>& c2) {
  const int n = g1.n();
  auto initial = [](const LabeledGraph& g, int v) {
    return std::vector<long long>{g.has_labels() ? g.labels()[v] : -1, g.degree(v)};
  };
  auto assign = [&](auto&& make_sig) {
    std::vector<std::vector<long long>> s1(n), s2(n);
    for (int v = 0; v < n; ++v) {
      s1[v] = make_sig(g1, c1, v);
      s2[v] = make_sig(g2, c2, v);
    }
    std::vector<std::vector<long long>> all(s1);
    all.insert(all.end(), s2.begin(), s2.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    auto id = [&](const std::vector<long long>& s) {
      return static_cast<int>(std::lower_bound(all.begin(), all.end(), s) - all.begin());
    };
    int classes = static_cast<int>(all.size());
    for (int v = 0; v < n; ++v) {
      c1[v] = id(s1[v]);
      c2[v] = id(s2[v]);
    }
    return classes;
  };
  c1.assign(n, 0);
  c2.assign(n, 0);
  int classes = assign([&](const LabeledGraph& g, const std::vector<int>&, int v) {
    return initial(g, v);
  });
  for (int round = 0; round < n; ++round) {
    const int next = assign([&](const LabeledGraph& g, const std::vector<int>& c, int v) {
      std::vector<long long> sig{c[v]};
      std::vector<long long> nb;
      for (int u = 0; u < n; ++u)
        if (g.has_edge(v, u)) nb.push_back(static_cast<long long>(c[u]) * 8 + g(v, u));
      std::sort(nb.begin(), nb.end());
      sig.insert(sig.end(), nb.begin(), nb.end());
      return sig;
    });
    if (next == classes) break;
    classes = next;
  }
}

class IsoMatcher {
 public:
  IsoMatcher(const LabeledGraph& g1, const LabeledGraph& g2, std::vector<int> c1,
             std::vector<int> c2)
      : g1_(g1), g2_(g2), c1_(std::move(c1)), c2_(std::move(c2)), n_(g1.n()),
        map_(n_, -1), used_(n_, 0) {
    // Visit rare colour classes first, then BFS-ish by connectivity.
    std::vector<int> freq(2 * n_ + 1, 0);
    for (int c : c1_) ++freq[c];
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
      return freq[c1_[a]] < freq[c1_[b]];
    });
  }

  bool run() { return extend(0); }

 private:
  bool extend(int depth) {
    if (depth == n_) return true;
    const int v = order_[depth];
    for (int w = 0; w < n_; ++w) {
      if (used_[w] || c2_[w] != c1_[v]) continue;
      if (g1_.has_labels() && g1_.labels()[v] != g2_.labels()[w]) continue;
      bool ok = true;
      for (int d = 0; d < depth && ok; ++d) {
        const int x = order_[d];
        ok = g1_(v, x) == g2_(w, map_[x]);
      }
      if (!ok) continue;
      map_[v] = w;
      used_[w] = 1;
      if (extend(depth + 1)) return true;
      map_[v] = -1;
      used_[w] = 0;
    }
    return false;
  }

  const LabeledGraph& g1_;
  const LabeledGraph& g2_;
  std::vector<int> c1_, c2_;
  int n_;
  std::vector<int> order_, map_;
  std::vector<char> used_;
};

}  // namespace detail

/// Exact isomorphism test honouring edge weights and node labels.
/// Invariant pre-filter, colour refinement, then backtracking over
/// colour-compatible assignments.
inline bool is_isomorphic(const LabeledGraph& g1, const LabeledGraph& g2) {
  if (g1.n() != g2.n() || g1.edge_count() != g2.edge_count()) return false;
  if (g1.has_labels() != g2.has_labels()) return false;
  const int n = g1.n();
  auto degree_seq = [n](const LabeledGraph& g) {
    std::vector<int> d(n);
    for (int i = 0; i < n; ++i) d[i] = g.degree(i);
    std::sort(d.begin(), d.end());
    return d;
  };
  if (degree_seq(g1) != degree_seq(g2)) return false;
  if (detail::triangle_count(g1) != detail::triangle_count(g2)) return false;
  std::vector<int> c1, c2;
  detail::refine_jointly(g1, g2, c1, c2);
  std::vector<int> h1(c1), h2(c2);
  std::sort(h1.begin(), h1.end());
  std::sort(h2.begin(), h2.end());
  if (h1 != h2) return false;
  return detail::IsoMatcher(g1, g2, std::move(c1), std::move(c2)).run();
}

}  // namespace gmix
