#include "stabilens/meshing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Eigenvalues>

#include "ply.hpp"
#include "stabilens/parallel.hpp"
#include "stabilens/spatial.hpp"

namespace stabilens {
namespace {

using Cell = std::array<std::int32_t, 3>;

std::uint64_t cell_key(std::int64_t x, std::int64_t y, std::int64_t z) { return CellKey::pack(x, y, z); }
std::uint64_t cell_key(const Cell& c) { return CellKey::pack(c[0], c[1], c[2]); }

// Integer cell containing p at the given depth, clamped into the root cube.
Cell cell_of(const Vec3& p, const Vec3& origin, double cell, int depth) {
  const std::int32_t n = 1 << depth;
  Cell c;
  for (int a = 0; a < 3; ++a)
    c[a] = std::clamp(static_cast<std::int32_t>(std::floor((p[a] - origin[a]) / cell)), 0, n - 1);
  return c;
}

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a > b) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

// Lattice of indicator samples at one octree depth: the corners of every cell
// present at that depth.
struct Level {
  int depth = 0;
  double h = 0;
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  std::vector<Cell> coords;
  std::vector<char> interior;  // all eight incident cells present
  std::vector<double> chi;

  std::uint32_t at(std::int64_t x, std::int64_t y, std::int64_t z) const { return index.at(cell_key(x, y, z)); }
};

Level make_level(const Octree& tree, int depth) {
  Level lv;
  lv.depth = depth;
  lv.h = tree.cell_size(depth);
  const auto& cells = tree.cells_at(depth);
  std::unordered_set<std::uint64_t> present;
  present.reserve(cells.size() * 2);
  for (const auto& c : cells) present.insert(cell_key(c));
  lv.index.reserve(cells.size() * 2);
  for (const auto& c : cells)
    for (int corner = 0; corner < 8; ++corner) {
      const Cell n{c[0] + (corner & 1), c[1] + ((corner >> 1) & 1), c[2] + ((corner >> 2) & 1)};
      const auto [it, inserted] = lv.index.try_emplace(cell_key(n), static_cast<std::uint32_t>(lv.coords.size()));
      if (inserted) lv.coords.push_back(n);
    }
  lv.interior.resize(lv.coords.size());
  for (std::size_t i = 0; i < lv.coords.size(); ++i) {
    const Cell& n = lv.coords[i];
    bool all = true;
    for (int corner = 0; corner < 8 && all; ++corner)
      all = present.count(cell_key(n[0] - (corner & 1), n[1] - ((corner >> 1) & 1), n[2] - ((corner >> 2) & 1))) > 0;
    lv.interior[i] = all;
  }
  lv.chi.assign(lv.coords.size(), 0.0);
  return lv;
}

// Trilinear weights of p against the 8 corners of its cell.
struct Stencil {
  Cell base;
  std::array<double, 8> w;
};

Stencil trilinear(const Vec3& p, const Vec3& origin, double h, int depth) {
  Stencil s;
  s.base = cell_of(p, origin, h, depth);
  double f[3];
  for (int a = 0; a < 3; ++a) f[a] = std::clamp((p[a] - origin[a]) / h - s.base[a], 0.0, 1.0);
  for (int corner = 0; corner < 8; ++corner) {
    s.w[corner] = ((corner & 1) ? f[0] : 1 - f[0]) * (((corner >> 1) & 1) ? f[1] : 1 - f[1]) *
                  (((corner >> 2) & 1) ? f[2] : 1 - f[2]);
  }
  return s;
}

std::uint32_t corner_node(const Level& lv, const Cell& base, int corner) {
  return lv.at(base[0] + (corner & 1), base[1] + ((corner >> 1) & 1), base[2] + ((corner >> 2) & 1));
}

struct CgResult {
  int iterations = 0;
  double relative_residual = 0;
};

// Solves the graph-Laplacian system of one level: each interior node i obeys
// sum_j (chi_i - chi_j) = -h sum_j g_ij over its six lattice neighbours, where
// g_ij is the target gradient along the edge. Non-interior nodes are fixed.
CgResult solve_level(Level& lv, const std::vector<Vec3>& field, double tol, int max_iter) {
  const std::size_t n_nodes = lv.coords.size();
  std::vector<std::int32_t> unknown(n_nodes, -1);
  std::vector<std::uint32_t> nodes;
  for (std::uint32_t i = 0; i < n_nodes; ++i)
    if (lv.interior[i]) {
      unknown[i] = static_cast<std::int32_t>(nodes.size());
      nodes.push_back(i);
    }
  const std::size_t n = nodes.size();
  CgResult res;
  if (n == 0) return res;

  static constexpr int kDir[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<std::array<std::int32_t, 6>> nbr(n);
  std::vector<double> b(n, 0.0), x(n);
  for (std::size_t u = 0; u < n; ++u) {
    const std::uint32_t i = nodes[u];
    const Cell& c = lv.coords[i];
    x[u] = lv.chi[i];
    double rhs = 0;
    for (int d = 0; d < 6; ++d) {
      const std::uint32_t j = lv.at(c[0] + kDir[d][0], c[1] + kDir[d][1], c[2] + kDir[d][2]);
      const Vec3 e(kDir[d][0], kDir[d][1], kDir[d][2]);
      rhs -= lv.h * 0.5 * (field[i] + field[j]).dot(e);
      nbr[u][d] = unknown[j];
      if (unknown[j] < 0) rhs += lv.chi[j];
    }
    b[u] = rhs;
  }
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t u = 0; u < n; ++u) {
      double acc = 6.0 * v[u];
      for (int d = 0; d < 6; ++d)
        if (nbr[u][d] >= 0) acc -= v[nbr[u][d]];
      out[u] = acc;
    }
  };
  auto dot = [n](const std::vector<double>& a, const std::vector<double>& c) {
    double s = 0;
    for (std::size_t u = 0; u < n; ++u) s += a[u] * c[u];
    return s;
  };
  const double b_norm = std::sqrt(dot(b, b));
  std::vector<double> r(n), p(n), ap(n);
  apply(x, ap);
  for (std::size_t u = 0; u < n; ++u) r[u] = b[u] - ap[u];
  double rr = dot(r, r);
  if (b_norm == 0) {
    std::fill(x.begin(), x.end(), 0.0);
    rr = 0;
  }
  p = r;
  int it = 0;
  while (it < max_iter && std::sqrt(rr) > tol * b_norm) {
    apply(p, ap);
    const double alpha = rr / dot(p, ap);
    for (std::size_t u = 0; u < n; ++u) {
      x[u] += alpha * p[u];
      r[u] -= alpha * ap[u];
    }
    const double rr_next = dot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t u = 0; u < n; ++u) p[u] = r[u] + beta * p[u];
    ++it;
  }
  // Report the true residual rather than the recurrence.
  apply(x, ap);
  double true_rr = 0;
  for (std::size_t u = 0; u < n; ++u) true_rr += (b[u] - ap[u]) * (b[u] - ap[u]);
  for (std::size_t u = 0; u < n; ++u) lv.chi[nodes[u]] = x[u];
  res.iterations = it;
  res.relative_residual = b_norm > 0 ? std::sqrt(true_rr) / b_norm : 0.0;
  return res;
}

// Initializes a level from the coarser one by trilinear prolongation.
void prolong(const Level& coarse, Level& fine) {
  for (std::size_t i = 0; i < fine.coords.size(); ++i) {
    const Cell& c = fine.coords[i];
    std::int64_t lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = c[a] / 2;
      hi[a] = (c[a] + 1) / 2;
    }
    double sum = 0;
    int count = 0;
    for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
      for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
        for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
          sum += coarse.chi[coarse.at(x, y, z)];
          ++count;
        }
    fine.chi[i] = sum / count;
  }
}

}  // namespace

void TriangleMesh::validate() const {
  const std::size_t m = vertices.size();
  if (!vertex_colors.empty() && vertex_colors.size() != m) throw InvalidInput("mesh: color count mismatch");
  if (!vertex_density.empty() && vertex_density.size() != m) throw InvalidInput("mesh: density count mismatch");
  for (const auto& v : vertices)
    if (!v.allFinite()) throw InvalidInput("mesh: non-finite vertex");
  for (const auto& t : triangles) {
    if (t[0] >= m || t[1] >= m || t[2] >= m) throw InvalidInput("mesh: triangle index out of range");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw InvalidInput("mesh: degenerate triangle");
  }
}

AxisAlignedBox AxisAlignedBox::bounding(std::span<const Vec3> points) {
  if (points.empty()) throw DegenerateError("bounding box of an empty point set");
  AxisAlignedBox box{points[0], points[0]};
  for (const auto& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

AxisAlignedBox AxisAlignedBox::expanded(double fraction) const {
  const Vec3 pad = (max - min) * fraction;
  return {min - pad, max + pad};
}

Octree::Octree(std::span<const Vec3> samples, const Vec3& center, double half_width, int max_depth, int full_depth,
               int dilation)
    : max_depth_(max_depth), cells_(max_depth + 1) {
  if (!(half_width > 0)) throw InvalidInput("octree: root must have positive width");
  if (max_depth < 0 || max_depth > 16) throw InvalidInput("octree: depth out of range");
  std::unordered_map<std::uint64_t, std::int32_t> node_of;
  node_of[cell_key(0, 0, 0)] = add_node(center, half_width, 0);
  cells_[0].push_back({0, 0, 0});
  const Vec3 origin = center - Vec3::Constant(half_width);
  for (int depth = 0; depth < max_depth; ++depth) {
    const double h = 2.0 * half_width / static_cast<double>(1 << depth);
    const std::int32_t n = 1 << depth;
    std::vector<Cell> refine;
    if (depth < full_depth) {
      refine = cells_[depth];
    } else {
      std::unordered_set<std::uint64_t> existing;
      for (const auto& c : cells_[depth]) existing.insert(cell_key(c));
      std::unordered_set<std::uint64_t> occupied;
      for (const auto& s : samples) occupied.insert(cell_key(cell_of(s, origin, h, depth)));
      std::unordered_set<std::uint64_t> chosen;
      for (const auto& c : cells_[depth]) {
        bool near = false;
        for (int dx = -dilation; dx <= dilation && !near; ++dx)
          for (int dy = -dilation; dy <= dilation && !near; ++dy)
            for (int dz = -dilation; dz <= dilation && !near; ++dz) {
              const std::int64_t x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
              if (x < 0 || y < 0 || z < 0 || x >= n || y >= n || z >= n) continue;
              near = occupied.count(cell_key(x, y, z)) > 0;
            }
        if (near) refine.push_back(c);
      }
    }
    std::vector<Cell>& next = cells_[depth + 1];
    next.reserve(refine.size() * 8);
    std::unordered_map<std::uint64_t, std::int32_t> next_node_of;
    next_node_of.reserve(refine.size() * 8);
    for (const auto& c : refine) {
      const std::int32_t parent = node_of.at(cell_key(c));
      for (int child = 0; child < 8; ++child) {
        const Cell cc{2 * c[0] + (child & 1), 2 * c[1] + ((child >> 1) & 1), 2 * c[2] + ((child >> 2) & 1)};
        const double ch = h / 2;
        const Vec3 ccenter = origin + Vec3(cc[0] + 0.5, cc[1] + 0.5, cc[2] + 0.5) * ch;
        const std::int32_t id = add_node(ccenter, ch / 2, depth + 1);
        nodes_[parent].children[child] = id;
        next_node_of[cell_key(cc)] = id;
        next.push_back(cc);
      }
    }
    std::sort(next.begin(), next.end());
    node_of = std::move(next_node_of);
  }
}

std::int32_t Octree::add_node(const Vec3& center, double half_width, int depth) {
  OctreeNode node;
  node.center = center;
  node.half_width = half_width;
  node.depth = depth;
  nodes_.push_back(node);
  return static_cast<std::int32_t>(nodes_.size() - 1);
}

PointCloud estimate_normals(const PointCloud& pc, int k) {
  if (k < 3) throw InvalidInput("estimate_normals: k must be at least 3");
  if (pc.size() <= static_cast<std::size_t>(k))
    throw InvalidInput("estimate_normals: need more than k=" + std::to_string(k) + " points");
  const KdTree tree(pc.positions);
  PointCloud out = pc;
  out.normals.assign(pc.size(), Vec3::UnitZ());
  parallel_for((pc.size() + 1023) / 1024, [&](std::size_t chunk) {
    const std::size_t end = std::min(pc.size(), (chunk + 1) * 1024);
    for (std::size_t i = chunk * 1024; i < end; ++i) {
      const auto nn = tree.knn(pc.positions[i], static_cast<std::size_t>(k), static_cast<std::uint32_t>(i));
      Vec3 mean = pc.positions[i];
      for (const auto& n : nn) mean += pc.positions[n.index];
      mean /= static_cast<double>(nn.size() + 1);
      Mat3 cov = (pc.positions[i] - mean) * (pc.positions[i] - mean).transpose();
      for (const auto& n : nn) {
        const Vec3 d = pc.positions[n.index] - mean;
        cov += d * d.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
      out.normals[i] = eig.eigenvectors().col(0).normalized();
    }
  });
  return out;
}

OrientedNormals orient_normals(const PointCloud& pc, std::span<const Vec3> camera_centers, int k) {
  if (!pc.has_normals()) throw InvalidInput("orient_normals: cloud has no normals");
  OrientedNormals result;
  result.cloud = pc;
  const std::size_t n = pc.size();
  if (n == 0) return result;
  auto& normals = result.cloud.normals;

  struct Edge {
    double w;
    std::uint32_t a, b;
    bool operator<(const Edge& o) const { return std::tie(w, a, b) < std::tie(o.w, o.a, o.b); }
  };
  std::vector<Edge> edges;
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), n - 1);
  if (kk > 0) {
    const KdTree tree(pc.positions);
    edges.reserve(n * kk);
    for (std::uint32_t i = 0; i < n; ++i)
      for (const auto& nb : tree.knn(pc.positions[i], kk, i)) {
        const std::uint32_t a = std::min(i, nb.index), b = std::max(i, nb.index);
        edges.push_back({1.0 - std::abs(normals[a].dot(normals[b])), a, b});
      }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& x, const Edge& y) { return x.a == y.a && x.b == y.b; }),
              edges.end());
  std::sort(edges.begin(), edges.end());

  UnionFind uf(n);
  std::vector<std::vector<std::uint32_t>> tree_adj(n);
  for (const auto& e : edges)
    if (uf.unite(e.a, e.b)) {
      tree_adj[e.a].push_back(e.b);
      tree_adj[e.b].push_back(e.a);
    }

  std::vector<std::vector<std::uint32_t>> components;
  {
    std::unordered_map<std::uint32_t, std::size_t> comp_of_root;
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t r = uf.find(i);
      auto [it, inserted] = comp_of_root.try_emplace(r, components.size());
      if (inserted) components.emplace_back();
      components[it->second].push_back(i);
    }
  }
  result.components = components.size();

  std::vector<char> visited(n, 0);
  for (const auto& comp : components) {
    std::uint32_t seed = comp.front();
    for (auto i : comp)
      if (pc.positions[i].z() > pc.positions[seed].z()) seed = i;
    if (normals[seed].z() < 0) normals[seed] = -normals[seed];
    std::queue<std::uint32_t> q;
    q.push(seed);
    visited[seed] = 1;
    while (!q.empty()) {
      const std::uint32_t u = q.front();
      q.pop();
      for (auto v : tree_adj[u]) {
        if (visited[v]) continue;
        visited[v] = 1;
        if (normals[u].dot(normals[v]) < 0) normals[v] = -normals[v];
        q.push(v);
      }
    }
  }

  if (!camera_centers.empty()) {
    const KdTree cams(camera_centers);
    for (const auto& comp : components) {
      std::size_t facing = 0;
      for (auto i : comp) {
        const auto nearest = cams.knn(pc.positions[i], 1);
        if (normals[i].dot(camera_centers[nearest[0].index] - pc.positions[i]) > 0) ++facing;
      }
      if (2 * facing < comp.size())
        for (auto i : comp) normals[i] = -normals[i];
    }
  }
  return result;
}

TriangleMesh poisson_reconstruct(const PointCloud& pc, int max_depth, PoissonStats* stats) {
  PoissonOptions opts;
  opts.max_depth = max_depth;
  return poisson_reconstruct(pc, opts, stats);
}

TriangleMesh poisson_reconstruct(const PointCloud& pc, const PoissonOptions& opts, PoissonStats* stats) {
  if (opts.max_depth < 4 || opts.max_depth > 10) throw InvalidInput("poisson: max_depth must be in [4, 10]");
  if (pc.size() < 4) throw InvalidInput("poisson: need at least 4 points");
  if (!pc.has_normals()) throw InvalidInput("poisson: normals required");
  pc.validate();
  const AxisAlignedBox box = AxisAlignedBox::bounding(pc.positions);
  const double extent = (box.max - box.min).maxCoeff();
  if (!(extent > 0)) throw InvalidInput("poisson: all points coincide");

  const int max_depth = opts.max_depth;
  const int full_depth = std::min(opts.full_depth, max_depth);
  const Vec3 center = (box.min + box.max) / 2;
  const double half = extent * opts.scale / 2;
  const Octree tree(pc.positions, center, half, max_depth, full_depth);
  const Vec3 origin = tree.origin();

  // Area represented by each sample, from the radius of its 8 nearest neighbours.
  std::vector<double> area(pc.size());
  {
    const KdTree kd(pc.positions);
    const std::size_t k = std::min<std::size_t>(8, pc.size() - 1);
    for (std::uint32_t i = 0; i < pc.size(); ++i) {
      const auto nn = kd.knn(pc.positions[i], k, i);
      area[i] = 3.14159265358979323846 * nn.back().dist2 / static_cast<double>(k);
    }
  }

  PoissonStats local;
  PoissonStats& st = stats ? *stats : local;
  st.iterations_per_depth.assign(max_depth + 1, 0);
  st.residual_per_depth.assign(max_depth + 1, 0.0);

  Level coarse = make_level(tree, 0);
  std::vector<double> support;  // sample support at the finest level
  for (int depth = 1; depth <= max_depth; ++depth) {
    Level lv = make_level(tree, depth);
    prolong(coarse, lv);
    std::vector<Vec3> field(lv.coords.size(), Vec3::Zero());
    const double inv_h3 = 1.0 / (lv.h * lv.h * lv.h);
    if (depth == max_depth) support.assign(lv.coords.size(), 0.0);
    for (std::size_t s = 0; s < pc.size(); ++s) {
      const Stencil st_s = trilinear(pc.positions[s], origin, lv.h, depth);
      for (int corner = 0; corner < 8; ++corner) {
        const std::uint32_t node = corner_node(lv, st_s.base, corner);
        field[node] -= pc.normals[s] * (st_s.w[corner] * area[s] * inv_h3);
        if (depth == max_depth) support[node] += st_s.w[corner];
      }
    }
    const CgResult cg = solve_level(lv, field, opts.cg_tolerance, opts.cg_max_iterations);
    st.iterations_per_depth[depth] = cg.iterations;
    st.residual_per_depth[depth] = cg.relative_residual;
    if (!std::isfinite(cg.relative_residual) || cg.relative_residual > 1e-3)
      throw SolverError("poisson: solver did not converge at depth " + std::to_string(depth) + " (relative residual " +
                            std::to_string(cg.relative_residual) + ")",
                        cg.relative_residual);
    coarse = std::move(lv);
  }
  const Level& fine = coarse;

  double iso = 0;
  for (const auto& p : pc.positions) {
    const Stencil s = trilinear(p, origin, fine.h, max_depth);
    for (int corner = 0; corner < 8; ++corner) iso += s.w[corner] * fine.chi[corner_node(fine, s.base, corner)];
  }
  iso /= static_cast<double>(pc.size());
  st.iso_value = iso;

  // Marching tetrahedra over the finest cells on the Kuhn subdivision, which
  // is shared by neighbouring cubes, so the contour closes up.
  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
  auto vertex_on_edge = [&](std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
    const auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double fa = fine.chi[a], fb = fine.chi[b];
    const double t = std::clamp((iso - fa) / (fb - fa), 0.0, 1.0);
    const Vec3 pa = origin + Vec3(fine.coords[a][0], fine.coords[a][1], fine.coords[a][2]) * fine.h;
    const Vec3 pb = origin + Vec3(fine.coords[b][0], fine.coords[b][1], fine.coords[b][2]) * fine.h;
    const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    mesh.vertex_density.push_back((1 - t) * support[a] + t * support[b]);
    edge_vertex.emplace(key, id);
    return id;
  };
  auto node_pos = [&](std::uint32_t i) {
    return Vec3(fine.coords[i][0], fine.coords[i][1], fine.coords[i][2]);
  };
  static constexpr int kPerm[6][3] = {{1, 2, 4}, {1, 4, 2}, {2, 1, 4}, {2, 4, 1}, {4, 1, 2}, {4, 2, 1}};
  auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, const Vec3& outward) {
    const Vec3 n = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
    if (n.dot(outward) < 0) std::swap(b, c);
    mesh.triangles.push_back({a, b, c});
  };
  for (const auto& cell : tree.cells_at(max_depth)) {
    std::array<std::uint32_t, 8> corner;
    bool any_in = false, any_out = false;
    for (int c = 0; c < 8; ++c) {
      corner[c] = corner_node(fine, cell, c);
      (fine.chi[corner[c]] > iso ? any_in : any_out) = true;
    }
    if (!any_in || !any_out) continue;
    for (const auto& perm : kPerm) {
      const std::array<std::uint32_t, 4> tet{corner[0], corner[perm[0]], corner[perm[0] | perm[1]], corner[7]};
      std::array<std::uint32_t, 4> in{}, out{};
      int n_in = 0, n_out = 0;
      for (auto v : tet) (fine.chi[v] > iso ? in[n_in++] : out[n_out++]) = v;
      if (n_in == 0 || n_out == 0) continue;
      Vec3 c_in = Vec3::Zero(), c_out = Vec3::Zero();
      for (int i = 0; i < n_in; ++i) c_in += node_pos(in[i]);
      for (int i = 0; i < n_out; ++i) c_out += node_pos(out[i]);
      const Vec3 outward = c_out / n_out - c_in / n_in;
      if (n_in == 1) {
        emit(vertex_on_edge(in[0], out[0]), vertex_on_edge(in[0], out[1]), vertex_on_edge(in[0], out[2]), outward);
      } else if (n_in == 3) {
        emit(vertex_on_edge(out[0], in[0]), vertex_on_edge(out[0], in[1]), vertex_on_edge(out[0], in[2]), outward);
      } else {
        const std::uint32_t q0 = vertex_on_edge(in[0], out[0]), q1 = vertex_on_edge(in[0], out[1]),
                            q2 = vertex_on_edge(in[1], out[1]), q3 = vertex_on_edge(in[1], out[0]);
        emit(q0, q1, q2, outward);
        emit(q0, q2, q3, outward);
      }
    }
  }

  if (pc.has_colors() && !mesh.vertices.empty()) {
    const KdTree kd(pc.positions);
    mesh.vertex_colors.resize(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
      mesh.vertex_colors[v] = pc.colors[kd.knn(mesh.vertices[v], 1)[0].index];
  }
  return mesh;
}

TriangleMesh trim_mesh(const TriangleMesh& mesh, double density_quantile, const AxisAlignedBox& bbox) {
  if (!(density_quantile >= 0 && density_quantile < 1)) throw InvalidInput("trim_mesh: quantile must be in [0, 1)");
  if (!bbox.valid()) throw InvalidInput("trim_mesh: invalid bounding box");
  const std::size_t m = mesh.vertices.size();
  double threshold = -std::numeric_limits<double>::infinity();
  if (!mesh.vertex_density.empty() && m > 0) {
    std::vector<double> sorted = mesh.vertex_density;
    std::sort(sorted.begin(), sorted.end());
    const double pos = density_quantile * static_cast<double>(m - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, m - 1);
    threshold = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  }
  std::vector<char> keep(m);
  for (std::size_t v = 0; v < m; ++v)
    keep[v] = bbox.contains(mesh.vertices[v]) && (mesh.vertex_density.empty() || mesh.vertex_density[v] >= threshold);

  std::vector<char> used(m, 0);
  std::vector<Triangle> tris;
  for (const auto& t : mesh.triangles)
    if (keep[t[0]] && keep[t[1]] && keep[t[2]]) {
      tris.push_back(t);
      used[t[0]] = used[t[1]] = used[t[2]] = 1;
    }
  std::vector<std::uint32_t> remap(m, 0);
  TriangleMesh out;
  for (std::size_t v = 0; v < m; ++v) {
    if (!used[v]) continue;
    remap[v] = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(mesh.vertices[v]);
    if (mesh.has_colors()) out.vertex_colors.push_back(mesh.vertex_colors[v]);
    if (!mesh.vertex_density.empty()) out.vertex_density.push_back(mesh.vertex_density[v]);
  }
  out.triangles.reserve(tris.size());
  for (const auto& t : tris) out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  return out;
}

void write_mesh_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  mesh.validate();
  std::vector<ply::Property> props;
  for (int a = 0; a < 3; ++a)
    props.push_back({std::string(1, "xyz"[a]), ply::Type::kFloat32,
                     [&mesh, a](std::size_t i) { return mesh.vertices[i][a]; }});
  const char* channel[] = {"red", "green", "blue"};
  for (int a = 0; a < 3; ++a)
    props.push_back({channel[a], ply::Type::kUint8, [&mesh, a](std::size_t i) {
                       const double c = mesh.has_colors() ? mesh.vertex_colors[i][a] : 1.0;
                       return std::round(std::clamp(c, 0.0, 1.0) * 255.0);
                     }});
  ply::write(path, mesh.vertices.size(), props, &mesh.triangles);
}

TriangleMesh read_mesh_ply(const std::filesystem::path& path) {
  const ply::Data d = ply::read(path);
  if (!d.vertex.count("x") || !d.vertex.count("y") || !d.vertex.count("z"))
    throw FormatError(path.string() + ": vertex positions missing");
  TriangleMesh mesh;
  const auto &x = d.vertex.at("x"), &y = d.vertex.at("y"), &z = d.vertex.at("z");
  mesh.vertices.resize(d.vertex_count);
  for (std::size_t i = 0; i < d.vertex_count; ++i) mesh.vertices[i] = {x[i], y[i], z[i]};
  if (d.vertex.count("red") && d.vertex.count("green") && d.vertex.count("blue")) {
    const auto &r = d.vertex.at("red"), &g = d.vertex.at("green"), &b = d.vertex.at("blue");
    mesh.vertex_colors.resize(d.vertex_count);
    for (std::size_t i = 0; i < d.vertex_count; ++i) mesh.vertex_colors[i] = Vec3(r[i], g[i], b[i]) / 255.0;
  }
  mesh.triangles = d.faces;
  try {
    mesh.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return mesh;
}

}  // namespace stabilens
