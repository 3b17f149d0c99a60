#include "corot/mesh_gen.hpp"

#include <cmath>
#include <random>

namespace corot {

namespace {

// Freudenthal split of the unit cube into 6 tets sharing the main diagonal.
// Each entry lists corner offsets as bit masks (x = 1, y = 2, z = 4).
constexpr int kCubeTets[6][4] = {
    {0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7}, {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7},
};

struct GridIndex {
  int nx, ny, nz;
  int operator()(int i, int j, int k) const { return (k * (ny + 1) + j) * (nx + 1) + i; }
};

double orient(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a);
}

// Adds the 6 tets of cell (i, j, k) with positive orientation.
void add_cell(const GridIndex& g, int i, int j, int k, const std::vector<Vec3>& x,
              std::vector<std::array<int, 4>>& tets) {
  for (const auto& ct : kCubeTets) {
    std::array<int, 4> t{};
    for (int c = 0; c < 4; ++c) {
      const int m = ct[c];
      t[c] = g(i + (m & 1), j + ((m >> 1) & 1), k + ((m >> 2) & 1));
    }
    if (orient(x[t[0]], x[t[1]], x[t[2]], x[t[3]]) < 0.0) std::swap(t[2], t[3]);
    tets.push_back(t);
  }
}

// Drops unreferenced nodes and renumbers tets; returns old -> new map.
std::vector<int> compact(std::vector<Vec3>& nodes, std::vector<std::array<int, 4>>& tets) {
  std::vector<int> remap(nodes.size(), -1);
  std::vector<Vec3> kept;
  for (auto& t : tets)
    for (int& v : t) {
      if (remap[v] < 0) {
        remap[v] = static_cast<int>(kept.size());
        kept.push_back(nodes[v]);
      }
      v = remap[v];
    }
  nodes = std::move(kept);
  return remap;
}

// Collects boundary faces whose three vertices satisfy `pred` on their grid
// coordinates.
template <class Pred>
std::vector<int> boundary_faces_where(const TetMesh& mesh, const std::vector<Eigen::Vector3i>& ijk,
                                      Pred pred) {
  std::vector<int> out;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    if (!face.boundary()) continue;
    if (pred(ijk[face.v[0]]) && pred(ijk[face.v[1]]) && pred(ijk[face.v[2]])) out.push_back(f);
  }
  return out;
}

}  // namespace

TetMesh generate_beam(const BeamParams& p) {
  if (p.nx < 1 || p.ny < 1 || p.nz < 1) throw Error("beam cell counts must be positive");
  if (!((p.hi - p.lo).minCoeff() > 0.0)) throw Error("beam box must have positive extent");
  const GridIndex g{p.nx, p.ny, p.nz};
  std::vector<Vec3> nodes((p.nx + 1) * (p.ny + 1) * (p.nz + 1));
  std::vector<Eigen::Vector3i> ijk(nodes.size());
  for (int k = 0; k <= p.nz; ++k)
    for (int j = 0; j <= p.ny; ++j)
      for (int i = 0; i <= p.nx; ++i) {
        // Exact end coordinates so the bounding box is reproduced bit-for-bit.
        auto coord = [](double lo, double hi, int a, int n) {
          return a == n ? hi : lo + (hi - lo) * a / n;
        };
        nodes[g(i, j, k)] = Vec3(coord(p.lo.x(), p.hi.x(), i, p.nx),
                                 coord(p.lo.y(), p.hi.y(), j, p.ny),
                                 coord(p.lo.z(), p.hi.z(), k, p.nz));
        ijk[g(i, j, k)] = Eigen::Vector3i(i, j, k);
      }
  std::vector<std::array<int, 4>> tets;
  tets.reserve(6 * p.nx * p.ny * p.nz);
  for (int k = 0; k < p.nz; ++k)
    for (int j = 0; j < p.ny; ++j)
      for (int i = 0; i < p.nx; ++i) add_cell(g, i, j, k, nodes, tets);

  TetMesh mesh(nodes, tets);
  mesh.add_face_set_indices("left", boundary_faces_where(mesh, ijk, [](auto& c) { return c.z() == 0; }));
  mesh.add_face_set_indices("right", boundary_faces_where(mesh, ijk, [&](auto& c) { return c.z() == p.nz; }));
  mesh.add_face_set_indices("bottom", boundary_faces_where(mesh, ijk, [](auto& c) { return c.y() == 0; }));
  mesh.add_face_set_indices("top", boundary_faces_where(mesh, ijk, [&](auto& c) { return c.y() == p.ny; }));
  mesh.add_face_set_indices("sides", boundary_faces_where(mesh, ijk, [](auto& c) { return c.x() == 0; }));
  mesh.add_face_set_indices("sides", boundary_faces_where(mesh, ijk, [&](auto& c) { return c.x() == p.nx; }));
  return mesh;
}

namespace {

TetMesh cubic_lattice(const LatticeParams& p) {
  const int s = p.voxels_per_cell;
  if (s < 2 || p.cells_x < 1 || p.cells_y < 1 || p.cells_z < 1)
    throw Error("lattice needs at least one cell and two voxels per cell");
  const int nx = p.cells_x * s, ny = p.cells_y * s, nz = p.cells_z * s;
  const GridIndex g{nx, ny, nz};
  std::vector<Vec3> nodes((nx + 1) * (ny + 1) * (nz + 1));
  std::vector<Eigen::Vector3i> ijk(nodes.size());
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        nodes[g(i, j, k)] = p.voxel * Vec3(i, j, k);
        ijk[g(i, j, k)] = Eigen::Vector3i(i, j, k);
      }

  // Smooth seeded perturbation, tapered to zero at the top and bottom planes.
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double height = p.voxel * nz;
  const double cell = p.voxel * s;
  struct Mode {
    Vec3 k, amp;
    double phase;
  };
  std::vector<Mode> modes;
  for (int m = 0; m < 4; ++m) {
    Mode md;
    md.k = Vec3(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5).normalized() * (2.0 * M_PI / (cell * (1.0 + uni(rng))));
    md.amp = Vec3(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5) * 2.0;
    md.phase = 2.0 * M_PI * uni(rng);
    modes.push_back(md);
  }
  for (auto& x : nodes) {
    Vec3 d = Vec3::Zero();
    for (const auto& md : modes) d += md.amp * std::sin(md.k.dot(x) + md.phase);
    x += p.perturbation * 0.5 * std::sin(M_PI * x.z() / height) * d;
  }

  auto on = [&](int a) { return a % s == 0; };
  std::vector<std::array<int, 4>> tets;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        // A voxel belongs to a strut when it touches two cell planes, i.e. it
        // runs along a cell edge. The last layer attaches to the max planes.
        const bool top_x = (i == nx - 1) && on(i + 1);
        const bool top_y = (j == ny - 1) && on(j + 1);
        const bool top_z = (k == nz - 1) && on(k + 1);
        const int hits_hi = (on(i) || top_x) + (on(j) || top_y) + (on(k) || top_z);
        if (hits_hi >= 2) add_cell(g, i, j, k, nodes, tets);
      }
  auto remap = compact(nodes, tets);
  std::vector<Eigen::Vector3i> ijk_kept(nodes.size());
  for (std::size_t old = 0; old < remap.size(); ++old)
    if (remap[old] >= 0) ijk_kept[remap[old]] = ijk[old];

  TetMesh mesh(nodes, tets);
  mesh.add_face_set_indices("top", boundary_faces_where(mesh, ijk_kept, [&](auto& c) { return c.z() == nz; }));
  mesh.add_face_set_indices("bottom", boundary_faces_where(mesh, ijk_kept, [](auto& c) { return c.z() == 0; }));
  // One plane at a time: a face qualifies only when it lies in that plane.
  for (int axis = 0; axis < 2; ++axis)
    for (int level : {0, axis == 0 ? nx : ny})
      mesh.add_face_set_indices("sides", boundary_faces_where(mesh, ijk_kept, [&](auto& c) { return c[axis] == level; }));
  return mesh;
}

TetMesh two_strut(const LatticeParams& p) {
  if (p.segments < 2 || p.segments % 2 != 0) throw Error("two-strut lattice needs an even segment count");
  if (!(p.half_span > 0 && p.thickness > 0 && p.width > 0 && p.rise >= 0))
    throw Error("two-strut lattice dimensions must be positive");
  const int nx = p.segments, ny = 1, nz = 1;
  const GridIndex g{nx, ny, nz};
  std::vector<Vec3> nodes((nx + 1) * (ny + 1) * (nz + 1));
  std::vector<Eigen::Vector3i> ijk(nodes.size());
  const double a = p.half_span;
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        const double sx = 2.0 * a * i / nx;
        const double y = p.width * j / ny;
        const double z = p.thickness * k / nz;
        nodes[g(i, j, k)] = Vec3(sx, y, z + p.rise * (1.0 - std::abs(sx - a) / a));
        ijk[g(i, j, k)] = Eigen::Vector3i(i, j, k);
      }
  std::vector<std::array<int, 4>> tets;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) add_cell(g, i, j, k, nodes, tets);
  TetMesh mesh(nodes, tets);
  const int mid = nx / 2;
  mesh.add_face_set_indices("bottom", boundary_faces_where(mesh, ijk, [&](auto& c) { return c.x() == 0; }));
  mesh.add_face_set_indices("bottom", boundary_faces_where(mesh, ijk, [&](auto& c) { return c.x() == nx; }));
  mesh.add_face_set_indices("top", boundary_faces_where(mesh, ijk, [&](auto& c) {
                              return c.z() == nz && c.x() >= mid - 1 && c.x() <= mid + 1;
                            }));
  mesh.add_face_set_indices("sides", boundary_faces_where(mesh, ijk, [](auto& c) { return c.y() == 0; }));
  mesh.add_face_set_indices("sides", boundary_faces_where(mesh, ijk, [&](auto& c) { return c.y() == ny; }));
  return mesh;
}

}  // namespace

TetMesh generate_lattice(const LatticeParams& p) {
  return p.pattern == LatticePattern::TwoStrut ? two_strut(p) : cubic_lattice(p);
}

}  // namespace corot
