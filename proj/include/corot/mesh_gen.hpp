#pragma once

#include "corot/mesh.hpp"

#include <cstdint>

namespace corot {

/// Structured box split into 6 tets per cell (Freudenthal split, conforming).
/// Face sets: "left" (z = zmin), "right" (z = zmax), "bottom" (y = ymin),
/// "top" (y = ymax), "sides" (x = xmin or x = xmax).
struct BeamParams {
  int nx = 2, ny = 2, nz = 25;
  Vec3 lo{-0.1, -0.1, -2.5};
  Vec3 hi{0.1, 0.1, 2.5};
};

TetMesh generate_beam(const BeamParams& p);

enum class LatticePattern { Cubic, TwoStrut };

/// Desk-scale lattice stand-ins.
///
/// Cubic: voxelised cubic strut frame (struts one voxel thick along the cell
/// edges) whose nodes are displaced by a smooth seeded random field, giving
/// crooked struts. Face sets "top" (z max), "bottom" (z min), "sides".
///
/// TwoStrut: a shallow inverted-V pair of struts clamped at both feet
/// ("bottom"), with the loaded patch at the apex ("top") and lateral faces
/// ("sides").
struct LatticeParams {
  LatticePattern pattern = LatticePattern::Cubic;
  int cells_x = 2, cells_y = 1, cells_z = 2;
  int voxels_per_cell = 6;
  double voxel = 0.1;
  double perturbation = 0.02;  // amplitude of the random field (length)
  std::uint64_t seed = 1;

  // TwoStrut geometry.
  double half_span = 2.0;
  double rise = 0.25;
  double thickness = 0.1;
  double width = 0.2;
  int segments = 20;  // cells along the full span (even)
};

TetMesh generate_lattice(const LatticeParams& p);

}  // namespace corot
