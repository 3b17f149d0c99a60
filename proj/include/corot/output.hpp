#pragma once

#include "corot/solver.hpp"

#include <filesystem>
#include <fstream>

namespace corot {

/// One row of the equilibrium path.
struct PathRow {
  int step = 0;
  double lambda = 0.0;
  double arc_s = 0.0;     // arc-length radius used (0 under load control)
  double dq_norm = 0.0;   // |q_n - q_{n-1}|
  double sum_dphi = 0.0;  // sqrt(sum_e |G_e dq_e|^2) over the step
  int iterations = 0;
  double residual = 0.0;  // final free residual norm
  double energy = 0.0;    // 1/2 sum_e v^T F v
};

/// path.csv with a fixed header:
/// step,lambda,arc_s,dq_norm,sum_dphi,iterations,residual,energy
class PathWriter {
 public:
  explicit PathWriter(const std::filesystem::path& file);
  void write(const PathRow& row);

 private:
  std::ofstream out_;
};

/// Node positions: each tet maps its vertices by x = X_c + c + R (X - X_c +
/// rho U_v(xi) v); shared nodes take the average over incident tets.
std::vector<Vec3> deformed_nodes(const Model& model, const SolverState& state);

/// Legacy ASCII VTK unstructured grid: deformed points, point displacement
/// vectors, cell Cauchy stress R sigma R^T at the tet centroid (3x3 tensor)
/// and cell rotor axial vectors log(R).
void write_vtk(const std::filesystem::path& file, const Model& model, const SolverState& state);

/// Area-weighted mean displacement of a face set, from the face DOFs.
Vec3 set_mean_displacement(const Model& model, const VecX& q, const std::string& set);

}  // namespace corot
