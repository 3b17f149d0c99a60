#pragma once

#include "corot/so3.hpp"

#include <functional>

namespace corot {

/// Euler-Bernoulli pure bending of a straight beam along z with rectangular
/// section b (along x) by h (along y), bending in the y-z plane.
struct BendingReference {
  double L = 0.0, b = 0.0, h = 0.0, E = 0.0, nu = 0.0, kappa = 0.0;
  double I = 0.0;       // b h^3 / 12
  double M = 0.0;       // E I kappa
  double energy = 0.0;  // L E I kappa^2 / 2

  /// Exact rigid placement of the section at axial coordinate X.z(), for a
  /// beam centred at the origin: section rotates by kappa z about x.
  Vec3 position(const Vec3& X) const;
  Vec3 displacement(const Vec3& X) const { return position(X) - X; }
  /// Distance between the deformed centreline end points.
  double closure() const;
  /// Axial stress at height y of the section.
  double axial_stress(double y) const { return E * kappa * y; }
};

BendingReference bending_reference(double L, double b, double h, double E, double kappa,
                                   double nu = 0.0);

/// Position of the bent section (free function form of BendingReference).
Vec3 bending_position(const Vec3& X, double kappa);

struct BruteForceOptions {
  int grid = 124;    // points per axis of the coarse cube (ball radius pi/2)
  int refine = 101;  // points per axis of each refinement cube
  int refinements = 2;
};

/// Minimizes J by exhaustive search: a dense axis-angle grid on the ball of
/// radius pi/2 around the polar factor of the boundary-averaged gradient,
/// two refinement grids, then a parabolic vertex per axis.
Rotor brute_force_rotor(const BestFitWorkspace& ws, const VecX& q,
                        const BruteForceOptions& options = {});

/// Central-difference Jacobian of f at x.
MatX fd_tangent(const std::function<VecX(const VecX&)>& f, const VecX& x, double h);

/// Face DOFs (one face) of the affine motion x = F X + t, exact on flat faces.
VecX affine_face_dofs(const FaceFrame& frame, int face_order, const Mat3& F, const Vec3& t);
/// Global DOF vector of the affine displacement field (F - I) X + t.
VecX affine_field(const TetMesh& mesh, int face_order, const Mat3& F, const Vec3& t);
/// Element-local DOF vector of the affine motion.
VecX affine_local(const BestFitWorkspace& ws, const Mat3& F, const Vec3& t);

/// Rigid motion x = Q X + t projected onto the face bases.
inline VecX rigid_motion_field(const TetMesh& mesh, int face_order, const Mat3& Q, const Vec3& t) {
  return affine_field(mesh, face_order, Q, t);
}

}  // namespace corot
