#pragma once

#include "corot/mesh.hpp"

#include <array>
#include <vector>

namespace corot {

/// Skew matrix with spin(v) y = v x y.
Mat3 spin(const Vec3& v);
/// Inverse of spin on the antisymmetric part of W.
Vec3 axial(const Mat3& W);
/// Rodrigues exponential; series coefficients below |phi| = 1e-8.
Mat3 exp_map(const Vec3& phi);
/// Principal logarithm, |result| <= pi.
Vec3 log_map(const Mat3& R);
/// Nearest proper orthogonal matrix (polar factor).
Mat3 orthonormalize(const Mat3& A);
/// Rotation angle of A B^T.
double axial_distance(const Mat3& A, const Mat3& B);

struct Rotor {
  Mat3 R = Mat3::Identity();
  Vec3 c = Vec3::Zero();  // current minus reference boundary centroid
};

/// Exp(dphi) R, re-orthonormalized; translation unchanged.
Rotor compose(const Rotor& rotor, const Vec3& dphi);

/// Reference boundary data of one tet, viewed from that tet. Face DOF
/// vectors of the tet are laid out slot by slot (slot k = face opposite
/// vertex k), each slot holding 3m coefficients of the canonical face frame.
struct BestFitWorkspace {
  struct FaceData {
    int face = -1;
    double sign = 1.0;  // +1 when the canonical normal is outward here
    FaceFrame frame;    // canonical frame of the face
    Vec3 N;             // outward unit normal for this tet
    VecX moments;       // integral of each scalar face monomial
  };

  int tet = -1;
  int order = 1;  // face polynomial order p
  int m = 0;      // scalar monomials per face
  std::array<FaceData, 4> faces;
  Vec3 centroid;                    // reference boundary centroid
  std::array<Vec3, 4> ref_moments;  // integral of (X - centroid) per face
  double area = 0.0;
  double volume = 0.0;
  double radius = 0.0;  // max vertex distance from the centroid

  int dofs() const { return 12 * m; }
  /// Coefficients of the reference position on slot k (3m vector).
  VecX reference_coefficients(int k) const;
  /// Default rotor tolerance on |H|: 1e-13 * volume^2.
  double default_tolerance() const;
};

/// Integral of each scalar face monomial over a face, in its canonical frame.
VecX face_monomial_integrals(const TetMesh& mesh, int face, int face_order);

BestFitWorkspace make_workspace(const TetMesh& mesh, int tet, int face_order);

/// Current boundary centroid from local face DOFs.
Vec3 boundary_centroid(const BestFitWorkspace& ws, const VecX& q);
/// Integral of (x - current centroid) over each face.
std::array<Vec3, 4> first_moments(const BestFitWorkspace& ws, const VecX& q);
/// Boundary-averaged deformation gradient (1/V) sum xbar_f (x) N_f.
Mat3 average_gradient(const BestFitWorkspace& ws, const VecX& q);

Vec3 evaluate_h(const BestFitWorkspace& ws, const Mat3& R, const VecX& q);
Vec3 evaluate_h(const TetMesh& mesh, int tet, const Rotor& rotor, const VecX& q, int face_order);
double functional_J(const BestFitWorkspace& ws, const Mat3& R, const VecX& q);

/// B = dh/dphi for the left update R <- Exp(dphi) R, built from face first
/// moments `xbar` (current or rotated reference).
Mat3 rotation_jacobian(const BestFitWorkspace& ws, const Mat3& R, const std::array<Vec3, 4>& xbar);

struct RotorReport {
  int iterations = 0;  // Newton iterations of the accepted solve
  int attempts = 1;    // Newton solves run, including guard restarts
  int total_iterations = 0;  // Newton iterations summed over all attempts
  double h_norm = 0.0;
  double J = 0.0;
  std::vector<double> history;  // |H| per iteration of the accepted solve
  Mat3 tangent = Mat3::Zero();  // last Newton tangent
};

/// Plain Newton on H(R) = 0 with the full tangent. Throws NoConvergence or
/// SingularTangent.
Rotor newton_rotor(const BestFitWorkspace& ws, const VecX& q, const Mat3& R_init, double tol,
                   int max_iter, RotorReport* report = nullptr);

/// True when R^T Fbar has positive definite symmetric part, i.e. R is the
/// best-fit rotation rather than a spurious half-turn stationary point.
bool on_principal_branch(const BestFitWorkspace& ws, const Mat3& R, const VecX& q);

/// Newton from R_init with the multiple-minima guard: when the warm start
/// fails or lands on a spurious branch, restarts from R_init turned by pi/2
/// about each axis and from the polar factor of Fbar, keeping the valid
/// result with the smallest J. tol <= 0 selects the default tolerance.
Rotor best_fit_rotor(const BestFitWorkspace& ws, const VecX& q, const Rotor& R_init,
                     double tol = -1.0, int max_iter = 20, RotorReport* report = nullptr);

}  // namespace corot
