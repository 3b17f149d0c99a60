#pragma once

#include "corot/so3.hpp"
#include "corot/trefftz.hpp"

#include <Eigen/Cholesky>

namespace corot {

/// Which Spin-Filter to build.
/// Consistent: G = -B^-1 D with B from the current boundary moments; the
///   exact derivative of the rotor with respect to the face DOFs.
/// Rigid: G = -(B_r^T B_r)^-1 B_r^T D with B_r from the rotated reference
///   moments; G S = I holds at every state, derivative exact only at rigid
///   states.
enum class FilterVariant { Consistent, Rigid };

/// Configuration-independent element integrals (co-rotated frame).
/// DOF order of the element: slot k (0..3), monomial a, component i at
/// index k * 3m + 3a + i.
struct ElementGeometry {
  BestFitWorkspace ws;
  const TrefftzBasis* basis = nullptr;
  double rho = 1.0;  // local coordinate scale
  int k = 0;         // stress DOFs
  int n = 0;         // face DOFs
  MatX A0;           // k x n: integral of phi_a (N . S)_i
  MatX F;            // k x k, symmetrized
  Eigen::LLT<MatX> Fllt;
  MatX W0;  // F^-1 A0
  MatX K0;  // A0^T F^-1 A0

  Vec3 local(const Vec3& X) const { return (X - ws.centroid) / rho; }
};

/// Precomputes F, A0 and friends by exact face quadrature. Throws SingularF
/// when F is not safely positive definite. `basis` must outlive the result.
ElementGeometry make_element(const TetMesh& mesh, int tet, const TrefftzBasis& basis,
                             int face_order);

/// Volume oracle for F: integral of S^T C S over the tet.
MatX volume_flexibility(const TetMesh& mesh, int tet, const TrefftzBasis& basis);

/// Spin-Liver of one face: 3m x 3 block mapping a rotation variation onto the
/// face DOFs of the rigid displacement variation dphi x x^r.
MatX spin_liver_face(const FaceFrame& frame, const Rotor& rotor, const Vec3& ref_centroid,
                     int face_order);
/// Element Spin-Liver, n x 3.
MatX spin_liver(const BestFitWorkspace& ws, const Rotor& rotor);

/// D = dh/dq at fixed R (3 x n).
MatX rotor_dof_jacobian(const BestFitWorkspace& ws, const Mat3& R);
/// Spin-Filter, 3 x n. Throws SingularNormalMatrix.
MatX spin_filter(const BestFitWorkspace& ws, const Rotor& rotor, const VecX& q,
                 FilterVariant variant = FilterVariant::Consistent);

/// Deformational displacement coefficients d = y - c - R Y per face DOF.
VecX deformational_coefficients(const BestFitWorkspace& ws, const Rotor& rotor, const VecX& q);

/// State-dependent element blocks.
struct ElementOperators {
  Rotor rotor;
  VecX d;        // n: deformational coefficients
  MatX A;        // k x n
  MatX Q;        // k x 3
  MatX U;        // n x 3
  MatX S;        // n x 3
  MatX G;        // 3 x n
  MatX P;        // n x n, I - S G
  VecX R_sigma;  // n: internal force part of the equilibrium residual
  VecX R_eps;    // k: compatibility residual
};

/// Builds the blocks at a converged rotor.
ElementOperators assemble_blocks(const ElementGeometry& geom, const Rotor& rotor, const VecX& q,
                                 const VecX& v, FilterVariant variant = FilterVariant::Consistent);

/// Equilibrium residual R_sigma - lambda f_ext with f_ext the consistent
/// face load vector of this element (n).
VecX residual_sigma(const ElementOperators& ops, const VecX& f_ext, double lambda);
VecX residual_epsilon(const ElementOperators& ops);

/// Unsymmetric block tangent of (R_eps, R_sigma) with respect to (v, q):
/// [[F, -(A (I - S G) + Q G)], [A^T, -U G]].
MatX tangent(const ElementGeometry& geom, const ElementOperators& ops);

/// Element after eliminating the stress DOFs: K dq = -r, and the data needed
/// to recover dv = Wm dq - w.
struct Condensed {
  MatX K;  // n x n
  VecX r;  // n, R_sigma - A^T F^-1 R_eps (no external load)
  MatX Wr;   // F^-1 A
  MatX WrS;  // F^-1 A S
  MatX FiQ;  // F^-1 Q
  MatX G;
  VecX FiReps;  // F^-1 R_eps
};

Condensed condense(const ElementGeometry& geom, const ElementOperators& ops);
VecX recover_stress(const Condensed& c, const VecX& dq);

/// Complementary energy 1/2 v^T F v.
double element_energy(const ElementGeometry& geom, const VecX& v);

/// Co-rotated stress (Voigt) at a reference point.
Vec6 local_stress(const ElementGeometry& geom, const VecX& v, const Vec3& X);

}  // namespace corot
