#include "corot/oracles.hpp"

#include "corot/polynomial.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace corot {

namespace {

// sin(t)/t and (1 - cos t)/t, stable near zero.
double sinc(double t) { return std::abs(t) < 1e-6 ? 1.0 - t * t / 6.0 : std::sin(t) / t; }
double cosc(double t) { return std::sin(0.5 * t) * sinc(0.5 * t); }

}  // namespace

Vec3 bending_position(const Vec3& X, double kappa) {
  const double z = X.z(), y = X.y();
  const double th = kappa * z;
  const double c = std::cos(th), s = std::sin(th);
  return Vec3(X.x(), y * c - z * cosc(th), z * sinc(th) + y * s);
}

Vec3 BendingReference::position(const Vec3& X) const { return bending_position(X, kappa); }

double BendingReference::closure() const {
  return (position(Vec3(0, 0, 0.5 * L)) - position(Vec3(0, 0, -0.5 * L))).norm();
}

BendingReference bending_reference(double L, double b, double h, double E, double kappa, double nu) {
  if (!(E > 0.0)) throw Error("bending reference needs E > 0");
  if (kappa < 0.0) throw Error("bending reference needs kappa >= 0");
  BendingReference r;
  r.L = L, r.b = b, r.h = h, r.E = E, r.nu = nu, r.kappa = kappa;
  r.I = b * h * h * h / 12.0;
  r.M = E * r.I * kappa;
  r.energy = 0.5 * L * E * r.I * kappa * kappa;
  return r;
}

namespace {

double J_of(const BestFitWorkspace& ws, const std::array<Vec3, 4>& xbar, const Mat3& R) {
  Vec3 h = Vec3::Zero();
  for (int k = 0; k < 4; ++k) h += ws.faces[k].N.cross(R.transpose() * xbar[k]);
  return 0.5 * h.squaredNorm();
}

struct GridBest {
  Vec3 phi;
  double J;
};

GridBest scan(const BestFitWorkspace& ws, const std::array<Vec3, 4>& xbar, const Mat3& Rc,
              const Vec3& center, double half, int n, double ball) {
  GridBest best{center, std::numeric_limits<double>::infinity()};
  const double step = 2.0 * half / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Vec3 phi = center + Vec3(-half + i * step, -half + j * step, -half + k * step);
        if (ball > 0.0 && phi.norm() > ball) continue;
        const double J = J_of(ws, xbar, exp_map(phi) * Rc);
        if (J < best.J) best = {phi, J};
      }
  return best;
}

}  // namespace

Rotor brute_force_rotor(const BestFitWorkspace& ws, const VecX& q, const BruteForceOptions& o) {
  const auto xbar = first_moments(ws, q);
  // Search centre: polar factor of the boundary-averaged gradient.
  Mat3 F = Mat3::Zero();
  for (int k = 0; k < 4; ++k) F += xbar[k] * ws.faces[k].N.transpose();
  Eigen::JacobiSVD<Mat3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  if ((U * svd.matrixV().transpose()).determinant() < 0.0) U.col(2) = -U.col(2);
  const Mat3 Rc = U * svd.matrixV().transpose();

  const double radius = 0.5 * M_PI;
  GridBest best = scan(ws, xbar, Rc, Vec3::Zero(), radius, o.grid, radius);
  double step = 2.0 * radius / (o.grid - 1);
  for (int r = 0; r < o.refinements; ++r) {
    const double half = 1.5 * step;
    best = scan(ws, xbar, Rc, best.phi, half, o.refine, 0.0);
    step = 2.0 * half / (o.refine - 1);
  }
  // Parabolic vertex along each axis through the best sample.
  Vec3 phi = best.phi;
  for (int a = 0; a < 3; ++a) {
    const Vec3 e = step * Vec3::Unit(a);
    const double jm = J_of(ws, xbar, exp_map(phi - e) * Rc);
    const double j0 = J_of(ws, xbar, exp_map(phi) * Rc);
    const double jp = J_of(ws, xbar, exp_map(phi + e) * Rc);
    const double den = jm - 2.0 * j0 + jp;
    if (den > 0.0) {
      const double t = 0.5 * (jm - jp) / den;
      if (std::abs(t) <= 1.0) phi[a] += t * step;
    }
  }
  Rotor r;
  r.R = orthonormalize(exp_map(phi) * Rc);
  r.c = boundary_centroid(ws, q) - ws.centroid;
  return r;
}

MatX fd_tangent(const std::function<VecX(const VecX&)>& f, const VecX& x, double h) {
  const VecX f0 = f(x);
  MatX J(f0.size(), x.size());
  VecX xp = x;
  for (int j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + h;
    const VecX fp = f(xp);
    xp[j] = x[j] - h;
    const VecX fm = f(xp);
    xp[j] = x[j];
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

VecX affine_face_dofs(const FaceFrame& fr, int face_order, const Mat3& F, const Vec3& t) {
  const int m = monomial_count(2, face_order);
  const Mat3 D = F - Mat3::Identity();
  VecX d = VecX::Zero(3 * m);
  d.segment<3>(0) = D * fr.origin + t;
  d.segment<3>(3) = D * fr.e1;
  d.segment<3>(6) = D * fr.e2;
  return d;
}

VecX affine_field(const TetMesh& mesh, int face_order, const Mat3& F, const Vec3& t) {
  const int b = 3 * monomial_count(2, face_order);
  VecX q(mesh.num_faces() * b);
  for (int f = 0; f < mesh.num_faces(); ++f) q.segment(f * b, b) = affine_face_dofs(mesh.frames()[f], face_order, F, t);
  return q;
}

VecX affine_local(const BestFitWorkspace& ws, const Mat3& F, const Vec3& t) {
  const int b = 3 * ws.m;
  VecX q(4 * b);
  for (int k = 0; k < 4; ++k) q.segment(k * b, b) = affine_face_dofs(ws.faces[k].frame, ws.order, F, t);
  return q;
}

}  // namespace corot
