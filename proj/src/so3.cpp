#include "corot/so3.hpp"

#include "corot/polynomial.hpp"
#include "corot/quadrature.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace corot {

Mat3 spin(const Vec3& v) {
  Mat3 w;
  w << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return w;
}

Vec3 axial(const Mat3& W) {
  return Vec3(0.5 * (W(2, 1) - W(1, 2)), 0.5 * (W(0, 2) - W(2, 0)), 0.5 * (W(1, 0) - W(0, 1)));
}

Mat3 exp_map(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 W = spin(phi);
  double a, b;
  if (t < 1e-8) {
    a = 1.0;
    b = 0.5;
  } else {
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / (t * t);
  }
  return Mat3::Identity() + a * W + b * W * W;
}

Vec3 log_map(const Mat3& R) {
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double t = std::acos(c);
  const Vec3 w = axial(R);  // sin(t) * axis
  if (t < 1e-6) return w * (1.0 + t * t / 6.0);
  if (t < M_PI - 1e-4) return w * (t / std::sin(t));
  // Near a half turn: axis from the symmetric part R + I = 2 n n^T (approx).
  const Mat3 B = 0.5 * (R + Mat3::Identity());
  int i = 0;
  B.diagonal().maxCoeff(&i);
  Vec3 n = B.col(i) / std::sqrt(std::max(B(i, i), 1e-300));
  n.normalize();
  if (n.dot(w) < 0.0) n = -n;
  return t * n;
}

Mat3 orthonormalize(const Mat3& A) {
  Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) U.col(2) = -U.col(2);
  return U * V.transpose();
}

double axial_distance(const Mat3& A, const Mat3& B) { return log_map(A * B.transpose()).norm(); }

Rotor compose(const Rotor& rotor, const Vec3& dphi) {
  Rotor out = rotor;
  out.R = orthonormalize(exp_map(dphi) * rotor.R);
  return out;
}

VecX BestFitWorkspace::reference_coefficients(int k) const {
  VecX y = VecX::Zero(3 * m);
  const FaceFrame& fr = faces[k].frame;
  y.segment<3>(0) = fr.origin;
  y.segment<3>(3) = fr.e1;
  y.segment<3>(6) = fr.e2;
  return y;
}

double BestFitWorkspace::default_tolerance() const {
  // The tangent scales like volume^2, so this bounds the angle error near 1e-13.
  return 1e-13 * volume * volume;
}

VecX face_monomial_integrals(const TetMesh& mesh, int face, int face_order) {
  const Monomials2 monos(face_order);
  const QuadratureRule rule = triangle_rule(face_order);
  const FaceFrame& fr = mesh.frames()[face];
  const auto& v = mesh.faces()[face].v;
  Vec2 p[3];
  for (int i = 0; i < 3; ++i) {
    const Vec3 d = mesh.nodes()[v[i]] - fr.origin;
    p[i] = Vec2(d.dot(fr.e1), d.dot(fr.e2));
  }
  VecX mom = VecX::Zero(monos.size());
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Vec2 x = p[0] + rule.points[q].x() * (p[1] - p[0]) + rule.points[q].y() * (p[2] - p[0]);
    mom += (2.0 * fr.area * rule.weights[q]) * monos.eval(x);
  }
  // First moments about the face centre vanish by construction.
  mom[0] = fr.area;
  mom[1] = mom[2] = 0.0;
  return mom;
}

BestFitWorkspace make_workspace(const TetMesh& mesh, int tet, int face_order) {
  if (tet < 0 || tet >= mesh.num_tets()) throw std::out_of_range("tet index out of range");
  BestFitWorkspace ws;
  ws.tet = tet;
  ws.order = face_order;
  ws.m = monomial_count(2, face_order);
  Vec3 first = Vec3::Zero();
  for (int k = 0; k < 4; ++k) {
    auto& fd = ws.faces[k];
    fd.face = mesh.tet_face(tet, k);
    fd.sign = mesh.tet_face_sign(tet, k);
    fd.frame = mesh.frames()[fd.face];
    fd.N = fd.sign * fd.frame.normal;
    fd.moments = face_monomial_integrals(mesh, fd.face, face_order);
    ws.area += fd.frame.area;
    first += fd.frame.area * fd.frame.origin;
  }
  ws.centroid = first / ws.area;
  for (int k = 0; k < 4; ++k) ws.ref_moments[k] = ws.faces[k].frame.area * (ws.faces[k].frame.origin - ws.centroid);
  ws.volume = mesh.tet_volume(tet);
  for (int v : mesh.tets()[tet]) ws.radius = std::max(ws.radius, (mesh.nodes()[v] - ws.centroid).norm());
  return ws;
}

namespace {

// Integral of x over face slot k.
Vec3 face_integral(const BestFitWorkspace& ws, const VecX& q, int k) {
  const auto& fd = ws.faces[k];
  const int n3 = 3 * ws.m;
  Vec3 s = fd.frame.area * fd.frame.origin;
  for (int a = 0; a < ws.m; ++a) s += fd.moments[a] * q.segment<3>(k * n3 + 3 * a);
  return s;
}

}  // namespace

Vec3 boundary_centroid(const BestFitWorkspace& ws, const VecX& q) {
  Vec3 s = Vec3::Zero();
  for (int k = 0; k < 4; ++k) s += face_integral(ws, q, k);
  return s / ws.area;
}

std::array<Vec3, 4> first_moments(const BestFitWorkspace& ws, const VecX& q) {
  std::array<Vec3, 4> xbar;
  Vec3 total = Vec3::Zero();
  for (int k = 0; k < 4; ++k) total += (xbar[k] = face_integral(ws, q, k));
  const Vec3 c = total / ws.area;
  for (int k = 0; k < 4; ++k) xbar[k] -= ws.faces[k].frame.area * c;
  return xbar;
}

Mat3 average_gradient(const BestFitWorkspace& ws, const VecX& q) {
  const auto xbar = first_moments(ws, q);
  Mat3 F = Mat3::Zero();
  for (int k = 0; k < 4; ++k) F += xbar[k] * ws.faces[k].N.transpose();
  return F / ws.volume;
}

namespace {

Vec3 h_from_moments(const BestFitWorkspace& ws, const Mat3& R, const std::array<Vec3, 4>& xbar) {
  Vec3 h = Vec3::Zero();
  for (int k = 0; k < 4; ++k) h += ws.faces[k].N.cross(R.transpose() * xbar[k]);
  return h;
}

}  // namespace

Vec3 evaluate_h(const BestFitWorkspace& ws, const Mat3& R, const VecX& q) {
  return h_from_moments(ws, R, first_moments(ws, q));
}

Vec3 evaluate_h(const TetMesh& mesh, int tet, const Rotor& rotor, const VecX& q, int face_order) {
  return evaluate_h(make_workspace(mesh, tet, face_order), rotor.R, q);
}

double functional_J(const BestFitWorkspace& ws, const Mat3& R, const VecX& q) {
  return 0.5 * evaluate_h(ws, R, q).squaredNorm();
}

Mat3 rotation_jacobian(const BestFitWorkspace& ws, const Mat3& R, const std::array<Vec3, 4>& xbar) {
  Mat3 B = Mat3::Zero();
  for (int k = 0; k < 4; ++k) B += spin(ws.faces[k].N) * R.transpose() * spin(xbar[k]);
  return B;
}

Rotor newton_rotor(const BestFitWorkspace& ws, const VecX& q, const Mat3& R_init, double tol,
                   int max_iter, RotorReport* report) {
  const auto xbar = first_moments(ws, q);
  Rotor rotor;
  rotor.R = orthonormalize(R_init);
  rotor.c = boundary_centroid(ws, q) - ws.centroid;

  RotorReport rep;
  for (int it = 0;; ++it) {
    const Mat3& R = rotor.R;
    const Vec3 h = h_from_moments(ws, R, xbar);
    const Mat3 B = rotation_jacobian(ws, R, xbar);
    const Vec3 H = B.transpose() * h;
    rep.history.push_back(H.norm());
    rep.iterations = it;
    rep.h_norm = H.norm();
    rep.J = 0.5 * h.squaredNorm();
    if (H.norm() <= tol) break;
    if (it >= max_iter) {
      if (report) *report = rep;
      throw NoConvergence("best-fit rotor did not converge", it, H.norm());
    }
    // Full tangent: B^T B plus the second-order term h^T C_i in row i.
    Mat3 K = B.transpose() * B;
    for (int i = 0; i < 3; ++i) {
      Mat3 Ci = Mat3::Zero();
      for (int k = 0; k < 4; ++k)
        Ci += spin(ws.faces[k].N) * R.transpose() * spin(xbar[k].cross(Vec3::Unit(i)));
      K.row(i) += h.transpose() * Ci;
    }
    rep.tangent = K;
    Eigen::JacobiSVD<Mat3> svd(K);
    const auto sv = svd.singularValues();
    if (!(sv[2] > 0.0) || sv[0] / sv[2] > 1e12) {
      if (report) *report = rep;
      throw SingularTangent("best-fit rotor tangent is singular");
    }
    const Vec3 dphi = K.partialPivLu().solve(-H);
    rotor.R = orthonormalize(exp_map(dphi) * R);
  }
  if (report) *report = rep;
  return rotor;
}

bool on_principal_branch(const BestFitWorkspace& ws, const Mat3& R, const VecX& q) {
  const Mat3 M = R.transpose() * average_gradient(ws, q);
  const Mat3 S = 0.5 * (M + M.transpose());
  const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(S, Eigen::EigenvaluesOnly).eigenvalues();
  // The margin rejects the singular stationary points at a relative quarter
  // turn, where H = B^T h vanishes with h != 0.
  return ev[0] > 1e-6 * ev.cwiseAbs().maxCoeff();
}

Rotor best_fit_rotor(const BestFitWorkspace& ws, const VecX& q, const Rotor& R_init, double tol,
                     int max_iter, RotorReport* report) {
  if (tol <= 0.0) tol = ws.default_tolerance();
  int attempts = 0, total = 0;
  bool singular = false;
  // One Newton solve; nullopt when it fails or lands off the principal branch.
  auto solve = [&](const Mat3& start, RotorReport& rep) -> std::optional<Rotor> {
    ++attempts;
    try {
      Rotor r = newton_rotor(ws, q, start, tol, max_iter, &rep);
      total += rep.iterations;
      if (on_principal_branch(ws, r.R, q)) return r;
    } catch (const SingularTangent&) {
      total += rep.iterations;
      singular = true;
    } catch (const NoConvergence&) {
      total += rep.iterations;
    }
    return std::nullopt;
  };
  auto finish = [&](const Rotor& r, RotorReport rep) {
    rep.attempts = attempts;
    rep.total_iterations = total;
    if (report) *report = rep;
    return r;
  };

  {
    RotorReport rep;
    if (auto r = solve(R_init.R, rep)) return finish(*r, rep);
  }

  std::vector<Mat3> starts;
  for (int a = 0; a < 3; ++a) starts.push_back(exp_map(0.5 * M_PI * Vec3::Unit(a)) * R_init.R);
  const Mat3 F = average_gradient(ws, q);
  if (F.determinant() > 0.0) starts.push_back(orthonormalize(F));

  std::optional<Rotor> best;
  RotorReport best_rep;
  for (const Mat3& s : starts) {
    RotorReport rep;
    auto r = solve(s, rep);
    if (r && (!best || rep.J < best_rep.J)) {
      best = r;
      best_rep = rep;
    }
  }
  if (!best) {
    if (singular) throw SingularTangent("best-fit rotor tangent is singular from every start");
    throw NoConvergence("best-fit rotor did not converge from any start", max_iter,
                        std::numeric_limits<double>::quiet_NaN());
  }
  return finish(*best, best_rep);
}

}  // namespace corot
