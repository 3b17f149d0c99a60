#include "corot/element.hpp"

#include "corot/polynomial.hpp"
#include "corot/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace corot {

namespace {

// Multiplies each 3-column block of M (rows x n) by T on the right.
MatX right_blocks(const MatX& M, const Mat3& T) {
  MatX out(M.rows(), M.cols());
  for (int j = 0; j < M.cols(); j += 3) out.middleCols<3>(j) = M.middleCols<3>(j) * T;
  return out;
}

// Multiplies each 3-row block of M (n x cols) by T on the left.
MatX left_blocks(const Mat3& T, const MatX& M) {
  MatX out(M.rows(), M.cols());
  for (int i = 0; i < M.rows(); i += 3) out.middleRows<3>(i) = T * M.middleRows<3>(i);
  return out;
}

}  // namespace

ElementGeometry make_element(const TetMesh& mesh, int tet, const TrefftzBasis& basis,
                             int face_order) {
  ElementGeometry g;
  g.ws = make_workspace(mesh, tet, face_order);
  g.basis = &basis;
  g.rho = g.ws.radius;
  g.k = basis.size();
  g.n = g.ws.dofs();
  const int m = g.ws.m;
  const Monomials2 monos(face_order);
  const QuadratureRule rule = triangle_rule(std::max(face_order + basis.order, 2 * basis.order + 1));

  g.A0 = MatX::Zero(g.k, g.n);
  g.F = MatX::Zero(g.k, g.k);
  for (int s = 0; s < 4; ++s) {
    const auto& fd = g.ws.faces[s];
    const auto vid = mesh.faces()[fd.face].v;
    const Vec3 x0 = mesh.nodes()[vid[0]];
    const Vec3 d1 = mesh.nodes()[vid[1]] - x0;
    const Vec3 d2 = mesh.nodes()[vid[2]] - x0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec3 X = x0 + rule.points[q].x() * d1 + rule.points[q].y() * d2;
      const double w = 2.0 * fd.frame.area * rule.weights[q];
      const Vec3 xi = g.local(X);
      const MatX T = traction(fd.N, basis.stress(xi));  // 3 x k
      const MatX Uv = g.rho * basis.displacement(xi);   // 3 x k
      g.F.noalias() += w * T.transpose() * Uv;
      const Vec3 r = X - fd.frame.origin;
      const VecX phi = monos.eval(Vec2(r.dot(fd.frame.e1), r.dot(fd.frame.e2)));
      for (int a = 0; a < m; ++a)
        g.A0.middleCols<3>(s * 3 * m + 3 * a).noalias() += (w * phi[a]) * T.transpose();
    }
  }
  g.F = 0.5 * (g.F + g.F.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> eig(g.F, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()[0], hi = eig.eigenvalues()[g.k - 1];
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw SingularF("element flexibility matrix is singular or ill conditioned", tet);
  g.Fllt.compute(g.F);
  g.W0 = g.Fllt.solve(g.A0);
  g.K0 = g.A0.transpose() * g.W0;
  return g;
}

MatX volume_flexibility(const TetMesh& mesh, int tet, const TrefftzBasis& basis) {
  const auto& t = mesh.tets()[tet];
  const auto& x = mesh.nodes();
  const BestFitWorkspace ws = make_workspace(mesh, tet, 1);
  Mat3 J;
  J << x[t[1]] - x[t[0]], x[t[2]] - x[t[0]], x[t[3]] - x[t[0]];
  const double detJ = std::abs(J.determinant());
  const QuadratureRule rule = tet_rule(2 * basis.order);
  const Mat6 C = basis.material.compliance();
  MatX F = MatX::Zero(basis.size(), basis.size());
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Vec3 X = x[t[0]] + J * rule.points[q];
    const MatX S = basis.stress((X - ws.centroid) / ws.radius);
    F.noalias() += rule.weights[q] * detJ * S.transpose() * C * S;
  }
  return F;
}

MatX spin_liver_face(const FaceFrame& frame, const Rotor& rotor, const Vec3& ref_centroid,
                     int face_order) {
  const int m = monomial_count(2, face_order);
  MatX S = MatX::Zero(3 * m, 3);
  S.middleRows<3>(0) = -spin(rotor.R * (frame.origin - ref_centroid));
  S.middleRows<3>(3) = -spin(rotor.R * frame.e1);
  S.middleRows<3>(6) = -spin(rotor.R * frame.e2);
  return S;
}

MatX spin_liver(const BestFitWorkspace& ws, const Rotor& rotor) {
  MatX S(ws.dofs(), 3);
  const int b = 3 * ws.m;
  for (int k = 0; k < 4; ++k)
    S.middleRows(k * b, b) = spin_liver_face(ws.faces[k].frame, rotor, ws.centroid, ws.order);
  return S;
}

MatX rotor_dof_jacobian(const BestFitWorkspace& ws, const Mat3& R) {
  MatX D(3, ws.dofs());
  for (int k = 0; k < 4; ++k) {
    const Mat3 NR = spin(ws.faces[k].N) * R.transpose();
    for (int a = 0; a < ws.m; ++a) D.middleCols<3>(k * 3 * ws.m + 3 * a) = ws.faces[k].moments[a] * NR;
  }
  return D;
}

MatX spin_filter(const BestFitWorkspace& ws, const Rotor& rotor, const VecX& q,
                 FilterVariant variant) {
  const Mat3& R = rotor.R;
  const MatX D = rotor_dof_jacobian(ws, R);
  auto check = [&](const Mat3& M) {
    Eigen::JacobiSVD<Mat3> svd(M);
    const auto s = svd.singularValues();
    if (!(s[2] > 0.0) || s[0] / s[2] > 1e14) throw SingularNormalMatrix("Spin-Filter normal matrix is singular");
  };
  if (variant == FilterVariant::Consistent) {
    const Mat3 B = rotation_jacobian(ws, R, first_moments(ws, q));
    check(B.transpose() * B);
    return -B.partialPivLu().solve(D);
  }
  std::array<Vec3, 4> xr;
  for (int k = 0; k < 4; ++k) xr[k] = R * ws.ref_moments[k];
  const Mat3 Br = rotation_jacobian(ws, R, xr);
  const Mat3 N = Br.transpose() * Br;
  check(N);
  return -N.ldlt().solve(Br.transpose() * D);
}

VecX deformational_coefficients(const BestFitWorkspace& ws, const Rotor& rotor, const VecX& q) {
  const Vec3 c = boundary_centroid(ws, q);
  VecX d = q;
  const int b = 3 * ws.m;
  for (int k = 0; k < 4; ++k) {
    const FaceFrame& fr = ws.faces[k].frame;
    d.segment<3>(k * b) += fr.origin - c - rotor.R * (fr.origin - ws.centroid);
    d.segment<3>(k * b + 3) += fr.e1 - rotor.R * fr.e1;
    d.segment<3>(k * b + 6) += fr.e2 - rotor.R * fr.e2;
  }
  return d;
}

ElementOperators assemble_blocks(const ElementGeometry& geom, const Rotor& rotor, const VecX& q,
                                 const VecX& v, FilterVariant variant) {
  ElementOperators ops;
  ops.rotor = rotor;
  const Mat3& R = rotor.R;
  const Mat3 Rt = R.transpose();
  ops.d = deformational_coefficients(geom.ws, rotor, q);
  ops.A = right_blocks(geom.A0, Rt);
  ops.S = spin_liver(geom.ws, rotor);
  ops.G = spin_filter(geom.ws, rotor, q, variant);
  ops.P = MatX::Identity(geom.n, geom.n) - ops.S * ops.G;

  const VecX A0tv = geom.A0.transpose() * v;
  ops.Q = MatX::Zero(geom.k, 3);
  ops.U.resize(geom.n, 3);
  ops.R_sigma.resize(geom.n);
  VecX Rtd(geom.n);
  for (int j = 0; j < geom.n; j += 3) {
    const Vec3 dj = ops.d.segment<3>(j);
    Rtd.segment<3>(j) = Rt * dj;
    ops.Q.noalias() += geom.A0.middleCols<3>(j) * (Rt * spin(dj));
    const Vec3 t = R * A0tv.segment<3>(j);
    ops.R_sigma.segment<3>(j) = t;
    ops.U.middleRows<3>(j) = spin(t);
  }
  ops.R_eps = geom.F * v - geom.A0 * Rtd;
  return ops;
}

VecX residual_sigma(const ElementOperators& ops, const VecX& f_ext, double lambda) {
  if (f_ext.size() == 0) return ops.R_sigma;
  return ops.R_sigma - lambda * f_ext;
}

VecX residual_epsilon(const ElementOperators& ops) { return ops.R_eps; }

MatX tangent(const ElementGeometry& geom, const ElementOperators& ops) {
  const int k = geom.k, n = geom.n;
  MatX T = MatX::Zero(k + n, k + n);
  T.topLeftCorner(k, k) = geom.F;
  T.topRightCorner(k, n) = -(ops.A * ops.P + ops.Q * ops.G);
  T.bottomLeftCorner(n, k) = ops.A.transpose();
  T.bottomRightCorner(n, n) = -ops.U * ops.G;
  return T;
}

Condensed condense(const ElementGeometry& geom, const ElementOperators& ops) {
  const Mat3& R = ops.rotor.R;
  const Mat3 Rt = R.transpose();
  Condensed c;
  c.G = ops.G;
  c.Wr = right_blocks(geom.W0, Rt);
  c.WrS = c.Wr * ops.S;
  c.FiQ = geom.Fllt.solve(ops.Q);
  c.FiReps = geom.Fllt.solve(ops.R_eps);
  // A^T F^-1 A = blockdiag(R) K0 blockdiag(R)^T
  const MatX Kr = left_blocks(R, right_blocks(geom.K0, Rt));
  const MatX At = ops.A.transpose();
  c.K = Kr - (Kr * ops.S) * ops.G + (At * c.FiQ) * ops.G - ops.U * ops.G;
  c.r = ops.R_sigma - At * c.FiReps;
  return c;
}

VecX recover_stress(const Condensed& c, const VecX& dq) {
  const Vec3 dphi = c.G * dq;
  return c.Wr * dq - c.WrS * dphi + c.FiQ * dphi - c.FiReps;
}

double element_energy(const ElementGeometry& geom, const VecX& v) { return 0.5 * v.dot(geom.F * v); }

Vec6 local_stress(const ElementGeometry& geom, const VecX& v, const Vec3& X) {
  return geom.basis->stress(geom.local(X)) * v;
}

}  // namespace corot
