#include "corot/trefftz.hpp"

#include "corot/quadrature.hpp"

#include <Eigen/QR>

#include <cmath>
#include <ostream>
#include <random>

namespace corot {

void Material::validate() const {
  if (!(E > 0.0)) throw MaterialError("Young's modulus must be positive, got " + std::to_string(E));
  if (!(nu > -1.0 && nu < 0.5))
    throw MaterialError("Poisson ratio must lie in (-1, 0.5), got " + std::to_string(nu));
}

Mat6 Material::stiffness() const {
  const double lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = E / (2.0 * (1.0 + nu));
  Mat6 d = Mat6::Zero();
  d.topLeftCorner<3, 3>().setConstant(lam);
  for (int i = 0; i < 3; ++i) d(i, i) += 2.0 * mu;
  for (int i = 3; i < 6; ++i) d(i, i) = mu;
  return d;
}

Mat6 Material::compliance() const {
  Mat6 c = Mat6::Zero();
  c.topLeftCorner<3, 3>().setConstant(-nu / E);
  for (int i = 0; i < 3; ++i) c(i, i) = 1.0 / E;
  for (int i = 3; i < 6; ++i) c(i, i) = 2.0 * (1.0 + nu) / E;
  return c;
}

FaceBasis::FaceBasis(int order) : monos_(order) {
  if (order < 1) throw Error("face basis order must be >= 1");
}

MatX FaceBasis::eval(const Vec2& x) const {
  const VecX phi = scalar(x);
  MatX u = MatX::Zero(3, size());
  for (int a = 0; a < phi.size(); ++a)
    for (int c = 0; c < 3; ++c) u(c, 3 * a + c) = phi[a];
  return u;
}

FaceBasis face_basis(int order) { return FaceBasis(order); }

int trefftz_size(int order) { return 3 * (order + 2) * (order + 2) - 6; }

namespace {

// Stacks per-component derivative maps: blk(i, j) = deriv(axis of j) on
// component i.
struct Derivs {
  MatX d[3];
  explicit Derivs(const Monomials3& m) {
    for (int a = 0; a < 3; ++a) d[a] = m.derivative(a);
  }
};

// Voigt strain coefficients (6M x k) from displacement coefficients (3M x k).
MatX strain_coef(const Derivs& D, const MatX& u, int M) {
  const int k = static_cast<int>(u.cols());
  MatX e(6 * M, k);
  auto uc = [&](int c) { return u.middleRows(c * M, M); };
  e.middleRows(0 * M, M) = D.d[0] * uc(0);
  e.middleRows(1 * M, M) = D.d[1] * uc(1);
  e.middleRows(2 * M, M) = D.d[2] * uc(2);
  e.middleRows(3 * M, M) = D.d[1] * uc(0) + D.d[0] * uc(1);
  e.middleRows(4 * M, M) = D.d[2] * uc(1) + D.d[1] * uc(2);
  e.middleRows(5 * M, M) = D.d[2] * uc(0) + D.d[0] * uc(2);
  return e;
}

MatX apply_voigt(const Mat6& m, const MatX& coef, int M) {
  MatX out = MatX::Zero(coef.rows(), coef.cols());
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c)
      if (m(r, c) != 0.0) out.middleRows(r * M, M) += m(r, c) * coef.middleRows(c * M, M);
  return out;
}

MatX eval_rows(const MatX& coef, const VecX& phi, int ncomp) {
  const int M = static_cast<int>(phi.size());
  MatX out(ncomp, coef.cols());
  for (int c = 0; c < ncomp; ++c) out.row(c) = phi.transpose() * coef.middleRows(c * M, M);
  return out;
}

}  // namespace

MatX TrefftzBasis::displacement(const Vec3& xi) const {
  return eval_rows(u_coef, monos.eval(xi), 3);
}

MatX TrefftzBasis::stress(const Vec3& xi) const { return eval_rows(s_coef, monos.eval(xi), 6); }

MatX TrefftzBasis::strain(const Vec3& xi) const {
  const Derivs D(monos);
  return eval_rows(strain_coef(D, u_coef, monos.size()), monos.eval(xi), 6);
}

MatX TrefftzBasis::divergence(const Vec3& xi) const {
  const Derivs D(monos);
  const int M = monos.size();
  auto s = [&](int r) { return s_coef.middleRows(r * M, M); };
  MatX div(3 * M, s_coef.cols());
  div.middleRows(0, M) = D.d[0] * s(0) + D.d[1] * s(3) + D.d[2] * s(5);
  div.middleRows(M, M) = D.d[0] * s(3) + D.d[1] * s(1) + D.d[2] * s(4);
  div.middleRows(2 * M, M) = D.d[0] * s(5) + D.d[1] * s(4) + D.d[2] * s(2);
  return eval_rows(div, monos.eval(xi), 3);
}

const std::array<Vec3, 4>& regular_tet() {
  static const std::array<Vec3, 4> v = [] {
    const double s = 1.0 / std::sqrt(3.0);
    return std::array<Vec3, 4>{Vec3(s, s, s), Vec3(s, -s, -s), Vec3(-s, s, -s), Vec3(-s, -s, s)};
  }();
  return v;
}

MatX traction(const Vec3& n, const MatX& s) {
  MatX t(3, s.cols());
  t.row(0) = n.x() * s.row(0) + n.y() * s.row(3) + n.z() * s.row(5);
  t.row(1) = n.x() * s.row(3) + n.y() * s.row(1) + n.z() * s.row(4);
  t.row(2) = n.x() * s.row(5) + n.y() * s.row(4) + n.z() * s.row(2);
  return t;
}

TrefftzBasis generate_trefftz(int order, const Material& material) {
  if (order < 1) throw Error("Trefftz order must be >= 1");
  material.validate();
  TrefftzBasis b;
  b.order = order;
  b.material = material;
  b.monos = Monomials3(order + 1);
  const int M = b.monos.size();
  const Derivs D(b.monos);
  const MatX lap = D.d[0] * D.d[0] + D.d[1] * D.d[1] + D.d[2] * D.d[2];
  const double a = 1.0 - 2.0 * material.nu;

  std::vector<VecX> cols;

  // Degree 1: the six symmetric linear fields.
  auto lin = [&](int comp, int var) { return comp * M + b.monos.index(var == 0, var == 1, var == 2); };
  for (int i = 0; i < 3; ++i) {
    VecX c = VecX::Zero(3 * M);
    c[lin(i, i)] = 1.0;
    cols.push_back(c);
  }
  for (auto [i, j] : {std::pair{0, 1}, std::pair{1, 2}, std::pair{0, 2}}) {
    VecX c = VecX::Zero(3 * M);
    c[lin(i, j)] = 1.0;
    c[lin(j, i)] = 1.0;
    cols.push_back(c);
  }

  // Degrees 2..d+1: nullspace of the Navier operator on homogeneous fields.
  for (int m = 2; m <= order + 1; ++m) {
    std::vector<int> in, out;
    for (int i = 0; i < M; ++i) {
      const auto& e = b.monos.exponent(i);
      const int deg = e[0] + e[1] + e[2];
      if (deg == m) in.push_back(i);
      if (deg == m - 2) out.push_back(i);
    }
    const int nin = static_cast<int>(in.size()), nout = static_cast<int>(out.size());
    MatX C = MatX::Zero(3 * nout, 3 * nin);
    for (int comp = 0; comp < 3; ++comp)
      for (int ci = 0; ci < nin; ++ci) {
        // Column: monomial in[ci] in displacement component comp.
        VecX grad_div[3];
        for (int row = 0; row < 3; ++row) {
          const VecX e = D.d[comp].col(in[ci]);
          grad_div[row] = D.d[row] * e;
        }
        for (int row = 0; row < 3; ++row) {
          VecX val = grad_div[row];
          if (row == comp) val += a * lap.col(in[ci]);
          for (int r = 0; r < nout; ++r) C(row * nout + r, comp * nin + ci) = val[out[r]];
        }
      }
    Eigen::ColPivHouseholderQR<MatX> qr(C.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    const MatX Q = qr.householderQ();
    for (int j = rank; j < 3 * nin; ++j) {
      VecX c = VecX::Zero(3 * M);
      for (int comp = 0; comp < 3; ++comp)
        for (int ci = 0; ci < nin; ++ci) c[comp * M + in[ci]] = Q(comp * nin + ci, j);
      cols.push_back(c);
    }
  }

  const int k = static_cast<int>(cols.size());
  if (k != trefftz_size(order)) throw Error("Trefftz nullspace dimension mismatch");
  b.u_coef.resize(3 * M, k);
  for (int j = 0; j < k; ++j) b.u_coef.col(j) = cols[j];
  b.s_coef = apply_voigt(material.stiffness(), strain_coef(D, b.u_coef, M), M);

  // Unit complementary energy on the regular tet.
  const auto& v = regular_tet();
  Eigen::Matrix3d J;
  J << v[1] - v[0], v[2] - v[0], v[3] - v[0];
  const double detJ = std::abs(J.determinant());
  const QuadratureRule rule = tet_rule(2 * order);
  const Mat6 Cm = material.compliance();
  VecX energy = VecX::Zero(k);
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Vec3 x = v[0] + J * rule.points[q];
    const MatX S = b.stress(x);
    energy += rule.weights[q] * detJ * (S.transpose() * Cm * S).diagonal();
  }
  for (int j = 0; j < k; ++j) {
    const double s = 1.0 / std::sqrt(energy[j]);
    b.u_coef.col(j) *= s;
    b.s_coef.col(j) *= s;
  }
  return b;
}

AdjointReport verify_adjoint(const TrefftzBasis& basis, int samples, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto& v = regular_tet();
  const Mat6 Cm = basis.material.compliance();
  AdjointReport rep;
  for (int s = 0; s < samples; ++s) {
    double w[4];
    double sum = 0.0;
    for (double& wi : w) sum += (wi = -std::log(1.0 - uni(rng)));
    Vec3 x = Vec3::Zero();
    for (int i = 0; i < 4; ++i) x += w[i] / sum * v[i];
    const MatX eps = basis.strain(x);
    const MatX ceps = Cm * basis.stress(x);
    for (int j = 0; j < basis.size(); ++j) {
      const double scale = std::max(1.0, ceps.col(j).norm());
      const double dev = (eps.col(j) - ceps.col(j)).norm() / scale;
      if (dev > rep.max_deviation) {
        rep.max_deviation = dev;
        rep.worst_column = j;
      }
    }
  }
  return rep;
}

void write_basis_csv(std::ostream& out, const TrefftzBasis& b) {
  out.precision(17);
  const int M = b.monos.size();
  out << "field,component,ex,ey,ez";
  for (int j = 0; j < b.size(); ++j) out << ",c" << j;
  out << '\n';
  auto dump = [&](const char* name, const MatX& coef, int ncomp) {
    for (int c = 0; c < ncomp; ++c)
      for (int i = 0; i < M; ++i) {
        const auto& e = b.monos.exponent(i);
        out << name << ',' << c << ',' << e[0] << ',' << e[1] << ',' << e[2];
        for (int j = 0; j < coef.cols(); ++j) out << ',' << coef(c * M + i, j);
        out << '\n';
      }
  };
  dump("u", b.u_coef, 3);
  dump("s", b.s_coef, 6);
}

}  // namespace corot
