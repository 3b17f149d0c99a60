#pragma once

#include "corot/polynomial.hpp"

#include <array>
#include <iosfwd>

namespace corot {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Isotropic linear elastic material. Voigt order (11, 22, 33, 12, 23, 13)
/// with engineering shear strains.
struct Material {
  double E = 1.0;
  double nu = 0.0;

  /// Throws MaterialError unless E > 0 and -1 < nu < 0.5.
  void validate() const;
  Mat6 stiffness() const;   // sigma = D eps
  Mat6 compliance() const;  // eps = C sigma
};

/// Face displacement basis: scalar monomials 1, x1, x2, x1^2, x1 x2, x2^2, ...
/// each repeated for the x, y, z components. Column 3a + c carries monomial a
/// in component c.
class FaceBasis {
 public:
  explicit FaceBasis(int order);

  int order() const { return monos_.degree(); }
  int scalar_size() const { return monos_.size(); }
  int size() const { return 3 * monos_.size(); }
  const Monomials2& monomials() const { return monos_; }

  VecX scalar(const Vec2& x) const { return monos_.eval(x); }
  /// 3 x size() matrix U_Gamma at face coordinates x.
  MatX eval(const Vec2& x) const;

 private:
  Monomials2 monos_;
};

FaceBasis face_basis(int order);

/// Paired Trefftz bases in dimensionless local coordinates xi.
/// Displacement column j: u_c(xi) = sum_i u_coef(c * M + i, j) xi^(e_i),
/// stress column j: s_r(xi) = sum_i s_coef(r * M + i, j) xi^(e_i), with M the
/// size of the degree d+1 monomial set.
struct TrefftzBasis {
  int order = 0;
  Material material;
  Monomials3 monos{0};
  MatX u_coef;  // 3M x k
  MatX s_coef;  // 6M x k

  int size() const { return static_cast<int>(u_coef.cols()); }
  MatX displacement(const Vec3& xi) const;  // 3 x k
  MatX stress(const Vec3& xi) const;        // 6 x k
  /// Strain of the displacement columns by symbolic differentiation (6 x k).
  MatX strain(const Vec3& xi) const;
  /// Divergence of the stress columns by symbolic differentiation (3 x k).
  MatX divergence(const Vec3& xi) const;
};

/// Trefftz basis for stress order d >= 1: all displacement polynomials of
/// degree <= d + 1 solving the homogeneous Navier equations, minus rigid
/// modes, scaled to unit complementary energy on the regular tet of
/// circumradius 1 centred at the origin.
TrefftzBasis generate_trefftz(int order, const Material& material);

/// Expected basis size 3 (d + 2)^2 - 6.
int trefftz_size(int order);

struct AdjointReport {
  double max_deviation = 0.0;  // max |strain(U) - C S| over samples, relative
  int worst_column = -1;
};

/// Compares the symbolic strain of U_v with C S_v at random points of the
/// reference tet.
AdjointReport verify_adjoint(const TrefftzBasis& basis, int samples = 50, unsigned seed = 7);

/// Vertices of the regular reference tet (circumradius 1, centroid 0).
const std::array<Vec3, 4>& regular_tet();

/// Traction N . sigma for a 6 x k Voigt stress matrix (3 x k).
MatX traction(const Vec3& normal, const MatX& stress);

/// Writes u_coef and s_coef as CSV (one row per monomial and component).
void write_basis_csv(std::ostream& out, const TrefftzBasis& basis);

}  // namespace corot
