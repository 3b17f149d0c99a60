#pragma once

#include "corot/types.hpp"

#include <vector>

namespace corot {

/// Quadrature rule on a reference simplex. Points are barycentric-free
/// parametric coordinates: (r, s) on the triangle r, s >= 0, r + s <= 1 and
/// (r, s, t) on the tetrahedron r, s, t >= 0, r + s + t <= 1.
struct QuadratureRule {
  int degree = 0;
  std::vector<Eigen::Vector3d> points;  // unused trailing coordinates are zero
  std::vector<double> weights;
};

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Collapsed-coordinate product rule exact for total degree <= degree.
/// Weights sum to 1/2.
QuadratureRule triangle_rule(int degree);

/// Collapsed-coordinate product rule exact for total degree <= degree.
/// Weights sum to 1/6.
QuadratureRule tet_rule(int degree);

/// Closed-form monomial moments on the reference simplices.
double triangle_moment(int a, int b);
double tet_moment(int a, int b, int c);

}  // namespace corot
