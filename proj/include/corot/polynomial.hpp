#pragma once

#include "corot/types.hpp"

#include <array>
#include <vector>

namespace corot {

/// Graded monomial set in three variables, all exponents with total degree
/// <= degree, ordered by degree then lexicographically descending in x.
class Monomials3 {
 public:
  explicit Monomials3(int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exps_.size()); }
  const std::array<int, 3>& exponent(int i) const { return exps_[i]; }
  /// Index of x^a y^b z^c, -1 when outside the set.
  int index(int a, int b, int c) const;

  /// Values of every monomial at x.
  VecX eval(const Vec3& x) const;
  void eval(const Vec3& x, VecX& out) const;

  /// Coefficient map of d/dx_axis acting within this set (size x size).
  MatX derivative(int axis) const;

 private:
  int degree_;
  std::vector<std::array<int, 3>> exps_;
  std::vector<int> lookup_;  // dense (degree+1)^3 table
};

/// Graded monomials in two face coordinates: 1, x1, x2, x1^2, x1 x2, x2^2, ...
class Monomials2 {
 public:
  explicit Monomials2(int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exps_.size()); }
  const std::array<int, 2>& exponent(int i) const { return exps_[i]; }
  VecX eval(const Vec2& x) const;

 private:
  int degree_;
  std::vector<std::array<int, 2>> exps_;
};

/// Number of monomials of total degree <= d in n variables.
int monomial_count(int n, int d);

}  // namespace corot
