#include "corot/polynomial.hpp"

#include <cmath>

namespace corot {

int monomial_count(int n, int d) {
  // binomial(n + d, n)
  long long c = 1;
  for (int i = 1; i <= n; ++i) c = c * (d + i) / i;
  return static_cast<int>(c);
}

Monomials3::Monomials3(int degree) : degree_(degree) {
  if (degree < 0) throw Error("negative monomial degree");
  const int n = degree + 1;
  lookup_.assign(n * n * n, -1);
  for (int m = 0; m <= degree; ++m)
    for (int a = m; a >= 0; --a)
      for (int b = m - a; b >= 0; --b) {
        const int c = m - a - b;
        lookup_[(a * n + b) * n + c] = static_cast<int>(exps_.size());
        exps_.push_back({a, b, c});
      }
}

int Monomials3::index(int a, int b, int c) const {
  if (a < 0 || b < 0 || c < 0 || a + b + c > degree_) return -1;
  const int n = degree_ + 1;
  return lookup_[(a * n + b) * n + c];
}

VecX Monomials3::eval(const Vec3& x) const {
  VecX out;
  eval(x, out);
  return out;
}

void Monomials3::eval(const Vec3& x, VecX& out) const {
  const int n = degree_ + 1;
  double px[16], py[16], pz[16];
  std::vector<double> bx, by, bz;
  double* ax = px;
  double* ay = py;
  double* az = pz;
  if (n > 16) {
    bx.resize(n), by.resize(n), bz.resize(n);
    ax = bx.data(), ay = by.data(), az = bz.data();
  }
  ax[0] = ay[0] = az[0] = 1.0;
  for (int i = 1; i < n; ++i) {
    ax[i] = ax[i - 1] * x.x();
    ay[i] = ay[i - 1] * x.y();
    az[i] = az[i - 1] * x.z();
  }
  out.resize(size());
  for (int i = 0; i < size(); ++i) out[i] = ax[exps_[i][0]] * ay[exps_[i][1]] * az[exps_[i][2]];
}

MatX Monomials3::derivative(int axis) const {
  MatX d = MatX::Zero(size(), size());
  for (int i = 0; i < size(); ++i) {
    auto e = exps_[i];
    if (e[axis] == 0) continue;
    const double k = e[axis];
    e[axis] -= 1;
    d(index(e[0], e[1], e[2]), i) = k;
  }
  return d;
}

Monomials2::Monomials2(int degree) : degree_(degree) {
  if (degree < 0) throw Error("negative monomial degree");
  for (int m = 0; m <= degree; ++m)
    for (int a = m; a >= 0; --a) exps_.push_back({a, m - a});
}

VecX Monomials2::eval(const Vec2& x) const {
  VecX out(size());
  for (int i = 0; i < size(); ++i)
    out[i] = std::pow(x.x(), exps_[i][0]) * std::pow(x.y(), exps_[i][1]);
  return out;
}

}  // namespace corot
