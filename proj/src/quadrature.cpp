#include "corot/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace corot {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    if (n == 1) {
      p1 = x;
      p0 = 1.0;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    nodes[i] = 0.5 * (1.0 - x);
    weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

QuadratureRule triangle_rule(int degree) {
  static std::mutex mtx;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mtx);
  if (auto it = cache.find(degree); it != cache.end()) return it->second;

  // r = u, s = v (1 - u), dA = (1 - u) du dv
  const int nu = (degree + 1) / 2 + 1;
  const int nv = degree / 2 + 1;
  std::vector<double> xu, wu, xv, wv;
  gauss_legendre01(nu, xu, wu);
  gauss_legendre01(nv, xv, wv);
  QuadratureRule rule;
  rule.degree = degree;
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const double u = xu[i], v = xv[j];
      rule.points.emplace_back(u, v * (1.0 - u), 0.0);
      rule.weights.push_back(wu[i] * wv[j] * (1.0 - u));
    }
  }
  cache.emplace(degree, rule);
  return rule;
}

QuadratureRule tet_rule(int degree) {
  static std::mutex mtx;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mtx);
  if (auto it = cache.find(degree); it != cache.end()) return it->second;

  // r = u, s = v (1 - u), t = w (1 - u)(1 - v), dV = (1 - u)^2 (1 - v)
  const int nu = (degree + 2) / 2 + 1;
  const int nv = (degree + 1) / 2 + 1;
  const int nw = degree / 2 + 1;
  std::vector<double> xu, wu, xv, wv, xw, ww;
  gauss_legendre01(nu, xu, wu);
  gauss_legendre01(nv, xv, wv);
  gauss_legendre01(nw, xw, ww);
  QuadratureRule rule;
  rule.degree = degree;
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j)
      for (int k = 0; k < nw; ++k) {
        const double u = xu[i], v = xv[j], w = xw[k];
        rule.points.emplace_back(u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v));
        rule.weights.push_back(wu[i] * wv[j] * ww[k] * (1.0 - u) * (1.0 - u) * (1.0 - v));
      }
  cache.emplace(degree, rule);
  return rule;
}

double triangle_moment(int a, int b) {
  return factorial(a) * factorial(b) / factorial(a + b + 2);
}

double tet_moment(int a, int b, int c) {
  return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
}

}  // namespace corot
