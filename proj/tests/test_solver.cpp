#include "corot/mesh_gen.hpp"
#include "corot/oracles.hpp"
#include "corot/solver.hpp"

#include <doctest.h>

using namespace corot;

namespace {

TetMesh beam(int nx, int ny, int nz, Vec3 lo = {-0.1, -0.1, -0.5}, Vec3 hi = {0.1, 0.1, 0.5}) {
  BeamParams p;
  p.nx = nx, p.ny = ny, p.nz = nz;
  p.lo = lo, p.hi = hi;
  return generate_beam(p);
}

DisplacementBC clamp(const std::string& set) {
  return {set, {true, true, true}, [](const Vec3&, double) { return Vec3::Zero(); }};
}

DisplacementBC affine(const std::string& set, std::function<Mat3(double)> F, Vec3 t = Vec3::Zero()) {
  return {set, {true, true, true}, [F, t](const Vec3& X, double lam) { return Vec3((F(lam) - Mat3::Identity()) * X + lam * t); }};
}

BoundaryData cantilever_bc(const Vec3& load) {
  BoundaryData bc;
  bc.displacements.push_back(clamp("left"));
  bc.tractions.push_back({"right", load});
  return bc;
}

}  // namespace

TEST_CASE("free floating mesh is rejected") {
  const auto mesh = beam(1, 1, 2);
  BoundaryData bc;
  bc.tractions.push_back({"right", Vec3(0, 0, 1)});
  CHECK_THROWS_AS(Model(mesh, {1.0, 0.3}, 2, 3, bc), InsufficientConstraints);
  BoundaryData partial;
  partial.displacements.push_back({"left", {false, false, true}, [](const Vec3&, double) { return Vec3::Zero(); }});
  CHECK_THROWS_AS(Model(mesh, {1.0, 0.3}, 2, 3, partial), InsufficientConstraints);
  CHECK_NOTHROW(Model(mesh, {1.0, 0.3}, 2, 3, cantilever_bc(Vec3::Zero())));
}

TEST_CASE("zero load converges without an increment") {
  const auto mesh = beam(1, 1, 2);
  const Model model(mesh, {1.0, 0.3}, 2, 3, cantilever_bc(Vec3::Zero()));
  SolverState s = model.initial_state();
  LinearSolver solver;
  const auto t = newton_step(model, s, 1.0, solver);
  CHECK(t.converged);
  CHECK(t.iterations <= 1);
  CHECK(s.q.norm() == 0.0);
}

TEST_CASE("rigid Dirichlet patch") {
  const auto mesh = beam(1, 1, 2);
  const Vec3 phi(0.4, -0.9, 0.6), t(0.2, 0.1, -0.3);
  BoundaryData bc;
  auto F = [phi](double lam) { return exp_map(lam * phi); };
  for (const char* set : {"left", "right", "top", "bottom", "sides"}) bc.displacements.push_back(affine(set, F, t));
  const Model model(mesh, {1.0, 0.3}, 2, 3, bc);
  CHECK(model.num_free() > 0);
  SolverState s = model.initial_state();
  LinearSolver solver;
  for (double lam : {0.5, 1.0}) REQUIRE(newton_step(model, s, lam, solver).converged);
  const Mat3 Q = exp_map(phi);
  for (int e = 0; e < model.num_elements(); ++e) {
    CHECK(s.v[e].norm() < 1e-9);
    CHECK(axial_distance(s.rotors[e].R, Q) < 1e-10);
  }
  const VecX exact = rigid_motion_field(mesh, 2, Q, t);
  CHECK((s.q - exact).norm() < 1e-10 * exact.norm());
}

TEST_CASE("uniaxial traction patch test") {
  const double E = 2.0, load = 1e-3;
  const auto mesh = beam(1, 2, 3, {0, 0, 0}, {0.2, 0.3, 1.0});
  BoundaryData bc;
  auto zero = [](const Vec3&, double) { return Vec3::Zero(); };
  bc.displacements.push_back({"left", {false, false, true}, zero});
  bc.displacements.push_back({"bottom", {false, true, false}, zero});
  bc.displacements.push_back({"sides", {true, false, false}, zero});
  bc.tractions.push_back({"right", Vec3(0, 0, load)});
  const Model model(mesh, {E, 0.0}, 2, 3, bc);
  SolverState s = model.initial_state();
  LinearSolver solver;
  REQUIRE(newton_step(model, s, 1.0, solver).converged);
  Vec6 expected = Vec6::Zero();
  expected[2] = load;
  for (int e = 0; e < model.num_elements(); ++e) {
    for (const int id : mesh.tets()[e]) {
      const Vec3 X = 0.9 * mesh.nodes()[id] + 0.1 * mesh.tet_centroid(e);
      CHECK((local_stress(model.element(e), s.v[e], X) - expected).norm() < 1e-9 * load);
    }
    CHECK(axial_distance(s.rotors[e].R, Mat3::Identity()) < 1e-12);
  }
  const VecX exact = affine_field(mesh, 2, Vec3(1, 1, 1 + load / E).asDiagonal(), Vec3::Zero());
  CHECK((s.q - exact).norm() < 1e-9 * exact.norm());
}

TEST_CASE("displacement patch test with a stretched affine field") {
  const auto mesh = beam(1, 1, 3);
  Mat3 eps;
  eps << 1e-3, 2e-4, 0, 2e-4, -4e-4, 1e-4, 0, 1e-4, 5e-4;
  BoundaryData bc;
  auto F = [eps](double lam) { return Mat3(Mat3::Identity() + lam * eps); };
  for (const char* set : {"left", "right", "top", "bottom", "sides"}) bc.displacements.push_back(affine(set, F));
  const Material mat{1.0, 0.3};
  const Model model(mesh, mat, 2, 3, bc);
  SolverState s = model.initial_state();
  LinearSolver solver;
  REQUIRE(newton_step(model, s, 1.0, solver).converged);
  Vec6 e;
  e << eps(0, 0), eps(1, 1), eps(2, 2), 2 * eps(0, 1), 2 * eps(1, 2), 2 * eps(0, 2);
  const Vec6 sigma = mat.stiffness() * e;
  for (int el = 0; el < model.num_elements(); ++el)
    CHECK((local_stress(model.element(el), s.v[el], mesh.tet_centroid(el)) - sigma).norm() < 1e-9 * sigma.norm());
}

TEST_CASE("one step and two half steps agree") {
  const auto mesh = beam(1, 1, 6, {-0.1, -0.1, 0}, {0.1, 0.1, 2});
  const Model model(mesh, {1000.0, 0.3}, 2, 3, cantilever_bc(Vec3(0, -0.05, 0)));
  LinearSolver solver;
  SolverState one = model.initial_state(), two = model.initial_state();
  REQUIRE(newton_step(model, one, 1.0, solver).converged);
  REQUIRE(newton_step(model, two, 0.5, solver).converged);
  REQUIRE(newton_step(model, two, 1.0, solver).converged);
  CHECK((one.q - two.q).norm() < 1e-6 * one.q.norm());
}

TEST_CASE("Newton converges quadratically on a bending step") {
  const double L = 2.0, kappa = 0.2 / L;
  const auto mesh = beam(1, 1, 8, {-0.1, -0.1, -1}, {0.1, 0.1, 1});
  BoundaryData bc;
  for (const char* set : {"left", "right"})
    bc.displacements.push_back(
        {set, {true, true, true}, [kappa](const Vec3& X, double lam) { return Vec3(bending_position(X, lam * kappa) - X); }});
  const Model model(mesh, {1.0, 0.0}, 2, 3, bc);
  SolverState s = model.initial_state();
  LinearSolver solver;
  const auto t = newton_step(model, s, 1.0, solver);
  REQUIRE(t.converged);
  const auto& r = t.residuals;
  REQUIRE(r.size() >= 3);
  const std::size_t n = r.size();
  const double c = r[n - 1] / (r[n - 2] * r[n - 2]) * r[0];
  CHECK(c < 1e3);
}

TEST_CASE("arc-length control equation holds at convergence") {
  const auto mesh = beam(1, 1, 6, {-0.1, -0.1, 0}, {0.1, 0.1, 2});
  const Model model(mesh, {1000.0, 0.3}, 2, 3, cantilever_bc(Vec3(0, -0.5, 0)));
  ArcLengthParams p;
  p.s = 0.05;
  p.psi = 0.0;
  ArcLength arc(model, p);
  SolverState s = model.initial_state();
  double last = 0.0;
  for (int i = 0; i < 4; ++i) {
    const auto r = arc.step(s);
    CHECK(std::abs(r.control_residual) <= 1e-10 * r.s_used * r.s_used);
    CHECK(std::abs(r.sum_dphi - r.s_used) <= 1e-10 * r.s_used);
    CHECK(s.lambda > last);
    last = s.lambda;
  }

  ArcLengthParams big;
  big.s = 0.3;
  big.psi = 30.0;
  ArcLength load_like(model, big);
  SolverState t = model.initial_state();
  const auto r = load_like.step(t);
  CHECK(std::abs(r.d_lambda - big.s / big.psi) < 1e-2 * big.s / big.psi);
}
