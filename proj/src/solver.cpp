#include "corot/solver.hpp"

#include "corot/polynomial.hpp"
#include "corot/quadrature.hpp"

#include <Eigen/SparseLU>
#ifdef COROT_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include <algorithm>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace corot {

namespace {

// Runs body(i) for i in [0, n) across OpenMP threads and rethrows the first
// exception on the calling thread.
template <class Body>
void parallel_for(int n, int threads, Body body) {
  std::exception_ptr error;
  std::mutex mtx;
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
#else
  (void)threads;
#endif
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (int i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard lock(mtx);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear solver

struct LinearSolver::Impl {
#ifdef COROT_HAVE_UMFPACK
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;
#else
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
#endif
  bool ready = false;
};

LinearSolver::LinearSolver() : impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

void LinearSolver::factorize(const Eigen::SparseMatrix<double>& K) {
  impl_->ready = false;
  impl_->lu.compute(K);
  if (impl_->lu.info() != Eigen::Success) throw LinearSolveFailure("sparse LU factorization failed");
  impl_->ready = true;
}

VecX LinearSolver::solve(const VecX& b) const {
  if (!impl_->ready) throw LinearSolveFailure("solve called before a successful factorization");
  VecX x = impl_->lu.solve(b);
  if (impl_->lu.info() != Eigen::Success || !x.allFinite()) throw LinearSolveFailure("sparse LU solve failed");
  return x;
}

const char* LinearSolver::backend() {
#ifdef COROT_HAVE_UMFPACK
  return "umfpack";
#else
  return "eigen-sparselu";
#endif
}

// ---------------------------------------------------------------------------
// Model

Model::Model(const TetMesh& mesh, const Material& material, int face_order, int trefftz_order,
             BoundaryData boundary, SolverOptions options)
    : mesh_(mesh), face_order_(face_order), boundary_(std::move(boundary)), options_(options) {
  if (face_order < 1) throw ConfigError("face order must be >= 1");
  basis_ = std::make_unique<TrefftzBasis>(generate_trefftz(trefftz_order, material));
  dofs_.m = monomial_count(2, face_order);
  dofs_.num_faces = mesh.num_faces();

  const int ne = mesh.num_tets();
  geometry_.resize(ne);
  parallel_for(ne, options_.threads, [&](int e) { geometry_[e] = make_element(mesh_, e, *basis_, face_order_); });

  element_dofs_.resize(ne);
  const int b = dofs_.per_face();
  for (int e = 0; e < ne; ++e) {
    auto& d = element_dofs_[e];
    d.resize(4 * b);
    for (int k = 0; k < 4; ++k) {
      const int off = dofs_.offset(mesh.tet_face(e, k));
      for (int j = 0; j < b; ++j) d[k * b + j] = off + j;
    }
  }
  apply_dirichlet_sets();

  f_ext_ = VecX::Zero(dofs_.size());
  for (const auto& t : boundary_.tractions) {
    auto it = mesh.boundary_sets().find(t.set);
    if (it == mesh.boundary_sets().end()) throw ConfigError("unknown face set '" + t.set + "'");
    for (int f : it->second) {
      if (!mesh.faces()[f].boundary()) throw ConfigError("traction set '" + t.set + "' contains an interior face");
      const VecX mom = face_monomial_integrals(mesh, f, face_order_);
      for (int a = 0; a < dofs_.m; ++a) f_ext_.segment<3>(dofs_.offset(f) + 3 * a) += mom[a] * t.traction;
    }
  }
  build_pattern();
  check_constraints(*this);
}

void Model::apply_dirichlet_sets() {
  face_bc_.assign(dofs_.num_faces, {-1, -1, -1});
  for (int i = 0; i < static_cast<int>(boundary_.displacements.size()); ++i) {
    const auto& bc = boundary_.displacements[i];
    auto it = mesh_.boundary_sets().find(bc.set);
    if (it == mesh_.boundary_sets().end()) throw ConfigError("unknown face set '" + bc.set + "'");
    if (!bc.value) throw ConfigError("displacement condition on '" + bc.set + "' has no value");
    for (int f : it->second)
      for (int c = 0; c < 3; ++c) {
        if (!bc.mask[c]) continue;
        if (face_bc_[f][c] >= 0 && face_bc_[f][c] != i)
          throw ConfigError("face set '" + bc.set + "' prescribes a component that is already prescribed");
        face_bc_[f][c] = i;
      }
  }
  free_index_.assign(dofs_.size(), -1);
  fixed_.clear();
  free_.clear();
  for (int f = 0; f < dofs_.num_faces; ++f)
    for (int a = 0; a < dofs_.m; ++a)
      for (int c = 0; c < 3; ++c) {
        const int dof = dofs_.offset(f) + 3 * a + c;
        if (face_bc_[f][c] >= 0) {
          fixed_.push_back(dof);
        } else {
          free_index_[dof] = static_cast<int>(free_.size());
          free_.push_back(dof);
        }
      }
}

void Model::build_pattern() {
  const int nf = num_free();
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < num_elements(); ++e)
    for (int gi : element_dofs_[e]) {
      if (free_index_[gi] < 0) continue;
      for (int gj : element_dofs_[e])
        if (free_index_[gj] >= 0) trip.emplace_back(free_index_[gi], free_index_[gj], 0.0);
    }
  pattern_.resize(nf, nf);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();
  slot_.resize(num_elements());
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (int e = 0; e < num_elements(); ++e) {
    const auto& d = element_dofs_[e];
    const int n = static_cast<int>(d.size());
    slot_[e].assign(n * n, -1);
    for (int j = 0; j < n; ++j) {
      const int cj = free_index_[d[j]];
      if (cj < 0) continue;
      for (int i = 0; i < n; ++i) {
        const int ri = free_index_[d[i]];
        if (ri < 0) continue;
        const int* pos = std::lower_bound(inner + outer[cj], inner + outer[cj + 1], ri);
        slot_[e][j * n + i] = static_cast<int>(pos - inner);
      }
    }
  }
}

VecX Model::gather(const VecX& q, int e) const {
  const auto& d = element_dofs_[e];
  VecX out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = q[d[i]];
  return out;
}

void Model::scatter_add(VecX& out, const VecX& local, int e) const {
  const auto& d = element_dofs_[e];
  for (std::size_t i = 0; i < d.size(); ++i) out[d[i]] += local[i];
}

VecX Model::project_face(int face, const std::function<Vec3(const Vec3&)>& u) const {
  const Monomials2 monos(face_order_);
  const int m = monos.size();
  const FaceFrame& fr = mesh_.frames()[face];
  const auto& v = mesh_.faces()[face].v;
  const Vec3 x0 = mesh_.nodes()[v[0]];
  const Vec3 d1 = mesh_.nodes()[v[1]] - x0;
  const Vec3 d2 = mesh_.nodes()[v[2]] - x0;
  const QuadratureRule rule = triangle_rule(2 * face_order_ + 8);
  MatX M = MatX::Zero(m, m);
  MatX rhs = MatX::Zero(m, 3);
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Vec3 X = x0 + rule.points[q].x() * d1 + rule.points[q].y() * d2;
    const double w = 2.0 * fr.area * rule.weights[q];
    const Vec3 r = X - fr.origin;
    const VecX phi = monos.eval(Vec2(r.dot(fr.e1), r.dot(fr.e2)));
    M.noalias() += w * phi * phi.transpose();
    rhs.noalias() += w * phi * u(X).transpose();
  }
  const MatX c = M.ldlt().solve(rhs);
  VecX out(3 * m);
  for (int a = 0; a < m; ++a) out.segment<3>(3 * a) = c.row(a).transpose();
  return out;
}

VecX Model::prescribed(double lambda) const {
  VecX out = VecX::Zero(dofs_.size());
  for (int f = 0; f < dofs_.num_faces; ++f)
    for (int c = 0; c < 3; ++c) {
      const int i = face_bc_[f][c];
      if (i < 0 || (c > 0 && face_bc_[f][c - 1] == i) || (c > 1 && face_bc_[f][c - 2] == i)) continue;
      const auto& bc = boundary_.displacements[i];
      const VecX coef = project_face(f, [&](const Vec3& X) { return bc.value(X, lambda); });
      for (int a = 0; a < dofs_.m; ++a)
        for (int k = 0; k < 3; ++k)
          if (face_bc_[f][k] == i) out[dofs_.offset(f) + 3 * a + k] = coef[3 * a + k];
    }
  return out;
}

SolverState Model::initial_state() const {
  SolverState s;
  s.q = VecX::Zero(dofs_.size());
  s.v.assign(num_elements(), VecX::Zero(basis_->size()));
  s.rotors.assign(num_elements(), Rotor{});
  return s;
}

void Model::update_rotors(SolverState& state) const {
  parallel_for(num_elements(), options_.threads, [&](int e) {
    state.rotors[e] = best_fit_rotor(geometry_[e].ws, gather(state.q, e), state.rotors[e]);
  });
}

Assembly Model::assemble(const SolverState& state, bool with_matrix) const {
  const int ne = num_elements();
  Assembly a;
  a.ops.resize(ne);
  a.elements.resize(ne);
  parallel_for(ne, options_.threads, [&](int e) {
    a.ops[e] = assemble_blocks(geometry_[e], state.rotors[e], gather(state.q, e), state.v[e], options_.filter);
    a.elements[e] = condense(geometry_[e], a.ops[e]);
  });
  a.residual = -state.lambda * f_ext_;
  for (int e = 0; e < ne; ++e) scatter_add(a.residual, a.elements[e].r, e);
  if (with_matrix) {
    a.K_ff = pattern_;
    double* val = a.K_ff.valuePtr();
    std::fill(val, val + a.K_ff.nonZeros(), 0.0);
    for (int e = 0; e < ne; ++e) {
      const MatX& K = a.elements[e].K;
      const int n = static_cast<int>(K.rows());
      const int* s = slot_[e].data();
      const double* k = K.data();  // column-major, matches slot layout
      for (int i = 0; i < n * n; ++i)
        if (s[i] >= 0) val[s[i]] += k[i];
    }
  }
  return a;
}

void Model::apply_increment(SolverState& state, const VecX& dq, const Assembly& a) const {
  state.q += dq;
  for (int e = 0; e < num_elements(); ++e) state.v[e] += recover_stress(a.elements[e], gather(dq, e));
}

double Model::energy(const SolverState& state) const {
  double w = 0.0;
  for (int e = 0; e < num_elements(); ++e) w += element_energy(geometry_[e], state.v[e]);
  return w;
}

Vec3 Model::resultant(const Assembly& a, const std::string& set) const {
  const auto it = mesh_.boundary_sets().find(set);
  if (it == mesh_.boundary_sets().end()) throw ConfigError("unknown face set '" + set + "'");
  Vec3 f = Vec3::Zero();
  for (int face : it->second) f += a.residual.segment<3>(dofs_.offset(face));
  return f;
}

void check_constraints(const Model& model) {
  const auto& mesh = model.mesh();
  const auto& dofs = model.dofs();
  const auto& fixed = model.fixed_dofs();
  if (fixed.empty()) throw InsufficientConstraints("no prescribed displacements: rigid modes are free");
  // Rigid fields on each face: translation e_c and rotation w x X.
  MatX modes(fixed.size(), 6);
  for (std::size_t r = 0; r < fixed.size(); ++r) {
    const int dof = fixed[r];
    const int f = dof / dofs.per_face();
    const int a = (dof % dofs.per_face()) / 3;
    const int c = dof % 3;
    const FaceFrame& fr = mesh.frames()[f];
    Vec3 base = Vec3::Zero();  // coefficient of X for this monomial
    if (a == 0) base = fr.origin;
    if (a == 1) base = fr.e1;
    if (a == 2) base = fr.e2;
    for (int j = 0; j < 3; ++j) {
      modes(r, j) = (a == 0 && c == j) ? 1.0 : 0.0;
      modes(r, 3 + j) = Vec3::Unit(j).cross(base)[c];
    }
  }
  const double scale = mesh.diameter();
  for (int j = 3; j < 6; ++j) modes.col(j) /= scale;
  Eigen::JacobiSVD<MatX> svd(modes);
  const auto sv = svd.singularValues();
  if (sv.size() < 6 || sv[5] <= 1e-10 * sv[0])
    throw InsufficientConstraints("prescribed displacements do not remove all six rigid modes");
}

// ---------------------------------------------------------------------------
// Newton and arc-length drivers

namespace {

VecX free_part(const Model& model, const VecX& full) {
  const auto& fr = model.free_dofs();
  VecX out(fr.size());
  for (std::size_t i = 0; i < fr.size(); ++i) out[i] = full[fr[i]];
  return out;
}

VecX fixed_part(const Model& model, const VecX& full) {
  const auto& fx = model.fixed_dofs();
  VecX out(fx.size());
  for (std::size_t i = 0; i < fx.size(); ++i) out[i] = full[fx[i]];
  return out;
}

// Full-size vector with `free` at the free DOFs and `full_fixed` at the fixed ones.
VecX combine(const Model& model, const VecX& free, const VecX& full_fixed) {
  VecX out = VecX::Zero(model.dofs().size());
  const auto& fr = model.free_dofs();
  for (std::size_t i = 0; i < fr.size(); ++i) out[fr[i]] = free[i];
  for (int d : model.fixed_dofs()) out[d] = full_fixed[d];
  return out;
}

// Sum_e K_e x_e for x supported on the fixed DOFs; free part returned.
VecX couple_fixed(const Model& model, const Assembly& a, const VecX& x_full) {
  VecX y = VecX::Zero(model.dofs().size());
  for (int e = 0; e < model.num_elements(); ++e) {
    VecX xe = model.gather(x_full, e);
    const auto& d = model.element_dofs(e);
    bool any = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!model.is_fixed(d[i])) xe[i] = 0.0;
      any = any || xe[i] != 0.0;
    }
    if (any) model.scatter_add(y, a.elements[e].K * xe, e);
  }
  return free_part(model, y);
}

double load_scale(const Model& model, const Assembly& a, double lambda) {
  return std::abs(lambda) * free_part(model, model.external_load()).norm() +
         fixed_part(model, a.residual).norm();
}

bool residual_ok(const Model& model, double rnorm, double scale) {
  const auto& o = model.options();
  return scale > 0.0 ? rnorm <= o.tol_r * scale : rnorm <= o.tol_abs;
}

}  // namespace

NewtonTrace newton_step(const Model& model, SolverState& state, double lambda, LinearSolver& solver) {
  const auto& opt = model.options();
  NewtonTrace trace;
  state.lambda = lambda;
  VecX dq_D = model.prescribed(lambda) - state.q;
  for (int d : model.free_dofs()) dq_D[d] = 0.0;
  bool pending = dq_D.lpNorm<Eigen::Infinity>() > 0.0;
  const double qref = model.mesh().diameter();

  for (int it = 0;; ++it) {
    model.update_rotors(state);
    Assembly a = model.assemble(state);
    const VecX r = free_part(model, a.residual);
    trace.scale = load_scale(model, a, lambda);
    trace.residuals.push_back(r.norm());
    const bool small_step =
        !trace.increments.empty() && trace.increments.back() <= opt.tol_q * (state.q.norm() + qref);
    if (!pending && (residual_ok(model, r.norm(), trace.scale) || small_step)) {
      trace.converged = true;
      break;
    }
    if (it >= opt.max_iter) break;
    solver.factorize(a.K_ff);
    VecX rhs = -r;
    if (pending) rhs -= couple_fixed(model, a, dq_D);
    VecX dq = combine(model, solver.solve(rhs), dq_D);
    // Backtrack when the full increment distorts an element past the reach
    // of the rotor solve.
    for (int cut = 0;; ++cut) {
      SolverState trial = state;
      model.apply_increment(trial, dq, a);
      try {
        model.update_rotors(trial);
      } catch (const Error&) {
        if (cut >= 4) throw;
        dq *= 0.5;
        trace.backtracks++;
        continue;
      }
      state = std::move(trial);
      break;
    }
    trace.increments.push_back(dq.norm());
    trace.iterations = it + 1;
    pending = false;
    dq_D.setZero();
  }
  return trace;
}

namespace {

// Element slice of dq with the prescribed DOFs zeroed.
VecX masked_gather(const Model& model, const VecX& dq, int e) {
  VecX d = model.gather(dq, e);
  const auto& ids = model.element_dofs(e);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (model.is_fixed(ids[i])) d[i] = 0.0;
  return d;
}

}  // namespace

double rotation_norm2(const Model& model, const std::vector<MatX>& filters, const VecX& dq) {
  double s = 0.0;
  for (int e = 0; e < model.num_elements(); ++e) s += (filters[e] * masked_gather(model, dq, e)).squaredNorm();
  return s;
}

namespace {

// Gradient of rotation_norm2 with respect to the free DOFs.
VecX rotation_norm2_gradient(const Model& model, const std::vector<MatX>& filters, const VecX& dq) {
  VecX g = VecX::Zero(model.dofs().size());
  for (int e = 0; e < model.num_elements(); ++e) {
    const VecX d = masked_gather(model, dq, e);
    model.scatter_add(g, 2.0 * filters[e].transpose() * (filters[e] * d), e);
  }
  return free_part(model, g);
}

// d(prescribed)/d(lambda) by central differences.
VecX prescribed_rate(const Model& model, double lambda) {
  const double h = 1e-6 * std::max(1.0, std::abs(lambda));
  return (model.prescribed(lambda + h) - model.prescribed(lambda - h)) / (2.0 * h);
}

}  // namespace

ArcLength::ArcLength(const Model& model, ArcLengthParams params) : model_(model), params_(params) {
  if (!(params_.s > 0.0)) throw ConfigError("arc-length radius must be positive");
  if (params_.psi < 0.0) throw ConfigError("arc-length load scaling must be non-negative");
}

bool ArcLength::attempt(SolverState& state, double s, ArcStepResult& out) {
  const auto& opt = model_.options();
  const SolverState start = state;
  const double psi2 = params_.psi * params_.psi;
  try {
    model_.update_rotors(state);
    Assembly a = model_.assemble(state);
    std::vector<MatX> G(model_.num_elements());
    for (int e = 0; e < model_.num_elements(); ++e) G[e] = a.ops[e].G;
    const VecX f_free = free_part(model_, model_.external_load());

    // Predictor.
    VecX dq_free;
    double dlam;
    if (has_prev_) {
      dq_free = free_part(model_, prev_dq_) * (s / prev_s_);
      dlam = prev_dlambda_ * (s / prev_s_);
    } else {
      solver_.factorize(a.K_ff);
      const VecX T = couple_fixed(model_, a, prescribed_rate(model_, state.lambda)) - f_free;
      const VecX t = solver_.solve(-T);
      const double g2 = rotation_norm2(model_, G, combine(model_, t, VecX::Zero(model_.dofs().size())));
      const double denom = std::sqrt(g2 + psi2);
      if (!(denom > 0.0)) throw StepFailure("arc-length predictor is degenerate");
      dlam = s / denom;
      dq_free = dlam * t;
    }
    const double lam0 = start.lambda;
    state.lambda = lam0 + dlam;
    VecX dq = combine(model_, dq_free, model_.prescribed(state.lambda) - state.q);
    model_.apply_increment(state, dq, a);

    NewtonTrace trace;
    for (int it = 0;; ++it) {
      model_.update_rotors(state);
      a = model_.assemble(state);
      const VecX r = free_part(model_, a.residual);
      const VecX Dq = state.q - start.q;
      const double Dl = state.lambda - lam0;
      const double Rl = rotation_norm2(model_, G, Dq) + psi2 * Dl * Dl - s * s;
      trace.scale = load_scale(model_, a, state.lambda);
      trace.residuals.push_back(r.norm());
      if (residual_ok(model_, r.norm(), trace.scale) && std::abs(Rl) <= 1e-12 * s * s) {
        trace.converged = true;
        out.control_residual = Rl;
        out.d_lambda = Dl;
        out.sum_dphi = std::sqrt(rotation_norm2(model_, G, Dq));
        out.dq_norm = Dq.norm();
        // Reject increments that fold back onto the traversed path.
        if (has_prev_) {
          double dot = psi2 * Dl * prev_dlambda_;
          for (int e = 0; e < model_.num_elements(); ++e)
            dot += (G[e] * masked_gather(model_, Dq, e)).dot(G[e] * masked_gather(model_, prev_dq_, e));
          if (dot <= 0.0) {
            state = start;
            return false;
          }
        }
        break;
      }
      if (it >= opt.max_iter) break;
      solver_.factorize(a.K_ff);
      const VecX T = couple_fixed(model_, a, prescribed_rate(model_, state.lambda)) - f_free;
      const VecX d1 = solver_.solve(-r);
      const VecX d2 = solver_.solve(-T);
      const VecX g = rotation_norm2_gradient(model_, G, Dq);
      const double denom = g.dot(d2) + 2.0 * psi2 * Dl;
      if (!(std::abs(denom) > 0.0)) throw StepFailure("bordered arc-length system is singular");
      const double dl = (-Rl - g.dot(d1)) / denom;
      state.lambda += dl;
      const VecX inc = combine(model_, d1 + dl * d2, model_.prescribed(state.lambda) - state.q);
      model_.apply_increment(state, inc, a);
      trace.increments.push_back(inc.norm());
      trace.iterations = it + 1;
    }
    out.trace = trace;
    if (!trace.converged) {
      state = start;
      return false;
    }
  } catch (const StepFailure&) {
    state = start;
    return false;
  } catch (const NoConvergence&) {
    state = start;
    return false;
  } catch (const SingularTangent&) {
    state = start;
    return false;
  } catch (const LinearSolveFailure&) {
    state = start;
    return false;
  }
  return true;
}

ArcStepResult ArcLength::step(SolverState& state) {
  ArcStepResult out;
  double s = params_.s;
  const SolverState start = state;
  for (int h = 0; h <= params_.max_halvings; ++h) {
    if (attempt(state, s, out)) {
      out.s_used = s;
      out.halvings = h;
      prev_dq_ = state.q - start.q;
      for (int d : model_.fixed_dofs()) prev_dq_[d] = 0.0;
      prev_dlambda_ = state.lambda - start.lambda;
      prev_s_ = s;
      has_prev_ = true;
      params_.s = out.trace.iterations <= params_.fast_iterations ? s * params_.grow : s;
      if (params_.s_max > 0.0) params_.s = std::min(params_.s, params_.s_max);
      ++state.step;
      return out;
    }
    s *= params_.shrink;
  }
  throw StepFailure("arc-length step failed after " + std::to_string(params_.max_halvings) + " halvings");
}

}  // namespace corot
