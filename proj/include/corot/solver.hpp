#pragma once

#include "corot/element.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace corot {

/// Global face DOF numbering: face f owns [f * 3m, (f + 1) * 3m).
struct DofMap {
  int m = 0;  // scalar monomials per face
  int num_faces = 0;

  int per_face() const { return 3 * m; }
  int size() const { return num_faces * 3 * m; }
  int offset(int face) const { return face * 3 * m; }
};

/// Dead traction per reference area, scaled by the load factor.
struct TractionBC {
  std::string set;
  Vec3 traction = Vec3::Zero();
};

/// Prescribed displacement u(X, lambda) on a face set for the masked global
/// components.
struct DisplacementBC {
  std::string set;
  std::array<bool, 3> mask{true, true, true};
  std::function<Vec3(const Vec3& X, double lambda)> value;
};

struct BoundaryData {
  std::vector<TractionBC> tractions;
  std::vector<DisplacementBC> displacements;
};

struct SolverState {
  VecX q;                      // global face DOFs
  std::vector<VecX> v;         // stress DOFs per element
  std::vector<Rotor> rotors;   // per element
  double lambda = 0.0;
  int step = 0;
};

struct SolverOptions {
  double tol_r = 1e-9;    // residual, relative to the load scale
  double tol_abs = 1e-10; // absolute fallback for load-free states
  double tol_q = 1e-12;   // increment, relative to |q| + diameter
  int max_iter = 25;
  FilterVariant filter = FilterVariant::Consistent;
  int threads = 0;  // element-level OpenMP threads, 0 = runtime default
};

struct NewtonTrace {
  bool converged = false;
  int iterations = 0;
  std::vector<double> residuals;  // |R_free| per iteration, before the solve
  std::vector<double> increments; // |dq| per iteration
  double scale = 0.0;             // load scale used for the relative test
  int backtracks = 0;             // increments halved to keep rotors solvable
};

/// Sparse LU of the free-free block; UMFPACK when available.
class LinearSolver {
 public:
  LinearSolver();
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;
  void factorize(const Eigen::SparseMatrix<double>& K);
  VecX solve(const VecX& b) const;
  static const char* backend();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One linearization of the global problem at a state.
struct Assembly {
  Eigen::SparseMatrix<double> K_ff;
  VecX residual;  // full-size condensed residual, including -lambda f_ext
  std::vector<Condensed> elements;
  std::vector<ElementOperators> ops;
};

class Model {
 public:
  Model(const TetMesh& mesh, const Material& material, int face_order, int trefftz_order,
        BoundaryData boundary, SolverOptions options = {});

  const TetMesh& mesh() const { return mesh_; }
  const TrefftzBasis& basis() const { return *basis_; }
  const DofMap& dofs() const { return dofs_; }
  const BoundaryData& boundary() const { return boundary_; }
  const SolverOptions& options() const { return options_; }
  SolverOptions& options() { return options_; }
  int num_elements() const { return mesh_.num_tets(); }
  int face_order() const { return face_order_; }
  const ElementGeometry& element(int e) const { return geometry_[e]; }

  const std::vector<int>& element_dofs(int e) const { return element_dofs_[e]; }
  VecX gather(const VecX& q, int e) const;
  void scatter_add(VecX& out, const VecX& local, int e) const;

  const std::vector<int>& fixed_dofs() const { return fixed_; }
  const std::vector<int>& free_dofs() const { return free_; }
  bool is_fixed(int dof) const { return free_index_[dof] < 0; }
  int num_free() const { return static_cast<int>(free_.size()); }

  /// Consistent load vector of the tractions at lambda = 1.
  const VecX& external_load() const { return f_ext_; }
  /// Prescribed values at the fixed DOFs (full-size vector, zero elsewhere).
  VecX prescribed(double lambda) const;

  SolverState initial_state() const;
  /// Re-solves every element rotor, warm-started from the stored rotors.
  void update_rotors(SolverState& state) const;
  /// Element operators, condensation and the sparse free-free matrix. Rotors
  /// must be current.
  Assembly assemble(const SolverState& state, bool with_matrix = true) const;
  /// Applies the face DOF increment dq (full-size) and recovers stresses.
  void apply_increment(SolverState& state, const VecX& dq, const Assembly& a) const;

  double energy(const SolverState& state) const;

  /// Net force the supports apply on a face set: the sum of the constant
  /// monomial entries of the assembled residual over the set.
  Vec3 resultant(const Assembly& a, const std::string& set) const;

  /// L2 projection of a displacement field onto the DOFs of one face.
  VecX project_face(int face, const std::function<Vec3(const Vec3&)>& u) const;

 private:
  void build_pattern();
  void apply_dirichlet_sets();

  const TetMesh& mesh_;
  std::unique_ptr<TrefftzBasis> basis_;
  int face_order_;
  DofMap dofs_;
  BoundaryData boundary_;
  SolverOptions options_;
  std::vector<ElementGeometry> geometry_;
  std::vector<std::vector<int>> element_dofs_;
  std::vector<int> fixed_, free_, free_index_;
  std::vector<std::array<int, 3>> face_bc_;  // per face and component, BC index or -1
  VecX f_ext_;
  Eigen::SparseMatrix<double> pattern_;
  std::vector<std::vector<int>> slot_;  // per element, n*n value indices (-1 when not free-free)
};

/// Throws InsufficientConstraints unless the prescribed DOFs pin the six
/// global rigid modes.
void check_constraints(const Model& model);

/// Load-controlled Newton iteration to the load factor `lambda`.
NewtonTrace newton_step(const Model& model, SolverState& state, double lambda,
                        LinearSolver& solver);

struct ArcLengthParams {
  double s = 0.1;
  double psi = 1.0;
  double shrink = 0.5;
  double grow = 1.2;
  int max_halvings = 8;
  int fast_iterations = 4;
  double s_max = 0.0;  // 0 = unbounded
};

struct ArcStepResult {
  NewtonTrace trace;
  double s_used = 0.0;       // radius of the accepted increment
  double d_lambda = 0.0;
  double sum_dphi = 0.0;     // sqrt(sum_e |G_e dq_e|^2)
  double dq_norm = 0.0;
  double control_residual = 0.0;  // R_lambda at convergence
  int halvings = 0;
};

/// Arc-length continuation driver with a secant predictor.
class ArcLength {
 public:
  ArcLength(const Model& model, ArcLengthParams params);

  /// Advances `state` by one accepted increment. Throws StepFailure after
  /// the allowed number of halvings.
  ArcStepResult step(SolverState& state);
  double radius() const { return params_.s; }

 private:
  bool attempt(SolverState& state, double s, ArcStepResult& out);

  const Model& model_;
  ArcLengthParams params_;
  LinearSolver solver_;
  VecX prev_dq_;          // last accepted free increment (full-size)
  double prev_dlambda_ = 0.0;
  double prev_s_ = 0.0;
  bool has_prev_ = false;
};

/// Sum over elements of |G_e dq_e|^2 for a full-size increment (free DOFs
/// only), with G frozen in `filters`.
double rotation_norm2(const Model& model, const std::vector<MatX>& filters, const VecX& dq);

}  // namespace corot
