#include "corot/runner.hpp"

#include <json.hpp>

#include <chrono>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace corot {

namespace {

using Clock = std::chrono::steady_clock;

// Writes to run.log and, when verbose, to the console.
class Log {
 public:
  Log(std::ostream& console, bool verbose) : console_(console), verbose_(verbose) {}
  void open(const std::filesystem::path& file) {
    file_.open(file);
    if (!file_) throw Error("cannot write '" + file.string() + "'");
    file_ << buffer_.str();
  }
  void line(const std::string& s, bool always = false) {
    if (file_.is_open()) file_ << s << '\n' << std::flush;
    else buffer_ << s << '\n';
    if (verbose_ || always) console_ << s << '\n';
  }

 private:
  std::ostream& console_;
  bool verbose_;
  std::ofstream file_;
  std::ostringstream buffer_;
};

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

bool is_input_error(const Error& e) {
  return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
         dynamic_cast<const TopologyError*>(&e) || dynamic_cast<const DegenerateFace*>(&e) ||
         dynamic_cast<const MaterialError*>(&e) || dynamic_cast<const InsufficientConstraints*>(&e);
}

std::vector<MatX> filters(const Model& model, const SolverState& state) {
  SolverState s = state;
  model.update_rotors(s);
  const Assembly a = model.assemble(s, false);
  std::vector<MatX> G(model.num_elements());
  for (int e = 0; e < model.num_elements(); ++e) G[e] = a.ops[e].G;
  return G;
}

// Newton to `target`, bisecting the load increment on failure.
NewtonTrace advance(const Model& model, SolverState& state, double target, LinearSolver& solver, Log& log,
                    int depth = 0) {
  const SolverState start = state;
  NewtonTrace t;
  try {
    t = newton_step(model, state, target, solver);
  } catch (const Error& e) {
    if (is_input_error(e)) throw;
    t.converged = false;
    log.line("  newton failed at lambda " + fmt(target) + ": " + e.what());
  }
  if (t.converged) return t;
  state = start;
  if (depth >= 6)
    throw StepFailure("no convergence at lambda " + fmt(target) + " after " + std::to_string(depth) + " bisections");
  const double mid = 0.5 * (start.lambda + target);
  log.line("  bisecting: lambda " + fmt(start.lambda) + " -> " + fmt(mid) + " -> " + fmt(target));
  NewtonTrace a = advance(model, state, mid, solver, log, depth + 1);
  NewtonTrace b = advance(model, state, target, solver, log, depth + 1);
  b.iterations += a.iterations;
  b.residuals.insert(b.residuals.begin(), a.residuals.begin(), a.residuals.end());
  return b;
}

nlohmann::json row_json(const PathRow& r) {
  return {{"step", r.step}, {"lambda", r.lambda}, {"arc_s", r.arc_s}, {"dq_norm", r.dq_norm},
          {"sum_dphi", r.sum_dphi}, {"iterations", r.iterations}, {"residual", r.residual},
          {"energy", r.energy}};
}

}  // namespace

RunResult run(const std::filesystem::path& path, const RunOptions& options, std::ostream& console) {
  try {
    return run(load_config(path), options, console);
  } catch (const Error& e) {
    RunResult r;
    r.exit_code = kExitConfig;
    r.message = e.what();
    console << "config error: " << e.what() << '\n';
    return r;
  }
}

RunResult run(const SolverConfig& cfg, const RunOptions& options, std::ostream& console) {
  RunResult result;
  Log log(console, options.verbose);
  const auto t0 = Clock::now();
  nlohmann::json summary;
  summary["config"] = cfg.source.string();

  std::unique_ptr<TetMesh> mesh;
  std::unique_ptr<Model> model;
  try {
    mesh = std::make_unique<TetMesh>(build_mesh(cfg));
    validate_config(cfg, *mesh);
    SolverOptions so = cfg.solver;
    so.threads = options.threads;
    model = std::make_unique<Model>(*mesh, cfg.material, cfg.face_order, cfg.trefftz_order, make_boundary(cfg), so);
  } catch (const Error& e) {
    result.exit_code = is_input_error(e) ? kExitConfig : kExitSolver;
    result.message = e.what();
    console << (result.exit_code == kExitConfig ? "config error: " : "solver error: ") << e.what() << '\n';
    return result;
  }
  result.num_tets = mesh->num_tets();
  result.num_dofs = model->dofs().size();
  result.num_free = model->num_free();
  std::ostringstream sizes;
  sizes << "tets " << result.num_tets << ", faces " << mesh->num_faces() << ", face dofs " << result.num_dofs
        << " (" << result.num_free << " free), stress dofs per element " << model->basis().size() << ", solver "
        << LinearSolver::backend();
  // Fewer stress modes than deformation modes leaves spurious kinematic modes.
  std::string warning;
  if (model->basis().size() < model->element(0).n - 6)
    warning = "warning: " + std::to_string(model->basis().size()) + " stress modes cannot control " +
              std::to_string(model->element(0).n - 6) + " element deformation modes; raise trefftz_order";
  if (options.check) {
    console << sizes.str() << '\n';
    if (!warning.empty()) console << warning << '\n';
    return result;
  }

  const auto& st = cfg.stepping;
  PathWriter* writer = nullptr;
  std::unique_ptr<PathWriter> writer_owner;
  SolverState state = model->initial_state();
  int step = 0;
  auto emit = [&](PathRow row, const std::vector<double>& residuals) {
    row.step = step;
    row.lambda = state.lambda;
    row.energy = model->energy(state);
    writer->write(row);
    result.path.push_back(row);
    result.residuals.push_back(residuals);
    if (cfg.vtk_every > 0 && step % cfg.vtk_every == 0) {
      std::ostringstream name;
      name << "step_" << std::setw(4) << std::setfill('0') << step << ".vtk";
      write_vtk(cfg.output_dir / name.str(), *model, state);
    }
    log.line("step " + std::to_string(step) + " lambda " + fmt(row.lambda) + " iterations " +
                 std::to_string(row.iterations) + " residual " + fmt(row.residual) + " energy " + fmt(row.energy),
             true);
  };

  try {
    std::filesystem::create_directories(cfg.output_dir);
    log.open(cfg.output_dir / "run.log");
    log.line("config " + cfg.source.string());
    log.line(sizes.str());
    if (!warning.empty()) log.line(warning, true);
    writer_owner = std::make_unique<PathWriter>(cfg.output_dir / "path.csv");
    writer = writer_owner.get();
    emit(PathRow{}, {});

    if (st.mode == SteppingConfig::Mode::Load) {
      LinearSolver solver;
      for (int i = 1; i <= st.steps; ++i) {
        step = i;
        const double target = st.lambda_end * i / st.steps;
        const VecX q0 = state.q;
        const auto G = filters(*model, state);
        NewtonTrace t;
        try {
          t = advance(*model, state, target, solver, log);
        } catch (const Error& e) {
          throw StepFailure("step " + std::to_string(i) + " (lambda " + fmt(target) + "): " + e.what());
        }
        state.step = i;
        for (std::size_t k = 0; k < t.residuals.size(); ++k)
          log.line("  iteration " + std::to_string(k) + " residual " + fmt(t.residuals[k]));
        PathRow row;
        const VecX dq = state.q - q0;
        row.dq_norm = dq.norm();
        row.sum_dphi = std::sqrt(rotation_norm2(*model, G, dq));
        row.iterations = t.iterations;
        row.residual = t.residuals.empty() ? 0.0 : t.residuals.back();
        emit(row, t.residuals);
      }
    } else {
      ArcLength arc(*model, st.arc);
      for (int i = 1; i <= st.max_steps; ++i) {
        step = i;
        const VecX q0 = state.q;
        ArcStepResult r;
        try {
          r = arc.step(state);
        } catch (const Error& e) {
          throw StepFailure("arc-length step " + std::to_string(i) + " from lambda " + fmt(state.lambda) + ": " +
                            e.what());
        }
        for (std::size_t k = 0; k < r.trace.residuals.size(); ++k)
          log.line("  iteration " + std::to_string(k) + " residual " + fmt(r.trace.residuals[k]));
        log.line("  radius " + fmt(r.s_used) + " halvings " + std::to_string(r.halvings) + " control residual " +
                 fmt(r.control_residual));
        PathRow row;
        row.arc_s = r.s_used;
        row.dq_norm = (state.q - q0).norm();
        row.sum_dphi = r.sum_dphi;
        row.iterations = r.trace.iterations;
        row.residual = r.trace.residuals.empty() ? 0.0 : r.trace.residuals.back();
        emit(row, r.trace.residuals);
        if (st.lambda_stop > 0.0 && state.lambda >= st.lambda_stop) break;
        if (state.lambda < st.lambda_min) break;
      }
    }
    result.converged = true;
  } catch (const Error& e) {
    result.exit_code = is_input_error(e) ? kExitConfig : kExitSolver;
    result.message = e.what();
    console << "solver error: " << e.what() << '\n';
    log.line(std::string("error: ") + e.what());
  }

  summary["status"] = result.exit_code == kExitOk ? "ok" : "failed";
  summary["exit_code"] = result.exit_code;
  summary["message"] = result.message;
  summary["mesh"] = {{"tets", result.num_tets}, {"faces", mesh->num_faces()}};
  summary["dofs"] = {{"face", result.num_dofs}, {"free", result.num_free}, {"stress_per_element", model->basis().size()}};
  summary["discretization"] = {{"face_order", cfg.face_order}, {"trefftz_order", cfg.trefftz_order}};
  summary["material"] = {{"E", cfg.material.E}, {"nu", cfg.material.nu}};
  summary["solver"] = LinearSolver::backend();
  summary["converged"] = result.converged;
  summary["final_lambda"] = state.lambda;
  summary["steps"] = nlohmann::json::array();
  for (std::size_t i = 0; i < result.path.size(); ++i) {
    auto j = row_json(result.path[i]);
    j["residuals"] = result.residuals[i];
    summary["steps"].push_back(j);
  }
  nlohmann::json sets;
  for (const auto& [name, faces] : mesh->boundary_sets()) {
    Vec3 X = Vec3::Zero();
    double area = 0.0;
    for (int f : faces) {
      X += mesh->frames()[f].area * mesh->frames()[f].origin;
      area += mesh->frames()[f].area;
    }
    const Vec3 x = X / area + set_mean_displacement(*model, state.q, name);
    sets[name] = {x.x(), x.y(), x.z()};
  }
  summary["set_centroids"] = sets;
  summary["wall_seconds"] = std::chrono::duration<double>(Clock::now() - t0).count();
  try {
    std::ofstream js(cfg.output_dir / "summary.json");
    js << std::setw(2) << summary << '\n';
  } catch (const std::exception&) {
  }
  return result;
}

}  // namespace corot
