#include "corot/config.hpp"

#include "corot/oracles.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace corot {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void allow_keys(const YAML::Node& node, const std::string& path, std::set<std::string> keys) {
  if (!node.IsMap()) fail(path, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!keys.count(key)) fail(path + "." + key, "unknown key");
  }
}

template <class T>
T get(const YAML::Node& node, const std::string& key, const std::string& path, T fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    fail(path + "." + key, "has the wrong type");
  }
}

template <class T>
T require(const YAML::Node& node, const std::string& key, const std::string& path) {
  if (!node[key]) fail(path + "." + key, "is required");
  return get<T>(node, key, path, T{});
}

Vec3 get_vec3(const YAML::Node& node, const std::string& key, const std::string& path, Vec3 fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  if (!v.IsSequence() || v.size() != 3) fail(path + "." + key, "expected a list of three numbers");
  try {
    return Vec3(v[0].as<double>(), v[1].as<double>(), v[2].as<double>());
  } catch (const YAML::Exception&) {
    fail(path + "." + key, "expected a list of three numbers");
  }
}

void parse_mesh(const YAML::Node& n, SolverConfig& cfg) {
  const std::string path = "mesh";
  allow_keys(n, path, {"path", "format", "generate"});
  if (n["path"] && n["generate"]) fail(path, "give either 'path' or 'generate', not both");
  if (n["path"]) {
    cfg.mesh_path = get<std::string>(n, "path", path, "");
    const auto fmt = get<std::string>(n, "format", path, "native");
    if (fmt == "native") cfg.mesh_format = MeshFormat::NativeAscii;
    else if (fmt == "gmsh") cfg.mesh_format = MeshFormat::GmshV2;
    else fail(path + ".format", "expected 'native' or 'gmsh'");
    return;
  }
  if (!n["generate"]) fail(path, "needs 'path' or 'generate'");
  const YAML::Node g = n["generate"];
  const std::string gp = path + ".generate";
  const auto kind = require<std::string>(g, "kind", gp);
  if (kind == "beam") {
    allow_keys(g, gp, {"kind", "nx", "ny", "nz", "lo", "hi"});
    BeamParams b;
    b.nx = get<int>(g, "nx", gp, b.nx);
    b.ny = get<int>(g, "ny", gp, b.ny);
    b.nz = get<int>(g, "nz", gp, b.nz);
    b.lo = get_vec3(g, "lo", gp, b.lo);
    b.hi = get_vec3(g, "hi", gp, b.hi);
    cfg.beam = b;
  } else if (kind == "lattice") {
    allow_keys(g, gp, {"kind", "pattern", "cells", "voxels_per_cell", "voxel", "perturbation", "seed",
                       "half_span", "rise", "thickness", "width", "segments"});
    LatticeParams l;
    const auto pat = get<std::string>(g, "pattern", gp, "cubic");
    if (pat == "cubic") l.pattern = LatticePattern::Cubic;
    else if (pat == "two_strut") l.pattern = LatticePattern::TwoStrut;
    else fail(gp + ".pattern", "expected 'cubic' or 'two_strut'");
    if (g["cells"]) {
      const YAML::Node c = g["cells"];
      if (!c.IsSequence() || c.size() != 3) fail(gp + ".cells", "expected three integers");
      l.cells_x = c[0].as<int>(), l.cells_y = c[1].as<int>(), l.cells_z = c[2].as<int>();
    }
    l.voxels_per_cell = get<int>(g, "voxels_per_cell", gp, l.voxels_per_cell);
    l.voxel = get<double>(g, "voxel", gp, l.voxel);
    l.perturbation = get<double>(g, "perturbation", gp, l.perturbation);
    l.seed = get<std::uint64_t>(g, "seed", gp, l.seed);
    l.half_span = get<double>(g, "half_span", gp, l.half_span);
    l.rise = get<double>(g, "rise", gp, l.rise);
    l.thickness = get<double>(g, "thickness", gp, l.thickness);
    l.width = get<double>(g, "width", gp, l.width);
    l.segments = get<int>(g, "segments", gp, l.segments);
    cfg.lattice = l;
  } else {
    fail(gp + ".kind", "expected 'beam' or 'lattice'");
  }
}

std::array<bool, 3> parse_mask(const YAML::Node& n, const std::string& path) {
  if (!n) return {true, true, true};
  if (!n.IsSequence() || n.size() == 0) fail(path, "expected a list of components (x, y, z)");
  std::array<bool, 3> m{false, false, false};
  for (const auto& c : n) {
    const auto s = c.as<std::string>();
    if (s == "x") m[0] = true;
    else if (s == "y") m[1] = true;
    else if (s == "z") m[2] = true;
    else fail(path, "unknown component '" + s + "'");
  }
  return m;
}

void parse_boundary(const YAML::Node& n, SolverConfig& cfg) {
  if (!n.IsSequence()) fail("boundary", "expected a list");
  for (std::size_t i = 0; i < n.size(); ++i) {
    const YAML::Node b = n[i];
    const std::string path = "boundary[" + std::to_string(i) + "]";
    allow_keys(b, path, {"set", "type", "components", "function", "value", "kappa"});
    BoundaryConfig bc;
    bc.set = require<std::string>(b, "set", path);
    const auto type = require<std::string>(b, "type", path);
    if (type == "traction") bc.type = BoundaryConfig::Type::Traction;
    else if (type == "displacement") bc.type = BoundaryConfig::Type::Displacement;
    else fail(path + ".type", "expected 'traction' or 'displacement'");
    bc.mask = parse_mask(b["components"], path + ".components");
    const auto fn = get<std::string>(b, "function", path, "constant");
    if (fn == "constant") bc.function = BoundaryConfig::Function::Constant;
    else if (fn == "bending") bc.function = BoundaryConfig::Function::Bending;
    else fail(path + ".function", "expected 'constant' or 'bending'");
    if (bc.type == BoundaryConfig::Type::Traction && bc.function != BoundaryConfig::Function::Constant)
      fail(path + ".function", "tractions support only 'constant'");
    if (bc.type == BoundaryConfig::Type::Traction && b["components"])
      fail(path + ".components", "tractions act on all components");
    bc.value = get_vec3(b, "value", path, Vec3::Zero());
    bc.kappa = get<double>(b, "kappa", path, 0.0);
    if (bc.function == BoundaryConfig::Function::Bending && !b["kappa"]) fail(path + ".kappa", "is required for bending");
    cfg.boundary.push_back(bc);
  }
}

void parse_stepping(const YAML::Node& n, SolverConfig& cfg) {
  const std::string path = "stepping";
  allow_keys(n, path, {"mode", "steps", "lambda_end", "radius", "psi", "shrink", "grow", "max_halvings",
                       "fast_iterations", "radius_max", "max_steps", "lambda_stop", "lambda_min"});
  auto& s = cfg.stepping;
  const auto mode = require<std::string>(n, "mode", path);
  const bool load_keys = n["steps"] || n["lambda_end"];
  const bool arc_keys = n["radius"] || n["psi"] || n["max_steps"];
  if (mode == "load") {
    s.mode = SteppingConfig::Mode::Load;
    if (arc_keys) fail(path, "arc-length keys given in load-control mode");
  } else if (mode == "arc_length") {
    s.mode = SteppingConfig::Mode::ArcLength;
    if (load_keys) fail(path, "load-control keys given in arc-length mode");
  } else {
    fail(path + ".mode", "expected 'load' or 'arc_length'");
  }
  s.steps = get<int>(n, "steps", path, s.steps);
  s.lambda_end = get<double>(n, "lambda_end", path, s.lambda_end);
  s.arc.s = get<double>(n, "radius", path, s.arc.s);
  s.arc.psi = get<double>(n, "psi", path, s.arc.psi);
  s.arc.shrink = get<double>(n, "shrink", path, s.arc.shrink);
  s.arc.grow = get<double>(n, "grow", path, s.arc.grow);
  s.arc.max_halvings = get<int>(n, "max_halvings", path, s.arc.max_halvings);
  s.arc.fast_iterations = get<int>(n, "fast_iterations", path, s.arc.fast_iterations);
  s.arc.s_max = get<double>(n, "radius_max", path, s.arc.s_max);
  s.max_steps = get<int>(n, "max_steps", path, s.max_steps);
  s.lambda_stop = get<double>(n, "lambda_stop", path, s.lambda_stop);
  s.lambda_min = get<double>(n, "lambda_min", path, s.lambda_min);
  if (s.steps < 1) fail(path + ".steps", "must be >= 1");
  if (!(s.arc.s > 0.0)) fail(path + ".radius", "must be positive");
  if (s.arc.psi < 0.0) fail(path + ".psi", "must be non-negative");
  if (s.max_steps < 1) fail(path + ".max_steps", "must be >= 1");
}

}  // namespace

SolverConfig parse_config(const std::string& text, const std::filesystem::path& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  SolverConfig cfg;
  cfg.source = source;
  allow_keys(root, "config", {"mesh", "material", "discretization", "boundary", "stepping", "tolerances", "output"});
  if (!root["mesh"]) fail("mesh", "is required");
  parse_mesh(root["mesh"], cfg);

  if (!root["material"]) fail("material", "is required");
  const YAML::Node mat = root["material"];
  allow_keys(mat, "material", {"E", "nu"});
  cfg.material.E = require<double>(mat, "E", "material");
  cfg.material.nu = require<double>(mat, "nu", "material");
  try {
    cfg.material.validate();
  } catch (const MaterialError& e) {
    fail("material", e.what());
  }

  if (const YAML::Node d = root["discretization"]) {
    allow_keys(d, "discretization", {"face_order", "trefftz_order"});
    cfg.face_order = get<int>(d, "face_order", "discretization", cfg.face_order);
    cfg.trefftz_order = get<int>(d, "trefftz_order", "discretization", cfg.trefftz_order);
    if (cfg.face_order < 1) fail("discretization.face_order", "must be >= 1");
    if (cfg.trefftz_order < 1) fail("discretization.trefftz_order", "must be >= 1");
  }

  if (!root["boundary"]) fail("boundary", "is required");
  parse_boundary(root["boundary"], cfg);
  if (!root["stepping"]) fail("stepping", "is required");
  parse_stepping(root["stepping"], cfg);

  if (const YAML::Node t = root["tolerances"]) {
    allow_keys(t, "tolerances", {"residual", "absolute", "increment", "max_iterations", "filter"});
    cfg.solver.tol_r = get<double>(t, "residual", "tolerances", cfg.solver.tol_r);
    cfg.solver.tol_abs = get<double>(t, "absolute", "tolerances", cfg.solver.tol_abs);
    cfg.solver.tol_q = get<double>(t, "increment", "tolerances", cfg.solver.tol_q);
    cfg.solver.max_iter = get<int>(t, "max_iterations", "tolerances", cfg.solver.max_iter);
    const auto f = get<std::string>(t, "filter", "tolerances", "consistent");
    if (f == "consistent") cfg.solver.filter = FilterVariant::Consistent;
    else if (f == "rigid") cfg.solver.filter = FilterVariant::Rigid;
    else fail("tolerances.filter", "expected 'consistent' or 'rigid'");
  }
  if (const YAML::Node o = root["output"]) {
    allow_keys(o, "output", {"directory", "vtk_every"});
    cfg.output_dir = get<std::string>(o, "directory", "output", cfg.output_dir.string());
    cfg.vtk_every = get<int>(o, "vtk_every", "output", cfg.vtk_every);
  }
  // Mesh files are found next to the config; output goes below the working directory.
  const auto base = source.empty() ? std::filesystem::path{} : source.parent_path();
  if (!cfg.mesh_path.empty() && cfg.mesh_path.is_relative()) cfg.mesh_path = base / cfg.mesh_path;
  return cfg;
}

SolverConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

TetMesh build_mesh(const SolverConfig& cfg) {
  if (cfg.beam) return generate_beam(*cfg.beam);
  if (cfg.lattice) return generate_lattice(*cfg.lattice);
  return load_mesh(cfg.mesh_path, cfg.mesh_format);
}

void validate_config(const SolverConfig& cfg, const TetMesh& mesh) {
  for (std::size_t i = 0; i < cfg.boundary.size(); ++i) {
    const auto& bc = cfg.boundary[i];
    if (!mesh.boundary_sets().count(bc.set))
      fail("boundary[" + std::to_string(i) + "].set", "unknown face set '" + bc.set + "'");
  }
}

BoundaryData make_boundary(const SolverConfig& cfg) {
  BoundaryData bd;
  for (const auto& bc : cfg.boundary) {
    if (bc.type == BoundaryConfig::Type::Traction) {
      bd.tractions.push_back({bc.set, bc.value});
      continue;
    }
    DisplacementBC d;
    d.set = bc.set;
    d.mask = bc.mask;
    if (bc.function == BoundaryConfig::Function::Bending) {
      const double k = bc.kappa;
      d.value = [k](const Vec3& X, double lambda) { return Vec3(bending_position(X, k * lambda) - X); };
    } else {
      const Vec3 v = bc.value;
      d.value = [v](const Vec3&, double lambda) { return Vec3(lambda * v); };
    }
    bd.displacements.push_back(d);
  }
  return bd;
}

}  // namespace corot
