#pragma once

#include "corot/mesh.hpp"
#include "corot/mesh_gen.hpp"
#include "corot/solver.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace corot {

/// One boundary condition block of the configuration.
struct BoundaryConfig {
  enum class Type { Traction, Displacement };
  enum class Function { Constant, Bending };

  std::string set;
  Type type = Type::Traction;
  std::array<bool, 3> mask{true, true, true};
  Function function = Function::Constant;
  Vec3 value = Vec3::Zero();  // traction or displacement per unit load factor
  double kappa = 0.0;         // bending curvature per unit load factor
};

struct SteppingConfig {
  enum class Mode { Load, ArcLength };
  Mode mode = Mode::Load;
  // Load control.
  int steps = 10;
  double lambda_end = 1.0;
  // Arc-length control.
  ArcLengthParams arc;
  int max_steps = 50;
  double lambda_stop = 0.0;  // stop once lambda exceeds this (0 = off)
  double lambda_min = -1e300;  // stop once lambda falls below this
};

struct SolverConfig {
  std::filesystem::path source;  // config file, for relative paths
  // Mesh: either a file or a generator.
  std::filesystem::path mesh_path;
  MeshFormat mesh_format = MeshFormat::NativeAscii;
  std::optional<BeamParams> beam;
  std::optional<LatticeParams> lattice;

  Material material;
  int face_order = 2;
  int trefftz_order = 3;
  std::vector<BoundaryConfig> boundary;
  SteppingConfig stepping;
  SolverOptions solver;
  std::filesystem::path output_dir = "out";
  int vtk_every = 1;  // 0 disables field output
};

/// Parses YAML text. Errors name the offending field path.
SolverConfig parse_config(const std::string& text, const std::filesystem::path& source = {});
SolverConfig load_config(const std::filesystem::path& path);

/// Loads or generates the mesh named by the configuration.
TetMesh build_mesh(const SolverConfig& cfg);

/// Checks face set names and other mesh-dependent fields.
void validate_config(const SolverConfig& cfg, const TetMesh& mesh);

/// Boundary data for the solver.
BoundaryData make_boundary(const SolverConfig& cfg);

}  // namespace corot
