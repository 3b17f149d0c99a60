#include "corot/mesh_gen.hpp"
#include "corot/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace corot;

int main(int argc, char** argv) {
  CLI::App app{"Co-rotational hybrid Trefftz stress solver"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Solve the analysis described by a config file");
  std::string config;
  RunOptions opts;
  run_cmd->add_option("config", config, "YAML config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_flag("--check", opts.check, "Parse and validate, print sizes, do not solve");
  run_cmd->add_flag("--verbose", opts.verbose, "Echo the Newton iteration log");
  run_cmd->add_option("--threads", opts.threads, "Element-level threads (0 = default)")->check(CLI::NonNegativeNumber);

  auto* mesh_cmd = app.add_subcommand("mesh", "Write a generated mesh in the native format");
  mesh_cmd->require_subcommand(1);
  std::string out_path;

  auto* beam_cmd = mesh_cmd->add_subcommand("beam", "Structured box, 6 tets per cell");
  BeamParams beam;
  std::vector<double> lo{beam.lo.x(), beam.lo.y(), beam.lo.z()}, hi{beam.hi.x(), beam.hi.y(), beam.hi.z()};
  beam_cmd->add_option("--nx", beam.nx, "Cells along x")->check(CLI::PositiveNumber);
  beam_cmd->add_option("--ny", beam.ny, "Cells along y")->check(CLI::PositiveNumber);
  beam_cmd->add_option("--nz", beam.nz, "Cells along z")->check(CLI::PositiveNumber);
  beam_cmd->add_option("--lo", lo, "Lower corner x y z")->expected(3);
  beam_cmd->add_option("--hi", hi, "Upper corner x y z")->expected(3);
  beam_cmd->add_option("-o,--out", out_path, "Output mesh file")->required();

  auto* lat_cmd = mesh_cmd->add_subcommand("lattice", "Perturbed strut lattice");
  LatticeParams lat;
  std::string pattern = "cubic";
  std::vector<int> cells{lat.cells_x, lat.cells_y, lat.cells_z};
  lat_cmd->add_option("--pattern", pattern, "cubic or two_strut")->check(CLI::IsMember({"cubic", "two_strut"}));
  lat_cmd->add_option("--cells", cells, "Cells along x y z")->expected(3);
  lat_cmd->add_option("--voxels-per-cell", lat.voxels_per_cell, "Voxels per cell edge")->check(CLI::PositiveNumber);
  lat_cmd->add_option("--voxel", lat.voxel, "Voxel size")->check(CLI::PositiveNumber);
  lat_cmd->add_option("--perturbation", lat.perturbation, "Amplitude of the smooth random field");
  lat_cmd->add_option("--seed", lat.seed, "Random seed");
  lat_cmd->add_option("--half-span", lat.half_span, "two_strut: half span");
  lat_cmd->add_option("--rise", lat.rise, "two_strut: apex rise");
  lat_cmd->add_option("--thickness", lat.thickness, "two_strut: strut thickness");
  lat_cmd->add_option("--width", lat.width, "two_strut: out-of-plane width");
  lat_cmd->add_option("--segments", lat.segments, "two_strut: cells along the span (even)");
  lat_cmd->add_option("-o,--out", out_path, "Output mesh file")->required();

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) return run(config, opts, std::cout).exit_code;

  try {
    TetMesh mesh;
    if (beam_cmd->parsed()) {
      beam.lo = Vec3(lo[0], lo[1], lo[2]);
      beam.hi = Vec3(hi[0], hi[1], hi[2]);
      mesh = generate_beam(beam);
    } else {
      lat.pattern = pattern == "cubic" ? LatticePattern::Cubic : LatticePattern::TwoStrut;
      lat.cells_x = cells[0], lat.cells_y = cells[1], lat.cells_z = cells[2];
      mesh = generate_lattice(lat);
    }
    save_mesh(out_path, mesh);
    std::cout << "wrote " << out_path << ": " << mesh.num_nodes() << " nodes, " << mesh.num_tets() << " tets\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
