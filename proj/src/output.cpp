#include "corot/output.hpp"

#include <iomanip>

namespace corot {

namespace {

Mat3 voigt_to_tensor(const Vec6& s) {
  Mat3 t;
  t << s[0], s[3], s[5],
       s[3], s[1], s[4],
       s[5], s[4], s[2];
  return t;
}

std::ofstream open_or_throw(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write '" + file.string() + "'");
  out << std::setprecision(12);
  return out;
}

}  // namespace

PathWriter::PathWriter(const std::filesystem::path& file) : out_(open_or_throw(file)) {
  out_ << "step,lambda,arc_s,dq_norm,sum_dphi,iterations,residual,energy\n";
}

void PathWriter::write(const PathRow& r) {
  out_ << r.step << ',' << r.lambda << ',' << r.arc_s << ',' << r.dq_norm << ',' << r.sum_dphi << ','
       << r.iterations << ',' << r.residual << ',' << r.energy << '\n';
  out_.flush();
}

std::vector<Vec3> deformed_nodes(const Model& model, const SolverState& state) {
  const TetMesh& mesh = model.mesh();
  std::vector<Vec3> x(mesh.num_nodes(), Vec3::Zero());
  std::vector<int> count(mesh.num_nodes(), 0);
  for (int e = 0; e < model.num_elements(); ++e) {
    const ElementGeometry& g = model.element(e);
    const Rotor& r = state.rotors[e];
    const Vec3& Xc = g.ws.centroid;
    for (int id : mesh.tets()[e]) {
      const Vec3& X = mesh.nodes()[id];
      const Vec3 ud = g.rho * (g.basis->displacement(g.local(X)) * state.v[e]);
      x[id] += Xc + r.c + r.R * (X - Xc + ud);
      ++count[id];
    }
  }
  for (int i = 0; i < mesh.num_nodes(); ++i) x[i] = count[i] ? Vec3(x[i] / count[i]) : mesh.nodes()[i];
  return x;
}

void write_vtk(const std::filesystem::path& file, const Model& model, const SolverState& state) {
  const TetMesh& mesh = model.mesh();
  const auto x = deformed_nodes(model, state);
  auto out = open_or_throw(file);
  out << "# vtk DataFile Version 3.0\n";
  out << "corot-hts step " << state.step << " lambda " << state.lambda << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const Vec3& p : x) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  out << "CELLS " << mesh.num_tets() << ' ' << 5 * mesh.num_tets() << '\n';
  for (const auto& t : mesh.tets()) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  out << "CELL_TYPES " << mesh.num_tets() << '\n';
  for (int e = 0; e < mesh.num_tets(); ++e) out << "10\n";

  out << "POINT_DATA " << mesh.num_nodes() << "\nVECTORS displacement double\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Vec3 u = x[i] - mesh.nodes()[i];
    out << u.x() << ' ' << u.y() << ' ' << u.z() << '\n';
  }

  out << "CELL_DATA " << mesh.num_tets() << "\nTENSORS stress double\n";
  for (int e = 0; e < mesh.num_tets(); ++e) {
    const Mat3& R = state.rotors[e].R;
    const Mat3 s = R * voigt_to_tensor(local_stress(model.element(e), state.v[e], mesh.tet_centroid(e))) * R.transpose();
    for (int i = 0; i < 3; ++i) out << s(i, 0) << ' ' << s(i, 1) << ' ' << s(i, 2) << '\n';
  }
  out << "VECTORS rotor double\n";
  for (int e = 0; e < mesh.num_tets(); ++e) {
    const Vec3 phi = log_map(state.rotors[e].R);
    out << phi.x() << ' ' << phi.y() << ' ' << phi.z() << '\n';
  }
  if (!out) throw Error("failed writing '" + file.string() + "'");
}

Vec3 set_mean_displacement(const Model& model, const VecX& q, const std::string& set) {
  const auto it = model.mesh().boundary_sets().find(set);
  if (it == model.mesh().boundary_sets().end()) throw ConfigError("unknown face set '" + set + "'");
  Vec3 sum = Vec3::Zero();
  double area = 0.0;
  for (int f : it->second) {
    const VecX mom = face_monomial_integrals(model.mesh(), f, model.face_order());
    const int off = model.dofs().offset(f);
    for (int a = 0; a < model.dofs().m; ++a) sum += mom[a] * q.segment<3>(off + 3 * a);
    area += mom[0];
  }
  return area > 0.0 ? Vec3(sum / area) : Vec3::Zero();
}

}  // namespace corot
