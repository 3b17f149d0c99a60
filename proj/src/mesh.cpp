#include "corot/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

namespace corot {

namespace {

// Outward-oriented vertex slots of the face opposite each tet vertex, valid
// for positively oriented tets.
constexpr int kFaceSlots[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

std::array<int, 3> sorted(std::array<int, 3> t) {
  std::sort(t.begin(), t.end());
  return t;
}

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

}  // namespace

TetMesh::TetMesh(std::vector<Vec3> nodes, std::vector<std::array<int, 4>> tets)
    : nodes_(std::move(nodes)), tets_(std::move(tets)) {
  build();
}

void TetMesh::build() {
  const int nn = num_nodes();
  double scale = 0.0;
  if (!nodes_.empty()) {
    auto [lo, hi] = bounding_box();
    scale = (hi - lo).norm();
  }
  std::set<std::array<int, 4>> seen;
  for (int t = 0; t < num_tets(); ++t) {
    auto& tet = tets_[t];
    for (int i : tet)
      if (i < 0 || i >= nn)
        throw TopologyError("tet " + std::to_string(t) + " references node " + std::to_string(i) +
                            " out of range");
    std::array<int, 4> key = tet;
    std::sort(key.begin(), key.end());
    if (std::adjacent_find(key.begin(), key.end()) != key.end())
      throw TopologyError("tet " + std::to_string(t) + " repeats a node");
    if (!seen.insert(key).second)
      throw TopologyError("tet " + std::to_string(t) + " duplicates an earlier tet");
    double vol = signed_volume(nodes_[tet[0]], nodes_[tet[1]], nodes_[tet[2]], nodes_[tet[3]]);
    if (std::abs(vol) <= 1e-14 * scale * scale * scale)
      throw TopologyError("tet " + std::to_string(t) + " has zero volume");
    if (vol < 0.0) {
      std::swap(tet[2], tet[3]);
      ++reoriented_;
    }
  }

  faces_.clear();
  face_lookup_.clear();
  tet_faces_.assign(tets_.size(), {});
  tet_face_sign_.assign(tets_.size(), {});
  for (int t = 0; t < num_tets(); ++t) {
    for (int k = 0; k < 4; ++k) {
      const auto key = tet_face_vertices(t, k);
      const auto skey = sorted(key);
      auto [it, inserted] = face_lookup_.try_emplace(skey, num_faces());
      if (inserted) {
        Face f;
        f.v = skey;
        f.tets[0] = t;
        f.local[0] = k;
        faces_.push_back(f);
      } else {
        Face& f = faces_[it->second];
        if (f.tets[1] >= 0)
          throw TopologyError("face (" + std::to_string(skey[0]) + "," + std::to_string(skey[1]) +
                              "," + std::to_string(skey[2]) + ") shared by more than two tets");
        f.tets[1] = t;
        f.local[1] = k;
      }
      tet_faces_[t][k] = it->second;
    }
  }

  frames_.resize(faces_.size());
  for (int f = 0; f < num_faces(); ++f) {
    const Face& face = faces_[f];
    const auto outward = tet_face_vertices(face.tets[0], face.local[0]);
    const std::array<Vec3, 3> x{nodes_[outward[0]], nodes_[outward[1]], nodes_[outward[2]]};
    frames_[f] = make_frame(outward, x);
    if (!face.boundary()) {
      // The two tets must sit on opposite sides of a shared face.
      const auto& t0 = tets_[face.tets[0]];
      const auto& t1 = tets_[face.tets[1]];
      const Vec3 a = nodes_[t0[face.local[0]]] - frames_[f].origin;
      const Vec3 b = nodes_[t1[face.local[1]]] - frames_[f].origin;
      if (a.dot(frames_[f].normal) * b.dot(frames_[f].normal) >= 0.0)
        throw TopologyError("tets " + std::to_string(face.tets[0]) + " and " +
                            std::to_string(face.tets[1]) + " overlap across face " +
                            std::to_string(f));
    }
  }
  for (int t = 0; t < num_tets(); ++t)
    for (int k = 0; k < 4; ++k) {
      const Face& face = faces_[tet_faces_[t][k]];
      tet_face_sign_[t][k] = (face.tets[0] == t) ? 1.0 : -1.0;
    }
}

int TetMesh::num_boundary_faces() const {
  return static_cast<int>(
      std::count_if(faces_.begin(), faces_.end(), [](const Face& f) { return f.boundary(); }));
}

std::array<int, 3> TetMesh::tet_face_vertices(int t, int k) const {
  const auto& tet = tets_[t];
  return {tet[kFaceSlots[k][0]], tet[kFaceSlots[k][1]], tet[kFaceSlots[k][2]]};
}

double TetMesh::tet_volume(int t) const {
  const auto& tet = tets_[t];
  return signed_volume(nodes_[tet[0]], nodes_[tet[1]], nodes_[tet[2]], nodes_[tet[3]]);
}

Vec3 TetMesh::tet_centroid(int t) const {
  const auto& tet = tets_[t];
  return 0.25 * (nodes_[tet[0]] + nodes_[tet[1]] + nodes_[tet[2]] + nodes_[tet[3]]);
}

int TetMesh::find_face(std::array<int, 3> vertices) const {
  auto it = face_lookup_.find(sorted(vertices));
  return it == face_lookup_.end() ? -1 : it->second;
}

void TetMesh::add_face_set(const std::string& name,
                           const std::vector<std::array<int, 3>>& triples) {
  std::vector<int> ids;
  ids.reserve(triples.size());
  for (const auto& t : triples) {
    const int f = find_face(t);
    if (f < 0)
      throw TopologyError("face set '" + name + "' references a triangle that is not a mesh face");
    ids.push_back(f);
  }
  add_face_set_indices(name, std::move(ids));
}

void TetMesh::add_face_set_indices(const std::string& name, std::vector<int> faces) {
  std::sort(faces.begin(), faces.end());
  faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
  auto& dst = sets_[name];
  dst.insert(dst.end(), faces.begin(), faces.end());
  std::sort(dst.begin(), dst.end());
  dst.erase(std::unique(dst.begin(), dst.end()), dst.end());
}

std::pair<Vec3, Vec3> TetMesh::bounding_box() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& x : nodes_) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return {lo, hi};
}

double TetMesh::diameter() const {
  auto [lo, hi] = bounding_box();
  return (hi - lo).norm();
}

FaceFrame make_frame(const std::array<int, 3>& ids, const std::array<Vec3, 3>& x) {
  FaceFrame fr;
  const Vec3 n = (x[1] - x[0]).cross(x[2] - x[0]);
  const double twice_area = n.norm();
  const double len = std::max({(x[1] - x[0]).norm(), (x[2] - x[0]).norm(), (x[2] - x[1]).norm()});
  if (!(twice_area > 1e-14 * len * len)) throw DegenerateFace("face has zero area");
  fr.normal = n / twice_area;
  fr.area = 0.5 * twice_area;
  fr.origin = (x[0] + x[1] + x[2]) / 3.0;
  // e1 along the edge from the lowest to the next-lowest vertex index.
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ids[a] < ids[b]; });
  Vec3 e1 = x[order[1]] - x[order[0]];
  e1 -= e1.dot(fr.normal) * fr.normal;
  fr.e1 = e1.normalized();
  fr.e2 = fr.normal.cross(fr.e1);
  return fr;
}

FaceFrame face_frame(const TetMesh& mesh, int face) {
  if (face < 0 || face >= mesh.num_faces()) throw std::out_of_range("face index out of range");
  return mesh.frames()[face];
}

Mat3 closed_surface_moment(const TetMesh& mesh, int tet, int flip_face) {
  if (tet < 0 || tet >= mesh.num_tets()) throw std::out_of_range("tet index out of range");
  // Column i holds the integral of X_i Spin[N] e_i; the row sums give the
  // vector integral of Spin[N] X. The integrand is linear on a flat face, so
  // the centroid rule is exact.
  Mat3 m = Mat3::Zero();
  for (int k = 0; k < 4; ++k) {
    const FaceFrame& fr = mesh.frames()[mesh.tet_face(tet, k)];
    double s = mesh.tet_face_sign(tet, k);
    if (k == flip_face) s = -s;
    const Vec3 n = s * fr.normal;
    Mat3 spin_n;
    spin_n << 0, -n.z(), n.y(), n.z(), 0, -n.x(), -n.y(), n.x(), 0;
    m += fr.area * spin_n * fr.origin.asDiagonal();
  }
  return m;
}

Vec3 closed_surface_normal_integral(const TetMesh& mesh, int tet) {
  Vec3 s = Vec3::Zero();
  for (int k = 0; k < 4; ++k) {
    const FaceFrame& fr = mesh.frames()[mesh.tet_face(tet, k)];
    s += mesh.tet_face_sign(tet, k) * fr.area * fr.normal;
  }
  return s;
}

// ---------------------------------------------------------------------------
// I/O

namespace {

struct LineReader {
  std::istream& in;
  int line = 0;
  std::string text;

  bool next() {
    while (std::getline(in, text)) {
      ++line;
      const auto first = text.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      if (text[first] == '#') continue;
      if (text.back() == '\r') text.pop_back();
      text = text.substr(first);
      return true;
    }
    return false;
  }

  void expect(const std::string& tag) {
    if (!next()) throw ParseError("unexpected end of file, expected " + tag, line);
    if (text.rfind(tag, 0) != 0) throw ParseError("expected " + tag + ", got '" + text + "'", line);
  }

  long count() {
    if (!next()) throw ParseError("unexpected end of file, expected a count", line);
    std::istringstream ss(text);
    long n;
    if (!(ss >> n) || n < 0) throw ParseError("malformed count '" + text + "'", line);
    return n;
  }
};

}  // namespace

TetMesh read_native(std::istream& in) {
  LineReader r{in, 0, {}};
  std::vector<Vec3> nodes;
  std::unordered_map<long, int> node_index;
  std::vector<std::array<int, 4>> tets;
  std::vector<std::pair<std::string, std::vector<std::array<long, 3>>>> sets;

  while (r.next()) {
    if (r.text.rfind("$Nodes", 0) == 0) {
      const long n = r.count();
      for (long i = 0; i < n; ++i) {
        if (!r.next()) throw ParseError("unexpected end of file in $Nodes", r.line);
        std::istringstream ss(r.text);
        long id;
        double x, y, z;
        if (!(ss >> id >> x >> y >> z)) throw ParseError("malformed node line", r.line);
        if (!node_index.emplace(id, static_cast<int>(nodes.size())).second)
          throw ParseError("duplicate node id " + std::to_string(id), r.line);
        nodes.emplace_back(x, y, z);
      }
      r.expect("$EndNodes");
    } else if (r.text.rfind("$Tets", 0) == 0) {
      const long n = r.count();
      for (long i = 0; i < n; ++i) {
        if (!r.next()) throw ParseError("unexpected end of file in $Tets", r.line);
        std::istringstream ss(r.text);
        long id, a, b, c, d;
        if (!(ss >> id >> a >> b >> c >> d)) throw ParseError("malformed tet line", r.line);
        std::array<int, 4> t{};
        const long ids[4] = {a, b, c, d};
        for (int k = 0; k < 4; ++k) {
          auto it = node_index.find(ids[k]);
          if (it == node_index.end())
            throw ParseError("tet references unknown node " + std::to_string(ids[k]), r.line);
          t[k] = it->second;
        }
        tets.push_back(t);
      }
      r.expect("$EndTets");
    } else if (r.text.rfind("$FaceSets", 0) == 0) {
      const long nsets = r.count();
      for (long s = 0; s < nsets; ++s) {
        if (!r.next()) throw ParseError("unexpected end of file in $FaceSets", r.line);
        std::istringstream ss(r.text);
        std::string name;
        long nf;
        if (!(ss >> name >> nf) || nf < 0) throw ParseError("malformed face set header", r.line);
        std::vector<std::array<long, 3>> tri;
        for (long i = 0; i < nf; ++i) {
          if (!r.next()) throw ParseError("unexpected end of file in face set", r.line);
          std::istringstream fs(r.text);
          std::array<long, 3> t{};
          if (!(fs >> t[0] >> t[1] >> t[2])) throw ParseError("malformed face triple", r.line);
          for (long id : t)
            if (!node_index.count(id))
              throw ParseError("face set references unknown node " + std::to_string(id), r.line);
          tri.push_back(t);
        }
        sets.emplace_back(name, std::move(tri));
      }
      r.expect("$EndFaceSets");
    } else {
      throw ParseError("unknown section '" + r.text + "'", r.line);
    }
  }
  TetMesh mesh(std::move(nodes), std::move(tets));
  for (const auto& [name, tri] : sets) {
    std::vector<std::array<int, 3>> local;
    for (const auto& t : tri) local.push_back({node_index[t[0]], node_index[t[1]], node_index[t[2]]});
    mesh.add_face_set(name, local);
  }
  return mesh;
}

TetMesh read_gmsh_v2(std::istream& in) {
  LineReader r{in, 0, {}};
  std::vector<Vec3> nodes;
  std::unordered_map<long, int> node_index;
  std::vector<std::array<int, 4>> tets;
  std::map<long, std::string> names;
  std::map<long, std::vector<std::array<int, 3>>> tri_by_tag;

  while (r.next()) {
    if (r.text.rfind("$MeshFormat", 0) == 0) {
      if (!r.next()) throw ParseError("unexpected end of file in $MeshFormat", r.line);
      std::istringstream ss(r.text);
      double version;
      int file_type;
      if (!(ss >> version >> file_type)) throw ParseError("malformed $MeshFormat", r.line);
      if (version < 2.0 || version >= 3.0) throw ParseError("only Gmsh v2 is supported", r.line);
      if (file_type != 0) throw ParseError("only ASCII Gmsh files are supported", r.line);
      r.expect("$EndMeshFormat");
    } else if (r.text.rfind("$PhysicalNames", 0) == 0) {
      const long n = r.count();
      for (long i = 0; i < n; ++i) {
        if (!r.next()) throw ParseError("unexpected end of file in $PhysicalNames", r.line);
        std::istringstream ss(r.text);
        int dim;
        long tag;
        std::string name;
        if (!(ss >> dim >> tag >> std::quoted(name))) throw ParseError("malformed physical name", r.line);
        names[tag] = name;
      }
      r.expect("$EndPhysicalNames");
    } else if (r.text.rfind("$Nodes", 0) == 0) {
      const long n = r.count();
      for (long i = 0; i < n; ++i) {
        if (!r.next()) throw ParseError("unexpected end of file in $Nodes", r.line);
        std::istringstream ss(r.text);
        long id;
        double x, y, z;
        if (!(ss >> id >> x >> y >> z)) throw ParseError("malformed node line", r.line);
        node_index.emplace(id, static_cast<int>(nodes.size()));
        nodes.emplace_back(x, y, z);
      }
      r.expect("$EndNodes");
    } else if (r.text.rfind("$Elements", 0) == 0) {
      const long n = r.count();
      for (long i = 0; i < n; ++i) {
        if (!r.next()) throw ParseError("unexpected end of file in $Elements", r.line);
        std::istringstream ss(r.text);
        long id, type, ntags;
        if (!(ss >> id >> type >> ntags)) throw ParseError("malformed element line", r.line);
        std::vector<long> tags(ntags);
        for (auto& t : tags)
          if (!(ss >> t)) throw ParseError("malformed element tags", r.line);
        std::vector<long> conn;
        long v;
        while (ss >> v) conn.push_back(v);
        auto lookup = [&](long id) {
          auto it = node_index.find(id);
          if (it == node_index.end()) throw ParseError("element references unknown node", r.line);
          return it->second;
        };
        if (type == 4) {
          if (conn.size() != 4) throw ParseError("tet element needs 4 nodes", r.line);
          tets.push_back({lookup(conn[0]), lookup(conn[1]), lookup(conn[2]), lookup(conn[3])});
        } else if (type == 2) {
          if (conn.size() != 3) throw ParseError("triangle element needs 3 nodes", r.line);
          const long phys = tags.empty() ? 0 : tags[0];
          tri_by_tag[phys].push_back({lookup(conn[0]), lookup(conn[1]), lookup(conn[2])});
        }
      }
      r.expect("$EndElements");
    } else if (r.text[0] == '$') {
      // Skip unknown sections.
      const std::string end = "$End" + r.text.substr(1);
      while (r.next() && r.text.rfind(end, 0) != 0) {
      }
    } else {
      throw ParseError("unexpected content '" + r.text + "'", r.line);
    }
  }
  TetMesh mesh(std::move(nodes), std::move(tets));
  for (const auto& [tag, tri] : tri_by_tag) {
    auto it = names.find(tag);
    mesh.add_face_set(it != names.end() ? it->second : "tag" + std::to_string(tag), tri);
  }
  return mesh;
}

TetMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file " + path.string(), 0);
  return format == MeshFormat::GmshV2 ? read_gmsh_v2(in) : read_native(in);
}

void write_native(std::ostream& out, const TetMesh& mesh) {
  out << std::setprecision(17);
  out << "$Nodes\n" << mesh.num_nodes() << "\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Vec3& x = mesh.nodes()[i];
    out << i + 1 << ' ' << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
  }
  out << "$EndNodes\n$Tets\n" << mesh.num_tets() << "\n";
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& tet = mesh.tets()[t];
    out << t + 1 << ' ' << tet[0] + 1 << ' ' << tet[1] + 1 << ' ' << tet[2] + 1 << ' ' << tet[3] + 1
        << '\n';
  }
  out << "$EndTets\n";
  if (!mesh.boundary_sets().empty()) {
    out << "$FaceSets\n" << mesh.boundary_sets().size() << "\n";
    for (const auto& [name, faces] : mesh.boundary_sets()) {
      out << name << ' ' << faces.size() << '\n';
      for (int f : faces) {
        const auto& v = mesh.faces()[f].v;
        out << v[0] + 1 << ' ' << v[1] + 1 << ' ' << v[2] + 1 << '\n';
      }
    }
    out << "$EndFaceSets\n";
  }
}

void save_mesh(const std::filesystem::path& path, const TetMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file " + path.string());
  write_native(out, mesh);
}

}  // namespace corot
