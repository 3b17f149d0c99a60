#pragma once

#include "corot/types.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace corot {

enum class MeshFormat { NativeAscii, GmshV2 };

/// A triangle shared by one (boundary) or two (interior) tetrahedra.
/// `v` is sorted ascending; `tets[0]` is the lower tet index and the face's
/// canonical normal points out of it.
struct Face {
  std::array<int, 3> v{};
  std::array<int, 2> tets{-1, -1};
  std::array<int, 2> local{-1, -1};  // face slot (0..3) inside each tet

  bool boundary() const { return tets[1] < 0; }
};

/// Local coordinate system of a face: X = origin + x1 * e1 + x2 * e2.
struct FaceFrame {
  Vec3 origin;
  Vec3 e1;
  Vec3 e2;
  Vec3 normal;  // outward for Face::tets[0]
  double area = 0.0;
};

class TetMesh {
 public:
  TetMesh() = default;

  /// Builds faces and frames; reorients negative tets. Throws TopologyError.
  TetMesh(std::vector<Vec3> nodes, std::vector<std::array<int, 4>> tets);

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 4>>& tets() const { return tets_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<FaceFrame>& frames() const { return frames_; }
  const std::map<std::string, std::vector<int>>& boundary_sets() const { return sets_; }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_tets() const { return static_cast<int>(tets_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()); }
  int num_boundary_faces() const;
  int reoriented() const { return reoriented_; }

  /// Global face index of local face slot `k` of tet `t`.
  int tet_face(int t, int k) const { return tet_faces_[t][k]; }
  /// +1 when the face's canonical normal is outward for tet `t`, else -1.
  double tet_face_sign(int t, int k) const { return tet_face_sign_[t][k]; }

  /// Vertex indices of the face opposite vertex `k` of tet `t`.
  std::array<int, 3> tet_face_vertices(int t, int k) const;

  double tet_volume(int t) const;
  Vec3 tet_centroid(int t) const;

  /// Face index for a vertex triple in any order, -1 if absent.
  int find_face(std::array<int, 3> vertices) const;

  /// Registers a named face set; throws TopologyError for unknown triples.
  void add_face_set(const std::string& name, const std::vector<std::array<int, 3>>& triples);
  void add_face_set_indices(const std::string& name, std::vector<int> faces);

  /// Axis-aligned bounding box (min, max).
  std::pair<Vec3, Vec3> bounding_box() const;
  double diameter() const;

 private:
  void build();

  std::vector<Vec3> nodes_;
  std::vector<std::array<int, 4>> tets_;
  std::vector<Face> faces_;
  std::vector<FaceFrame> frames_;
  std::vector<std::array<int, 4>> tet_faces_;
  std::vector<std::array<double, 4>> tet_face_sign_;
  std::map<std::array<int, 3>, int> face_lookup_;
  std::map<std::string, std::vector<int>> sets_;
  int reoriented_ = 0;
};

/// Reads a mesh file. Throws ParseError or TopologyError.
TetMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
TetMesh read_native(std::istream& in);
TetMesh read_gmsh_v2(std::istream& in);

/// Writes the native ASCII format (round-trips bit-exactly).
void write_native(std::ostream& out, const TetMesh& mesh);
void save_mesh(const std::filesystem::path& path, const TetMesh& mesh);

/// Frame of a face as stored in the mesh. Throws DegenerateFace for zero area.
FaceFrame face_frame(const TetMesh& mesh, int face);

/// Frame of an arbitrary triangle with the given outward normal side.
/// Vertex order defines the normal; `e1` runs from the lowest-index vertex to
/// the next-lowest one.
FaceFrame make_frame(const std::array<int, 3>& ids, const std::array<Vec3, 3>& x);

/// Closed-surface moment of the tet boundary using outward normals.
/// `flip` lets a test harness reverse one face normal (-1 keeps all).
Mat3 closed_surface_moment(const TetMesh& mesh, int tet, int flip_face = -1);

/// Per-component closed-surface normal integral (should vanish).
Vec3 closed_surface_normal_integral(const TetMesh& mesh, int tet);

}  // namespace corot
