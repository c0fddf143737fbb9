#include "propd/error.hpp"
#include "propd/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace propd {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void fan(const std::vector<int>& poly, std::vector<Triangle>& out) {
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) out.push_back({poly[0], poly[i], poly[i + 1]});
}

// Next line that is neither blank nor a comment.
bool content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

TriMesh read_off(std::istream& in, const std::string& name) {
  std::string line;
  if (!content_line(in, line)) throw ParseError(name + ": empty file");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") throw ParseError(name + ": missing OFF header");
  long nv = -1, nf = -1;
  if (!(header >> nv >> nf)) {
    if (!content_line(in, line)) throw ParseError(name + ": missing counts");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) throw ParseError(name + ": malformed counts");
  }
  if (nv < 0 || nf < 0) throw ParseError(name + ": negative counts");

  std::vector<Vec3> vertices(static_cast<std::size_t>(nv));
  for (auto& p : vertices) {
    if (!content_line(in, line)) throw ParseError(name + ": truncated vertex list");
    std::istringstream row(line);
    if (!(row >> p.x() >> p.y() >> p.z())) throw ParseError(name + ": malformed vertex");
  }
  std::vector<Triangle> triangles;
  for (long f = 0; f < nf; ++f) {
    if (!content_line(in, line)) throw ParseError(name + ": truncated face list");
    std::istringstream row(line);
    int n = 0;
    if (!(row >> n) || n < 3) throw ParseError(name + ": malformed face");
    std::vector<int> poly(n);
    for (auto& v : poly) {
      if (!(row >> v)) throw ParseError(name + ": malformed face");
    }
    fan(poly, triangles);
  }
  return TriMesh::build(std::move(vertices), std::move(triangles));
}

TriMesh read_obj(std::istream& in, const std::string& name) {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string line;
  while (content_line(in, line)) {
    std::istringstream row(line);
    std::string tag;
    row >> tag;
    if (tag == "v") {
      Vec3 p;
      if (!(row >> p.x() >> p.y() >> p.z())) throw ParseError(name + ": malformed vertex");
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (row >> token) {
        // "v", "v/vt", "v//vn", "v/vt/vn"; negative indices are relative.
        int idx = 0;
        try {
          idx = std::stoi(token.substr(0, token.find('/')));
        } catch (const std::exception&) {
          throw ParseError(name + ": malformed face index '" + token + "'");
        }
        if (idx == 0) throw ParseError(name + ": face index 0");
        poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(vertices.size()) + idx);
      }
      if (poly.size() < 3) throw ParseError(name + ": face with fewer than 3 vertices");
      fan(poly, triangles);
    }
  }
  return TriMesh::build(std::move(vertices), std::move(triangles));
}

}  // namespace

TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  const auto ext = lowercase(path.extension().string());
  if (ext == ".off") return read_off(in, path.string());
  if (ext == ".obj") return read_obj(in, path.string());
  throw ParseError(path.string() + ": unsupported mesh format (expected .off or .obj)");
}

void save_off(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.triangle_count() << " 0\n";
  out << std::setprecision(17);
  for (const auto& p : mesh.vertices()) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const auto& f : mesh.triangles()) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

}  // namespace propd
