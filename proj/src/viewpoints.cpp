#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include <Eigen/Geometry>

#include "bindet/template_match.hpp"

namespace bindet {
namespace {

struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
};

Mesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.vertices) {
    v.normalize();
  }
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return m;
}

Mesh subdivide(const Mesh& in) {
  Mesh out;
  out.vertices = in.vertices;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    if (auto it = midpoint.find(key); it != midpoint.end()) {
      return it->second;
    }
    out.vertices.push_back((in.vertices[a] + in.vertices[b]).normalized());
    const int idx = static_cast<int>(out.vertices.size()) - 1;
    midpoint.emplace(key, idx);
    return idx;
  };
  for (const auto& f : in.faces) {
    const int ab = mid(f[0], f[1]);
    const int bc = mid(f[1], f[2]);
    const int ca = mid(f[2], f[0]);
    out.faces.push_back({f[0], ab, ca});
    out.faces.push_back({f[1], bc, ab});
    out.faces.push_back({f[2], ca, bc});
    out.faces.push_back({ab, bc, ca});
  }
  return out;
}

}  // namespace

std::vector<Eigen::Vector3d> icosphere_directions(int view_count) {
  int levels = 0;
  switch (view_count) {
    case 12: levels = 0; break;
    case 42: levels = 1; break;
    case 162: levels = 2; break;
    default:
      throw Error(ErrorCode::kConfig,
                  "unsupported view_count " + std::to_string(view_count) + " (valid: 12, 42, 162)");
  }
  Mesh mesh = icosahedron();
  for (int i = 0; i < levels; ++i) {
    mesh = subdivide(mesh);
  }
  return mesh.vertices;
}

std::vector<Eigen::Matrix3d> sample_viewpoints(int view_count) {
  std::vector<Eigen::Matrix3d> out;
  for (const auto& dir : icosphere_directions(view_count)) {
    // Camera sits at +dir and looks at the origin; rows of R are the camera
    // axes expressed in the object frame.
    const Eigen::Vector3d forward = -dir;
    Eigen::Vector3d up(0.0, 0.0, 1.0);
    if (std::abs(forward.dot(up)) > 0.99) {
      up = Eigen::Vector3d(0.0, 1.0, 0.0);
    }
    const Eigen::Vector3d right = up.cross(forward).normalized();
    const Eigen::Vector3d down = forward.cross(right);
    Eigen::Matrix3d r;
    r.row(0) = right;
    r.row(1) = down;
    r.row(2) = forward;
    out.push_back(r);
  }
  return out;
}

}  // namespace bindet
