#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bindet/template_match.hpp"

namespace bindet {
namespace fs = std::filesystem;

namespace {

struct Property {
  std::string name;
  std::string type;       // scalar type, or the count type for lists
  std::string item_type;  // lists only
  bool is_list = false;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

std::size_t type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_binary_scalar(const std::string& t, const char* p) {
  if (t == "char" || t == "int8") return read_le<std::int8_t>(p);
  if (t == "uchar" || t == "uint8") return read_le<std::uint8_t>(p);
  if (t == "short" || t == "int16") return read_le<std::int16_t>(p);
  if (t == "ushort" || t == "uint16") return read_le<std::uint16_t>(p);
  if (t == "int" || t == "int32") return read_le<std::int32_t>(p);
  if (t == "uint" || t == "uint32") return read_le<std::uint32_t>(p);
  if (t == "float" || t == "float32") return read_le<float>(p);
  return read_le<double>(p);
}

[[noreturn]] void bad(const fs::path& path, const std::string& what) {
  throw Error(ErrorCode::kMalformedInput, path.string() + ": " + what);
}

}  // namespace

std::vector<Eigen::Vector3d> read_ply_vertices(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kNotFound, "cannot open PLY " + path.string());
  }
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) {
    bad(path, "missing 'ply' magic");
  }
  std::string format;
  std::vector<Element> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      ss >> format;
    } else if (word == "element") {
      Element e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) {
        bad(path, "property before element");
      }
      Property p;
      ss >> p.type;
      if (p.type == "list") {
        p.is_list = true;
        ss >> p.type >> p.item_type;
      }
      ss >> p.name;
      elements.back().props.push_back(p);
    } else if (word == "end_header") {
      break;
    }
  }
  if (format != "ascii" && format != "binary_little_endian") {
    bad(path, "unsupported PLY format '" + format + "'");
  }
  if (format == "binary_little_endian" && std::endian::native != std::endian::little) {
    bad(path, "binary PLY on a big-endian host");
  }

  std::vector<Eigen::Vector3d> vertices;
  for (const auto& e : elements) {
    int ix = -1;
    int iy = -1;
    int iz = -1;
    for (std::size_t i = 0; i < e.props.size(); ++i) {
      if (e.props[i].name == "x") ix = static_cast<int>(i);
      if (e.props[i].name == "y") iy = static_cast<int>(i);
      if (e.props[i].name == "z") iz = static_cast<int>(i);
    }
    const bool is_vertex = e.name == "vertex";
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) {
      bad(path, "vertex element lacks x/y/z");
    }
    if (is_vertex) {
      vertices.reserve(e.count);
    }
    for (std::size_t n = 0; n < e.count; ++n) {
      std::vector<double> values(e.props.size(), 0.0);
      if (format == "ascii") {
        if (!std::getline(in, line)) {
          bad(path, "truncated ASCII body");
        }
        std::istringstream ss(line);
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          if (e.props[i].is_list) {
            std::size_t len = 0;
            ss >> len;
            double skip = 0;
            for (std::size_t k = 0; k < len; ++k) ss >> skip;
          } else if (!(ss >> values[i])) {
            bad(path, "malformed ASCII row");
          }
        }
      } else {
        for (std::size_t i = 0; i < e.props.size(); ++i) {
          const auto& p = e.props[i];
          const std::size_t size = type_size(p.type);
          if (size == 0) {
            bad(path, "unknown property type '" + p.type + "'");
          }
          char buf[8];
          if (!in.read(buf, static_cast<std::streamsize>(size))) {
            bad(path, "truncated binary body");
          }
          const double v = read_binary_scalar(p.type, buf);
          if (p.is_list) {
            const std::size_t item = type_size(p.item_type);
            if (item == 0) {
              bad(path, "unknown list item type '" + p.item_type + "'");
            }
            in.seekg(static_cast<std::streamoff>(item * static_cast<std::size_t>(v)), std::ios::cur);
          } else {
            values[i] = v;
          }
        }
      }
      if (is_vertex) {
        vertices.emplace_back(values[ix], values[iy], values[iz]);
      }
    }
    if (is_vertex) {
      break;  // later elements are not needed
    }
  }
  if (vertices.empty()) {
    bad(path, "no vertices");
  }
  return vertices;
}

void write_ply_vertices(const fs::path& path, std::span<const Eigen::Vector3d> vertices) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write " + path.string());
  }
  out << "ply\nformat ascii 1.0\nelement vertex " << vertices.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const auto& v : vertices) {
    out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
}

}  // namespace bindet
