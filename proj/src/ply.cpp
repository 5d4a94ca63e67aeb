#include "ply.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stabilens/error.hpp"

namespace stabilens::ply {
namespace {

static_assert(std::endian::native == std::endian::little, "PLY codec assumes a little-endian host");

enum class Scalar { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

Scalar parse_scalar(const std::string& t, const std::filesystem::path& path) {
  if (t == "char" || t == "int8") return Scalar::kInt8;
  if (t == "uchar" || t == "uint8") return Scalar::kUint8;
  if (t == "short" || t == "int16") return Scalar::kInt16;
  if (t == "ushort" || t == "uint16") return Scalar::kUint16;
  if (t == "int" || t == "int32") return Scalar::kInt32;
  if (t == "uint" || t == "uint32") return Scalar::kUint32;
  if (t == "float" || t == "float32") return Scalar::kFloat32;
  if (t == "double" || t == "float64") return Scalar::kFloat64;
  throw FormatError(path.string() + ": unknown PLY type " + t);
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::kInt8:
    case Scalar::kUint8: return 1;
    case Scalar::kInt16:
    case Scalar::kUint16: return 2;
    case Scalar::kInt32:
    case Scalar::kUint32:
    case Scalar::kFloat32: return 4;
    case Scalar::kFloat64: return 8;
  }
  return 0;
}

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

double decode(Scalar s, const char* p) {
  switch (s) {
    case Scalar::kInt8: return load<std::int8_t>(p);
    case Scalar::kUint8: return load<std::uint8_t>(p);
    case Scalar::kInt16: return load<std::int16_t>(p);
    case Scalar::kUint16: return load<std::uint16_t>(p);
    case Scalar::kInt32: return load<std::int32_t>(p);
    case Scalar::kUint32: return load<std::uint32_t>(p);
    case Scalar::kFloat32: return load<float>(p);
    case Scalar::kFloat64: return load<double>(p);
  }
  return 0;
}

struct PropDecl {
  std::string name;
  Scalar type;
  bool is_list = false;
  Scalar count_type = Scalar::kUint8;
};

struct ElementDecl {
  std::string name;
  std::size_t count = 0;
  std::vector<PropDecl> props;
};

}  // namespace

Data read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw FormatError(path.string() + ": not a PLY file");
  std::vector<ElementDecl> elements;
  bool binary_le = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      ElementDecl e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw FormatError(path.string() + ": property before element");
      std::string t;
      ss >> t;
      PropDecl p;
      if (t == "list") {
        std::string ct, it;
        ss >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(ct, path);
        p.type = parse_scalar(it, path);
      } else {
        p.type = parse_scalar(t, path);
        ss >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!binary_le) throw FormatError(path.string() + ": only binary_little_endian PLY is supported");

  Data data;
  std::vector<char> buf;
  for (const auto& e : elements) {
    const bool has_list = std::any_of(e.props.begin(), e.props.end(), [](const PropDecl& p) { return p.is_list; });
    if (e.name == "vertex") {
      if (has_list) throw FormatError(path.string() + ": list property on vertex");
      data.vertex_count = e.count;
      std::size_t stride = 0;
      for (const auto& p : e.props) stride += scalar_size(p.type);
      buf.resize(stride * e.count);
      if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
        throw FormatError(path.string() + ": truncated vertex data");
      for (const auto& p : e.props) data.vertex[p.name].resize(e.count);
      for (std::size_t i = 0; i < e.count; ++i) {
        const char* row = buf.data() + i * stride;
        for (const auto& p : e.props) {
          data.vertex[p.name][i] = decode(p.type, row);
          row += scalar_size(p.type);
        }
      }
    } else if (!has_list) {
      std::size_t stride = 0;
      for (const auto& p : e.props) stride += scalar_size(p.type);
      in.ignore(static_cast<std::streamsize>(stride * e.count));
    } else {
      data.faces.reserve(e.count);
      char tmp[8];
      for (std::size_t i = 0; i < e.count; ++i) {
        for (const auto& p : e.props) {
          if (!p.is_list) {
            in.read(tmp, static_cast<std::streamsize>(scalar_size(p.type)));
            continue;
          }
          in.read(tmp, static_cast<std::streamsize>(scalar_size(p.count_type)));
          const auto n = static_cast<std::size_t>(decode(p.count_type, tmp));
          std::vector<std::uint32_t> idx(n);
          for (std::size_t j = 0; j < n; ++j) {
            in.read(tmp, static_cast<std::streamsize>(scalar_size(p.type)));
            idx[j] = static_cast<std::uint32_t>(decode(p.type, tmp));
          }
          if (e.name == "face" && p.name == "vertex_indices" && n >= 3)
            for (std::size_t j = 1; j + 1 < n; ++j) data.faces.push_back({idx[0], idx[j], idx[j + 1]});
        }
        if (!in) throw FormatError(path.string() + ": truncated " + e.name + " data");
      }
    }
  }
  if (!in) throw FormatError(path.string() + ": truncated PLY body");
  return data;
}

void write(const std::filesystem::path& path, std::size_t vertex_count, const std::vector<Property>& props,
           const std::vector<std::array<std::uint32_t, 3>>* faces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << vertex_count << '\n';
  std::size_t stride = 0;
  for (const auto& p : props) {
    out << "property " << (p.type == Type::kFloat32 ? "float" : "uchar") << ' ' << p.name << '\n';
    stride += p.type == Type::kFloat32 ? 4 : 1;
  }
  if (faces) out << "element face " << faces->size() << "\nproperty list uchar uint vertex_indices\n";
  out << "end_header\n";
  std::vector<char> row(stride);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    char* p = row.data();
    for (const auto& prop : props) {
      const double v = prop.value(i);
      if (prop.type == Type::kFloat32) {
        const auto f = static_cast<float>(v);
        std::memcpy(p, &f, 4);
        p += 4;
      } else {
        *p++ = static_cast<char>(static_cast<std::uint8_t>(v));
      }
    }
    out.write(row.data(), static_cast<std::streamsize>(stride));
  }
  if (faces) {
    char rec[13];
    rec[0] = 3;
    for (const auto& f : *faces) {
      std::memcpy(rec + 1, f.data(), 12);
      out.write(rec, 13);
    }
  }
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace stabilens::ply
