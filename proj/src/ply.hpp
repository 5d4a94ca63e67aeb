#pragma once

// Minimal binary little-endian PLY codec shared by the point-cloud and mesh writers.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace stabilens::ply {

struct Data {
  std::size_t vertex_count = 0;
  std::map<std::string, std::vector<double>> vertex;  // property name -> values
  std::vector<std::array<std::uint32_t, 3>> faces;     // triangles only
};

/// Reads vertex scalar properties of any PLY scalar type and triangle faces.
Data read(const std::filesystem::path& path);

enum class Type { kFloat32, kUint8 };

struct Property {
  std::string name;
  Type type;
  std::function<double(std::size_t)> value;
};

void write(const std::filesystem::path& path, std::size_t vertex_count, const std::vector<Property>& props,
           const std::vector<std::array<std::uint32_t, 3>>* faces);

}  // namespace stabilens::ply
