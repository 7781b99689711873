#pragma once

#include "sloam/kitti.hpp"
#include "sloam/scan.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace sloam {

/// Writes a binary little-endian PLY cloud with per-point color taken from
/// the taxonomy palette and the raw class id as an extra property.
inline void write_ply(const std::string& path,
                      const std::vector<LabeledPoint>& points,
                      const SemanticTaxonomy& taxonomy) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open ply file for writing: " + path);

  out << "ply\n"
      << "format binary_little_endian 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\n"
      << "property float y\n"
      << "property float z\n"
      << "property uchar red\n"
      << "property uchar green\n"
      << "property uchar blue\n"
      << "property ushort class\n"
      << "end_header\n";

  for (const auto& p : points) {
    const float xyz[3] = {static_cast<float>(p.position.x()),
                          static_cast<float>(p.position.y()),
                          static_cast<float>(p.position.z())};
    const std::array<std::uint8_t, 3> rgb = taxonomy.color(p.class_id);
    const std::uint16_t cls = p.class_id;
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    out.write(reinterpret_cast<const char*>(rgb.data()), 3);
    out.write(reinterpret_cast<const char*>(&cls), sizeof(cls));
  }
  if (!out) throw IoError("short write on ply file: " + path);
}

}  // namespace sloam
