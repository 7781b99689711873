#pragma once

#include "sloam/core.hpp"
#include "sloam/scan.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sloam {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedFile : IoError {
  using IoError::IoError;
};
struct CountMismatch : IoError {
  using IoError::IoError;
};
struct MalformedLine : IoError {
  using IoError::IoError;
};
struct NonOrthonormalRotation : IoError {
  using IoError::IoError;
};
struct MissingField : IoError {
  using IoError::IoError;
};

/// HDL-64E beam model: 64 rings between +2 and about -24.8 degrees of
/// elevation, upper block spaced 1/3 deg and lower block 1/2 deg. KITTI
/// scans do not store the ring index, so it is reconstructed from the
/// vertical angle.
inline int hdl64_ring(const Vec3& p) {
  const double horizontal = std::sqrt(p.x() * p.x() + p.y() * p.y());
  const double angle_deg = std::atan2(p.z(), horizontal) * 180.0 / M_PI;
  int ring;
  if (angle_deg >= -8.83) {
    ring = static_cast<int>(std::lround((2.0 - angle_deg) * 3.0));
  } else {
    ring = 32 + static_cast<int>(std::lround((-8.83 - angle_deg) * 2.0));
  }
  if (ring < 0 || ring >= 64) return -1;
  return ring;
}

/// Reads a KITTI velodyne .bin scan: packed little-endian float32
/// (x, y, z, intensity) quadruples. Intensity is discarded; range and ring
/// are derived from the position.
inline LabeledScan read_velodyne_bin(const std::string& path,
                                     std::size_t timestamp_index = 0) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open scan file: " + path);
  const std::streamsize bytes = in.tellg();
  if (bytes <= 0 || bytes % 16 != 0) {
    throw MalformedFile("scan file size " + std::to_string(bytes) +
                        " is not a positive multiple of 16: " + path);
  }
  in.seekg(0);
  const std::size_t n = static_cast<std::size_t>(bytes) / 16;
  std::vector<float> raw(n * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), bytes)) {
    throw IoError("short read on scan file: " + path);
  }

  LabeledScan scan;
  scan.timestamp_index = timestamp_index;
  scan.points.reserve(n);
  // Every record is kept so labels stay aligned 1:1 with points; the
  // ingest filter is responsible for discarding junk returns.
  for (std::size_t i = 0; i < n; ++i) {
    LabeledPoint pt;
    pt.position = Vec3(raw[4 * i], raw[4 * i + 1], raw[4 * i + 2]);
    if (pt.position.allFinite()) {
      pt.range = static_cast<float>(pt.position.norm());
      pt.ring = static_cast<std::int16_t>(hdl64_ring(pt.position));
    } else {
      pt.range = std::numeric_limits<float>::quiet_NaN();
      pt.ring = -1;
    }
    scan.points.push_back(pt);
  }
  return scan;
}

/// Writes a KITTI velodyne .bin scan with zero intensity.
inline void write_velodyne_bin(const std::string& path,
                               const std::vector<LabeledPoint>& points) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open scan file for writing: " + path);
  for (const auto& p : points) {
    const float rec[4] = {static_cast<float>(p.position.x()),
                          static_cast<float>(p.position.y()),
                          static_cast<float>(p.position.z()), 0.0f};
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
  }
  if (!out) throw IoError("short write on scan file: " + path);
}

/// Attaches SemanticKITTI labels (packed little-endian uint32, lower 16
/// bits = class id, upper 16 = instance id) to an already loaded scan.
/// The label count must equal the scan point count.
inline void read_labels(const std::string& path, LabeledScan& scan) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open label file: " + path);
  const std::streamsize bytes = in.tellg();
  if (bytes < 0 || bytes % 4 != 0) {
    throw MalformedFile("label file size not a multiple of 4: " + path);
  }
  const std::size_t n = static_cast<std::size_t>(bytes) / 4;
  if (n != scan.points.size()) {
    throw CountMismatch("label count " + std::to_string(n) +
                        " != point count " + std::to_string(scan.points.size()) +
                        ": " + path);
  }
  in.seekg(0);
  std::vector<std::uint32_t> words(n);
  if (!in.read(reinterpret_cast<char*>(words.data()), bytes)) {
    throw IoError("short read on label file: " + path);
  }
  for (std::size_t i = 0; i < n; ++i) {
    scan.points[i].class_id = static_cast<ClassId>(words[i] & 0xFFFFu);
  }
}

/// Writes SemanticKITTI labels (class id in the lower 16 bits, zero
/// instance id), one uint32 per point.
inline void write_labels(const std::string& path,
                         const std::vector<LabeledPoint>& points) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open label file for writing: " + path);
  for (const auto& p : points) {
    const std::uint32_t word = static_cast<std::uint32_t>(p.class_id);
    out.write(reinterpret_cast<const char*>(&word), sizeof(word));
  }
  if (!out) throw IoError("short write on label file: " + path);
}

struct IngestFilter {
  double min_range = 2.0;
  double max_range = 120.0;
  bool drop_unlabeled = true;
};

/// Drops sensor self-returns, far noise and (optionally) unlabeled points.
inline void apply_ingest_filter(LabeledScan& scan, const IngestFilter& f) {
  std::vector<LabeledPoint> kept;
  kept.reserve(scan.points.size());
  for (const auto& p : scan.points) {
    if (!p.position.allFinite()) continue;
    if (p.range < f.min_range || p.range > f.max_range) continue;
    if (f.drop_unlabeled && p.class_id == 0) continue;
    kept.push_back(p);
  }
  scan.points = std::move(kept);
}

namespace detail {

inline RigidTransform transform_from_3x4(const double m[12], double ortho_tol,
                                         const std::string& context) {
  Mat3 rot;
  rot << m[0], m[1], m[2],
         m[4], m[5], m[6],
         m[8], m[9], m[10];
  const double drift = (rot.transpose() * rot - Mat3::Identity()).norm();
  if (drift >= ortho_tol) {
    throw NonOrthonormalRotation("rotation drift " + std::to_string(drift) +
                                 " exceeds tolerance in " + context);
  }
  RigidTransform T;
  T.q = Quat(rot).normalized();
  T.t = Vec3(m[3], m[7], m[11]);
  return T;
}

}  // namespace detail

/// Reads a KITTI pose file: one row-major 3x4 matrix per line. Rotations
/// are re-orthonormalized on read; drift beyond `ortho_tol` is an error.
inline std::vector<RigidTransform> read_poses(const std::string& path,
                                              double ortho_tol = 1e-3) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file: " + path);
  std::vector<RigidTransform> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ss(line);
    double m[12];
    for (int i = 0; i < 12; ++i) {
      if (!(ss >> m[i])) {
        throw MalformedLine("pose line " + std::to_string(line_no) +
                            " does not hold 12 floats: " + path);
      }
    }
    double extra;
    if (ss >> extra) {
      throw MalformedLine("pose line " + std::to_string(line_no) +
                          " holds more than 12 floats: " + path);
    }
    poses.push_back(detail::transform_from_3x4(
        m, ortho_tol, path + ":" + std::to_string(line_no)));
  }
  return poses;
}

inline void write_poses(const std::string& path,
                        const std::vector<RigidTransform>& poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open pose file for writing: " + path);
  char buf[64];
  for (const auto& T : poses) {
    const Eigen::Matrix4d m = T.matrix();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        // 9 decimals keep the read-back within 1e-6 of the source pose.
        std::snprintf(buf, sizeof(buf), "%.9e", m(r, c));
        out << buf;
        if (r != 2 || c != 3) out << ' ';
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

/// Reads the static velodyne-to-camera extrinsic ("Tr:" line) from a KITTI
/// calib.txt. Ground-truth poses are camera-frame, so estimated LiDAR
/// poses are compared after conjugation Tr * T * Tr^-1.
inline RigidTransform load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calib file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("Tr:", 0) != 0) continue;
    std::istringstream ss(line.substr(3));
    double m[12];
    for (int i = 0; i < 12; ++i) {
      if (!(ss >> m[i])) {
        throw MalformedLine("Tr: line does not hold 12 floats: " + path);
      }
    }
    return detail::transform_from_3x4(m, 1e-3, path);
  }
  throw MissingField("no Tr: line in calib file: " + path);
}

/// Maps LiDAR-frame poses into the camera frame for evaluation.
inline std::vector<RigidTransform> conjugate_poses(
    const std::vector<RigidTransform>& poses, const RigidTransform& tr) {
  const RigidTransform tr_inv = tr.inverse();
  std::vector<RigidTransform> out;
  out.reserve(poses.size());
  for (const auto& T : poses) out.push_back(tr * T * tr_inv);
  return out;
}

}  // namespace sloam
