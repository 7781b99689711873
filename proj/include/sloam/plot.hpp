#pragma once

#include "sloam/core.hpp"
#include "sloam/kitti.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace sloam {

struct NamedTrack {
  std::string name;
  std::vector<RigidTransform> poses;
};

struct PlotConfig {
  // Translation components drawn on the page: 0 = x, 1 = y, 2 = z.
  // KITTI camera-frame poses travel in the x/z plane.
  int axis_horizontal = 0;
  int axis_vertical = 2;
  double size_px = 800.0;
  double margin_px = 40.0;
};

namespace detail {

inline const char* track_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Top-down overlay of one or more trajectories as SVG polylines with
/// equal scale on both axes and a legend naming each track.
inline std::string trajectory_svg(const std::vector<NamedTrack>& tracks,
                                  const PlotConfig& cfg = {}) {
  const int ah = cfg.axis_horizontal, av = cfg.axis_vertical;
  double lo_h = 1e300, hi_h = -1e300, lo_v = 1e300, hi_v = -1e300;
  for (const auto& track : tracks) {
    for (const auto& T : track.poses) {
      lo_h = std::min(lo_h, T.t[ah]);
      hi_h = std::max(hi_h, T.t[ah]);
      lo_v = std::min(lo_v, T.t[av]);
      hi_v = std::max(hi_v, T.t[av]);
    }
  }
  if (lo_h > hi_h) lo_h = hi_h = 0.0;
  if (lo_v > hi_v) lo_v = hi_v = 0.0;

  const double span = std::max({hi_h - lo_h, hi_v - lo_v, 1e-9});
  const double scale = (cfg.size_px - 2.0 * cfg.margin_px) / span;
  const double ch = 0.5 * (lo_h + hi_h), cv = 0.5 * (lo_v + hi_v);
  auto to_px_h = [&](double w) { return cfg.size_px / 2.0 + (w - ch) * scale; };
  auto to_px_v = [&](double w) {
    return cfg.size_px / 2.0 - (w - cv) * scale;  // page y grows downward
  };

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" "
                "height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n"
                "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                cfg.size_px, cfg.size_px, cfg.size_px, cfg.size_px);
  std::string svg = buf;

  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (tracks[i].poses.empty()) continue;
    std::string pts;
    for (const auto& T : tracks[i].poses) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", to_px_h(T.t[ah]),
                    to_px_v(T.t[av]));
      pts += buf;
    }
    svg += std::string("<polyline fill=\"none\" stroke=\"") +
           detail::track_color(i) + "\" stroke-width=\"1.5\" points=\"" + pts +
           "\"/>\n";
  }
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"12\" y=\"%.0f\" font-family=\"sans-serif\" "
                  "font-size=\"13\" fill=\"%s\">",
                  20.0 + 18.0 * i, detail::track_color(i));
    svg += buf;
    svg += detail::xml_escape(tracks[i].name) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_trajectory_svg(const std::string& path,
                                 const std::vector<NamedTrack>& tracks,
                                 const PlotConfig& cfg = {}) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open svg file for writing: " + path);
  out << trajectory_svg(tracks, cfg);
  if (!out) throw IoError("short write on svg file: " + path);
}

/// Planar positions per frame, two columns per track; short tracks leave
/// their columns empty past the end.
inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<NamedTrack>& tracks,
                                 const PlotConfig& cfg = {}) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open csv file for writing: " + path);
  const int ah = cfg.axis_horizontal, av = cfg.axis_vertical;

  out << "frame";
  for (const auto& track : tracks)
    out << "," << track.name << "_h," << track.name << "_v";
  out << "\n";

  std::size_t rows = 0;
  for (const auto& track : tracks) rows = std::max(rows, track.poses.size());
  char buf[64];
  for (std::size_t i = 0; i < rows; ++i) {
    out << i;
    for (const auto& track : tracks) {
      if (i < track.poses.size()) {
        std::snprintf(buf, sizeof(buf), ",%.6f,%.6f", track.poses[i].t[ah],
                      track.poses[i].t[av]);
        out << buf;
      } else {
        out << ",,";
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("short write on csv file: " + path);
}

}  // namespace sloam
