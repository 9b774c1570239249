#pragma once

// Point cloud files: ASCII PLY (vertex x y z, optional red green blue) and
// plain x,y,z CSV.

#include "grasptype/perception.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace grasptype {

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw InvalidArgument("failed to format number");
  return std::string(buf, ptr);
}

namespace detail {

inline double parse_double(std::string_view token, std::size_t line) {
  double v = 0.0;
  // from_chars rejects a leading '+'.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("line " + std::to_string(line) + ": cannot parse number '" + std::string(token) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace detail

inline PointCloud read_ply(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next() || detail::trim(line) != "ply") throw ParseError("line 1: missing 'ply' magic");

  std::size_t vertex_count = 0;
  bool in_vertex = false, seen_vertex = false, ascii = false;
  std::vector<std::string> vertex_props;
  while (true) {
    if (!next()) throw ParseError("unexpected end of PLY header");
    const auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") {
        throw ParseError("line " + std::to_string(lineno) + ": only ASCII PLY is supported");
      }
      ascii = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("line " + std::to_string(lineno) + ": malformed element");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (seen_vertex) throw ParseError("duplicate vertex element");
        seen_vertex = true;
        vertex_count = static_cast<std::size_t>(detail::parse_double(tok[2], lineno));
      } else if (!seen_vertex) {
        throw ParseError("line " + std::to_string(lineno) + ": vertex element must come first");
      }
    } else if (tok[0] == "property") {
      if (in_vertex) {
        if (tok.size() != 3) throw ParseError("line " + std::to_string(lineno) + ": unsupported vertex property");
        vertex_props.emplace_back(tok[2]);
      }
    } else if (tok[0] == "end_header") {
      break;
    } else {
      throw ParseError("line " + std::to_string(lineno) + ": unknown header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!ascii) throw ParseError("PLY header has no format line");
  auto column = [&](const char* name) -> int {
    for (std::size_t i = 0; i < vertex_props.size(); ++i)
      if (vertex_props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int cx = column("x"), cy = column("y"), cz = column("z");
  if (cx < 0 || cy < 0 || cz < 0) throw ParseError("PLY vertex element lacks x, y, z");
  const int cr = column("red"), cg = column("green"), cb = column("blue");
  const bool colored = cr >= 0 && cg >= 0 && cb >= 0;

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!next()) throw ParseError("PLY ends after " + std::to_string(v) + " of " + std::to_string(vertex_count) + " vertices");
    const auto tok = detail::split_ws(line);
    if (tok.size() != vertex_props.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(vertex_props.size()) + " values");
    }
    cloud.points.emplace_back(detail::parse_double(tok[cx], lineno), detail::parse_double(tok[cy], lineno),
                              detail::parse_double(tok[cz], lineno));
    if (colored) {
      cloud.colors.push_back({static_cast<std::uint8_t>(detail::parse_double(tok[cr], lineno)),
                              static_cast<std::uint8_t>(detail::parse_double(tok[cg], lineno)),
                              static_cast<std::uint8_t>(detail::parse_double(tok[cb], lineno))});
    }
  }
  return cloud;
}

inline void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_colors()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z());
    if (cloud.has_colors()) {
      const auto& c = cloud.colors[i];
      out << ' ' << int{c[0]} << ' ' << int{c[1]} << ' ' << int{c[2]};
    }
    out << '\n';
  }
}

// Accepts 3 columns (x,y,z) or 6 (x,y,z,r,g,b); a non-numeric first line is
// treated as a header.
inline PointCloud read_csv(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto cols = detail::split(body, ',');
    if (lineno == 1 && !cols.empty()) {
      const auto first = detail::trim(cols[0]);
      if (!first.empty() && (std::isalpha(static_cast<unsigned char>(first.front())) || first.front() == '"')) continue;
    }
    if (cols.size() != 3 && cols.size() != 6) {
      throw ParseError("line " + std::to_string(lineno) + ": expected 3 or 6 comma-separated values");
    }
    cloud.points.emplace_back(detail::parse_double(detail::trim(cols[0]), lineno),
                              detail::parse_double(detail::trim(cols[1]), lineno),
                              detail::parse_double(detail::trim(cols[2]), lineno));
    if (cols.size() == 6) {
      if (cloud.colors.size() + 1 != cloud.points.size()) throw ParseError("line " + std::to_string(lineno) + ": mixed column counts");
      cloud.colors.push_back({static_cast<std::uint8_t>(detail::parse_double(detail::trim(cols[3]), lineno)),
                              static_cast<std::uint8_t>(detail::parse_double(detail::trim(cols[4]), lineno)),
                              static_cast<std::uint8_t>(detail::parse_double(detail::trim(cols[5]), lineno))});
    } else if (!cloud.colors.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": mixed column counts");
    }
  }
  return cloud;
}

inline void write_csv(std::ostream& out, const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z());
    if (cloud.has_colors()) {
      const auto& c = cloud.colors[i];
      out << ',' << int{c[0]} << ',' << int{c[1]} << ',' << int{c[2]};
    }
    out << '\n';
  }
}

inline bool is_csv_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv";
}

inline PointCloud load_cloud(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  PointCloud cloud = is_csv_path(path) ? read_csv(in) : read_ply(in);
  cloud.validate();
  return cloud;
}

inline void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = detail::open_for_write(path);
  if (is_csv_path(path)) {
    write_csv(out, cloud);
  } else {
    write_ply(out, cloud);
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace grasptype
