#pragma once

// Readers and writers for the point cloud formats accepted as map input:
// PCD v0.7 (ascii / binary), PLY ascii and whitespace separated XYZ text.
// Only the x, y, z channels are used; other channels are skipped.

#include "lidarsim/common.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string_view>

namespace lidarsim {

struct RawCloud {
  PointList points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class CloudFormat { PcdAscii, PcdBinary, PlyAscii, XyzText };

struct ParsedCloud {
  RawCloud cloud;
  std::size_t dropped_non_finite = 0;
};

inline CloudFormat cloud_format_from_path(const std::string& path) {
  auto ext = path.substr(path.find_last_of('.') == std::string::npos ? path.size() : path.find_last_of('.'));
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pcd") return CloudFormat::PcdBinary;  // DATA line decides ascii vs binary
  if (ext == ".ply") return CloudFormat::PlyAscii;
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::XyzText;
  throw Error("cannot infer point cloud format from '" + path + "'");
}

namespace detail {

// Line cursor over a byte buffer that remembers the offset of the current line.
class LineReader {
public:
  explicit LineReader(std::string_view data) : data_(data) {}

  bool next(std::string_view& line) {
    if (pos_ >= data_.size()) return false;
    line_start_ = pos_;
    auto end = data_.find('\n', pos_);
    if (end == std::string_view::npos) end = data_.size();
    line = data_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = std::min(end + 1, data_.size());
    return true;
  }

  std::size_t line_start() const { return line_start_; }
  std::size_t position() const { return pos_; }

private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  // from_chars does not accept a leading '+'
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

inline bool parse_size(std::string_view tok, std::size_t& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

inline void push_point(ParsedCloud& out, const Vec3& p) {
  if (all_finite(p))
    out.cloud.points.push_back(p);
  else
    ++out.dropped_non_finite;
}

struct PcdLayout {
  std::vector<std::string> fields;
  std::vector<std::size_t> sizes;
  std::vector<char> types;
  std::vector<std::size_t> counts;
  std::size_t points = 0;
  bool have_points = false;
  std::string data;
};

inline ParsedCloud parse_pcd(std::string_view bytes) {
  LineReader reader(bytes);
  PcdLayout layout;
  std::string_view line;
  bool data_seen = false;
  while (!data_seen && reader.next(line)) {
    auto toks = split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    const auto key = toks[0];
    const std::size_t off = reader.line_start();
    auto need_args = [&] {
      if (toks.size() < 2) throw ParseError(off, "PCD header key '" + std::string(key) + "' has no value");
    };
    if (key == "VERSION" || key == "VIEWPOINT" || key == "WIDTH" || key == "HEIGHT") {
      need_args();
    } else if (key == "FIELDS") {
      need_args();
      for (std::size_t i = 1; i < toks.size(); ++i) layout.fields.emplace_back(toks[i]);
    } else if (key == "SIZE" || key == "COUNT") {
      need_args();
      auto& dst = key == "SIZE" ? layout.sizes : layout.counts;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        std::size_t v = 0;
        if (!parse_size(toks[i], v) || v == 0) throw ParseError(off, "bad PCD " + std::string(key) + " entry");
        dst.push_back(v);
      }
    } else if (key == "TYPE") {
      need_args();
      for (std::size_t i = 1; i < toks.size(); ++i) {
        if (toks[i].size() != 1) throw ParseError(off, "bad PCD TYPE entry");
        layout.types.push_back(toks[i][0]);
      }
    } else if (key == "POINTS") {
      need_args();
      if (!parse_size(toks[1], layout.points)) throw ParseError(off, "bad PCD POINTS value");
      layout.have_points = true;
    } else if (key == "DATA") {
      need_args();
      layout.data = std::string(toks[1]);
      data_seen = true;
    } else {
      throw ParseError(off, "unknown PCD header key '" + std::string(key) + "'");
    }
  }
  const std::size_t header_end = reader.position();
  if (!data_seen) throw ParseError(header_end, "PCD header has no DATA line");
  if (layout.fields.empty()) throw ParseError(0, "PCD header has no FIELDS");
  const std::size_t nf = layout.fields.size();
  if (layout.counts.empty()) layout.counts.assign(nf, 1);
  if (layout.sizes.size() != nf || layout.types.size() != nf || layout.counts.size() != nf)
    throw ParseError(0, "PCD FIELDS/SIZE/TYPE/COUNT lengths disagree");
  if (!layout.have_points) throw ParseError(0, "PCD header has no POINTS");

  // column (ascii) and byte offset (binary) for x, y, z
  std::array<std::size_t, 3> col{}, byte_off{};
  std::array<bool, 3> found{};
  std::size_t ncols = 0, row_bytes = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    for (int a = 0; a < 3; ++a) {
      if (layout.fields[f] == std::string(1, char('x' + a))) {
        if (layout.types[f] != 'F' || (layout.sizes[f] != 4 && layout.sizes[f] != 8) || layout.counts[f] != 1)
          throw ParseError(0, "PCD coordinate fields must be TYPE F SIZE 4 or 8 COUNT 1");
        col[a] = ncols;
        byte_off[a] = row_bytes;
        found[a] = true;
      }
    }
    ncols += layout.counts[f];
    row_bytes += layout.sizes[f] * layout.counts[f];
  }
  if (!found[0] || !found[1] || !found[2]) throw ParseError(0, "PCD must contain x, y and z fields");
  std::array<std::size_t, 3> coord_size{};
  for (std::size_t f = 0; f < nf; ++f)
    for (int a = 0; a < 3; ++a)
      if (layout.fields[f] == std::string(1, char('x' + a))) coord_size[a] = layout.sizes[f];

  ParsedCloud out;
  out.cloud.points.reserve(layout.points);
  if (layout.data == "ascii") {
    std::size_t rows = 0;
    while (rows < layout.points && reader.next(line)) {
      auto toks = split_ws(line);
      if (toks.empty()) continue;
      if (toks.size() < ncols) throw ParseError(reader.line_start(), "PCD row has too few columns");
      Vec3 p;
      for (int a = 0; a < 3; ++a)
        if (!parse_double(toks[col[a]], p[a])) throw ParseError(reader.line_start(), "PCD value is not a number");
      push_point(out, p);
      ++rows;
    }
    if (rows < layout.points) throw ParseError(bytes.size(), "PCD ended before POINTS rows were read");
  } else if (layout.data == "binary") {
    if (bytes.size() - header_end < layout.points * row_bytes)
      throw ParseError(bytes.size(), "PCD binary payload is truncated");
    const char* base = bytes.data() + header_end;
    for (std::size_t i = 0; i < layout.points; ++i) {
      const char* row = base + i * row_bytes;
      Vec3 p;
      for (int a = 0; a < 3; ++a) {
        if (coord_size[a] == 4) {
          float v;
          std::memcpy(&v, row + byte_off[a], 4);
          p[a] = v;
        } else {
          double v;
          std::memcpy(&v, row + byte_off[a], 8);
          p[a] = v;
        }
      }
      push_point(out, p);
    }
  } else {
    throw ParseError(header_end, "unsupported PCD DATA kind '" + layout.data + "'");
  }
  return out;
}

inline ParsedCloud parse_ply_ascii(std::string_view bytes) {
  LineReader reader(bytes);
  std::string_view line;
  if (!reader.next(line) || split_ws(line) != std::vector<std::string_view>{"ply"})
    throw ParseError(0, "PLY magic 'ply' missing");
  std::size_t vertex_count = 0;
  bool in_vertex = false, have_vertex = false, ended = false;
  std::vector<std::string> props;
  while (reader.next(line)) {
    auto toks = split_ws(line);
    const std::size_t off = reader.line_start();
    if (toks.empty()) continue;
    if (toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2 || toks[1] != "ascii") throw ParseError(off, "only PLY ascii is supported");
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw ParseError(off, "bad PLY element line");
      in_vertex = toks[1] == "vertex";
      if (in_vertex) {
        if (have_vertex) throw ParseError(off, "duplicate PLY vertex element");
        if (!parse_size(toks[2], vertex_count)) throw ParseError(off, "bad PLY vertex count");
        have_vertex = true;
      } else if (!have_vertex) {
        throw ParseError(off, "PLY vertex element must come first");
      }
    } else if (toks[0] == "property") {
      if (toks.size() < 3) throw ParseError(off, "bad PLY property line");
      if (in_vertex) {
        if (toks[1] == "list") throw ParseError(off, "list properties on vertices are not supported");
        props.emplace_back(toks.back());
      }
    } else if (toks[0] == "end_header") {
      ended = true;
      break;
    } else {
      throw ParseError(off, "unknown PLY header line");
    }
  }
  if (!ended) throw ParseError(reader.position(), "PLY header has no end_header");
  if (!have_vertex) throw ParseError(reader.position(), "PLY has no vertex element");
  std::array<std::size_t, 3> col{};
  for (int a = 0; a < 3; ++a) {
    auto it = std::find(props.begin(), props.end(), std::string(1, char('x' + a)));
    if (it == props.end()) throw ParseError(0, "PLY vertex lacks x, y or z");
    col[a] = static_cast<std::size_t>(it - props.begin());
  }
  ParsedCloud out;
  out.cloud.points.reserve(vertex_count);
  std::size_t rows = 0;
  while (rows < vertex_count && reader.next(line)) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() < props.size()) throw ParseError(reader.line_start(), "PLY vertex row has too few values");
    Vec3 p;
    for (int a = 0; a < 3; ++a)
      if (!parse_double(toks[col[a]], p[a])) throw ParseError(reader.line_start(), "PLY value is not a number");
    push_point(out, p);
    ++rows;
  }
  if (rows < vertex_count) throw ParseError(bytes.size(), "PLY ended before all vertices were read");
  return out;
}

inline ParsedCloud parse_xyz(std::string_view bytes) {
  LineReader reader(bytes);
  std::string_view line;
  ParsedCloud out;
  while (reader.next(line)) {
    auto toks = split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    if (toks.size() < 3) throw ParseError(reader.line_start(), "XYZ line needs three values");
    Vec3 p;
    for (int a = 0; a < 3; ++a)
      if (!parse_double(toks[a], p[a])) throw ParseError(reader.line_start(), "XYZ value is not a number");
    push_point(out, p);
  }
  return out;
}

}  // namespace detail

/// Parses a point cloud. Non-finite points are dropped and counted.
/// Throws ParseError on malformed input and EmptyMapError when nothing valid remains.
inline ParsedCloud parse_point_cloud(std::span<const char> bytes, CloudFormat format) {
  std::string_view view(bytes.data(), bytes.size());
  ParsedCloud out;
  switch (format) {
    case CloudFormat::PcdAscii:
    case CloudFormat::PcdBinary: out = detail::parse_pcd(view); break;
    case CloudFormat::PlyAscii: out = detail::parse_ply_ascii(view); break;
    case CloudFormat::XyzText: out = detail::parse_xyz(view); break;
  }
  if (out.cloud.empty()) throw EmptyMapError();
  return out;
}

inline ParsedCloud parse_point_cloud(std::string_view bytes, CloudFormat format) {
  return parse_point_cloud(std::span<const char>(bytes.data(), bytes.size()), format);
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline ParsedCloud load_point_cloud(const std::string& path) {
  return parse_point_cloud(std::string_view(read_file_bytes(path)), cloud_format_from_path(path));
}

/// PCD v0.7 with FIELDS x y z, SIZE 4, TYPE F.
inline std::string write_pcd(std::span<const Vec3> points, bool binary) {
  std::ostringstream os;
  os << "# .PCD v0.7 - Point Cloud Data file format\n"
     << "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n"
     << "WIDTH " << points.size() << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n"
     << "POINTS " << points.size() << "\nDATA " << (binary ? "binary" : "ascii") << "\n";
  std::string out = os.str();
  if (binary) {
    const std::size_t header = out.size();
    out.resize(header + points.size() * 12);
    char* dst = out.data() + header;
    for (const auto& p : points) {
      const float v[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())};
      std::memcpy(dst, v, 12);
      dst += 12;
    }
  } else {
    char buf[128];
    for (const auto& p : points) {
      const int n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", static_cast<float>(p.x()),
                                  static_cast<float>(p.y()), static_cast<float>(p.z()));
      out.append(buf, static_cast<std::size_t>(n));
    }
  }
  return out;
}

inline std::string write_ply_ascii(std::span<const Vec3> points) {
  std::ostringstream os;
  os << "ply\nformat ascii 1.0\nelement vertex " << points.size()
     << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  std::string out = os.str();
  char buf[128];
  for (const auto& p : points) {
    const int n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", static_cast<float>(p.x()),
                                static_cast<float>(p.y()), static_cast<float>(p.z()));
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

inline std::string write_xyz(std::span<const Vec3> points) {
  std::string out;
  char buf[128];
  for (const auto& p : points) {
    const int n = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace lidarsim
