#include "clouddelta/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace clouddelta {

static_assert(std::endian::native == std::endian::little,
              "binary readers and writers assume a little-endian host");

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  in.seekg(0, std::ios::end);
  std::streampos size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::string data(static_cast<size_t>(size), '\0');
  if (size > 0) in.read(data.data(), size);
  if (!in) throw ParseError(path + ": read failed");
  return data;
}

int line_number_at(const std::string& data, const char* pos) {
  return 1 + static_cast<int>(std::count(data.c_str(), pos, '\n'));
}

// Token cursor over whitespace-separated text. Errors carry the 1-based
// line of the offending position.
struct TextCursor {
  const std::string& data;
  const std::string& path;
  const char* p;
  const char* end;

  TextCursor(const std::string& d, const std::string& file, size_t offset = 0)
      : data(d), path(file), p(d.c_str() + offset), end(d.c_str() + d.size()) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path + ":" + std::to_string(line_number_at(data, p)) +
                     ": " + msg);
  }

  void skip_ws() {
    while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
  }

  bool at_end() {
    skip_ws();
    return p == end;
  }

  double read_double(const char* what) {
    skip_ws();
    if (p == end) fail(std::string("unexpected end of file, expected ") + what);
    char* after = nullptr;
    double v = std::strtod(p, &after);
    if (after == p) fail(std::string("expected a number for ") + what);
    p = after;
    return v;
  }

  long read_long(const char* what) {
    skip_ws();
    if (p == end) fail(std::string("unexpected end of file, expected ") + what);
    char* after = nullptr;
    long v = std::strtol(p, &after, 10);
    if (after == p) fail(std::string("expected an integer for ") + what);
    p = after;
    return v;
  }

  void expect_char(char c, const char* what) {
    if (p == end || *p != c) fail(std::string("expected '") + c + "' " + what);
    ++p;
  }
};

struct BinaryCursor {
  const std::string& path;
  const char* p;
  const char* end;
  const char* begin;

  BinaryCursor(const std::string& data, const std::string& file, size_t offset)
      : path(file),
        p(data.data() + offset),
        end(data.data() + data.size()),
        begin(data.data()) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path + ": at byte " + std::to_string(p - begin) + ": " +
                     msg);
  }

  void need(size_t n, const char* what) const {
    if (static_cast<size_t>(end - p) < n) {
      fail(std::string("unexpected end of file while reading ") + what);
    }
  }

  template <typename T>
  T read(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    return v;
  }

  void skip(size_t n, const char* what) {
    need(n, what);
    p += n;
  }

  size_t remaining() const { return static_cast<size_t>(end - p); }
};

std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// PLY

// Scalar type of a PLY property; size 0 marks an unknown name.
struct PlyType {
  int size = 0;
  bool is_float = false;   // float32
  bool is_double = false;  // float64
  bool is_signed = false;
};

PlyType ply_type(const std::string& name) {
  if (name == "char" || name == "int8") return {1, false, false, true};
  if (name == "uchar" || name == "uint8") return {1, false, false, false};
  if (name == "short" || name == "int16") return {2, false, false, true};
  if (name == "ushort" || name == "uint16") return {2, false, false, false};
  if (name == "int" || name == "int32") return {4, false, false, true};
  if (name == "uint" || name == "uint32") return {4, false, false, false};
  if (name == "float" || name == "float32") return {4, true, false, true};
  if (name == "double" || name == "float64") return {8, false, true, true};
  return {};
}

struct PlyProperty {
  std::string name;
  PlyType type;
  bool is_list = false;
  PlyType count_type;
};

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  size_t data_offset = 0;  // first byte after the end_header line
};

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

PlyHeader parse_ply_header(const std::string& data, const std::string& path) {
  PlyHeader header;
  size_t pos = 0;
  int line_no = 0;
  bool format_seen = false;
  bool done = false;

  auto fail = [&](const std::string& msg) -> void {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (pos < data.size()) {
    size_t eol = data.find('\n', pos);
    std::string line = data.substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? data.size() : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    if (line_no == 1) {
      if (line != "ply") fail("not a PLY file (missing 'ply' magic line)");
      continue;
    }

    std::vector<std::string> tok = split_tokens(line);
    if (tok.empty()) fail("blank line inside PLY header");

    if (tok[0] == "comment" || tok[0] == "obj_info") continue;

    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[2] != "1.0") fail("malformed format line");
      if (tok[1] == "ascii") {
        header.binary = false;
      } else if (tok[1] == "binary_little_endian") {
        header.binary = true;
      } else if (tok[1] == "binary_big_endian") {
        fail("big-endian PLY is not supported");
      } else {
        fail("unknown PLY format '" + tok[1] + "'");
      }
      format_seen = true;
      continue;
    }

    if (tok[0] == "element") {
      if (tok.size() != 3) fail("malformed element line");
      char* after = nullptr;
      long count = std::strtol(tok[2].c_str(), &after, 10);
      if (*after != '\0' || count < 0) fail("bad element count '" + tok[2] + "'");
      header.elements.push_back({tok[1], count, {}});
      continue;
    }

    if (tok[0] == "property") {
      if (header.elements.empty()) fail("property before any element");
      PlyProperty prop;
      if (tok.size() == 3) {
        prop.type = ply_type(tok[1]);
        if (prop.type.size == 0) fail("unknown property type '" + tok[1] + "'");
        prop.name = tok[2];
      } else if (tok.size() == 5 && tok[1] == "list") {
        prop.is_list = true;
        prop.count_type = ply_type(tok[2]);
        prop.type = ply_type(tok[3]);
        if (prop.count_type.size == 0 || prop.count_type.is_float ||
            prop.count_type.is_double) {
          fail("list count type must be an integer type");
        }
        if (prop.type.size == 0) fail("unknown property type '" + tok[3] + "'");
        prop.name = tok[4];
      } else {
        fail("malformed property line");
      }
      header.elements.back().properties.push_back(prop);
      continue;
    }

    if (tok[0] == "end_header") {
      if (!format_seen) fail("header ends before a format line");
      header.data_offset = pos;
      done = true;
      break;
    }

    fail("unrecognized header keyword '" + tok[0] + "'");
  }

  if (!done) throw ParseError(path + ": header has no end_header line");
  return header;
}

// Positions of the x/y/z properties inside the vertex element.
struct VertexLayout {
  int element = -1;
  int x = -1, y = -1, z = -1;
};

VertexLayout locate_vertex(const PlyHeader& header, const std::string& path) {
  VertexLayout layout;
  for (int e = 0; e < static_cast<int>(header.elements.size()); ++e) {
    if (header.elements[static_cast<size_t>(e)].name != "vertex") continue;
    layout.element = e;
    const auto& props = header.elements[static_cast<size_t>(e)].properties;
    for (int i = 0; i < static_cast<int>(props.size()); ++i) {
      const PlyProperty& p = props[static_cast<size_t>(i)];
      int* slot = nullptr;
      if (p.name == "x") slot = &layout.x;
      else if (p.name == "y") slot = &layout.y;
      else if (p.name == "z") slot = &layout.z;
      if (!slot) continue;
      if (p.is_list || (!p.type.is_float && !p.type.is_double)) {
        throw ParseError(path + ": vertex property " + p.name +
                         " must be float32 or float64");
      }
      *slot = i;
    }
    break;
  }
  if (layout.element < 0) throw ParseError(path + ": no vertex element");
  if (layout.x < 0 || layout.y < 0 || layout.z < 0) {
    throw ParseError(path + ": vertex element lacks x, y, z properties");
  }
  return layout;
}

void warn_skips(const PlyHeader& header, const VertexLayout& layout,
                const std::string& path) {
  for (int e = 0; e < static_cast<int>(header.elements.size()); ++e) {
    const PlyElement& elem = header.elements[static_cast<size_t>(e)];
    if (e != layout.element) {
      std::cerr << "warning: " << path << ": skipping element '" << elem.name
                << "' (" << elem.count << " rows)\n";
      continue;
    }
    for (int i = 0; i < static_cast<int>(elem.properties.size()); ++i) {
      if (i == layout.x || i == layout.y || i == layout.z) continue;
      std::cerr << "warning: " << path << ": skipping vertex property '"
                << elem.properties[static_cast<size_t>(i)].name << "'\n";
    }
  }
}

double check_finite_coord(double v, const std::string& path, long row) {
  if (!std::isfinite(v)) {
    throw ParseError(path + ": vertex row " + std::to_string(row) +
                     " has a non-finite coordinate");
  }
  return v;
}

PointCloud read_ply_ascii_data(const std::string& data, const std::string& path,
                               const PlyHeader& header,
                               const VertexLayout& layout) {
  TextCursor cur(data, path, header.data_offset);
  PointCloud cloud;

  for (int e = 0; e < static_cast<int>(header.elements.size()); ++e) {
    const PlyElement& elem = header.elements[static_cast<size_t>(e)];
    bool is_vertex = (e == layout.element);
    if (is_vertex) cloud.reserve(static_cast<size_t>(elem.count));

    for (long row = 0; row < elem.count; ++row) {
      if (cur.at_end()) {
        throw ParseError(path + ": element '" + elem.name + "' declares " +
                         std::to_string(elem.count) + " rows, file ends after " +
                         std::to_string(row));
      }
      Point3 p = Point3::Zero();
      for (int i = 0; i < static_cast<int>(elem.properties.size()); ++i) {
        const PlyProperty& prop = elem.properties[static_cast<size_t>(i)];
        if (prop.is_list) {
          long n = cur.read_long("list count");
          if (n < 0) cur.fail("negative list count");
          for (long j = 0; j < n; ++j) cur.read_double("list entry");
          continue;
        }
        double v = cur.read_double(prop.name.c_str());
        if (is_vertex) {
          if (i == layout.x) p.x() = check_finite_coord(v, path, row + 1);
          if (i == layout.y) p.y() = check_finite_coord(v, path, row + 1);
          if (i == layout.z) p.z() = check_finite_coord(v, path, row + 1);
        }
      }
      if (is_vertex) cloud.push_back(p);
    }
  }

  if (!cur.at_end()) cur.fail("trailing data after the last declared element");
  return cloud;
}

double read_binary_scalar(BinaryCursor& cur, const PlyType& type,
                          const char* what) {
  if (type.is_float) return cur.read<float>(what);
  if (type.is_double) return cur.read<double>(what);
  switch (type.size) {
    case 1:
      return type.is_signed ? cur.read<int8_t>(what) : cur.read<uint8_t>(what);
    case 2:
      return type.is_signed ? cur.read<int16_t>(what) : cur.read<uint16_t>(what);
    default:
      return type.is_signed
                 ? static_cast<double>(cur.read<int32_t>(what))
                 : static_cast<double>(cur.read<uint32_t>(what));
  }
}

PointCloud read_ply_binary_data(const std::string& data, const std::string& path,
                                const PlyHeader& header,
                                const VertexLayout& layout) {
  BinaryCursor cur(data, path, header.data_offset);
  PointCloud cloud;

  for (int e = 0; e < static_cast<int>(header.elements.size()); ++e) {
    const PlyElement& elem = header.elements[static_cast<size_t>(e)];
    bool is_vertex = (e == layout.element);

    // Fixed-stride elements can be skipped or bulk-scanned without walking
    // every property.
    size_t stride = 0;
    bool fixed = true;
    for (const PlyProperty& prop : elem.properties) {
      if (prop.is_list) {
        fixed = false;
        break;
      }
      stride += static_cast<size_t>(prop.type.size);
    }

    if (!is_vertex && fixed) {
      size_t total = stride * static_cast<size_t>(elem.count);
      if (cur.remaining() < total) {
        throw ParseError(path + ": element '" + elem.name + "' declares " +
                         std::to_string(elem.count) +
                         " rows, file ends after " +
                         std::to_string(cur.remaining() / std::max<size_t>(stride, 1)));
      }
      cur.skip(total, elem.name.c_str());
      continue;
    }

    if (is_vertex) cloud.reserve(static_cast<size_t>(elem.count));
    for (long row = 0; row < elem.count; ++row) {
      if (fixed && cur.remaining() < stride) {
        throw ParseError(path + ": element '" + elem.name + "' declares " +
                         std::to_string(elem.count) + " rows, file ends after " +
                         std::to_string(row));
      }
      Point3 p = Point3::Zero();
      for (int i = 0; i < static_cast<int>(elem.properties.size()); ++i) {
        const PlyProperty& prop = elem.properties[static_cast<size_t>(i)];
        if (prop.is_list) {
          double n = read_binary_scalar(cur, prop.count_type, "list count");
          if (n < 0) cur.fail("negative list count");
          cur.skip(static_cast<size_t>(n) * static_cast<size_t>(prop.type.size),
                   "list entries");
          continue;
        }
        bool wanted = is_vertex && (i == layout.x || i == layout.y || i == layout.z);
        if (!wanted) {
          cur.skip(static_cast<size_t>(prop.type.size), prop.name.c_str());
          continue;
        }
        double v = read_binary_scalar(cur, prop.type, prop.name.c_str());
        if (i == layout.x) p.x() = check_finite_coord(v, path, row + 1);
        if (i == layout.y) p.y() = check_finite_coord(v, path, row + 1);
        if (i == layout.z) p.z() = check_finite_coord(v, path, row + 1);
      }
      if (is_vertex) cloud.push_back(p);
    }
  }

  if (cur.remaining() != 0) cur.fail("trailing data after the last declared element");
  return cloud;
}

PointCloud read_ply(const std::string& path, CloudFormat format) {
  std::string data = slurp(path);
  PlyHeader header = parse_ply_header(data, path);

  if (format == CloudFormat::ply_ascii && header.binary) {
    throw ParseError(path + ": declared as ascii PLY but file is binary_little_endian");
  }
  if (format == CloudFormat::ply_binary && !header.binary) {
    throw ParseError(path + ": declared as binary PLY but file is ascii");
  }

  VertexLayout layout = locate_vertex(header, path);
  warn_skips(header, layout, path);
  return header.binary ? read_ply_binary_data(data, path, header, layout)
                       : read_ply_ascii_data(data, path, header, layout);
}

PointCloud read_xyz(const std::string& path) {
  std::string data = slurp(path);
  TextCursor cur(data, path);
  PointCloud cloud;
  long row = 0;
  while (!cur.at_end()) {
    ++row;
    Point3 p;
    p.x() = cur.read_double("x");
    p.y() = cur.read_double("y");
    p.z() = cur.read_double("z");
    if (!p.allFinite()) {
      throw ParseError(path + ": row " + std::to_string(row) +
                       " has a non-finite coordinate");
    }
    cloud.push_back(p);
  }
  return cloud;
}

CloudFormat resolve_format(const std::string& path, CloudFormat format) {
  if (format != CloudFormat::auto_detect) return format;
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".xyz" ? CloudFormat::xyz : CloudFormat::ply_any;
}

}  // namespace

PointCloud read_point_cloud(const std::string& path, CloudFormat format) {
  format = resolve_format(path, format);
  if (format == CloudFormat::xyz) return read_xyz(path);
  return read_ply(path, format);
}

void write_point_cloud(const PointCloud& cloud, const std::string& path,
                       CloudFormat format) {
  format = resolve_format(path, format);
  if (format == CloudFormat::ply_any) format = CloudFormat::ply_binary;

  std::string out;
  if (format == CloudFormat::xyz) {
    out.reserve(cloud.size() * 36);
    for (const Point3& p : cloud) {
      out += format_g(p.x(), 9);
      out += ' ';
      out += format_g(p.y(), 9);
      out += ' ';
      out += format_g(p.z(), 9);
      out += '\n';
    }
    write_file_atomic(path, out);
    return;
  }

  bool binary = (format == CloudFormat::ply_binary);
  out += "ply\n";
  out += binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "end_header\n";

  if (binary) {
    size_t head = out.size();
    out.resize(head + cloud.size() * 3 * sizeof(double));
    char* dst = out.data() + head;
    for (const Point3& p : cloud) {
      std::memcpy(dst, p.data(), 3 * sizeof(double));
      dst += 3 * sizeof(double);
    }
  } else {
    for (const Point3& p : cloud) {
      out += format_g(p.x(), 9);
      out += ' ';
      out += format_g(p.y(), 9);
      out += ' ';
      out += format_g(p.z(), 9);
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Trajectories

Trajectory read_trajectory(const std::string& path) {
  std::string data = slurp(path);
  TextCursor cur(data, path);
  // The header line is optional on read: generated files carry it, but a
  // bare list of rows is accepted too.
  cur.skip_ws();
  if (cur.p < cur.end && (*cur.p == 'k' || *cur.p == 'K')) {
    const char* line_end = cur.p;
    while (line_end < cur.end && *line_end != '\n') ++line_end;
    std::string header(cur.p, line_end);
    header.erase(std::remove_if(header.begin(), header.end(),
                                [](unsigned char c) {
                                  return std::isspace(c) != 0;
                                }),
                 header.end());
    if (header != "k,x,y,z") cur.fail("unrecognized trajectory header");
    cur.p = line_end;
  }
  Trajectory traj;
  long expected = 1;
  while (!cur.at_end()) {
    long k = cur.read_long("pose index k");
    if (k != expected) {
      cur.fail("pose indices must count from 1 without gaps (expected k=" +
               std::to_string(expected) + ", found k=" + std::to_string(k) + ")");
    }
    cur.expect_char(',', "after k");
    Point3 p;
    p.x() = cur.read_double("x");
    cur.expect_char(',', "after x");
    p.y() = cur.read_double("y");
    cur.expect_char(',', "after y");
    p.z() = cur.read_double("z");
    if (!p.allFinite()) {
      cur.fail("pose " + std::to_string(k) + " has a non-finite coordinate");
    }
    traj.poses.push_back(p);
    ++expected;
  }
  return traj;
}

void write_trajectory(const Trajectory& trajectory, const std::string& path) {
  std::string out = "k,x,y,z\n";
  out.reserve(trajectory.poses.size() * 64);
  for (int k = 1; k <= trajectory.count(); ++k) {
    const Point3& p = trajectory.pose(k);
    out += std::to_string(k);
    out += ',';
    out += format_g(p.x(), 17);
    out += ',';
    out += format_g(p.y(), 17);
    out += ',';
    out += format_g(p.z(), 17);
    out += '\n';
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Descriptor sets

namespace {

constexpr char kDescriptorMagic[4] = {'C', 'D', 'Q', '1'};

void check_descriptor_keys(std::vector<DescriptorRecord>& records,
                           const std::string& path) {
  std::sort(records.begin(), records.end(),
            [](const DescriptorRecord& a, const DescriptorRecord& b) {
              return a.k < b.k;
            });
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].k < 1) {
      throw ParseError(path + ": pose index " + std::to_string(records[i].k) +
                       " is not positive");
    }
    if (i > 0 && records[i].k == records[i - 1].k) {
      throw ParseError(path + ": duplicate descriptor for pose " +
                       std::to_string(records[i].k));
    }
  }
}

DescriptorSet read_descriptor_binary(const std::string& data,
                                     const std::string& path) {
  BinaryCursor cur(data, path, 0);
  cur.skip(4, "magic");
  uint32_t count = cur.read<uint32_t>("record count");
  size_t expect = 8 + static_cast<size_t>(count) * (4 + kDescriptorDim * 4);
  if (data.size() != expect) {
    throw ParseError(path + ": descriptor file declares " +
                     std::to_string(count) + " records (" +
                     std::to_string(expect) + " bytes), file has " +
                     std::to_string(data.size()));
  }
  DescriptorSet set;
  set.records.reserve(count);
  for (uint32_t r = 0; r < count; ++r) {
    DescriptorRecord rec;
    rec.k = static_cast<int>(cur.read<uint32_t>("pose index"));
    for (int i = 0; i < kDescriptorDim; ++i) {
      float v = cur.read<float>("descriptor entry");
      if (!std::isfinite(v)) {
        throw ParseError(path + ": record " + std::to_string(r + 1) +
                         " has a non-finite entry");
      }
      rec.q[i] = v;
    }
    set.records.push_back(rec);
  }
  check_descriptor_keys(set.records, path);
  return set;
}

DescriptorSet read_descriptor_csv(const std::string& data,
                                  const std::string& path) {
  TextCursor cur(data, path);
  DescriptorSet set;
  while (!cur.at_end()) {
    DescriptorRecord rec;
    rec.k = static_cast<int>(cur.read_long("pose index k"));
    for (int i = 0; i < kDescriptorDim; ++i) {
      cur.skip_ws();
      if (cur.p == cur.end || *cur.p != ',') {
        cur.fail("descriptor row for pose " + std::to_string(rec.k) + " has " +
                 std::to_string(i + 1) + " of " +
                 std::to_string(kDescriptorDim + 1) + " fields");
      }
      ++cur.p;
      double v = cur.read_double("descriptor entry");
      if (!std::isfinite(v)) {
        cur.fail("descriptor for pose " + std::to_string(rec.k) +
                 " has a non-finite entry");
      }
      rec.q[i] = v;
    }
    set.records.push_back(rec);
  }
  check_descriptor_keys(set.records, path);
  return set;
}

}  // namespace

DescriptorSet read_descriptor_set(const std::string& path) {
  std::string data = slurp(path);
  if (data.size() >= 4 && std::memcmp(data.data(), kDescriptorMagic, 4) == 0) {
    return read_descriptor_binary(data, path);
  }
  return read_descriptor_csv(data, path);
}

void write_descriptor_set(const DescriptorSet& set, const std::string& path,
                          DescriptorFileFormat format) {
  std::string out;
  if (format == DescriptorFileFormat::binary) {
    out.reserve(8 + set.records.size() * (4 + kDescriptorDim * 4));
    out.append(kDescriptorMagic, 4);
    uint32_t count = static_cast<uint32_t>(set.records.size());
    out.append(reinterpret_cast<const char*>(&count), 4);
    for (const DescriptorRecord& rec : set.records) {
      uint32_t k = static_cast<uint32_t>(rec.k);
      out.append(reinterpret_cast<const char*>(&k), 4);
      for (int i = 0; i < kDescriptorDim; ++i) {
        float v = static_cast<float>(rec.q[i]);
        out.append(reinterpret_cast<const char*>(&v), 4);
      }
    }
  } else {
    for (const DescriptorRecord& rec : set.records) {
      out += std::to_string(rec.k);
      for (int i = 0; i < kDescriptorDim; ++i) {
        out += ',';
        out += format_g(rec.q[i], 17);
      }
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Transforms

RigidTransform read_transform(const std::string& path) {
  std::string data = slurp(path);
  TextCursor cur(data, path);
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      m(r, c) = cur.read_double("transform entry");
    }
  }
  if (!cur.at_end()) cur.fail("transform file has more than 16 values");
  try {
    return RigidTransform::from_matrix(m);
  } catch (const FormatError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_transform(const RigidTransform& t, const std::string& path) {
  Eigen::Matrix4d m = t.matrix();
  std::string out;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      out += format_g(m(r, c), 17);
      out += (c == 3) ? '\n' : ' ';
    }
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Detection dumps

namespace {

// Skips an optional header row: a first line whose first field is not a
// number.
void maybe_skip_header(TextCursor& cur) {
  cur.skip_ws();
  const char* probe = cur.p;
  char* after = nullptr;
  std::strtod(probe, &after);
  if (after != probe) return;
  while (cur.p < cur.end && *cur.p != '\n') ++cur.p;
}

}  // namespace

void write_regions_csv(const std::vector<RegionPair>& regions,
                       const std::string& path) {
  std::string out =
      "rank,j,nn_i,distance,center_t_x,center_t_y,center_t_z,"
      "center_t1_x,center_t1_y,center_t1_z,radius\n";
  int rank = 0;
  for (const RegionPair& r : regions) {
    out += std::to_string(++rank);
    out += ',' + std::to_string(r.score.j);
    out += ',' + std::to_string(r.score.nn_i);
    out += ',' + format_g(r.score.distance, 17);
    for (int i = 0; i < 3; ++i) out += ',' + format_g(r.center_t[i], 17);
    for (int i = 0; i < 3; ++i) out += ',' + format_g(r.center_t1[i], 17);
    out += ',' + format_g(r.radius, 17);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<RegionPair> read_regions_csv(const std::string& path) {
  std::string data = slurp(path);
  TextCursor cur(data, path);
  maybe_skip_header(cur);
  std::vector<RegionPair> regions;
  long expected_rank = 1;
  while (!cur.at_end()) {
    long rank = cur.read_long("rank");
    if (rank != expected_rank) {
      cur.fail("ranks must count from 1 without gaps (expected " +
               std::to_string(expected_rank) + ", found " + std::to_string(rank) + ")");
    }
    ++expected_rank;
    RegionPair r;
    cur.expect_char(',', "after rank");
    r.score.j = static_cast<int>(cur.read_long("j"));
    cur.expect_char(',', "after j");
    r.score.nn_i = static_cast<int>(cur.read_long("nn_i"));
    cur.expect_char(',', "after nn_i");
    r.score.distance = cur.read_double("distance");
    for (int i = 0; i < 3; ++i) {
      cur.expect_char(',', "between fields");
      r.center_t[i] = cur.read_double("center_t");
    }
    for (int i = 0; i < 3; ++i) {
      cur.expect_char(',', "between fields");
      r.center_t1[i] = cur.read_double("center_t1");
    }
    cur.expect_char(',', "between fields");
    r.radius = cur.read_double("radius");
    if (!r.center_t.allFinite() || !r.center_t1.allFinite() ||
        !std::isfinite(r.score.distance) || !(r.radius > 0.0)) {
      cur.fail("region row " + std::to_string(rank) + " has invalid values");
    }
    regions.push_back(r);
  }
  return regions;
}

void write_scores_csv(const std::vector<ChangeScore>& scores,
                      const std::string& path) {
  std::string out = "j,nn_i,distance\n";
  for (const ChangeScore& s : scores) {
    out += std::to_string(s.j);
    out += ',' + std::to_string(s.nn_i);
    out += ',' + format_g(s.distance, 17);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<ChangeScore> read_scores_csv(const std::string& path) {
  std::string data = slurp(path);
  TextCursor cur(data, path);
  maybe_skip_header(cur);
  std::vector<ChangeScore> scores;
  while (!cur.at_end()) {
    ChangeScore s;
    s.j = static_cast<int>(cur.read_long("j"));
    cur.expect_char(',', "after j");
    s.nn_i = static_cast<int>(cur.read_long("nn_i"));
    cur.expect_char(',', "after nn_i");
    s.distance = cur.read_double("distance");
    if (!std::isfinite(s.distance) || s.distance < 0.0) {
      cur.fail("score for pose " + std::to_string(s.j) + " has an invalid distance");
    }
    scores.push_back(s);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Report

namespace {

json point_to_json(const Point3& p) { return json::array({p.x(), p.y(), p.z()}); }

Point3 point_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError(path + ": expected a 3-element coordinate array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void validate_report(const Report& report) {
  auto fail = [](int rank, const std::string& msg) -> void {
    throw FormatError("report region " + std::to_string(rank) + ": " + msg);
  };

  int expected_rank = 1;
  for (const RegionReportEntry& r : report.regions) {
    if (r.rank != expected_rank) {
      throw FormatError("report ranks must count from 1 without gaps");
    }
    ++expected_rank;

    if (!(r.radius > 0.0)) fail(r.rank, "radius must be positive");
    if (r.t_merge < 0 || r.t_cd < 0 || r.t_oe < 0 || r.t_total < 0) {
      fail(r.rank, "timings must be non-negative");
    }
    if (r.t_total < r.t_cd) fail(r.rank, "t_total is less than t_CD");
    if (r.t_total < r.t_oe) fail(r.rank, "t_total is less than t_OE");
    if (r.v_sphere < 0 || r.v_oe < 0 || r.v_added < 0 || r.v_removed < 0) {
      fail(r.rank, "volumes must be non-negative");
    }
    if (r.s_points < 0 || r.oe_points < 0) fail(r.rank, "point counts must be non-negative");
    if (r.oe_points > r.s_points) fail(r.rank, "OE_points exceeds S_points");
    if (r.added_points < 0 || r.removed_points < 0 ||
        r.added_points_raw < 0 || r.removed_points_raw < 0) {
      fail(r.rank, "point counts must be non-negative");
    }
    if (r.oe_points != r.added_points + r.removed_points) {
      fail(r.rank, "OE_points must equal added_points + removed_points");
    }
    if (r.added_points > r.added_points_raw || r.removed_points > r.removed_points_raw) {
      fail(r.rank, "filtered counts exceed raw counts");
    }
    if (!std::isfinite(r.score.distance) || r.score.distance < 0.0) {
      fail(r.rank, "descriptor distance must be non-negative");
    }
  }
}

void write_report_json(const Report& report, const std::string& path) {
  validate_report(report);

  json j;
  j["schema"] = "clouddelta-report-v1";
  j["metadata"]["parameters"] = report.parameters;
  json inputs = json::array();
  for (const InputRecord& in : report.inputs) {
    json rec;
    rec["role"] = in.role;
    rec["path"] = in.path;
    rec["bytes"] = in.bytes;
    rec["fnv1a64"] = hex64(in.fnv1a64);
    inputs.push_back(rec);
  }
  j["metadata"]["inputs"] = inputs;
  if (!report.metrics.is_null()) j["metrics"] = report.metrics;

  json regions = json::array();
  for (const RegionReportEntry& r : report.regions) {
    json e;
    e["rank"] = r.rank;
    e["j"] = r.score.j;
    e["nn_i"] = r.score.nn_i;
    e["distance"] = r.score.distance;
    e["center_t"] = point_to_json(r.center_t);
    e["center_t1"] = point_to_json(r.center_t1);
    e["radius"] = r.radius;
    e["t_merge"] = r.t_merge;
    e["t_CD"] = r.t_cd;
    e["t_OE"] = r.t_oe;
    e["t_total"] = r.t_total;
    e["V_sphere"] = r.v_sphere;
    e["V_OE"] = r.v_oe;
    e["S_points"] = r.s_points;
    e["OE_points"] = r.oe_points;
    e["added"] = {{"points", r.added_points},
                  {"points_raw", r.added_points_raw},
                  {"volume", r.v_added}};
    e["removed"] = {{"points", r.removed_points},
                    {"points_raw", r.removed_points_raw},
                    {"volume", r.v_removed}};
    regions.push_back(e);
  }
  j["regions"] = regions;

  write_file_atomic(path, j.dump(2) + "\n");
}

Report read_report_json(const std::string& path) {
  std::string data = slurp(path);
  json j;
  try {
    j = json::parse(data);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }

  try {
    Report report;
    report.parameters = j.at("metadata").at("parameters");
    for (const json& rec : j.at("metadata").at("inputs")) {
      InputRecord in;
      in.role = rec.at("role").get<std::string>();
      in.path = rec.at("path").get<std::string>();
      in.bytes = rec.at("bytes").get<uint64_t>();
      in.fnv1a64 = std::stoull(rec.at("fnv1a64").get<std::string>(), nullptr, 16);
      report.inputs.push_back(in);
    }
    if (j.contains("metrics")) report.metrics = j["metrics"];
    for (const json& e : j.at("regions")) {
      RegionReportEntry r;
      r.rank = e.at("rank").get<int>();
      r.score.j = e.at("j").get<int>();
      r.score.nn_i = e.at("nn_i").get<int>();
      r.score.distance = e.at("distance").get<double>();
      r.center_t = point_from_json(e.at("center_t"), path);
      r.center_t1 = point_from_json(e.at("center_t1"), path);
      r.radius = e.at("radius").get<double>();
      r.t_merge = e.at("t_merge").get<double>();
      r.t_cd = e.at("t_CD").get<double>();
      r.t_oe = e.at("t_OE").get<double>();
      r.t_total = e.at("t_total").get<double>();
      r.v_sphere = e.at("V_sphere").get<double>();
      r.v_oe = e.at("V_OE").get<double>();
      r.s_points = e.at("S_points").get<long>();
      r.oe_points = e.at("OE_points").get<long>();
      r.added_points = e.at("added").at("points").get<long>();
      r.added_points_raw = e.at("added").at("points_raw").get<long>();
      r.v_added = e.at("added").at("volume").get<double>();
      r.removed_points = e.at("removed").at("points").get<long>();
      r.removed_points_raw = e.at("removed").at("points_raw").get<long>();
      r.v_removed = e.at("removed").at("volume").get<double>();
      report.regions.push_back(r);
    }
    validate_report(report);
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const FormatError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_report_csv(const Report& report, const std::string& path) {
  validate_report(report);
  std::string out =
      "rank,j,nn_i,distance,t_merge,t_CD,t_OE,t_total,"
      "V_sphere,V_OE,S_points,OE_points,added_points,removed_points\n";
  for (const RegionReportEntry& r : report.regions) {
    out += std::to_string(r.rank);
    out += ',' + std::to_string(r.score.j);
    out += ',' + std::to_string(r.score.nn_i);
    out += ',' + format_g(r.score.distance, 9);
    out += ',' + format_g(r.t_merge, 9);
    out += ',' + format_g(r.t_cd, 9);
    out += ',' + format_g(r.t_oe, 9);
    out += ',' + format_g(r.t_total, 9);
    out += ',' + format_g(r.v_sphere, 9);
    out += ',' + format_g(r.v_oe, 9);
    out += ',' + std::to_string(r.s_points);
    out += ',' + std::to_string(r.oe_points);
    out += ',' + std::to_string(r.added_points);
    out += ',' + std::to_string(r.removed_points);
    out += '\n';
  }
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Helpers

uint64_t fnv1a64(const void* data, size_t size) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  uint64_t hash = 14695981039346656037ull;
  for (size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

InputRecord describe_input(const std::string& role, const std::string& path) {
  std::string data = slurp(path);
  InputRecord rec;
  rec.role = role;
  rec.path = path;
  rec.bytes = data.size();
  rec.fnv1a64 = fnv1a64(data.data(), data.size());
  return rec;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(tmp + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(tmp + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(path + ": rename failed: " + ec.message());
}

}  // namespace clouddelta
