#include "hcrf/io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "hcrf/errors.hpp"

namespace hcrf::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ifstream in(path, std::ios::in | mode);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | mode);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  std::vector<bool> single_precision;  // declared float: decimal text rounds back to float
  bool has_list = false;
};

}  // namespace

PlyCloud read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw InputError("ply: missing magic");
  }
  std::vector<Element> elements;
  bool ascii = false;
  while (true) {
    if (!std::getline(in, line)) throw InputError("ply: header not terminated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (key == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (!ls || count < 0) throw InputError("ply: malformed element line");
      e.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(e));
    } else if (key == "property") {
      if (elements.empty()) throw InputError("ply: property before element");
      std::string type;
      ls >> type;
      if (type == "list") {
        elements.back().has_list = true;
        std::string count_type;
        std::string item_type;
        ls >> count_type >> item_type;
      }
      std::string name;
      ls >> name;
      if (name.empty()) throw InputError("ply: malformed property line");
      elements.back().properties.push_back(name);
      elements.back().single_precision.push_back(type == "float" || type == "float32");
    }
  }
  if (!ascii) throw InputError("ply: only ascii format is supported");

  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<Eigen::VectorXd> features;
  bool found_vertex = false;
  bool with_normals = false;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t r = 0; r < e.count; ++r) {
        if (!std::getline(in, line)) throw InputError("ply: truncated element " + e.name);
      }
      continue;
    }
    if (e.has_list) throw InputError("ply: list properties on vertices are not supported");
    found_vertex = true;
    std::map<std::string, std::size_t> column;
    for (std::size_t c = 0; c < e.properties.size(); ++c) column[e.properties[c]] = c;
    for (const char* axis : {"x", "y", "z"}) {
      if (!column.contains(axis)) throw InputError(std::string("ply: missing property ") + axis);
    }
    with_normals = column.contains("nx") && column.contains("ny") && column.contains("nz");
    std::vector<std::size_t> feature_cols;
    for (std::size_t f = 0;; ++f) {
      const auto it = column.find("feature_" + std::to_string(f));
      if (it == column.end()) break;
      feature_cols.push_back(it->second);
    }

    std::vector<double> values(e.properties.size());
    for (std::size_t r = 0; r < e.count; ++r) {
      if (!std::getline(in, line)) throw InputError("ply: truncated vertex data");
      std::istringstream ls(line);
      for (std::size_t c = 0; c < values.size(); ++c) {
        if (!(ls >> values[c])) {
          throw InputError("ply: malformed vertex line " + std::to_string(r + 1));
        }
        if (e.single_precision[c]) values[c] = static_cast<float>(values[c]);
      }
      points.emplace_back(values[column["x"]], values[column["y"]], values[column["z"]]);
      if (with_normals) {
        normals.emplace_back(values[column["nx"]], values[column["ny"]], values[column["nz"]]);
      }
      if (!feature_cols.empty()) {
        Eigen::VectorXd f(static_cast<Eigen::Index>(feature_cols.size()));
        for (std::size_t c = 0; c < feature_cols.size(); ++c) f[c] = values[feature_cols[c]];
        features.push_back(std::move(f));
      }
    }
  }
  if (!found_vertex) throw InputError("ply: no vertex element");
  PlyCloud out{PointCloud(std::move(points), std::move(features)), std::nullopt};
  if (with_normals) out.normals = std::move(normals);
  return out;
}

PlyCloud read_ply(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_ply(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_ply(std::ostream& out, const PointCloud& cloud, const std::vector<Vec3>* normals) {
  if (normals && normals->size() != cloud.size()) {
    throw InputError("normals are not aligned with the cloud");
  }
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << '\n';
  out << "property float x\nproperty float y\nproperty float z\n";
  if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
  for (Eigen::Index f = 0; f < cloud.feature_dim(); ++f) {
    out << "property float feature_" << f << '\n';
  }
  out << "end_header\n";
  out.precision(std::numeric_limits<float>::max_digits10);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud[i];
    out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
        << static_cast<float>(p.z());
    if (normals) {
      const auto& n = (*normals)[i];
      out << ' ' << static_cast<float>(n.x()) << ' ' << static_cast<float>(n.y()) << ' '
          << static_cast<float>(n.z());
    }
    if (cloud.has_features()) {
      for (double v : cloud.features()[i]) out << ' ' << static_cast<float>(v);
    }
    out << '\n';
  }
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<Vec3>* normals) {
  auto out = open_out(path);
  write_ply(out, cloud, normals);
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw InputError("sfl: truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

FlowField read_sfl(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || std::string(magic.data(), 4) != "SFL1") {
    throw InputError("sfl: bad magic");
  }
  const std::uint32_t n = get_u32(in);
  std::vector<Vec3> vectors(n);
  for (auto& v : vectors) {
    for (int c = 0; c < 3; ++c) v[c] = std::bit_cast<float>(get_u32(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw InputError("sfl: trailing bytes");
  return FlowField(std::move(vectors));
}

FlowField read_sfl(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  try {
    return read_sfl(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_sfl(std::ostream& out, const FlowField& flow) {
  if (flow.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InputError("sfl: too many points");
  }
  out.write("SFL1", 4);
  put_u32(out, static_cast<std::uint32_t>(flow.size()));
  for (const auto& v : flow.vectors()) {
    for (int c = 0; c < 3; ++c) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v[c])));
  }
}

void write_sfl(const std::filesystem::path& path, const FlowField& flow) {
  auto out = open_out(path, std::ios::binary);
  write_sfl(out, flow);
}

SupervoxelPartition read_labels(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    long long v = 0;
    std::string rest;
    if (!(ls >> v) || (ls >> rest) || v < 0 || v > std::numeric_limits<int>::max()) {
      throw InputError("labels: malformed line " + std::to_string(line_no));
    }
    labels.push_back(static_cast<int>(v));
  }
  return SupervoxelPartition(labels);
}

SupervoxelPartition read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_labels(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_labels(std::ostream& out, const SupervoxelPartition& partition) {
  for (int l : partition.labels()) out << l << '\n';
}

void write_labels(const std::filesystem::path& path, const SupervoxelPartition& partition) {
  auto out = open_out(path);
  write_labels(out, partition);
}

}  // namespace hcrf::io
