#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hcrf/geometry.hpp"
#include "hcrf/supervoxel.hpp"

namespace hcrf::io {

struct PlyCloud {
  PointCloud cloud;
  std::optional<std::vector<Vec3>> normals;
};

// ASCII PLY with float x, y, z; optional nx, ny, nz and feature_0..feature_{m-1}.
PlyCloud read_ply(std::istream& in);
PlyCloud read_ply(const std::filesystem::path& path);
void write_ply(std::ostream& out, const PointCloud& cloud,
               const std::vector<Vec3>* normals = nullptr);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               const std::vector<Vec3>* normals = nullptr);

// ".sfl": "SFL1", uint32 LE count, count × 3 float32 LE.
FlowField read_sfl(std::istream& in);
FlowField read_sfl(const std::filesystem::path& path);
void write_sfl(std::ostream& out, const FlowField& flow);
void write_sfl(const std::filesystem::path& path, const FlowField& flow);

// One integer label per line.
SupervoxelPartition read_labels(std::istream& in);
SupervoxelPartition read_labels(const std::filesystem::path& path);
void write_labels(std::ostream& out, const SupervoxelPartition& partition);
void write_labels(const std::filesystem::path& path, const SupervoxelPartition& partition);

}  // namespace hcrf::io
