#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hcrf/errors.hpp"
#include "hcrf/io.hpp"
#include "oracles.hpp"

using namespace hcrf;

TEST_CASE("ply round trip with normals and features") {
  std::mt19937_64 rng(1);
  const auto pts = oracle::random_points(25, rng);
  std::vector<Eigen::VectorXd> feats(25, Eigen::VectorXd(2));
  for (std::size_t i = 0; i < 25; ++i) feats[i] << static_cast<double>(i), -0.5;
  const PointCloud cloud(pts, feats);
  std::vector<Vec3> normals(25, Vec3(0, 0, 1));
  std::stringstream buf;
  io::write_ply(buf, cloud, &normals);
  const auto back = io::read_ply(buf);
  REQUIRE(back.cloud.size() == 25);
  REQUIRE(back.normals.has_value());
  CHECK(back.cloud.feature_dim() == 2);
  for (std::size_t i = 0; i < 25; ++i) {
    for (int a = 0; a < 3; ++a) CHECK(back.cloud[i][a] == static_cast<double>(static_cast<float>(pts[i][a])));
    CHECK((*back.normals)[i] == Vec3(0, 0, 1));
    CHECK(back.cloud.features()[i] == feats[i]);
  }
}

TEST_CASE("ply reader tolerates extra elements and properties") {
  std::istringstream in(
      "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\n"
      "property float y\nproperty float x\nproperty uchar red\nproperty float z\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "1 2 255 3\n4 5 0 6\n3 0 1 1\n");
  const auto ply = io::read_ply(in);
  CHECK(ply.cloud[0] == Vec3(2, 1, 3));
  CHECK(ply.cloud[1] == Vec3(5, 4, 6));
  CHECK_FALSE(ply.normals.has_value());
  CHECK_FALSE(ply.cloud.has_features());
}

TEST_CASE("ply reader errors") {
  std::istringstream no_magic("plx\n");
  CHECK_THROWS_AS(io::read_ply(no_magic), InputError);
  std::istringstream binary("ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_AS(io::read_ply(binary), InputError);
  std::istringstream no_z("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n");
  CHECK_THROWS_AS(io::read_ply(no_z), InputError);
  std::istringstream truncated("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n");
  CHECK_THROWS_AS(io::read_ply(truncated), InputError);
  CHECK_THROWS_AS(io::read_ply(std::filesystem::path("/nonexistent/frame.ply")), InputError);
}

TEST_CASE("sfl round trip is float exact") {
  std::mt19937_64 rng(2);
  std::vector<Vec3> v;
  for (const auto& p : oracle::random_points(40, rng)) {
    v.emplace_back(static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z()));
  }
  std::stringstream buf;
  io::write_sfl(buf, FlowField(v));
  CHECK(buf.str().size() == 8 + 40 * 12);
  CHECK(buf.str().substr(0, 4) == "SFL1");
  CHECK(io::read_sfl(buf).vectors() == v);
}

TEST_CASE("sfl reader errors") {
  std::istringstream magic("SFL2\x01\x00\x00\x00");
  CHECK_THROWS_AS(io::read_sfl(magic), InputError);
  std::stringstream buf;
  io::write_sfl(buf, FlowField::zeros(2));
  std::string bytes = buf.str();
  std::istringstream short_in(bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_WITH_AS(io::read_sfl(short_in), "sfl: truncated", InputError);
  std::istringstream long_in(bytes + "x");
  CHECK_THROWS_WITH_AS(io::read_sfl(long_in), "sfl: trailing bytes", InputError);
}

TEST_CASE("labels round trip and errors") {
  const SupervoxelPartition p({2, 0, 2, 1, 0});
  std::stringstream buf;
  io::write_labels(buf, p);
  CHECK(io::read_labels(buf) == p);
  std::istringstream bad("0\n1\nx\n");
  CHECK_THROWS_WITH_AS(io::read_labels(bad), "labels: malformed line 3", InputError);
  std::istringstream negative("0\n-1\n");
  CHECK_THROWS_AS(io::read_labels(negative), InputError);
}

TEST_CASE("path overloads prefix errors with the path") {
  const auto dir = std::filesystem::temp_directory_path() / "hcrf_io_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "flow.sfl";
  io::write_sfl(file, FlowField({{1, 2, 3}}));
  CHECK(io::read_sfl(file)[0] == Vec3(1, 2, 3));
  {
    std::ofstream out(dir / "bad.sfl", std::ios::binary);
    out << "nope";
  }
  try {
    io::read_sfl(dir / "bad.sfl");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("bad.sfl") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
