#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clmvs/geometry.hpp"
#include "clmvs/sampling.hpp"

namespace clmvs {

/// Coloured point with the view/pixel it was fused from.
struct CloudPoint {
  std::array<float, 3> xyz{};
  std::array<std::uint8_t, 3> rgb{};
  int view = -1;
  int row = -1;
  int col = -1;
};

struct PointCloud {
  std::vector<CloudPoint> points;
  /// Set when fusion produced nothing because every survival mask was empty.
  bool empty_input = false;
};

/// Cam text file: "extrinsic", 4x4 world-to-camera; "intrinsic", 3x3; then
/// "depth_min depth_interval depth_num depth_max". Two-value depth lines
/// (min interval) are accepted and read as 192 hypotheses.
std::string format_cam(const Camera& cam, int depth_num = 192);
Camera parse_cam(const std::string& text);
void write_cam(const std::filesystem::path& path, const Camera& cam, int depth_num = 192);
Camera read_cam(const std::filesystem::path& path);

/// PFM: "Pf" for single-channel fields, "PF" for 3-channel images, negative
/// scale (little-endian), rows stored bottom to top, float32 payload.
std::string encode_pfm(const ScalarField& field);
std::string encode_pfm(const Image& image);
ScalarField decode_pfm_field(const std::string& bytes);
Image decode_pfm_image(const std::string& bytes);
void write_pfm(const std::filesystem::path& path, const ScalarField& field);
void write_pfm(const std::filesystem::path& path, const Image& image);
ScalarField read_pfm(const std::filesystem::path& path);
Image read_pfm_image(const std::filesystem::path& path);

/// Pair file: view count, then per view its id and "n id score id score ...".
std::string format_pairs(const PairScores& pairs);
PairScores parse_pairs(const std::string& text);
void write_pairs(const std::filesystem::path& path, const PairScores& pairs);
PairScores read_pairs(const std::filesystem::path& path);

/// Binary little-endian PLY with float x y z and uchar red green blue.
std::string encode_ply(const PointCloud& cloud);
PointCloud decode_ply(const std::string& bytes);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& path);

/// 8-bit binary PPM, handy for looking at renders.
void write_ppm(const std::filesystem::path& path, const Image& image);

/// "00000003" + suffix, the MVSNet file naming.
std::string view_file(int id, const std::string& suffix);

/// Scene directory: images/<id>.pfm (3-channel), cams/<id>_cam.txt,
/// depth_gt/<id>.pfm when a GT depth is present, pair.txt.
struct SceneData {
  std::vector<CameraView> views;
  PairScores pairs;
};
void write_scene_dir(const std::filesystem::path& dir, std::span<const CameraView> views,
                     const PairScores& pairs);
SceneData read_scene_dir(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace clmvs
