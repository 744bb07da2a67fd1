#include "clmvs/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace clmvs {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written assuming a little-endian host");

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& tok, const char* what) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok[0] == '+') ++first;
  const auto res = std::from_chars(first, tok.data() + tok.size(), v);
  require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(),
          std::string(what) + ": bad number '" + tok + "'");
  return v;
}

long to_long(const std::string& tok, const char* what) {
  long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(),
          std::string(what) + ": bad integer '" + tok + "'");
  return v;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), "write failed for '" + path.string() + "'");
}

// ---- cam -----------------------------------------------------------------

std::string format_cam(const Camera& cam, int depth_num) {
  require(depth_num >= 2, "format_cam: depth_num must be >= 2");
  std::string s = "extrinsic\n";
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) s += fmt(cam.pose(r, c)) + (c < 3 ? " " : "\n");
  }
  s += "\nintrinsic\n";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) s += fmt(cam.K(r, c)) + (c < 2 ? " " : "\n");
  }
  const double interval = (cam.depth_max - cam.depth_min) / (depth_num - 1);
  s += "\n" + fmt(cam.depth_min) + " " + fmt(interval) + " " + std::to_string(depth_num) + " " +
       fmt(cam.depth_max) + "\n";
  return s;
}

Camera parse_cam(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::vector<std::string>> lines;
  for (std::string line; std::getline(is, line);) {
    auto t = tokens(line);
    if (!t.empty()) lines.push_back(std::move(t));
  }
  require(lines.size() >= 10, "cam file: expected extrinsic, intrinsic and depth lines");
  require(lines[0].size() == 1 && lines[0][0] == "extrinsic", "cam file: missing 'extrinsic'");
  Camera cam;
  for (int r = 0; r < 4; ++r) {
    require(lines[1 + r].size() == 4, "cam file: extrinsic row " + std::to_string(r) +
                                          " must have 4 values");
    for (int c = 0; c < 4; ++c) cam.pose(r, c) = to_double(lines[1 + r][c], "cam file");
  }
  require(lines[5].size() == 1 && lines[5][0] == "intrinsic", "cam file: missing 'intrinsic'");
  for (int r = 0; r < 3; ++r) {
    require(lines[6 + r].size() == 3, "cam file: intrinsic row " + std::to_string(r) +
                                          " must have 3 values");
    for (int c = 0; c < 3; ++c) cam.K(r, c) = to_double(lines[6 + r][c], "cam file");
  }
  const auto& d = lines[9];
  require(d.size() == 2 || d.size() == 4, "cam file: depth line must have 2 or 4 values");
  cam.depth_min = to_double(d[0], "cam file");
  if (d.size() == 4) {
    cam.depth_max = to_double(d[3], "cam file");
  } else {
    cam.depth_max = cam.depth_min + to_double(d[1], "cam file") * 191.0;
  }
  require(lines.size() == 10, "cam file: trailing content after depth line");
  cam.validate(1e-4);
  return cam;
}

void write_cam(const std::filesystem::path& path, const Camera& cam, int depth_num) {
  write_file(path, format_cam(cam, depth_num));
}

Camera read_cam(const std::filesystem::path& path) {
  try {
    return parse_cam(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---- PFM -----------------------------------------------------------------

namespace {

std::string pfm_bytes(const char* magic, int h, int w, int ch, const double* data) {
  std::string s = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) +
                  "\n-1.0\n";
  const std::size_t header = s.size();
  s.resize(header + static_cast<std::size_t>(h) * w * ch * sizeof(float));
  char* out = s.data() + header;
  for (int r = h - 1; r >= 0; --r) {
    for (int i = 0; i < w * ch; ++i) {
      const float f = static_cast<float>(data[static_cast<std::size_t>(r) * w * ch + i]);
      std::memcpy(out, &f, sizeof f);
      out += sizeof f;
    }
  }
  return s;
}

struct PfmRaw {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;  // top-to-bottom
};

PfmRaw decode_pfm(const std::string& bytes) {
  // Header: three whitespace-terminated tokens groups; the payload follows the
  // single whitespace character after the scale.
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    require(pos > start, "PFM: truncated header");
    return bytes.substr(start, pos - start);
  };
  const std::string magic = next_token();
  PfmRaw raw;
  if (magic == "Pf") raw.channels = 1;
  else if (magic == "PF") raw.channels = 3;
  else throw Error("PFM: bad magic '" + magic.substr(0, 8) + "'");
  raw.width = static_cast<int>(to_long(next_token(), "PFM"));
  raw.height = static_cast<int>(to_long(next_token(), "PFM"));
  require(raw.width > 0 && raw.height > 0, "PFM: non-positive size");
  const double scale = to_double(next_token(), "PFM");
  require(scale != 0.0 && std::isfinite(scale), "PFM: scale must be non-zero");
  require(pos < bytes.size(), "PFM: missing payload");
  ++pos;  // single whitespace after the scale
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  require(bytes.size() - pos == n * sizeof(float),
          "PFM: payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
              std::to_string(n * sizeof(float)));
  raw.values.resize(n);
  const bool swap = scale > 0.0;
  const std::size_t row = static_cast<std::size_t>(raw.width) * raw.channels;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u;
    std::memcpy(&u, bytes.data() + pos + i * sizeof u, sizeof u);
    if (swap) u = __builtin_bswap32(u);
    const float f = std::bit_cast<float>(u);
    const std::size_t r = i / row, k = i % row;
    raw.values[(raw.height - 1 - r) * row + k] = f;
  }
  return raw;
}

}  // namespace

std::string encode_pfm(const ScalarField& field) {
  require(field.size() > 0, "PFM: empty field");
  return pfm_bytes("Pf", field.height(), field.width(), 1, field.data().data());
}

std::string encode_pfm(const Image& image) {
  require(image.channels() == 3, "PFM: colour PFM needs 3 channels");
  require(!image.empty(), "PFM: empty image");
  return pfm_bytes("PF", image.height(), image.width(), 3, image.data().data());
}

ScalarField decode_pfm_field(const std::string& bytes) {
  PfmRaw raw = decode_pfm(bytes);
  require(raw.channels == 1, "PFM: expected a single-channel (Pf) file");
  ScalarField f(raw.height, raw.width);
  std::copy(raw.values.begin(), raw.values.end(), f.data().begin());
  return f;
}

Image decode_pfm_image(const std::string& bytes) {
  PfmRaw raw = decode_pfm(bytes);
  require(raw.channels == 3, "PFM: expected a 3-channel (PF) file");
  Image img(raw.height, raw.width, 3);
  std::copy(raw.values.begin(), raw.values.end(), img.data().begin());
  return img;
}

void write_pfm(const std::filesystem::path& path, const ScalarField& field) {
  write_file(path, encode_pfm(field));
}
void write_pfm(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_pfm(image));
}
ScalarField read_pfm(const std::filesystem::path& path) {
  try {
    return decode_pfm_field(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}
Image read_pfm_image(const std::filesystem::path& path) {
  try {
    return decode_pfm_image(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// ---- pair ----------------------------------------------------------------

std::string format_pairs(const PairScores& pairs) {
  std::string s = std::to_string(pairs.size()) + "\n";
  for (const auto& [ref, scored] : pairs) {
    s += std::to_string(ref) + "\n" + std::to_string(scored.size());
    for (const auto& [id, score] : scored) s += " " + std::to_string(id) + " " + fmt(score);
    s += "\n";
  }
  return s;
}

PairScores parse_pairs(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> tok;
  for (std::string t; is >> t;) tok.push_back(t);
  std::size_t i = 0;
  auto next = [&]() -> const std::string& {
    require(i < tok.size(), "pair file: truncated");
    return tok[i++];
  };
  const long n = to_long(next(), "pair file");
  require(n >= 0, "pair file: negative view count");
  PairScores pairs;
  for (long v = 0; v < n; ++v) {
    const int ref = static_cast<int>(to_long(next(), "pair file"));
    const long k = to_long(next(), "pair file");
    require(k >= 0, "pair file: negative candidate count");
    ScoredViews scored;
    for (long j = 0; j < k; ++j) {
      const int id = static_cast<int>(to_long(next(), "pair file"));
      const double score = to_double(next(), "pair file");
      scored.emplace_back(id, score);
    }
    require(!pairs.count(ref), "pair file: duplicate reference " + std::to_string(ref));
    pairs[ref] = std::move(scored);
  }
  require(i == tok.size(), "pair file: trailing content");
  return pairs;
}

void write_pairs(const std::filesystem::path& path, const PairScores& pairs) {
  write_file(path, format_pairs(pairs));
}
PairScores read_pairs(const std::filesystem::path& path) { return parse_pairs(read_file(path)); }

// ---- PLY -----------------------------------------------------------------

std::string encode_ply(const PointCloud& cloud) {
  std::string s =
      "ply\nformat binary_little_endian 1.0\nelement vertex " +
      std::to_string(cloud.points.size()) +
      "\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  const std::size_t header = s.size();
  s.resize(header + cloud.points.size() * 15);
  char* out = s.data() + header;
  for (const CloudPoint& p : cloud.points) {
    for (float f : p.xyz) {
      require(std::isfinite(f), "PLY: non-finite coordinate");
      std::memcpy(out, &f, 4);
      out += 4;
    }
    for (std::uint8_t c : p.rgb) *out++ = static_cast<char>(c);
  }
  return s;
}

PointCloud decode_ply(const std::string& bytes) {
  const std::string end = "end_header\n";
  const std::size_t hend = bytes.find(end);
  require(bytes.rfind("ply\n", 0) == 0 && hend != std::string::npos, "PLY: bad header");
  std::istringstream hs(bytes.substr(0, hend));
  std::size_t count = 0;
  bool binary_le = false;
  std::vector<std::string> props;
  for (std::string line; std::getline(hs, line);) {
    const auto t = tokens(line);
    if (t.empty()) continue;
    if (t[0] == "format") binary_le = t.size() >= 2 && t[1] == "binary_little_endian";
    if (t[0] == "element" && t.size() == 3 && t[1] == "vertex")
      count = static_cast<std::size_t>(to_long(t[2], "PLY"));
    if (t[0] == "property" && t.size() == 3) props.push_back(t[1] + " " + t[2]);
  }
  require(binary_le, "PLY: only binary_little_endian is supported");
  const std::vector<std::string> expected = {"float x",   "float y",     "float z",
                                             "uchar red", "uchar green", "uchar blue"};
  require(props == expected, "PLY: unsupported vertex layout");
  const std::size_t pos = hend + end.size();
  require(bytes.size() - pos == count * 15, "PLY: payload size does not match vertex count");
  PointCloud cloud;
  cloud.points.resize(count);
  const char* in = bytes.data() + pos;
  for (CloudPoint& p : cloud.points) {
    for (float& f : p.xyz) {
      std::memcpy(&f, in, 4);
      in += 4;
    }
    for (std::uint8_t& c : p.rgb) c = static_cast<std::uint8_t>(*in++);
  }
  return cloud;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file(path, encode_ply(cloud));
}
PointCloud read_ply(const std::filesystem::path& path) { return decode_ply(read_file(path)); }

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::string s = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) +
                  "\n255\n";
  for (int r = 0; r < image.height(); ++r)
    for (int c = 0; c < image.width(); ++c)
      for (int k = 0; k < 3; ++k) {
        const double v = image.at(r, c, image.channels() == 3 ? k : 0);
        s += static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
  write_file(path, s);
}

// ---- scene directories ---------------------------------------------------

std::string view_file(int id, const std::string& suffix) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08d", id);
  return buf + suffix;
}

void write_scene_dir(const std::filesystem::path& dir, std::span<const CameraView> views,
                     const PairScores& pairs) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "cams");
  for (const CameraView& v : views) {
    write_pfm(dir / "images" / view_file(v.id, ".pfm"), v.image);
    write_cam(dir / "cams" / view_file(v.id, "_cam.txt"), v.camera);
    if (v.gt_depth) {
      fs::create_directories(dir / "depth_gt");
      write_pfm(dir / "depth_gt" / view_file(v.id, ".pfm"), *v.gt_depth);
    }
  }
  write_pairs(dir / "pair.txt", pairs);
}

SceneData read_scene_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), "scene directory not found: " + dir.string());
  SceneData out;
  out.pairs = read_pairs(dir / "pair.txt");
  for (const auto& [id, scored] : out.pairs) {
    CameraView v;
    v.id = id;
    v.image = read_pfm_image(dir / "images" / view_file(id, ".pfm"));
    v.camera = read_cam(dir / "cams" / view_file(id, "_cam.txt"));
    const fs::path gt = dir / "depth_gt" / view_file(id, ".pfm");
    if (fs::exists(gt)) {
      v.gt_depth = read_pfm(gt);
      require(v.gt_depth->height() == v.image.height() && v.gt_depth->width() == v.image.width(),
              gt.string() + ": shape does not match the image");
    }
    out.views.push_back(std::move(v));
  }
  require(out.views.size() >= 2, "scene directory needs at least 2 views");
  return out;
}

}  // namespace clmvs
