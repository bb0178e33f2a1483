#include "epiflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "epiflow/errors.hpp"

namespace epiflow {

namespace {

constexpr float kFloMagic = 202021.25f;
constexpr double kInvalidSentinel = 1e10;
constexpr double kInvalidThreshold = 1e9;

void append_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint8_t raw[4];
  std::memcpy(raw, &v, 4);
  out.insert(out.end(), raw, raw + 4);
}

void append_i32(std::vector<std::uint8_t>& out, std::int32_t v) {
  std::uint8_t raw[4];
  std::memcpy(raw, &v, 4);
  out.insert(out.end(), raw, raw + 4);
}

float read_f32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  float v;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

std::int32_t read_i32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::int32_t v;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

bool numeric_start(const std::string& line) {
  for (char c : line) {
    if (c == ' ' || c == '\t') continue;
    return (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
  }
  return false;
}

std::vector<double> parse_numbers(const std::string& line, std::size_t expected,
                                  const std::string& what) {
  std::istringstream in(line);
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  if (values.size() != expected) {
    throw IoError(what + ": expected " + std::to_string(expected) + " numbers, got " +
                  std::to_string(values.size()));
  }
  return values;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

FlowField read_flo(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw TruncatedPayload(".flo: shorter than its 12-byte header");
  const float magic = read_f32(bytes, 0);
  if (magic != kFloMagic) throw BadMagic(".flo: bad magic (expected 202021.25)");
  const std::int32_t w = read_i32(bytes, 4);
  const std::int32_t h = read_i32(bytes, 8);
  if (w < 1 || h < 1) throw NonPositiveDims(".flo: non-positive dimensions");
  const std::size_t payload = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 8u;
  if (bytes.size() < 12 + payload) {
    throw TruncatedPayload(".flo: payload shorter than 8*W*H bytes");
  }
  FlowField flow(w, h);
  std::size_t offset = 12;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double du = read_f32(bytes, offset);
      const double dv = read_f32(bytes, offset + 4);
      offset += 8;
      const bool invalid = !std::isfinite(du) || !std::isfinite(dv) ||
                           std::abs(du) > kInvalidThreshold || std::abs(dv) > kInvalidThreshold;
      flow.set(u, v, invalid ? Eigen::Vector2d::Zero() : Eigen::Vector2d(du, dv), !invalid);
    }
  }
  return flow;
}

std::vector<std::uint8_t> write_flo(const FlowField& flow) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + flow.grid().size() * 8);
  append_f32(out, kFloMagic);
  append_i32(out, flow.width());
  append_i32(out, flow.height());
  for (int v = 0; v < flow.height(); ++v) {
    for (int u = 0; u < flow.width(); ++u) {
      if (flow.valid_at(u, v)) {
        append_f32(out, static_cast<float>(flow.vector_at(u, v).x()));
        append_f32(out, static_cast<float>(flow.vector_at(u, v).y()));
      } else {
        append_f32(out, static_cast<float>(kInvalidSentinel));
        append_f32(out, static_cast<float>(kInvalidSentinel));
      }
    }
  }
  return out;
}

FlowField read_flo_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return read_flo(bytes);
}

void write_flo_file(const std::filesystem::path& path, const FlowField& flow) {
  write_file_bytes(path, write_flo(flow));
}

CameraIntrinsics parse_intrinsics(const std::string& line) {
  const auto v = parse_numbers(line, 5, "intrinsics record");
  CameraIntrinsics k{v[0], v[1], v[2], v[3], v[4]};
  k.validate();
  return k;
}

std::string format_intrinsics(const CameraIntrinsics& k) {
  return format_full(k.fx) + " " + format_full(k.fy) + " " + format_full(k.cx) + " " +
         format_full(k.cy) + " " + format_full(k.skew);
}

RelativePose parse_pose(const std::string& line) {
  const auto v = parse_numbers(line, 12, "pose record");
  RelativePose pose;
  pose.rotation << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  pose.translation << v[9], v[10], v[11];
  pose.validate();
  return pose;
}

std::string format_pose(const RelativePose& pose) {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out += format_full(pose.rotation(r, c)) + " ";
    }
  }
  out += format_full(pose.translation.x()) + " " + format_full(pose.translation.y()) + " " +
         format_full(pose.translation.z());
  return out;
}

std::vector<CameraIntrinsics> read_cameras_file(const std::filesystem::path& path) {
  std::istringstream in(read_file_text(path));
  std::vector<CameraIntrinsics> cams;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    cams.push_back(parse_intrinsics(line));
  }
  if (cams.empty()) throw IoError(path.string() + ": no intrinsics records");
  return cams;
}

RelativePose read_pose_file(const std::filesystem::path& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    return parse_pose(line);
  }
  throw IoError(path.string() + ": no pose record");
}

void write_pose_file(const std::filesystem::path& path, const RelativePose& pose) {
  write_file_text(path, format_pose(pose) + "\n");
}

FundamentalMatrix read_fmat_file(const std::filesystem::path& path) {
  const auto v = parse_numbers(read_file_text(path), 9, "fundamental matrix record");
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return FundamentalMatrix(m);
}

void write_fmat_file(const std::filesystem::path& path, const FundamentalMatrix& f) {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out += format_full(f.matrix()(r, c));
      out += (r == 2 && c == 2) ? "\n" : " ";
    }
  }
  write_file_text(path, out);
}

Homography read_homography_file(const std::filesystem::path& path) {
  const auto v = parse_numbers(read_file_text(path), 9, "homography record");
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return Homography(m);
}

void write_homography_file(const std::filesystem::path& path, const Homography& h) {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out += format_full(h.matrix()(r, c));
      out += (r == 2 && c == 2) ? "\n" : " ";
    }
  }
  write_file_text(path, out);
}

KeypointSet read_keypoints(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw TruncatedPayload("keypoints: shorter than the EPKP header");
  if (std::memcmp(bytes.data(), "EPKP", 4) != 0) throw BadMagic("keypoints: bad magic");
  std::uint32_t count, dim;
  std::memcpy(&count, bytes.data() + 4, 4);
  std::memcpy(&dim, bytes.data() + 8, 4);
  if (dim == 0) throw NonPositiveDims("keypoints: zero descriptor dimension");
  const std::size_t record = 8u + 4u * dim;
  if (bytes.size() < 12 + record * count) throw TruncatedPayload("keypoints: truncated payload");

  std::vector<Eigen::Vector2d> points(count);
  Eigen::MatrixXd desc(dim, count);
  std::size_t offset = 12;
  for (std::uint32_t i = 0; i < count; ++i) {
    points[i].x() = read_f32(bytes, offset);
    points[i].y() = read_f32(bytes, offset + 4);
    offset += 8;
    for (std::uint32_t d = 0; d < dim; ++d) {
      desc(d, i) = read_f32(bytes, offset);
      offset += 4;
    }
  }
  return KeypointSet::create(std::move(points), std::move(desc));
}

std::vector<std::uint8_t> write_keypoints(const KeypointSet& kps) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'E', 'P', 'K', 'P'});
  const std::uint32_t count = static_cast<std::uint32_t>(kps.size());
  const std::uint32_t dim = static_cast<std::uint32_t>(kps.descriptor_dim());
  out.resize(12);
  std::memcpy(out.data() + 4, &count, 4);
  std::memcpy(out.data() + 8, &dim, 4);
  for (std::uint32_t i = 0; i < count; ++i) {
    append_f32(out, static_cast<float>(kps.points()[i].x()));
    append_f32(out, static_cast<float>(kps.points()[i].y()));
    for (std::uint32_t d = 0; d < dim; ++d) {
      append_f32(out, static_cast<float>(kps.descriptors()(d, i)));
    }
  }
  return out;
}

namespace {

KeypointSet read_keypoints_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<Eigen::Vector2d> points;
  std::vector<std::vector<double>> descs;
  while (std::getline(in, line)) {
    if (line.empty() || !numeric_start(line)) continue;
    const auto fields = split_csv(line);
    if (fields.size() < 3) throw IoError("keypoint csv: need x,y and at least one component");
    std::vector<double> values;
    for (const auto& f : fields) {
      try {
        values.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw IoError("keypoint csv: bad number '" + f + "'");
      }
    }
    points.emplace_back(values[0], values[1]);
    descs.emplace_back(values.begin() + 2, values.end());
    if (descs.back().size() != descs.front().size()) {
      throw IoError("keypoint csv: inconsistent descriptor dimension");
    }
  }
  if (points.empty()) throw IoError("keypoint csv: no records");
  Eigen::MatrixXd desc(descs.front().size(), points.size());
  for (std::size_t i = 0; i < descs.size(); ++i) {
    for (std::size_t d = 0; d < descs[i].size(); ++d) desc(d, i) = descs[i][d];
  }
  return KeypointSet::create(std::move(points), std::move(desc));
}

}  // namespace

KeypointSet read_keypoints_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "EPKP", 4) == 0) {
    return read_keypoints(bytes);
  }
  return read_keypoints_csv(std::string(bytes.begin(), bytes.end()));
}

void write_keypoints_file(const std::filesystem::path& path, const KeypointSet& kps) {
  write_file_bytes(path, write_keypoints(kps));
}

CorrespondenceSet read_matches_csv_file(const std::filesystem::path& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  CorrespondenceSet matches;
  while (std::getline(in, line)) {
    if (line.empty() || !numeric_start(line)) continue;
    const auto fields = split_csv(line);
    if (fields.size() < 4) throw IoError("match csv: need xa,ya,xb,yb");
    double v[4];
    for (int i = 0; i < 4; ++i) {
      try {
        v[i] = std::stod(fields[i]);
      } catch (const std::exception&) {
        throw IoError("match csv: bad number '" + fields[i] + "'");
      }
    }
    matches.a.emplace_back(v[0], v[1]);
    matches.b.emplace_back(v[2], v[3]);
  }
  return matches;
}

void write_matches_csv_file(const std::filesystem::path& path, const CorrespondenceSet& matches) {
  std::string out = "xa,ya,xb,yb\n";
  for (std::size_t i = 0; i < matches.size(); ++i) {
    out += format_full(matches.a[i].x()) + "," + format_full(matches.a[i].y()) + "," +
           format_full(matches.b[i].x()) + "," + format_full(matches.b[i].y()) + "\n";
  }
  write_file_text(path, out);
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw ValidationError("config line is not key=value: '" + line + "'");
      }
      continue;
    }
    auto trim = [](std::string s) {
      const auto from = s.find_first_not_of(" \t\r");
      const auto to = s.find_last_not_of(" \t\r");
      return from == std::string::npos ? std::string() : s.substr(from, to - from + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError("config line has empty key: '" + line + "'");
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> read_key_values_file(const std::filesystem::path& path) {
  return parse_key_values(read_file_text(path));
}

Image read_pnm_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 2) throw TruncatedPayload(path.string() + ": not a PNM file");
  const char p = static_cast<char>(bytes[0]);
  const char kind = static_cast<char>(bytes[1]);
  if (p != 'P' || (kind != '5' && kind != '6')) {
    throw BadMagic(path.string() + ": only binary P5/P6 PNM supported");
  }
  // Header tokens with '#' comment lines.
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos;
      } else {
        break;
      }
    }
    long value = 0;
    bool any = false;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw IoError(path.string() + ": malformed PNM header");
    return value;
  };
  Image img;
  img.width = static_cast<int>(next_token());
  img.height = static_cast<int>(next_token());
  const long maxval = next_token();
  if (img.width < 1 || img.height < 1) throw NonPositiveDims(path.string() + ": bad dimensions");
  if (maxval != 255) throw IoError(path.string() + ": only maxval 255 supported");
  ++pos;  // single whitespace after maxval
  img.channels = kind == '5' ? 1 : 3;
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (bytes.size() < pos + need) throw TruncatedPayload(path.string() + ": truncated pixel data");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

void write_pnm_file(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw ValidationError("PNM supports 1 or 3 channels");
  std::string header = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  write_file_bytes(path, out);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_file_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span<const std::uint8_t>(
                             reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_file_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  return fnv1a64(read_file_bytes(path));
}

std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace epiflow
