#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "epiflow/flow_field.hpp"
#include "epiflow/geometry.hpp"
#include "epiflow/matcher.hpp"
#include "epiflow/model_fit.hpp"

namespace epiflow {

// ---------------------------------------------------------------------------
// .flo dense flow: f32 magic 202021.25 ("PIEH"), i32 width, i32 height, then
// H x W x 2 f32 (du, dv) row-major, all little-endian. Invalid pixels are
// written as the 1e10 sentinel; on read, any component with magnitude > 1e9
// masks the pixel invalid.
// ---------------------------------------------------------------------------

FlowField read_flo(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_flo(const FlowField& flow);

FlowField read_flo_file(const std::filesystem::path& path);
void write_flo_file(const std::filesystem::path& path, const FlowField& flow);

// ---------------------------------------------------------------------------
// Camera / pose text records: one record per line, whitespace separated.
//   intrinsics: fx fy cx cy skew
//   pose:       r11 r12 r13 r21 r22 r23 r31 r32 r33 tx ty tz
// ---------------------------------------------------------------------------

CameraIntrinsics parse_intrinsics(const std::string& line);
std::string format_intrinsics(const CameraIntrinsics& k);
RelativePose parse_pose(const std::string& line);
std::string format_pose(const RelativePose& pose);

/// All intrinsics records in the file (one camera per line).
std::vector<CameraIntrinsics> read_cameras_file(const std::filesystem::path& path);
RelativePose read_pose_file(const std::filesystem::path& path);
void write_pose_file(const std::filesystem::path& path, const RelativePose& pose);

/// Nine whitespace-separated numbers, row-major.
FundamentalMatrix read_fmat_file(const std::filesystem::path& path);
void write_fmat_file(const std::filesystem::path& path, const FundamentalMatrix& f);
Homography read_homography_file(const std::filesystem::path& path);
void write_homography_file(const std::filesystem::path& path, const Homography& h);

// ---------------------------------------------------------------------------
// Keypoints: binary "EPKP" + u32 count + u32 dim, then per keypoint
// f32 x, f32 y, f32[dim] descriptor, little-endian. A CSV form
// (x,y,d0,...,dD-1 per line, optional header) is also accepted on read.
// ---------------------------------------------------------------------------

KeypointSet read_keypoints(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_keypoints(const KeypointSet& kps);
KeypointSet read_keypoints_file(const std::filesystem::path& path);
void write_keypoints_file(const std::filesystem::path& path, const KeypointSet& kps);

// ---------------------------------------------------------------------------
// Matches CSV: xa,ya,xb,yb per line; extra columns are ignored on read.
// ---------------------------------------------------------------------------

CorrespondenceSet read_matches_csv_file(const std::filesystem::path& path);
void write_matches_csv_file(const std::filesystem::path& path, const CorrespondenceSet& matches);

// ---------------------------------------------------------------------------
// Flat key=value config ('#' comments and blank lines skipped).
// ---------------------------------------------------------------------------

std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> read_key_values_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Minimal binary PGM (P5) / PPM (P6), maxval 255 only; used by the demo warp
// command.
// ---------------------------------------------------------------------------

struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved

  std::uint8_t at(int u, int v, int c) const {
    return pixels[(static_cast<std::size_t>(v) * width + u) * channels + c];
  }
};

Image read_pnm_file(const std::filesystem::path& path);
void write_pnm_file(const std::filesystem::path& path, const Image& img);

// ---------------------------------------------------------------------------
// Helpers.
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_text(const std::filesystem::path& path, const std::string& text);
std::string read_file_text(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);

/// Shortest decimal that round-trips the double ("%.17g").
std::string format_full(double v);

}  // namespace epiflow
