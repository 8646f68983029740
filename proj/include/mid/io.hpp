#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mid/tensor.hpp"

namespace mid {

// MIDT binary tensor format: magic "MIDT", version u16, rank u16,
// dims u64 each, payload little-endian f64, no padding.
inline constexpr std::uint16_t kTensorFormatVersion = 1;

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t);
Tensor tensor_from_bytes(const std::uint8_t* data, std::size_t size, std::size_t* consumed);

/// 8-bit binary PGM (P5) preview of a [H,W] or [1,H,W] tensor; values
/// clamped to [0,1] then scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const Tensor& image);

/// Point-set CSV: header "x,y,label", one row per point.
void write_points_csv(const std::filesystem::path& path, const Tensor& points,
                      const std::vector<int>& labels);
struct PointsCsv {
  Tensor points;  // [N,2]
  std::vector<int> labels;
};
PointsCsv read_points_csv(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace mid
