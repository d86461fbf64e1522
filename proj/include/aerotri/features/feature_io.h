#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "aerotri/features/feature_set.h"

namespace aerotri {

// FEAT binary layout, little-endian:
//   "FEAT"  u32 version=1  u32 width  u32 height  u32 N  u32 D
//   N x (f32 x, f32 y, f32 score)
//   N x D f32 descriptor values, row-major
inline constexpr uint32_t kFeatureFileVersion = 1;
inline constexpr size_t kFeatureHeaderBytes = 24;

FeatureSet ReadFeatureFile(std::span<const uint8_t> bytes);
std::vector<uint8_t> WriteFeatureFile(const FeatureSet& features);

// The image id of a file-backed feature set is the file stem.
FeatureSet LoadFeatureFile(const std::filesystem::path& path);
void SaveFeatureFile(const std::filesystem::path& path,
                     const FeatureSet& features);

}  // namespace aerotri
