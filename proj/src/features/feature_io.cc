#include "aerotri/features/feature_io.h"

#include <bit>
#include <cmath>
#include <cstring>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"

namespace aerotri {
namespace {

constexpr char kMagic[4] = {'F', 'E', 'A', 'T'};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint32_t U32(const char* what) {
    Require(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(bytes_[offset_ + i]) << (8 * i);
    }
    offset_ += 4;
    return v;
  }

  float F32(const char* what) { return std::bit_cast<float>(U32(what)); }

  size_t Remaining() const { return bytes_.size() - offset_; }

 private:
  void Require(size_t n, const char* what) {
    if (Remaining() < n) {
      throw Error(ErrorCode::kTruncatedFile,
                  std::string("file ends inside ") + what + " at byte " +
                      std::to_string(offset_));
    }
  }

  std::span<const uint8_t> bytes_;
  size_t offset_ = 0;
};

void PutU32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFFu));
  }
}

void PutF32(std::vector<uint8_t>& out, float v) {
  PutU32(out, std::bit_cast<uint32_t>(v));
}

}  // namespace

FeatureSet ReadFeatureFile(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "missing FEAT magic");
  }
  ByteReader reader(bytes.subspan(4));
  const uint32_t version = reader.U32("header");
  if (version != kFeatureFileVersion) {
    throw Error(ErrorCode::kBadVersion,
                "unsupported FEAT version " + std::to_string(version));
  }
  FeatureSet fs;
  fs.image_width = reader.U32("header");
  fs.image_height = reader.U32("header");
  const uint32_t n = reader.U32("header");
  const uint32_t d = reader.U32("header");

  // Size check up front so corrupt counts never drive an allocation.
  const uint64_t expected = 12ull * n + 4ull * n * d;
  if (reader.Remaining() < expected) {
    if (reader.Remaining() < 12ull * n) {
      throw Error(ErrorCode::kTruncatedFile, "file ends inside keypoints");
    }
    throw Error(ErrorCode::kTruncatedFile, "file ends inside descriptors");
  }
  if (reader.Remaining() > expected) {
    throw Error(ErrorCode::kParseError,
                "unexpected trailing bytes after descriptors");
  }

  fs.keypoints.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    Keypoint& kp = fs.keypoints[i];
    kp.x = reader.F32("keypoints");
    kp.y = reader.F32("keypoints");
    kp.score = reader.F32("keypoints");
    if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || !fs.InBounds(kp)) {
      throw Error(ErrorCode::kBoundsViolation,
                  "keypoint " + std::to_string(i) + " at (" +
                      std::to_string(kp.x) + ", " + std::to_string(kp.y) +
                      ") outside " + std::to_string(fs.image_width) + "x" +
                      std::to_string(fs.image_height));
    }
  }
  fs.descriptors.resize(n, d);
  for (uint32_t i = 0; i < n; ++i) {
    for (uint32_t j = 0; j < d; ++j) {
      fs.descriptors(i, j) = reader.F32("descriptors");
    }
  }
  return fs;
}

std::vector<uint8_t> WriteFeatureFile(const FeatureSet& features) {
  features.CheckInvariants();
  const size_t n = features.NumFeatures();
  const size_t d = static_cast<size_t>(features.DescriptorDim());

  std::vector<uint8_t> out;
  out.reserve(kFeatureHeaderBytes + 12 * n + 4 * n * d);
  out.insert(out.end(), kMagic, kMagic + 4);
  PutU32(out, kFeatureFileVersion);
  PutU32(out, features.image_width);
  PutU32(out, features.image_height);
  PutU32(out, static_cast<uint32_t>(n));
  PutU32(out, static_cast<uint32_t>(d));

  for (size_t i = 0; i < n; ++i) {
    const Keypoint& kp = features.keypoints[i];
    const Keypoint stored{static_cast<float>(kp.x), static_cast<float>(kp.y),
                          static_cast<float>(kp.score)};
    if (!features.InBounds(stored)) {
      throw Error(ErrorCode::kInvariantViolation,
                  "keypoint " + std::to_string(i) +
                      " leaves the image after f32 rounding");
    }
    PutF32(out, static_cast<float>(kp.x));
    PutF32(out, static_cast<float>(kp.y));
    PutF32(out, static_cast<float>(kp.score));
  }
  for (size_t i = 0; i < n; ++i) {
    const auto row = features.descriptors.row(static_cast<Eigen::Index>(i));
    if (!row.allFinite() || !(row.norm() > 0.0)) {
      throw Error(ErrorCode::kInvariantViolation,
                  "descriptor " + std::to_string(i) +
                      " is zero or non-finite");
    }
    for (size_t j = 0; j < d; ++j) {
      PutF32(out, static_cast<float>(row(static_cast<Eigen::Index>(j))));
    }
  }
  return out;
}

FeatureSet LoadFeatureFile(const std::filesystem::path& path) {
  const std::vector<uint8_t> bytes = ReadBinaryFile(path);
  try {
    FeatureSet fs = ReadFeatureFile(bytes);
    fs.image_id = path.stem().string();
    return fs;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void SaveFeatureFile(const std::filesystem::path& path,
                     const FeatureSet& features) {
  WriteBinaryFile(path, WriteFeatureFile(features));
}

}  // namespace aerotri
