#include "aerotri/features/image.h"

#include <cctype>
#include <string>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"

namespace aerotri {
namespace {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint32_t NextInt() {
    SkipSpaceAndComments();
    uint64_t value = 0;
    size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 0xFFFFFFFFull) {
        throw Error(ErrorCode::kParseError, "PGM header value too large");
      }
      ++pos_;
      ++digits;
    }
    if (digits == 0) {
      throw Error(ErrorCode::kParseError, "malformed PGM header");
    }
    return static_cast<uint32_t>(value);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  size_t RasterOffset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(ErrorCode::kParseError, "malformed PGM header");
    }
    return pos_ + 1;
  }

  size_t pos_ = 2;

 private:
  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
          ++pos_;
        }
      } else {
        break;
      }
    }
  }

  std::span<const uint8_t> bytes_;
};

}  // namespace

GrayImage DecodePgm(std::span<const uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(ErrorCode::kBadMagic, "not a binary PGM (P5)");
  }
  PgmHeaderReader reader(bytes);
  const uint32_t width = reader.NextInt();
  const uint32_t height = reader.NextInt();
  const uint32_t maxval = reader.NextInt();
  if (maxval != 255) {
    throw Error(ErrorCode::kParseError,
                "PGM maxval must be 255, got " + std::to_string(maxval));
  }
  const size_t offset = reader.RasterOffset();
  const size_t count = static_cast<size_t>(width) * height;
  if (bytes.size() - offset < count) {
    throw Error(ErrorCode::kTruncatedFile, "PGM raster is truncated");
  }
  GrayImage image;
  image.width = width;
  image.height = height;
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                      bytes.begin() + static_cast<std::ptrdiff_t>(offset + count));
  return image;
}

std::vector<uint8_t> EncodePgm(const GrayImage& image) {
  const std::string header = "P5\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage ReadPgm(const std::filesystem::path& path) {
  const std::vector<uint8_t> bytes = ReadBinaryFile(path);
  try {
    return DecodePgm(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void WritePgm(const std::filesystem::path& path, const GrayImage& image) {
  WriteBinaryFile(path, EncodePgm(image));
}

}  // namespace aerotri
