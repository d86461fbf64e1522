#include "aerotri/features/detector.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "aerotri/common/error.h"

namespace aerotri {
namespace {

struct Candidate {
  double response;
  int x;
  int y;
};

class Raster {
 public:
  Raster(int width, int height)
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * height, 0.0) {}

  double& at(int x, int y) { return data_[Index(x, y)]; }
  double at(int x, int y) const { return data_[Index(x, y)]; }

  // Replicates the border.
  double Clamped(int x, int y) const {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

 private:
  size_t Index(int x, int y) const {
    return static_cast<size_t>(y) * width_ + x;
  }

  int width_;
  int height_;
  std::vector<double> data_;
};

constexpr int kPatchSize = 16;
constexpr int kBorder = 2;

}  // namespace

FeatureSet DetectBuiltin(const GrayImage& image, const HarrisOptions& options) {
  if (image.width < kMinDetectImageSize || image.height < kMinDetectImageSize) {
    throw Error(ErrorCode::kTooSmall,
                "image " + std::to_string(image.width) + "x" +
                    std::to_string(image.height) + " is below 32x32");
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);

  Raster intensity(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      intensity.at(x, y) = image.at(x, y);
    }
  }

  Raster ixx(w, h), iyy(w, h), ixy(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx =
          0.5 * (intensity.Clamped(x + 1, y) - intensity.Clamped(x - 1, y));
      const double gy =
          0.5 * (intensity.Clamped(x, y + 1) - intensity.Clamped(x, y - 1));
      ixx.at(x, y) = gx * gx;
      iyy.at(x, y) = gy * gy;
      ixy.at(x, y) = gx * gy;
    }
  }

  // 3x3 binomial window over the structure tensor.
  constexpr double kWeights[3] = {0.25, 0.5, 0.25};
  Raster response(w, h);
  double max_response = 0.0;
  for (int y = kBorder; y < h - kBorder; ++y) {
    for (int x = kBorder; x < w - kBorder; ++x) {
      double sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double wgt = kWeights[dx + 1] * kWeights[dy + 1];
          sxx += wgt * ixx.at(x + dx, y + dy);
          syy += wgt * iyy.at(x + dx, y + dy);
          sxy += wgt * ixy.at(x + dx, y + dy);
        }
      }
      const double trace = sxx + syy;
      const double r = sxx * syy - sxy * sxy - options.harris_k * trace * trace;
      response.at(x, y) = r;
      max_response = std::max(max_response, r);
    }
  }

  FeatureSet fs;
  fs.image_width = image.width;
  fs.image_height = image.height;
  fs.descriptors.resize(0, kBuiltinDescriptorDim);
  if (max_response <= 0.0) {
    return fs;
  }

  // Plateaus keep only their first pixel in raster order.
  const double floor = options.quality_level * max_response;
  std::vector<Candidate> candidates;
  for (int y = kBorder; y < h - kBorder; ++y) {
    for (int x = kBorder; x < w - kBorder; ++x) {
      const double r = response.at(x, y);
      if (r <= 0.0 || r < floor) {
        continue;
      }
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) {
            continue;
          }
          const double other = response.Clamped(x + dx, y + dy);
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (other > r || (earlier && other == r)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) {
        candidates.push_back({r, x, y});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.response != b.response) return a.response > b.response;
              if (a.y != b.y) return a.y < b.y;
              return a.x < b.x;
            });

  std::vector<Eigen::VectorXd> descriptors;
  for (const Candidate& c : candidates) {
    if (fs.keypoints.size() >= options.max_features) {
      break;
    }
    Eigen::VectorXd desc(kBuiltinDescriptorDim);
    int k = 0;
    for (int py = 0; py < kPatchSize; ++py) {
      for (int px = 0; px < kPatchSize; px += 2) {
        const int sx = c.x - kPatchSize / 2 + px;
        const int sy = c.y - kPatchSize / 2 + py;
        desc(k++) = 0.5 * (intensity.Clamped(sx, sy) +
                           intensity.Clamped(sx + 1, sy));
      }
    }
    desc.array() -= desc.mean();
    const double norm = desc.norm();
    if (norm < 1e-12) {
      continue;
    }
    descriptors.push_back(desc / norm);
    fs.keypoints.push_back({static_cast<double>(c.x),
                            static_cast<double>(c.y), c.response});
  }

  fs.descriptors.resize(static_cast<Eigen::Index>(descriptors.size()),
                        kBuiltinDescriptorDim);
  for (size_t i = 0; i < descriptors.size(); ++i) {
    fs.descriptors.row(static_cast<Eigen::Index>(i)) = descriptors[i];
  }
  return fs;
}

}  // namespace aerotri
