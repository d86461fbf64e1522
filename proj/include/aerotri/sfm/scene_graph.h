#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "aerotri/features/feature_set.h"
#include "aerotri/matching/matcher.h"

namespace aerotri {

// Geometrically verified matches between two images, indices into the
// scene graph's image list.
struct VerifiedPair {
  size_t image_a = 0;
  size_t image_b = 0;
  std::vector<Match> inliers;
};

struct TrackElement {
  size_t image = 0;
  size_t keypoint = 0;

  auto operator<=>(const TrackElement&) const = default;
};

// Keypoints in different images that observe one scene point. Sorted by
// image, at most one element per image.
struct Track {
  std::vector<TrackElement> elements;
};

class SceneGraph {
 public:
  using PairKey = std::pair<size_t, size_t>;

  SceneGraph() = default;
  // Pairs are stored with image_a < image_b (matches are swapped otherwise);
  // pairs without inliers are dropped. Throws InvariantViolation for an
  // unknown image index, a duplicate pair, a self-pair or a keypoint index
  // out of range, and DuplicateImageId for repeated image ids.
  SceneGraph(std::vector<FeatureSet> images, std::vector<VerifiedPair> pairs);

  const std::vector<FeatureSet>& images() const { return images_; }
  const FeatureSet& image(size_t i) const { return images_.at(i); }
  size_t NumImages() const { return images_.size(); }
  const std::map<PairKey, std::vector<Match>>& pairs() const { return pairs_; }

  // Throws InvariantViolation for an unknown id.
  size_t ImageIndex(const std::string& image_id) const;

 private:
  std::vector<FeatureSet> images_;
  std::map<PairKey, std::vector<Match>> pairs_;
  std::map<std::string, size_t> index_;
};

// Transitive closure of the pair matches. Components containing two
// keypoints of one image are discarded. Tracks are ordered by their first
// element.
std::vector<Track> BuildTracks(const SceneGraph& graph);

}  // namespace aerotri
