#include "aerotri/sfm/scene_graph.h"

#include <algorithm>
#include <numeric>

#include "aerotri/common/error.h"

namespace aerotri {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), size_t{0});
  }

  size_t Find(size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void Union(size_t a, size_t b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<size_t> parent_;
  std::vector<uint8_t> rank_;
};

}  // namespace

SceneGraph::SceneGraph(std::vector<FeatureSet> images,
                       std::vector<VerifiedPair> pairs)
    : images_(std::move(images)) {
  for (size_t i = 0; i < images_.size(); ++i) {
    if (!index_.emplace(images_[i].image_id, i).second) {
      throw Error(ErrorCode::kDuplicateImageId,
                  "image id '" + images_[i].image_id + "' appears twice");
    }
  }
  for (VerifiedPair& pair : pairs) {
    if (pair.image_a >= images_.size() || pair.image_b >= images_.size() ||
        pair.image_a == pair.image_b) {
      throw Error(ErrorCode::kInvariantViolation,
                  "verified pair references an invalid image");
    }
    if (pair.inliers.empty()) {
      continue;
    }
    if (pair.image_a > pair.image_b) {
      std::swap(pair.image_a, pair.image_b);
      for (Match& m : pair.inliers) std::swap(m.index_a, m.index_b);
    }
    const size_t na = images_[pair.image_a].NumFeatures();
    const size_t nb = images_[pair.image_b].NumFeatures();
    for (const Match& m : pair.inliers) {
      if (m.index_a < 0 || m.index_b < 0 ||
          static_cast<size_t>(m.index_a) >= na ||
          static_cast<size_t>(m.index_b) >= nb) {
        throw Error(ErrorCode::kInvariantViolation,
                    "match keypoint index out of range");
      }
    }
    const PairKey key(pair.image_a, pair.image_b);
    if (!pairs_.emplace(key, std::move(pair.inliers)).second) {
      throw Error(ErrorCode::kInvariantViolation, "duplicate image pair");
    }
  }
}

size_t SceneGraph::ImageIndex(const std::string& image_id) const {
  const auto it = index_.find(image_id);
  if (it == index_.end()) {
    throw Error(ErrorCode::kInvariantViolation,
                "unknown image id '" + image_id + "'");
  }
  return it->second;
}

std::vector<Track> BuildTracks(const SceneGraph& graph) {
  std::vector<size_t> offset(graph.NumImages() + 1, 0);
  for (size_t i = 0; i < graph.NumImages(); ++i) {
    offset[i + 1] = offset[i] + graph.image(i).NumFeatures();
  }
  DisjointSets sets(offset.back());
  std::vector<bool> touched(offset.back(), false);
  for (const auto& [key, matches] : graph.pairs()) {
    for (const Match& m : matches) {
      const size_t a = offset[key.first] + static_cast<size_t>(m.index_a);
      const size_t b = offset[key.second] + static_cast<size_t>(m.index_b);
      touched[a] = touched[b] = true;
      sets.Union(a, b);
    }
  }

  // Node ids increase with (image, keypoint), so visiting nodes in order
  // yields sorted elements and tracks ordered by their first element.
  std::map<size_t, size_t> root_to_track;
  std::vector<Track> components;
  size_t image = 0;
  for (size_t node = 0; node < offset.back(); ++node) {
    while (node >= offset[image + 1]) ++image;
    if (!touched[node]) continue;
    const size_t root = sets.Find(node);
    auto [it, inserted] = root_to_track.emplace(root, components.size());
    if (inserted) components.emplace_back();
    components[it->second].elements.push_back({image, node - offset[image]});
  }

  std::vector<Track> tracks;
  tracks.reserve(components.size());
  for (Track& track : components) {
    bool consistent = track.elements.size() >= 2;
    for (size_t k = 1; consistent && k < track.elements.size(); ++k) {
      consistent = track.elements[k].image != track.elements[k - 1].image;
    }
    if (consistent) {
      tracks.push_back(std::move(track));
    }
  }
  return tracks;
}

}  // namespace aerotri
