#include "aerotri/sfm/incremental.h"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "aerotri/common/error.h"
#include "aerotri/geometry/pnp.h"
#include "aerotri/geometry/triangulation.h"
#include "aerotri/sfm/bundle_problem.h"

namespace aerotri {
namespace {

constexpr int64_t kNoTrack = -1;

class IncrementalMapper {
 public:
  IncrementalMapper(const SceneGraph& graph, const std::vector<Track>& tracks,
                    const CameraModel& camera, const SfmConfig& config)
      : graph_(graph), tracks_(tracks), config_(config) {
    recon_.camera = camera;
    for (const FeatureSet& fs : graph.images()) {
      recon_.image_ids.push_back(fs.image_id);
      track_of_.emplace_back(fs.NumFeatures(), kNoTrack);
    }
    for (size_t t = 0; t < tracks.size(); ++t) {
      for (const TrackElement& e : tracks[t].elements) {
        track_of_[e.image][e.keypoint] = static_cast<int64_t>(t);
      }
    }
  }

  Reconstruction Run(IncrementalLog* log) {
    InitializeFromSeed();
    log_.registration_order = {recon_.gauge.fixed_image,
                               recon_.gauge.scale_image};

    std::map<size_t, int> attempts;
    std::set<size_t> blocked;
    std::set<size_t> dead;
    size_t since_global = 0;
    bool global_since_block = false;
    while (true) {
      const std::optional<size_t> next = NextImage(blocked, dead);
      if (!next) {
        if (!blocked.empty() && !global_since_block) {
          GlobalAdjust(false);
          blocked.clear();
          global_since_block = true;
          since_global = 0;
          continue;
        }
        break;
      }
      const size_t image = *next;
      if (!Register(image)) {
        if (++attempts[image] >= 2) {
          dead.insert(image);
        } else {
          blocked.insert(image);
          global_since_block = false;
        }
        continue;
      }
      log_.registration_order.push_back(image);
      TriangulateTracksOf(image);
      LocalAdjust(image);
      if (++since_global >= config_.global_ba_interval) {
        GlobalAdjust(false);
        since_global = 0;
        blocked.clear();
      }
    }

    log_.final_adjustment = GlobalAdjust(true);
    const FilterStats stats = Filter();
    if (stats.points_removed > 0 || stats.observations_removed > 0) {
      log_.final_adjustment = GlobalAdjust(true);
      Filter();
    }

    for (size_t i = 0; i < graph_.NumImages(); ++i) {
      if (!recon_.IsRegistered(i)) log_.unregistered.push_back(i);
    }
    if (log != nullptr) *log = log_;
    return std::move(recon_);
  }

 private:
  void InitializeFromSeed() {
    const SeedPair seed = SelectSeedPair(graph_, recon_.camera, config_);
    recon_.poses[seed.image_a] = seed.geometry.pose_a;
    recon_.poses[seed.image_b] = seed.geometry.pose_b;
    recon_.gauge.fixed_image = seed.image_a;
    recon_.gauge.scale_image = seed.image_b;
    int axis = 0;
    (seed.geometry.pose_b.center - seed.geometry.pose_a.center)
        .cwiseAbs()
        .maxCoeff(&axis);
    recon_.gauge.scale_axis = axis;

    TriangulateTracksOf(seed.image_a);
    if (recon_.points.size() < config_.min_registration_correspondences) {
      throw Error(ErrorCode::kSeedFailure,
                  "seed pair " + recon_.image_ids[seed.image_a] + "/" +
                      recon_.image_ids[seed.image_b] + " yields only " +
                      std::to_string(recon_.points.size()) + " points");
    }
    GlobalAdjust(false);
    if (recon_.points.size() < config_.min_registration_correspondences) {
      throw Error(ErrorCode::kSeedFailure,
                  "seed structure lost to outlier filtering");
    }
  }

  std::optional<size_t> NextImage(const std::set<size_t>& blocked,
                                  const std::set<size_t>& dead) const {
    std::optional<size_t> best;
    size_t best_count = 0;
    for (size_t i = 0; i < graph_.NumImages(); ++i) {
      if (recon_.IsRegistered(i) || blocked.contains(i) || dead.contains(i)) {
        continue;
      }
      size_t count = 0;
      for (int64_t t : track_of_[i]) {
        if (t != kNoTrack && recon_.points.contains(static_cast<size_t>(t))) {
          ++count;
        }
      }
      if (count >= config_.min_registration_correspondences &&
          count > best_count) {
        best = i;
        best_count = count;
      }
    }
    return best;
  }

  bool Register(size_t image) {
    const FeatureSet& fs = graph_.image(image);
    std::vector<Eigen::Vector2d> pixels;
    std::vector<Eigen::Vector3d> points;
    std::vector<std::pair<size_t, size_t>> refs;  // (track, keypoint)
    for (size_t k = 0; k < fs.NumFeatures(); ++k) {
      const int64_t t = track_of_[image][k];
      if (t == kNoTrack) continue;
      const auto it = recon_.points.find(static_cast<size_t>(t));
      if (it == recon_.points.end()) continue;
      pixels.push_back(fs.keypoints[k].Position());
      points.push_back(it->second.position);
      refs.emplace_back(static_cast<size_t>(t), k);
    }
    RansacConfig ransac = config_.registration_ransac;
    ransac.seed += image;
    AbsolutePoseEstimate estimate;
    try {
      estimate = EstimateAbsolutePose(pixels, points, recon_.camera, ransac);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInsufficientData ||
          e.code() == ErrorCode::kDegenerateConfiguration) {
        return false;
      }
      throw;
    }
    if (estimate.num_inliers < config_.min_registration_correspondences) {
      return false;
    }
    recon_.poses[image] = estimate.pose;
    for (size_t i = 0; i < refs.size(); ++i) {
      if (!estimate.inlier_mask[i]) continue;
      ReconstructedPoint& point = recon_.points.at(refs[i].first);
      const PointObservation obs{image, refs[i].second, pixels[i]};
      if (ObservationError(recon_, point, obs) <= config_.max_reprojection) {
        point.observations.push_back(obs);
      }
    }
    return true;
  }

  // Triangulates every not yet reconstructed track with an element in
  // `image` and at least two elements in registered images.
  void TriangulateTracksOf(size_t image) {
    std::set<size_t> candidates;
    for (int64_t t : track_of_[image]) {
      if (t != kNoTrack && !recon_.points.contains(static_cast<size_t>(t))) {
        candidates.insert(static_cast<size_t>(t));
      }
    }
    for (size_t t : candidates) {
      std::vector<TriangulationObservation> obs;
      std::vector<PointObservation> elements;
      for (const TrackElement& e : tracks_[t].elements) {
        const auto pose = recon_.poses.find(e.image);
        if (pose == recon_.poses.end()) continue;
        const Keypoint& kp = graph_.image(e.image).keypoints[e.keypoint];
        obs.push_back({pose->second, recon_.camera, kp});
        elements.push_back({e.image, e.keypoint, kp.Position()});
      }
      if (obs.size() < 2) continue;
      ReconstructedPoint point;
      try {
        point.position = Triangulate(obs);
      } catch (const Error&) {
        continue;
      }
      std::vector<Eigen::Vector3d> centers;
      for (const PointObservation& e : elements) {
        if (ObservationError(recon_, point, e) <= config_.max_reprojection) {
          point.observations.push_back(e);
          centers.push_back(recon_.poses.at(e.image).center);
        }
      }
      if (point.observations.size() >= 2 &&
          MaxTriangulationAngleDeg(point.position, centers) >=
              config_.min_triangulation_angle_deg) {
        recon_.points.emplace(t, std::move(point));
      }
    }
  }

  void LocalAdjust(size_t image) {
    std::map<size_t, size_t> shared;
    for (const auto& [id, point] : recon_.points) {
      const bool seen = std::any_of(
          point.observations.begin(), point.observations.end(),
          [&](const PointObservation& o) { return o.image == image; });
      if (!seen) continue;
      for (const PointObservation& o : point.observations) {
        if (o.image != image) ++shared[o.image];
      }
    }
    std::vector<std::pair<size_t, size_t>> ranked;  // (-count, image)
    for (const auto& [other, count] : shared) ranked.emplace_back(count, other);
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    std::set<size_t> window = {image};
    for (size_t k = 0; k < ranked.size() && k < config_.local_ba_neighbors; ++k) {
      window.insert(ranked[k].second);
    }
    BundleOptions options;
    options.free_images = std::move(window);
    options.loss = config_.loss;
    AdjustBundle(&recon_, options, config_.solver);
    ++log_.local_adjustments;
    Filter();
  }

  BAResult GlobalAdjust(bool final_pass) {
    BundleOptions options;
    options.loss = config_.loss;
    if (final_pass) {
      options.refine_intrinsics = config_.final_refine_intrinsics;
    }
    const BAResult result = AdjustBundle(&recon_, options, config_.solver);
    ++log_.global_adjustments;
    if (!final_pass) {
      Filter();
    }
    return result;
  }

  FilterStats Filter() {
    return FilterOutliers(&recon_, config_.max_reprojection,
                          config_.min_triangulation_angle_deg);
  }

  const SceneGraph& graph_;
  const std::vector<Track>& tracks_;
  const SfmConfig& config_;
  Reconstruction recon_;
  std::vector<std::vector<int64_t>> track_of_;
  IncrementalLog log_;
};

}  // namespace

SeedPair SelectSeedPair(const SceneGraph& graph, const CameraModel& camera,
                        const SfmConfig& config) {
  std::vector<std::pair<size_t, SceneGraph::PairKey>> candidates;
  size_t max_count = 0;
  for (const auto& [key, matches] : graph.pairs()) {
    candidates.emplace_back(matches.size(), key);
    max_count = std::max(max_count, matches.size());
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::kNoAdequatePair, "no verified image pairs");
  }
  const size_t threshold = std::min(config.min_seed_inliers, max_count);
  std::erase_if(candidates,
                [&](const auto& c) { return c.first < threshold; });
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });

  TwoViewOptions options;
  options.ransac = config.two_view_ransac;
  for (const auto& [count, key] : candidates) {
    SeedPair seed;
    seed.image_a = key.first;
    seed.image_b = key.second;
    try {
      seed.geometry = EstimateRelativeOrientation(
          graph.image(key.first), graph.image(key.second),
          graph.pairs().at(key), camera, options);
    } catch (const Error&) {
      continue;
    }
    if (!seed.geometry.points.empty() &&
        seed.geometry.median_angle_deg >= config.min_seed_median_angle_deg) {
      return seed;
    }
  }
  throw Error(ErrorCode::kNoAdequatePair,
              "no image pair reaches the seed triangulation angle");
}

Reconstruction IncrementalReconstruct(const SceneGraph& graph,
                                      const std::vector<Track>& tracks,
                                      const CameraModel& camera,
                                      const SfmConfig& config,
                                      IncrementalLog* log) {
  if (graph.NumImages() < 2) {
    throw Error(ErrorCode::kSeedFailure,
                "reconstruction needs >= 2 images, got " +
                    std::to_string(graph.NumImages()));
  }
  IncrementalMapper mapper(graph, tracks, camera, config);
  return mapper.Run(log);
}

}  // namespace aerotri
