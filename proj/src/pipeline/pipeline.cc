#include "aerotri/pipeline/pipeline.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "aerotri/common/text_io.h"
#include "aerotri/features/feature_io.h"
#include "aerotri/geometry/essential.h"
#include "aerotri/synth/synth.h"

namespace aerotri {
namespace {

template <typename F>
auto RunStage(const char* name, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage '") + name + "': " + e.detail());
  }
}

void CheckPositions(const std::vector<Eigen::Vector3d>& positions) {
  if (positions.size() < 2) {
    throw Error(ErrorCode::kTooFewImages,
                "pair proposal needs >= 2 positions, got " +
                    std::to_string(positions.size()));
  }
}

size_t ImageIndexById(const std::vector<FeatureSet>& images,
                      std::string_view id, size_t line) {
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].image_id == id) return i;
  }
  throw Error(ErrorCode::kParseError, "matches line " + std::to_string(line) +
                                          ": unknown image id '" +
                                          std::string(id) + "'");
}

// Runs body(i) for i in [0, n) on a pool of threads.
template <typename F>
void ParallelFor(size_t n, size_t num_threads, F&& body) {
  if (num_threads == 0) {
    num_threads = std::max<size_t>(1, std::thread::hardware_concurrency());
  }
  num_threads = std::min(num_threads, n);
  if (num_threads <= 1) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (size_t t = 0; t < num_threads; ++t) {
      workers.emplace_back([&] {
        for (size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kOutOfZone:
      return 2;
    case ErrorCode::kNoConvergence:
    case ErrorCode::kDegenerateConfiguration:
    case ErrorCode::kDegenerateGeometry:
    case ErrorCode::kChiralityAmbiguous:
    case ErrorCode::kBehindCamera:
    case ErrorCode::kNoAdequatePair:
    case ErrorCode::kSeedFailure:
    case ErrorCode::kNonFiniteResidual:
    case ErrorCode::kNumericalFailure:
      return 4;
    default:
      return 3;
  }
}

double EstimateAlongTrackSpacing(const std::vector<Eigen::Vector3d>& positions) {
  CheckPositions(positions);
  std::vector<double> nearest;
  for (size_t i = 0; i < positions.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < positions.size(); ++j) {
      if (i != j) best = std::min(best, (positions[i] - positions[j]).norm());
    }
    nearest.push_back(best);
  }
  auto mid = nearest.begin() + static_cast<std::ptrdiff_t>(nearest.size() / 2);
  std::nth_element(nearest.begin(), mid, nearest.end());
  return *mid;
}

std::vector<ImagePair> ProposePairsByRadius(
    const std::vector<Eigen::Vector3d>& positions, double radius) {
  CheckPositions(positions);
  if (!(radius >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "pair radius must be >= 0");
  }
  std::vector<ImagePair> pairs;
  for (size_t i = 0; i < positions.size(); ++i) {
    for (size_t j = i + 1; j < positions.size(); ++j) {
      if ((positions[i] - positions[j]).norm() <= radius) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

std::vector<ImagePair> ProposePairsByNearest(
    const std::vector<Eigen::Vector3d>& positions, size_t k) {
  CheckPositions(positions);
  if (k == 0) {
    throw Error(ErrorCode::kConfigError, "pair neighbor count must be > 0");
  }
  std::set<ImagePair> pairs;
  for (size_t i = 0; i < positions.size(); ++i) {
    std::vector<std::pair<double, size_t>> others;
    for (size_t j = 0; j < positions.size(); ++j) {
      if (j != i) others.emplace_back((positions[i] - positions[j]).norm(), j);
    }
    std::sort(others.begin(), others.end());
    for (size_t n = 0; n < std::min(k, others.size()); ++n) {
      const size_t j = others[n].second;
      pairs.emplace(std::min(i, j), std::max(i, j));
    }
  }
  return {pairs.begin(), pairs.end()};
}

std::vector<FeatureSet> LoadFeatureDirectory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIoError,
                "feature directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".feat") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw Error(ErrorCode::kTooFewImages,
                "no .feat files in '" + dir.string() + "'");
  }
  std::vector<FeatureSet> images;
  for (const auto& file : files) {
    try {
      images.push_back(LoadFeatureFile(file));
    } catch (const Error& e) {
      throw Error(e.code(), file.string() + ": " + e.detail());
    }
  }
  for (size_t i = 1; i < images.size(); ++i) {
    if (images[i].DescriptorDim() != images[0].DescriptorDim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  files[i].string() + ": descriptor dimension " +
                      std::to_string(images[i].DescriptorDim()) + " differs from " +
                      std::to_string(images[0].DescriptorDim()) + " in " +
                      files[0].string());
    }
  }
  return images;
}

std::vector<Eigen::Vector3d> PositionsForImages(
    const std::vector<FeatureSet>& images, std::vector<geo::PosRecord>* pos,
    const geo::ZoneConfig& zone) {
  *pos = geo::ProjectPosRecords(*pos, geo::Ellipsoid{}, zone);
  std::map<std::string, Eigen::Vector3d> by_id;
  for (const geo::PosRecord& r : *pos) {
    const geo::ProjectedCoord& p = r.Projected();
    by_id.emplace(r.image_id, Eigen::Vector3d(p.easting, p.northing, p.altitude));
  }
  std::vector<Eigen::Vector3d> positions;
  for (const FeatureSet& fs : images) {
    const auto it = by_id.find(fs.image_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kMissingPos,
                  "no POS record for image '" + fs.image_id + "'");
    }
    positions.push_back(it->second);
  }
  return positions;
}

std::vector<PairMatches> MatchPairs(const std::vector<FeatureSet>& images,
                                    const std::vector<ImagePair>& pairs,
                                    const MatchConfig& config,
                                    size_t num_threads) {
  std::vector<PairMatches> out(pairs.size());
  ParallelFor(pairs.size(), num_threads, [&](size_t i) {
    const auto& [a, b] = pairs[i];
    out[i] = {a, b, MatchFeatures(images.at(a), images.at(b), config)};
  });
  return out;
}

std::string FormatMatchesCsv(const std::vector<FeatureSet>& images,
                             const std::vector<PairMatches>& pairs) {
  std::ostringstream out;
  out << "image_a,image_b,index_a,index_b,distance\n";
  for (const PairMatches& pair : pairs) {
    for (const Match& m : pair.matches) {
      out << images.at(pair.image_a).image_id << ','
          << images.at(pair.image_b).image_id << ',' << m.index_a << ','
          << m.index_b << ',' << FormatDouble(m.distance) << '\n';
    }
  }
  return out.str();
}

std::vector<PairMatches> ParseMatchesCsv(std::string_view content,
                                         const std::vector<FeatureSet>& images) {
  const std::vector<std::string_view> lines = SplitLines(content);
  if (lines.empty() ||
      Trim(lines[0]) != "image_a,image_b,index_a,index_b,distance") {
    throw Error(ErrorCode::kParseError,
                "matches: expected header "
                "'image_a,image_b,index_a,index_b,distance'");
  }
  std::map<ImagePair, std::vector<Match>> grouped;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (Trim(lines[i]).empty()) continue;
    const auto fields = SplitCsvFields(lines[i]);
    if (fields.size() != 5) {
      throw Error(ErrorCode::kParseError,
                  "matches line " + std::to_string(i + 1) + ": expected 5 fields");
    }
    const size_t a = ImageIndexById(images, Trim(fields[0]), i + 1);
    const size_t b = ImageIndexById(images, Trim(fields[1]), i + 1);
    const auto ia = ParseInt(Trim(fields[2]));
    const auto ib = ParseInt(Trim(fields[3]));
    const auto d = ParseDouble(Trim(fields[4]));
    if (!ia || !ib || !d || *ia < 0 || *ib < 0 ||
        static_cast<size_t>(*ia) >= images[a].NumFeatures() ||
        static_cast<size_t>(*ib) >= images[b].NumFeatures()) {
      throw Error(ErrorCode::kParseError,
                  "matches line " + std::to_string(i + 1) + ": invalid match");
    }
    grouped[{a, b}].push_back(
        {static_cast<int>(*ia), static_cast<int>(*ib), *d});
  }
  std::vector<PairMatches> out;
  for (auto& [key, matches] : grouped) {
    out.push_back({key.first, key.second, std::move(matches)});
  }
  return out;
}

std::vector<VerifiedPair> VerifyPairs(const std::vector<FeatureSet>& images,
                                      const std::vector<PairMatches>& pairs,
                                      const CameraModel& camera,
                                      const RansacConfig& config,
                                      size_t min_inliers,
                                      size_t num_threads) {
  std::vector<std::optional<VerifiedPair>> results(pairs.size());
  ParallelFor(pairs.size(), num_threads, [&](size_t p) {
    const PairMatches& pair = pairs[p];
    EssentialEstimate estimate;
    try {
      estimate = EstimateEssentialRansac(pair.matches, images.at(pair.image_a),
                                         images.at(pair.image_b), camera,
                                         config);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInsufficientData ||
          e.code() == ErrorCode::kDegenerateConfiguration) {
        return;
      }
      throw;
    }
    if (estimate.num_inliers < min_inliers) return;
    VerifiedPair verified{pair.image_a, pair.image_b, {}};
    for (size_t i = 0; i < pair.matches.size(); ++i) {
      if (estimate.inlier_mask[i]) verified.inliers.push_back(pair.matches[i]);
    }
    results[p] = std::move(verified);
  });
  std::vector<VerifiedPair> out;
  for (auto& r : results) {
    if (r) out.push_back(std::move(*r));
  }
  return out;
}

KeypointLabels ParseKeypointLabels(std::string_view content) {
  const std::vector<std::string_view> lines = SplitLines(content);
  if (lines.empty() || Trim(lines[0]) != "image_id,keypoint_index,point_id") {
    throw Error(ErrorCode::kParseError,
                "labels: expected header 'image_id,keypoint_index,point_id'");
  }
  KeypointLabels labels;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (Trim(lines[i]).empty()) continue;
    const auto fields = SplitCsvFields(lines[i]);
    const auto keypoint =
        fields.size() == 3 ? ParseInt(Trim(fields[1])) : std::nullopt;
    const auto point = fields.size() == 3 ? ParseInt(Trim(fields[2])) : std::nullopt;
    if (!keypoint || !point || *keypoint < 0 || *point < 0) {
      throw Error(ErrorCode::kParseError,
                  "labels line " + std::to_string(i + 1) + ": invalid row");
    }
    labels[std::string(Trim(fields[0]))][static_cast<size_t>(*keypoint)] =
        static_cast<size_t>(*point);
  }
  return labels;
}

GroundTruthCorrespondence TruthFromLabels(const FeatureSet& a,
                                          const FeatureSet& b,
                                          const KeypointLabels& labels) {
  static const std::map<size_t, size_t> kNone;
  const auto find = [&](const std::string& id) -> const std::map<size_t, size_t>& {
    const auto it = labels.find(id);
    return it == labels.end() ? kNone : it->second;
  };
  const auto& labels_a = find(a.image_id);
  const auto& labels_b = find(b.image_id);
  std::map<size_t, size_t> keypoint_of_label;
  for (const auto& [keypoint, label] : labels_b) {
    keypoint_of_label.emplace(label, keypoint);
  }
  GroundTruthCorrespondence truth;
  for (const Keypoint& kp : b.keypoints) truth.keypoints_b.push_back(kp.Position());
  for (size_t k = 0; k < a.NumFeatures(); ++k) {
    const auto label = labels_a.find(k);
    const auto target = label == labels_a.end()
                            ? keypoint_of_label.end()
                            : keypoint_of_label.find(label->second);
    if (target != keypoint_of_label.end() && target->second < b.NumFeatures()) {
      truth.expected_in_b.emplace_back(b.keypoints[target->second].Position());
    } else {
      truth.expected_in_b.emplace_back(std::nullopt);
    }
  }
  return truth;
}

GeorefMode ParseGeorefMode(std::string_view name) {
  if (name == "align") return GeorefMode::kAlign;
  if (name == "priors") return GeorefMode::kPriors;
  throw Error(ErrorCode::kConfigError,
              "georef mode must be 'align' or 'priors', got '" +
                  std::string(name) + "'");
}

const char* GeorefModeName(GeorefMode mode) {
  return mode == GeorefMode::kAlign ? "align" : "priors";
}

Reconstruction Georeference(const Reconstruction& free_network,
                            const std::vector<geo::PosRecord>& pos,
                            GeorefMode mode, const SfmConfig& config) {
  Reconstruction recon = free_network;
  if (mode == GeorefMode::kAlign) {
    AlignToPos(&recon, pos);
  } else {
    AdjustWithPosPriors(&recon, pos, config.solver, config.loss);
    FilterOutliers(&recon, config.max_reprojection,
                   config.min_triangulation_angle_deg);
  }
  return recon;
}

std::vector<ReportRow> Evaluate(const EvaluationInput& input,
                                const SfmConfig& config) {
  std::vector<ReportRow> rows;
  if (input.relative_orientation != nullptr) {
    const ReprojectionReport ro =
        RelativeOrientationReport(*input.relative_orientation);
    rows.push_back({"relative_orientation", input.scene, "mean_px", ro.mean});
    rows.push_back({"relative_orientation", input.scene, "rms_px", ro.rms});
    rows.push_back({"relative_orientation", input.scene, "n_residuals",
                    static_cast<double>(ro.num_residuals)});
  }
  for (const GeorefMode mode : {GeorefMode::kAlign, GeorefMode::kPriors}) {
    const std::string scene = input.scene + "/" + GeorefModeName(mode);
    const Reconstruction recon =
        Georeference(*input.free_network, *input.pos, mode, config);
    const ReprojectionSummary summary = SummarizeReprojection(recon);
    rows.push_back({"bundle_adjustment", scene, "rms_px", summary.rms});
    rows.push_back({"bundle_adjustment", scene, "mean_px", summary.mean});
    rows.push_back({"bundle_adjustment", scene, "n_obs",
                    static_cast<double>(summary.num_observations)});
    AppendAxisErrors("camera_position", scene,
                     CameraPositionErrors(recon, *input.pos), &rows);
    if (input.checkpoint) {
      AppendAxisErrors("checkpoint", scene,
                       CheckpointError(recon, input.checkpoint->observations,
                                       input.checkpoint->truth),
                       &rows);
    }
  }
  return rows;
}

void PipelineConfig::ApplySeed() {
  verify_ransac.seed = seed;
  sfm.two_view_ransac.seed = seed;
  sfm.registration_ransac.seed = seed;
}

PipelineResult RunPipeline(const PipelineConfig& config) {
  PipelineResult result;
  std::vector<geo::PosRecord> pos;
  std::vector<Eigen::Vector3d> positions;
  CameraModel camera;
  std::optional<CheckpointData> checkpoint;

  RunStage("load", [&] {
    config.match.Validate();
    config.verify_ransac.Validate();
    config.zone.Validate();
    result.images = LoadFeatureDirectory(config.features_dir);
    camera = ParseCameraCsv(ReadTextFile(config.camera_file));
    if (config.checkpoint_observations.has_value() !=
        config.checkpoint_truth.has_value()) {
      throw Error(ErrorCode::kConfigError,
                  "checkpoint observations and truth must be given together");
    }
    if (config.checkpoint_observations) {
      checkpoint = CheckpointData{
          synth::ParseCheckpointObservations(
              ReadTextFile(*config.checkpoint_observations)),
          synth::ParseCheckpointTruth(ReadTextFile(*config.checkpoint_truth))};
    }
    return 0;
  });
  RunStage("convert-pos", [&] {
    pos = geo::ParsePosFile(ReadTextFile(config.pos_file));
    positions = PositionsForImages(result.images, &pos, config.zone);
    return 0;
  });
  RunStage("propose-pairs", [&] {
    result.pairs = config.pair_radius
                       ? ProposePairsByRadius(positions, *config.pair_radius)
                       : ProposePairsByNearest(positions, config.pair_neighbors);
    return 0;
  });

  std::filesystem::create_directories(config.output_dir);
  std::vector<PairMatches> matches = RunStage("match", [&] {
    return MatchPairs(result.images, result.pairs, config.match,
                      config.num_threads);
  });
  WriteTextFile(config.output_dir / "matches.csv",
                FormatMatchesCsv(result.images, matches));

  result.verified = RunStage("verify", [&] {
    return VerifyPairs(result.images, matches, camera, config.verify_ransac,
                       config.min_verified_inliers, config.num_threads);
  });
  std::vector<PairMatches> verified_csv;
  for (const VerifiedPair& v : result.verified) {
    verified_csv.push_back({v.image_a, v.image_b, v.inliers});
  }
  WriteTextFile(config.output_dir / "verified.csv",
                FormatMatchesCsv(result.images, verified_csv));

  TwoViewGeometry seed_geometry;
  RunStage("reconstruct", [&] {
    const SceneGraph graph(result.images, result.verified);
    const std::vector<Track> tracks = BuildTracks(graph);
    result.free_network =
        IncrementalReconstruct(graph, tracks, camera, config.sfm, &result.log);
    seed_geometry = SelectSeedPair(graph, camera, config.sfm).geometry;
    return 0;
  });
  ExportReconstruction(result.free_network,
                       config.output_dir / "reconstruction");

  RunStage("georef", [&] {
    result.georeferenced =
        Georeference(result.free_network, pos, config.georef, config.sfm);
    return 0;
  });
  ExportReconstruction(result.georeferenced,
                       config.output_dir / "georeferenced");

  RunStage("evaluate", [&] {
    EvaluationInput input;
    input.scene = config.scene;
    input.free_network = &result.free_network;
    input.pos = &pos;
    input.relative_orientation = &seed_geometry;
    input.checkpoint = checkpoint;
    result.report = Evaluate(input, config.sfm);
    return 0;
  });
  WriteTextFile(config.output_dir / "report.csv",
                FormatReportCsv(result.report));
  return result;
}

}  // namespace aerotri
