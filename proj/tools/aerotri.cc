#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"
#include "aerotri/features/detector.h"
#include "aerotri/features/feature_io.h"
#include "aerotri/features/image.h"
#include "aerotri/geo/pos.h"
#include "aerotri/georef/evaluation.h"
#include "aerotri/matching/matcher.h"
#include "aerotri/pipeline/pipeline.h"
#include "aerotri/sfm/incremental.h"
#include "aerotri/sfm/reconstruction.h"
#include "aerotri/sfm/scene_graph.h"
#include "aerotri/synth/synth.h"

namespace fs = std::filesystem;
using namespace aerotri;

namespace {

// The synthetic block sits about 1.6 degrees east of this meridian.
constexpr double kDefaultCentralMeridian = 105.0;

struct ZoneFlags {
  double central_meridian = kDefaultCentralMeridian;
  double false_easting = 500000.0;
  double scale_factor = 1.0;

  void Add(CLI::App* app) {
    app->add_option("--central-meridian", central_meridian,
                    "Zone central meridian, degrees")
        ->capture_default_str();
    app->add_option("--false-easting", false_easting, "Zone false easting, m")
        ->capture_default_str();
    app->add_option("--scale-factor", scale_factor, "Central meridian scale")
        ->capture_default_str();
  }

  geo::ZoneConfig Zone() const {
    geo::ZoneConfig zone;
    zone.central_meridian = central_meridian;
    zone.false_easting = false_easting;
    zone.scale_factor = scale_factor;
    zone.Validate();
    return zone;
  }
};

struct MatchFlags {
  MatchConfig config;
  bool no_cross_check = false;

  void Add(CLI::App* app) {
    app->add_option("--ratio", config.ratio, "Lowe ratio threshold")
        ->capture_default_str();
    app->add_flag("--no-cross-check", no_cross_check,
                  "Disable the mutual nearest-neighbor check");
  }

  MatchConfig Config() const {
    MatchConfig c = config;
    c.cross_check = !no_cross_check;
    c.Validate();
    return c;
  }
};

struct PairFlags {
  size_t neighbors = kDefaultPairNeighbors;
  std::optional<double> radius;
  bool auto_radius = false;

  void Add(CLI::App* app) {
    app->add_option("--neighbors", neighbors,
                    "Pair each image with its k nearest POS neighbors")
        ->capture_default_str();
    app->add_option("--radius", radius, "Pair images within this POS distance, m");
    app->add_flag("--auto-radius", auto_radius,
                  "Radius = 1.5 x along-track spacing estimated from POS");
  }

  std::vector<ImagePair> Propose(
      const std::vector<Eigen::Vector3d>& positions) const {
    if (auto_radius) {
      return ProposePairsByRadius(
          positions, kDefaultRadiusFactor * EstimateAlongTrackSpacing(positions));
    }
    if (radius) return ProposePairsByRadius(positions, *radius);
    return ProposePairsByNearest(positions, neighbors);
  }
};

std::vector<VerifiedPair> ReadVerified(const fs::path& path,
                                       const std::vector<FeatureSet>& images) {
  std::vector<VerifiedPair> out;
  for (PairMatches& p : ParseMatchesCsv(ReadTextFile(path), images)) {
    out.push_back({p.image_a, p.image_b, std::move(p.matches)});
  }
  return out;
}

std::vector<geo::PosRecord> ReadProjectedPos(const fs::path& path,
                                             const geo::ZoneConfig& zone) {
  return geo::ProjectPosRecords(geo::ParsePosFile(ReadTextFile(path)),
                                geo::Ellipsoid{}, zone);
}

void Require(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kIoError, "'" + path.string() + "' does not exist");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GCP-free aerial triangulation of UAV image blocks"};
  app.require_subcommand(1);
  uint64_t seed = 42;
  size_t threads = 0;
  app.add_option("--seed", seed, "Seed for every randomized stage")
      ->capture_default_str();
  app.add_option("--threads", threads, "Worker threads, 0 for all cores")
      ->capture_default_str();

  // synth
  synth::SceneConfig scene;
  fs::path synth_out;
  ZoneFlags synth_zone;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic block");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--strips", scene.flight.strips)->capture_default_str();
  synth_cmd->add_option("--images-per-strip", scene.flight.images_per_strip)
      ->capture_default_str();
  synth_cmd->add_option("--heading-overlap", scene.flight.heading_overlap)
      ->capture_default_str();
  synth_cmd->add_option("--side-overlap", scene.flight.side_overlap)
      ->capture_default_str();
  synth_cmd->add_option("--gsd", scene.flight.gsd, "Ground sample distance, m")
      ->capture_default_str();
  synth_cmd->add_option("--points", scene.num_points)->capture_default_str();
  synth_cmd->add_option("--keypoint-sigma", scene.noise.keypoint_sigma, "px")
      ->capture_default_str();
  synth_cmd->add_option("--descriptor-sigma", scene.noise.descriptor_sigma)
      ->capture_default_str();
  synth_cmd->add_option("--gnss-h", scene.noise.gnss_horizontal_sigma, "m")
      ->capture_default_str();
  synth_cmd->add_option("--gnss-v", scene.noise.gnss_vertical_sigma, "m")
      ->capture_default_str();
  synth_cmd->add_option("--terrain-amplitude", scene.terrain.amplitude, "m")
      ->capture_default_str();
  synth_cmd->add_option("--k1", scene.k1)->capture_default_str();
  synth_cmd->add_option("--k2", scene.k2)->capture_default_str();
  synth_zone.Add(synth_cmd);

  // convert-pos
  fs::path pos_in;
  fs::path pos_out;
  ZoneFlags convert_zone;
  CLI::App* convert_cmd =
      app.add_subcommand("convert-pos", "Project geodetic POS to Gauss-Kruger");
  convert_cmd->add_option("--in", pos_in, "POS CSV")->required();
  convert_cmd->add_option("--out", pos_out, "Projected POS CSV")->required();
  convert_zone.Add(convert_cmd);

  // detect
  fs::path images_dir;
  fs::path detect_out;
  HarrisOptions harris;
  CLI::App* detect_cmd =
      app.add_subcommand("detect", "Detect built-in features on PGM images");
  detect_cmd->add_option("--images", images_dir, "Directory of *.pgm")->required();
  detect_cmd->add_option("--out", detect_out, "FEAT output directory")->required();
  detect_cmd->add_option("--max-features", harris.max_features)
      ->capture_default_str();

  // match
  fs::path features_dir;
  fs::path pos_file;
  fs::path matches_out;
  MatchFlags match_flags;
  PairFlags pair_flags;
  ZoneFlags match_zone;
  CLI::App* match_cmd =
      app.add_subcommand("match", "Propose pairs from POS and match them");
  match_cmd->add_option("--features", features_dir, "FEAT directory")->required();
  match_cmd->add_option("--pos", pos_file, "POS CSV")->required();
  match_cmd->add_option("--out", matches_out, "matches CSV")->required();
  match_flags.Add(match_cmd);
  pair_flags.Add(match_cmd);
  match_zone.Add(match_cmd);

  // sweep-ratio
  fs::path labels_file;
  fs::path sweep_out;
  std::string sweep_a;
  std::string sweep_b;
  double sweep_tolerance = kDefaultFalseMatchTolerance;
  bool sweep_no_cross = false;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep-ratio", "Match statistics over a grid of ratio thresholds");
  sweep_cmd->add_option("--features", features_dir, "FEAT directory")->required();
  sweep_cmd->add_option("--labels", labels_file,
                        "image_id,keypoint_index,point_id truth CSV")
      ->required();
  sweep_cmd->add_option("--a", sweep_a, "First image id")->required();
  sweep_cmd->add_option("--b", sweep_b, "Second image id")->required();
  sweep_cmd->add_option("--out", sweep_out, "Sweep CSV")->required();
  sweep_cmd->add_option("--tolerance", sweep_tolerance,
                        "False-match pixel tolerance")
      ->capture_default_str();
  sweep_cmd->add_flag("--no-cross-check", sweep_no_cross);

  // verify
  fs::path camera_file;
  fs::path matches_in;
  fs::path verified_out;
  RansacConfig verify_ransac;
  size_t min_inliers = kDefaultMinVerifiedInliers;
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "Essential-matrix RANSAC per pair");
  verify_cmd->add_option("--features", features_dir, "FEAT directory")->required();
  verify_cmd->add_option("--camera", camera_file, "camera CSV")->required();
  verify_cmd->add_option("--matches", matches_in, "matches CSV")->required();
  verify_cmd->add_option("--out", verified_out, "verified matches CSV")
      ->required();
  verify_cmd->add_option("--threshold", verify_ransac.threshold,
                         "Sampson threshold, px")
      ->capture_default_str();
  verify_cmd->add_option("--min-inliers", min_inliers)->capture_default_str();

  // reconstruct
  fs::path verified_in;
  fs::path recon_out;
  SfmConfig sfm;
  CLI::App* recon_cmd =
      app.add_subcommand("reconstruct", "Incremental free-network reconstruction");
  recon_cmd->add_option("--features", features_dir, "FEAT directory")->required();
  recon_cmd->add_option("--camera", camera_file, "camera CSV")->required();
  recon_cmd->add_option("--verified", verified_in, "verified matches CSV")
      ->required();
  recon_cmd->add_option("--out", recon_out, "Reconstruction directory")
      ->required();

  // georef
  fs::path recon_in;
  fs::path georef_out;
  std::string mode_name = "priors";
  ZoneFlags georef_zone;
  CLI::App* georef_cmd =
      app.add_subcommand("georef", "Georeference a reconstruction with POS");
  georef_cmd->add_option("--features", features_dir, "FEAT directory")->required();
  georef_cmd->add_option("--reconstruction", recon_in, "Reconstruction directory")
      ->required();
  georef_cmd->add_option("--pos", pos_file, "POS CSV")->required();
  georef_cmd->add_option("--mode", mode_name, "align | priors")
      ->capture_default_str();
  georef_cmd->add_option("--out", georef_out, "Output directory")->required();
  georef_zone.Add(georef_cmd);

  // evaluate
  fs::path report_out;
  std::string scene_name = "scene";
  std::optional<fs::path> checkpoint_obs;
  std::optional<fs::path> checkpoint_truth;
  std::optional<fs::path> evaluate_verified;
  ZoneFlags evaluate_zone;
  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "Report accuracy of both georeferencing routes");
  evaluate_cmd->add_option("--features", features_dir, "FEAT directory")
      ->required();
  evaluate_cmd->add_option("--reconstruction", recon_in,
                           "Free-network reconstruction directory")
      ->required();
  evaluate_cmd->add_option("--pos", pos_file, "POS CSV")->required();
  evaluate_cmd->add_option("--out", report_out, "Report CSV")->required();
  evaluate_cmd->add_option("--scene", scene_name)->capture_default_str();
  evaluate_cmd->add_option("--verified", evaluate_verified,
                           "Verified matches, for the seed-pair report");
  evaluate_cmd->add_option("--camera", camera_file,
                           "camera CSV, with --verified");
  evaluate_cmd->add_option("--checkpoint-obs", checkpoint_obs);
  evaluate_cmd->add_option("--checkpoint-truth", checkpoint_truth);
  evaluate_zone.Add(evaluate_cmd);

  // run
  PipelineConfig pipeline;
  std::string run_mode = "priors";
  MatchFlags run_match;
  PairFlags run_pairs;
  ZoneFlags run_zone;
  CLI::App* run_cmd = app.add_subcommand("run", "Full pipeline");
  run_cmd->add_option("--features", pipeline.features_dir, "FEAT directory")
      ->required();
  run_cmd->add_option("--pos", pipeline.pos_file, "POS CSV")->required();
  run_cmd->add_option("--camera", pipeline.camera_file, "camera CSV")->required();
  run_cmd->add_option("--out", pipeline.output_dir, "Output directory")
      ->required();
  run_cmd->add_option("--mode", run_mode, "align | priors")->capture_default_str();
  run_cmd->add_option("--scene", pipeline.scene)->capture_default_str();
  run_cmd->add_option("--checkpoint-obs", pipeline.checkpoint_observations);
  run_cmd->add_option("--checkpoint-truth", pipeline.checkpoint_truth);
  run_cmd->add_option("--threshold", pipeline.verify_ransac.threshold,
                      "Verification Sampson threshold, px")
      ->capture_default_str();
  run_cmd->add_option("--min-inliers", pipeline.min_verified_inliers)
      ->capture_default_str();
  run_match.Add(run_cmd);
  run_pairs.Add(run_cmd);
  run_zone.Add(run_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    verify_ransac.seed = seed;
    sfm.two_view_ransac.seed = seed;
    sfm.registration_ransac.seed = seed;

    if (synth_cmd->parsed()) {
      scene.seed = seed;
      const synth::SynthDataset dataset = synth::GenerateScene(scene);
      synth::WriteDataset(dataset, synth_out, synth_zone.Zone());
      std::cout << "wrote " << dataset.image_ids.size() << " images to "
                << synth_out << '\n';
    } else if (convert_cmd->parsed()) {
      Require(pos_in);
      WriteTextFile(pos_out,
                    geo::FormatPosFile(ReadProjectedPos(pos_in, convert_zone.Zone())));
    } else if (detect_cmd->parsed()) {
      Require(images_dir);
      fs::create_directories(detect_out);
      size_t count = 0;
      for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (entry.path().extension() != ".pgm") continue;
        FeatureSet features = DetectBuiltin(ReadPgm(entry.path()), harris);
        features.image_id = entry.path().stem().string();
        SaveFeatureFile(detect_out / (features.image_id + ".feat"), features);
        ++count;
      }
      std::cout << "wrote " << count << " feature files\n";
    } else if (match_cmd->parsed()) {
      Require(pos_file);
      const std::vector<FeatureSet> images = LoadFeatureDirectory(features_dir);
      std::vector<geo::PosRecord> pos = geo::ParsePosFile(ReadTextFile(pos_file));
      const auto positions = PositionsForImages(images, &pos, match_zone.Zone());
      const auto matches = MatchPairs(images, pair_flags.Propose(positions),
                                      match_flags.Config(), threads);
      WriteTextFile(matches_out, FormatMatchesCsv(images, matches));
    } else if (sweep_cmd->parsed()) {
      Require(labels_file);
      const std::vector<FeatureSet> images = LoadFeatureDirectory(features_dir);
      const auto find = [&](const std::string& id) -> const FeatureSet& {
        for (const FeatureSet& f : images) {
          if (f.image_id == id) return f;
        }
        throw Error(ErrorCode::kConfigError, "unknown image id '" + id + "'");
      };
      const FeatureSet& a = find(sweep_a);
      const FeatureSet& b = find(sweep_b);
      const KeypointLabels labels =
          ParseKeypointLabels(ReadTextFile(labels_file));
      const auto sweep = SweepRatio(a, b, DefaultRatioGrid(),
                                    TruthFromLabels(a, b, labels),
                                    sweep_tolerance, !sweep_no_cross);
      WriteTextFile(sweep_out, FormatRatioSweepCsv(sweep));
    } else if (verify_cmd->parsed()) {
      Require(camera_file);
      Require(matches_in);
      verify_ransac.Validate();
      const std::vector<FeatureSet> images = LoadFeatureDirectory(features_dir);
      const CameraModel camera = ParseCameraCsv(ReadTextFile(camera_file));
      const auto verified =
          VerifyPairs(images, ParseMatchesCsv(ReadTextFile(matches_in), images),
                      camera, verify_ransac, min_inliers, threads);
      std::vector<PairMatches> rows;
      for (const VerifiedPair& v : verified) {
        rows.push_back({v.image_a, v.image_b, v.inliers});
      }
      WriteTextFile(verified_out, FormatMatchesCsv(images, rows));
    } else if (recon_cmd->parsed()) {
      Require(camera_file);
      Require(verified_in);
      const std::vector<FeatureSet> images = LoadFeatureDirectory(features_dir);
      const CameraModel camera = ParseCameraCsv(ReadTextFile(camera_file));
      const SceneGraph graph(images, ReadVerified(verified_in, images));
      IncrementalLog log;
      const Reconstruction recon =
          IncrementalReconstruct(graph, BuildTracks(graph), camera, sfm, &log);
      ExportReconstruction(recon, recon_out);
      std::cout << "registered " << recon.poses.size() << " of "
                << images.size() << " images, " << recon.points.size()
                << " points\n";
    } else if (georef_cmd->parsed()) {
      Require(pos_file);
      const GeorefMode mode = ParseGeorefMode(mode_name);
      const std::vector<FeatureSet> images = LoadFeatureDirectory(features_dir);
      const Reconstruction recon = ImportReconstruction(recon_in, images);
      const auto pos = ReadProjectedPos(pos_file, georef_zone.Zone());
      ExportReconstruction(Georeference(recon, pos, mode, sfm), georef_out);
    } else if (evaluate_cmd->parsed()) {
      Require(pos_file);
      if (checkpoint_obs.has_value() != checkpoint_truth.has_value()) {
        throw Error(ErrorCode::kConfigError,
                    "--checkpoint-obs and --checkpoint-truth go together");
      }
      const std::vector<FeatureSet> images = LoadFeatureDirectory(features_dir);
      const Reconstruction recon = ImportReconstruction(recon_in, images);
      const auto pos = ReadProjectedPos(pos_file, evaluate_zone.Zone());
      EvaluationInput input;
      input.scene = scene_name;
      input.free_network = &recon;
      input.pos = &pos;
      std::optional<TwoViewGeometry> seed_geometry;
      if (evaluate_verified) {
        Require(camera_file);
        const CameraModel camera = ParseCameraCsv(ReadTextFile(camera_file));
        const SceneGraph graph(images, ReadVerified(*evaluate_verified, images));
        seed_geometry = SelectSeedPair(graph, camera, sfm).geometry;
        input.relative_orientation = &*seed_geometry;
      }
      if (checkpoint_obs) {
        input.checkpoint = CheckpointData{
            synth::ParseCheckpointObservations(ReadTextFile(*checkpoint_obs)),
            synth::ParseCheckpointTruth(ReadTextFile(*checkpoint_truth))};
      }
      WriteTextFile(report_out, FormatReportCsv(Evaluate(input, sfm)));
    } else if (run_cmd->parsed()) {
      Require(pipeline.pos_file);
      Require(pipeline.camera_file);
      pipeline.georef = ParseGeorefMode(run_mode);
      pipeline.match = run_match.Config();
      pipeline.zone = run_zone.Zone();
      pipeline.pair_neighbors = run_pairs.neighbors;
      pipeline.pair_radius = run_pairs.radius;
      pipeline.num_threads = threads;
      pipeline.seed = seed;
      pipeline.ApplySeed();
      if (run_pairs.auto_radius) {
        std::vector<geo::PosRecord> pos =
            geo::ParsePosFile(ReadTextFile(pipeline.pos_file));
        const auto positions = PositionsForImages(
            LoadFeatureDirectory(pipeline.features_dir), &pos, pipeline.zone);
        pipeline.pair_radius =
            kDefaultRadiusFactor * EstimateAlongTrackSpacing(positions);
      }
      const PipelineResult result = RunPipeline(pipeline);
      std::cout << "registered " << result.free_network.poses.size() << " of "
                << result.images.size() << " images, "
                << result.free_network.points.size() << " points; report at "
                << (pipeline.output_dir / "report.csv") << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "aerotri: " << e.what() << '\n';
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "aerotri: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
