// e2r command-line entry point.
//
// Exit codes:
//   0   success
//   2   bad arguments (InvalidArgument, usage errors)
//   3   ConfigInvalid
//   4   NotFound (missing file, photo id or session)
//   5   MalformedRecord, EmptyStream
//   6   analysis: TooFewSamples, ZeroDuration, NoInBoundsPoints, ParamMismatch, DegenerateHeatmap
//   7   geometry: InsufficientPoints, DegenerateGeometry, NoKeypoints, InsufficientMatches,
//       NoConsensus, calibration quality gate failed
//   8   session: EmptyLibrary, IllegalTransition, Provider*, MissingAttachment
//   9   NotReplayable
//   10  replay diverged
//   11  PortUnavailable
//   12  report: EmptyDocument, CorpusTooSmall, MissingLexiconEntry
//   70  I/O and internal errors

#include <csignal>
#include <iostream>
#include <regex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "e2r/analytics.hpp"
#include "e2r/calibration.hpp"
#include "e2r/config.hpp"
#include "e2r/error.hpp"
#include "e2r/fsutil.hpp"
#include "e2r/pipeline.hpp"
#include "e2r/service.hpp"
#include "e2r/store.hpp"

namespace fs = std::filesystem;
using namespace e2r;

namespace {

constexpr int kExitDiverged = 10;
constexpr int kExitGate = 7;

Config config_from(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

int cmd_serve(const std::string& config_path, std::optional<int> port) {
  auto config = config_from(config_path);
  if (port) config.port = *port;

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Service service(config);
  service.start();
  std::cout << "listening on " << config.host << ":" << service.port() << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.wait();
  waiter.join();
  return 0;
}

GazeRemap remap_from(const std::string& homography_path, const std::string& frames_dir, const PhotoRecord& photo,
                     std::uint64_t seed, bool photo_space) {
  GazeRemap remap;
  if (photo_space) remap = GazeRemap::identity();
  if (!homography_path.empty()) {
    const auto j = nlohmann::json::parse(read_text(homography_path));
    const auto values = j.is_object() ? j.at("h").get<std::vector<double>>() : j.get<std::vector<double>>();
    remap.fixed = Homography::from_row_major(values);
  }
  if (!frames_dir.empty()) {
    // Scene frames are named by index, e.g. frame_000123.png.
    static const std::regex name(R"(\D*(\d+)\.(png|pgm))");
    std::map<std::int64_t, fs::path> frames;
    for (const auto& entry : fs::directory_iterator(frames_dir)) {
      std::smatch m;
      const auto file = entry.path().filename().string();
      if (std::regex_match(file, m, name)) frames.emplace(std::stoll(m[1]), entry.path());
    }
    if (frames.empty()) throw Error(ErrorCode::NotFound, "no scene frames in " + frames_dir);
    RansacOptions ransac;
    ransac.seed = seed;
    remap.per_frame = register_scene_frames(frames, load_gray(photo.image_path), ransac);
  }
  return remap;
}

int cmd_analyze(const std::string& config_path, const std::string& library_path, const std::string& gaze,
                const std::string& photo_id, const std::string& out_dir, const std::string& participant,
                const std::string& homography, const std::string& frames, bool photo_space) {
  auto config = config_from(config_path);
  if (!library_path.empty()) config.library_manifest = library_path;
  if (config.library_manifest.empty()) throw Error(ErrorCode::ConfigInvalid, "no photo library (use --library)");
  const auto library = load_photo_library(config.library_manifest);
  const auto* photo = library.find(photo_id);
  if (!photo) throw Error(ErrorCode::NotFound, "photo '" + photo_id + "' not in library");

  const auto text = read_text(gaze);
  const auto remap = remap_from(homography, frames, *photo, seed_from_session_id(participant), photo_space);
  const auto result = analyze_gaze(text, *photo, config, remap);
  const auto paths = write_artifacts(result, *photo, participant, out_dir);

  std::printf("photo %s (%s): fixation ratio %.2f%%, saccade frequency %.3f Hz over %.1f s\n", photo_id.c_str(),
              std::string(theme_display(photo->theme)).c_str(), result.metrics.fixation_ratio_pct,
              result.metrics.saccade_frequency_hz, result.metrics.total_duration_s);
  std::printf("  %zu fixations, %zu saccades, %zu blink samples removed, threshold %.3f px\n",
              result.fixations.size(), result.saccades.size(), result.cleaned.removed_count,
              result.dispersion_threshold_px);
  for (const auto& r : result.rois) {
    std::printf("  ROI %d: %s mass %.3f\n", r.rank, r.label.value_or("(unlabelled)").c_str(), r.mass);
  }
  if (result.focus) std::printf("  focus index %.3f\n", *result.focus);
  std::printf("  wrote %s, %s, %s\n", paths.metrics_csv.c_str(), paths.heatmap_png.c_str(), paths.rois_json.c_str());
  return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& pairs_path, int degree, const std::string& out,
                  const std::string& apply_in, const std::string& apply_out) {
  const auto config = config_from(config_path);
  const auto pairs = parse_calibration_csv(read_text(pairs_path));
  const auto model = fit_calibration(pairs, degree);
  write_atomic(out, to_json(model));
  const bool ok = passes_quality_gate(model, config.geometry, config.analysis.calibration_gate);
  std::printf("degree %d fit on %d points: RMSE %.4f px (%s)\n", model.degree, model.n_points, model.residual_rmse_px,
              ok ? "accepted" : "rejected by quality gate");
  if (!apply_in.empty()) {
    std::string lines;
    for (const auto& s : parse_raw_samples(read_text(apply_in))) {
      lines += to_jsonl_record(apply_calibration(model, s, config.geometry));
    }
    write_atomic(apply_out.empty() ? apply_in + ".screen.jsonl" : apply_out, lines);
  }
  return ok ? 0 : kExitGate;
}

std::vector<RoiDigest> read_rois(const fs::path& path) {
  std::vector<RoiDigest> out;
  for (const auto& r : nlohmann::json::parse(read_text(path))) {
    RoiDigest d;
    d.rank = r.at("rank").get<int>();
    if (!r.at("label").is_null()) d.label = r["label"].get<std::string>();
    d.mass = r.at("mass").get<double>();
    out.push_back(d);
  }
  return out;
}

int cmd_report(const std::string& config_path, const std::vector<std::string>& sessions, std::string lexicon_path,
               std::string tokenizer_id, const std::string& out_dir) {
  const auto config = config_from(config_path);
  if (lexicon_path.empty()) lexicon_path = config.lexicon.string();
  if (tokenizer_id.empty()) tokenizer_id = config.tokenizer;
  if (lexicon_path.empty()) throw Error(ErrorCode::ConfigInvalid, "no theme lexicon (use --lexicon)");
  const auto tokenizer = make_tokenizer(tokenizer_id);
  const auto lexicon = parse_lexicon(read_text(lexicon_path), *tokenizer);
  fs::create_directories(out_dir);

  std::string csv, summary;
  std::vector<TokenizedDoc> corpus;
  std::vector<MetricsRow> metrics;
  for (const auto& dir_text : sessions) {
    const fs::path dir(dir_text);
    const auto manifest = manifest_from_json(read_text(dir / "manifest.json"));
    std::vector<Utterance> transcript;
    for (const auto& line : read_lines(dir / "transcript.jsonl")) transcript.push_back(utterance_from_json(line));

    std::vector<PhotoAttention> photos;
    for (const auto& slot : manifest.photo_order) {
      PhotoAttention pa{slot.photo_id, {}, 0.0};
      const auto rois = dir / "heatmaps" / (slot.photo_id + ".rois.json");
      if (fs::exists(rois)) pa.rois = read_rois(rois);
      double total = 0.0, top = 0.0;
      for (const auto& r : pa.rois) {
        total += r.mass;
        if (r.rank == 1) top = r.mass;
      }
      pa.focus = total > 0.0 ? top / total : 0.0;
      photos.push_back(std::move(pa));

      const auto mcsv = dir / "heatmaps" / (slot.photo_id + ".metrics.csv");
      if (fs::exists(mcsv)) {
        for (auto row : parse_metrics_table_csv(read_text(mcsv))) {
          row.participant = manifest.session_id;
          metrics.push_back(row);
        }
      }
    }
    // One TF-IDF document per participant.
    if (auto doc = user_document(manifest.session_id, transcript, *tokenizer); !doc.tokens.empty()) {
      corpus.push_back(std::move(doc));
    }
    const auto report = roi_theme_correlation(manifest.session_id, photos, transcript, lexicon, *tokenizer,
                                              config.prompts.focus_threshold);
    const auto part = correlation_csv(report);
    // Keep one metadata/header block for the combined file.
    csv += csv.empty() ? part : part.substr(part.find('\n', part.find('\n') + 1) + 1);
    summary += correlation_summary(report);
  }
  write_atomic(fs::path(out_dir) / "correlation.csv", csv);
  write_atomic(fs::path(out_dir) / "summary.txt", summary);
  if (!metrics.empty()) write_atomic(fs::path(out_dir) / "metrics.csv", metrics_table_csv(metrics));
  if (corpus.size() >= 2) {
    write_atomic(fs::path(out_dir) / "tfidf.csv", tfidf_csv(tfidf(corpus), tokenizer->id()));
  } else {
    std::cerr << "e2r: tf-idf needs at least two participants with replies; tfidf.csv not written\n";
  }
  std::cout << summary;
  return 0;
}

int cmd_replay(const std::string& session_dir) {
  const auto verdict = replay_session(session_dir);
  for (const auto& u : verdict.transcript) std::cout << to_json_line(u);
  std::cout << "verdict: " << verdict.to_string() << "\n";
  return verdict.identical ? 0 : kExitDiverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eye-tracking reminiscence pipeline and session service"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON config file");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::optional<int> port;
  serve->add_option("--port", port, "Override the configured port");

  auto* analyze = app.add_subcommand("analyze", "Analyse one gaze trace against one photo");
  std::string library, gaze, photo_id, out_dir = ".", participant = "P1", homography, frames;
  bool photo_space = false;
  analyze->add_option("--library", library, "Photo library manifest (overrides config)");
  analyze->add_option("--gaze", gaze, "Gaze records (JSONL)")->required();
  analyze->add_option("--photo", photo_id, "Photo id")->required();
  analyze->add_option("--out", out_dir, "Output directory");
  analyze->add_option("--participant", participant, "Participant label for the metrics table");
  analyze->add_option("--homography", homography, "Screen-to-photo homography (9 values, row-major JSON)");
  analyze->add_option("--scene-frames", frames, "Directory of scene frames to register per gaze frame index");
  analyze->add_flag("--photo-space", photo_space, "Gaze coordinates are already photo pixels");

  auto* calibrate = app.add_subcommand("calibrate", "Fit a pupil-to-screen calibration");
  std::string pairs, model_out = "calibration.json", apply_in, apply_out;
  int degree = 2;
  calibrate->add_option("pairs", pairs, "CSV pupil_x,pupil_y,target_x,target_y")->required();
  calibrate->add_option("--degree", degree, "Polynomial degree")->check(CLI::Range(1, 5));
  calibrate->add_option("--out", model_out, "Model output (JSON)");
  calibrate->add_option("--apply", apply_in, "Raw eye samples (JSONL) to map onto the screen");
  calibrate->add_option("--apply-out", apply_out, "Output for --apply (gaze JSONL)");

  auto* report = app.add_subcommand("report", "Correlate ROIs with conversation keywords");
  std::vector<std::string> sessions;
  std::string lexicon, tokenizer, report_out = "report";
  report->add_option("sessions", sessions, "Session directories")->required();
  report->add_option("--lexicon", lexicon, "Theme lexicon (label -> keywords JSON)");
  report->add_option("--tokenizer", tokenizer, "unicode-word or char-<n>gram");
  report->add_option("--out", report_out, "Output directory");

  auto* replay = app.add_subcommand("replay", "Re-run a recorded mock-provider session and verify its transcript");
  std::string session_dir;
  replay->add_option("session_dir", session_dir, "Session directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*serve) return cmd_serve(config_path, port);
    if (*analyze) {
      return cmd_analyze(config_path, library, gaze, photo_id, out_dir, participant, homography, frames, photo_space);
    }
    if (*calibrate) return cmd_calibrate(config_path, pairs, degree, model_out, apply_in, apply_out);
    if (*report) return cmd_report(config_path, sessions, lexicon, tokenizer, report_out);
    if (*replay) return cmd_replay(session_dir);
  } catch (const Error& e) {
    std::cerr << "e2r: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "e2r: " << e.what() << "\n";
    return 70;
  }
  return 2;
}
