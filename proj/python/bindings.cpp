// Python bindings: the analysis operations over numpy arrays and plain text.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "e2r/analytics.hpp"
#include "e2r/attention_map.hpp"
#include "e2r/calibration.hpp"
#include "e2r/error.hpp"
#include "e2r/gaze.hpp"
#include "e2r/oculomotor.hpp"
#include "e2r/pipeline.hpp"
#include "e2r/scene_align.hpp"
#include "e2r/session.hpp"
#include "e2r/store.hpp"

namespace py = pybind11;
using namespace e2r;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Point2> points_from(const Array& a, const char* name) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be N x 2");
  auto r = a.unchecked<2>();
  std::vector<Point2> out(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out[static_cast<std::size_t>(i)] = {r(i, 0), r(i, 1)};
  return out;
}

// Columns t_us, x, y[, conf]; rows need not be sorted.
GazeStream stream_from(const Array& a, const ViewingGeometry& g) {
  if (a.ndim() != 2 || (a.shape(1) != 3 && a.shape(1) != 4)) {
    throw Error(ErrorCode::InvalidArgument, "samples must be N x 3 (t_us, x, y) or N x 4 (+ conf)");
  }
  auto r = a.unchecked<2>();
  std::string jsonl;
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    ScreenGazePoint p;
    p.timestamp_us = static_cast<std::int64_t>(r(i, 0));
    p.screen_xy = {r(i, 1), r(i, 2)};
    p.confidence = a.shape(1) == 4 ? r(i, 3) : 1.0;
    jsonl += to_jsonl_record(p);
  }
  return ingest_stream(jsonl, g);
}

Array stream_array(const GazeStream& s) {
  Array out({static_cast<py::ssize_t>(s.size()), py::ssize_t{4}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& p = s.samples[i];
    const auto k = static_cast<py::ssize_t>(i);
    w(k, 0) = static_cast<double>(p.timestamp_us);
    w(k, 1) = p.screen_xy.x;
    w(k, 2) = p.screen_xy.y;
    w(k, 3) = p.confidence;
  }
  return out;
}

py::dict utterance_dict(const Utterance& u) {
  py::dict d;
  d["seq"] = u.seq;
  d["speaker"] = u.speaker == Speaker::Agent ? "agent" : "user";
  d["text"] = u.text;
  d["t_us"] = u.timestamp_us;
  d["photo_id"] = u.photo_id;
  d["round"] = u.round;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaze analysis, attention maps and session replay";

  // Raised with a `code` attribute naming the error kind, e.g. "NotFound".
  static py::handle error_type = py::exception<Error>(m, "Error").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      auto exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.attr("MIN_FIXATION_US") = kMinFixationUs;
  m.attr("SACCADE_VELOCITY_DEG_S") = kSaccadeVelocityDegS;
  m.attr("BANDWIDTH_FRACTION") = kDefaultBandwidthFraction;

  py::class_<ViewingGeometry>(m, "ViewingGeometry")
      .def(py::init([](int w, int h, double mm, double dist) {
             ViewingGeometry g{w, h, mm, dist};
             g.validate();
             return g;
           }),
           py::arg("screen_width_px") = 5120, py::arg("screen_height_px") = 1536, py::arg("screen_width_mm") = 3000.0,
           py::arg("viewing_distance_mm") = 1500.0)
      .def_readonly("screen_width_px", &ViewingGeometry::screen_width_px)
      .def_readonly("screen_height_px", &ViewingGeometry::screen_height_px)
      .def_readonly("screen_width_mm", &ViewingGeometry::screen_width_mm)
      .def_readonly("viewing_distance_mm", &ViewingGeometry::viewing_distance_mm)
      .def("visual_angle_deg", &ViewingGeometry::visual_angle_deg);

  py::class_<GazeStream>(m, "GazeStream")
      .def("__len__", &GazeStream::size)
      .def_readonly("sample_rate_hz", &GazeStream::sample_rate_hz)
      .def_readonly("duration_us", &GazeStream::duration_us)
      .def_property_readonly("samples", &stream_array, "N x 4 array of t_us, x, y, conf")
      .def_property_readonly("valid_duration_us", &valid_duration_us)
      .def_property_readonly("gaps", [](const GazeStream& s) {
        std::vector<std::pair<std::int64_t, std::int64_t>> out;
        for (const auto& g : s.gaps) out.emplace_back(g.start_us, g.end_us);
        return out;
      });

  m.def("ingest", &ingest_stream, py::arg("jsonl"), py::arg("geometry") = ViewingGeometry{},
        "Parse gaze JSONL into a sorted, deduplicated stream.");
  m.def("stream_from_array", &stream_from, py::arg("samples"), py::arg("geometry") = ViewingGeometry{});
  m.def(
      "remove_blinks",
      [](const GazeStream& s, double thr) {
        auto r = remove_blinks(s, thr);
        std::vector<std::pair<std::int64_t, std::int64_t>> spans;
        for (const auto& g : r.removed_spans) spans.emplace_back(g.start_us, g.end_us);
        return py::make_tuple(std::move(r.stream), spans);
      },
      py::arg("stream"), py::arg("conf_threshold") = 0.6, "Returns (stream, removed_spans).");

  m.def("dispersion_threshold", py::overload_cast<const GazeStream&>(&dispersion_threshold), py::arg("stream"));
  m.def(
      "dispersion_threshold_of",
      [](std::vector<double> d) { return dispersion_threshold(d); }, py::arg("distances"),
      "median + 1.5 * MAD of the given distances.");

  py::class_<FixationEvent>(m, "Fixation")
      .def_readonly("start_us", &FixationEvent::start_us)
      .def_readonly("end_us", &FixationEvent::end_us)
      .def_property_readonly("centroid", [](const FixationEvent& f) { return py::make_tuple(f.centroid_xy.x, f.centroid_xy.y); })
      .def_readonly("dispersion_px", &FixationEvent::dispersion_px)
      .def_readonly("sample_count", &FixationEvent::sample_count)
      .def_property_readonly("duration_us", &FixationEvent::duration_us);
  py::class_<SaccadeEvent>(m, "Saccade")
      .def_readonly("start_us", &SaccadeEvent::start_us)
      .def_readonly("end_us", &SaccadeEvent::end_us)
      .def_readonly("amplitude_deg", &SaccadeEvent::amplitude_deg)
      .def_readonly("peak_velocity_deg_s", &SaccadeEvent::peak_velocity_deg_s);
  py::class_<GazeMetrics>(m, "GazeMetrics")
      .def_readonly("fixation_ratio_pct", &GazeMetrics::fixation_ratio_pct)
      .def_readonly("saccade_frequency_hz", &GazeMetrics::saccade_frequency_hz)
      .def_readonly("total_duration_s", &GazeMetrics::total_duration_s);

  m.def("detect_fixations", &detect_fixations, py::arg("stream"), py::arg("threshold_px"),
        py::arg("min_duration_us") = kMinFixationUs);
  m.def("detect_saccades", &detect_saccades, py::arg("stream"), py::arg("geometry") = ViewingGeometry{},
        py::arg("velocity_threshold_deg_s") = kSaccadeVelocityDegS);
  m.def(
      "compute_metrics",
      [](const std::vector<FixationEvent>& f, const std::vector<SaccadeEvent>& s, const GazeStream& stream) {
        return compute_metrics(f, s, stream);
      },
      py::arg("fixations"), py::arg("saccades"), py::arg("stream"));

  m.def(
      "kde_heatmap",
      [](const Array& points, int width, int height, std::optional<double> bandwidth_px, int max_cells, int threads) {
        const Size2 size{width, height};
        auto params = KdeParams::for_photo(size, kDefaultBandwidthFraction, max_cells);
        if (bandwidth_px) params.bandwidth_px = *bandwidth_px;
        std::vector<PhotoGazePoint> pts;
        for (const auto& p : points_from(points, "points")) pts.push_back({0, p, true});
        const auto hm = kde_heatmap(pts, params, "", size, {threads, false});
        Array grid({params.grid_h, params.grid_w});
        std::copy(hm.grid.begin(), hm.grid.end(), grid.mutable_data());
        return grid;
      },
      py::arg("points"), py::arg("width"), py::arg("height"), py::arg("bandwidth_px") = py::none(),
      py::arg("max_cells") = kMaxGridCells, py::arg("threads") = 1,
      "Gaussian KDE in density per square pixel on a grid_h x grid_w array (cell centres).");

  py::class_<CalibrationModel>(m, "CalibrationModel")
      .def_readonly("degree", &CalibrationModel::degree)
      .def_readonly("residual_rmse_px", &CalibrationModel::residual_rmse_px)
      .def_readonly("n_points", &CalibrationModel::n_points)
      .def("__call__", [](const CalibrationModel& model, double x, double y) {
        const auto p = evaluate(model, {x, y});
        return py::make_tuple(p.x, p.y);
      });
  m.def(
      "fit_calibration",
      [](const Array& pupil, const Array& target, int degree) {
        const auto a = points_from(pupil, "pupil"), b = points_from(target, "target");
        if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "pupil and target lengths differ");
        std::vector<CalibrationPair> pairs;
        for (std::size_t i = 0; i < a.size(); ++i) pairs.push_back({a[i], b[i]});
        return fit_calibration(pairs, degree);
      },
      py::arg("pupil"), py::arg("target"), py::arg("degree") = 2);

  m.def(
      "estimate_homography",
      [](const Array& src, const Array& dst, int iterations, double inlier_px, std::uint64_t seed) {
        const auto a = points_from(src, "src"), b = points_from(dst, "dst");
        if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "src and dst lengths differ");
        std::vector<KeypointMatch> matches;
        for (std::size_t i = 0; i < a.size(); ++i) matches.push_back({a[i], b[i], 1.0});
        const auto h = estimate_homography(matches, {iterations, inlier_px, seed});
        Array out({3, 3});
        std::copy(h.h.begin(), h.h.end(), out.mutable_data());
        return py::make_tuple(out, h.inlier_count);
      },
      py::arg("src"), py::arg("dst"), py::arg("iterations") = 2000, py::arg("inlier_px") = 3.0, py::arg("seed") = 0,
      "RANSAC fit; returns (3 x 3 matrix, inlier count).");

  m.def(
      "tokenize", [](const std::string& text, const std::string& id) { return make_tokenizer(id)->tokenize(text); },
      py::arg("text"), py::arg("tokenizer") = "unicode-word");
  m.def(
      "tfidf",
      [](const std::vector<std::pair<std::string, std::vector<std::string>>>& docs) {
        std::vector<TokenizedDoc> corpus;
        for (const auto& [id, tokens] : docs) corpus.push_back({id, tokens, {}});
        const auto t = tfidf(corpus);
        py::dict out;
        for (std::size_t i = 0; i < t.doc_ids.size(); ++i) {
          py::dict terms;
          for (const auto& [term, e] : t.docs[i]) terms[py::str(term)] = e.tfidf;
          out[py::str(t.doc_ids[i])] = terms;
        }
        return out;
      },
      py::arg("docs"), "docs: list of (doc_id, tokens). Returns {doc_id: {term: tf-idf}}.");

  m.def(
      "analyze",
      [](const std::string& jsonl, const std::string& library_manifest, const std::string& photo_id) {
        const auto lib = load_photo_library(library_manifest);
        const auto* photo = lib.find(photo_id);
        if (!photo) throw Error(ErrorCode::NotFound, "photo '" + photo_id + "' not in library");
        const auto r = analyze_gaze(jsonl, *photo, Config{});
        py::list rois;
        for (const auto& roi : r.rois) {
          py::dict d;
          d["rank"] = roi.rank;
          d["label"] = roi.label ? py::object(py::str(*roi.label)) : py::object(py::none());
          d["mass"] = roi.mass;
          d["centroid"] = py::make_tuple(roi.centroid_xy.x, roi.centroid_xy.y);
          rois.append(d);
        }
        py::dict out;
        out["metrics"] = r.metrics;
        out["threshold_px"] = r.dispersion_threshold_px;
        out["fixations"] = r.fixations.size();
        out["saccades"] = r.saccades.size();
        out["rois"] = rois;
        out["focus"] = r.focus ? py::object(py::float_(*r.focus)) : py::object(py::none());
        return out;
      },
      py::arg("jsonl"), py::arg("library_manifest"), py::arg("photo_id"),
      "Full pipeline for one trace and one photo with default settings.");

  m.def(
      "replay",
      [](const std::string& session_dir) {
        const auto v = replay_session(session_dir);
        py::list transcript;
        for (const auto& u : v.transcript) transcript.append(utterance_dict(u));
        return py::make_tuple(v.to_string(), transcript);
      },
      py::arg("session_dir"), "Returns (verdict, reconstructed transcript).");
}
