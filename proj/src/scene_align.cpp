#include "e2r/scene_align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "e2r/error.hpp"
#include "e2r/hash.hpp"

namespace e2r {

// ---------------------------------------------------------------------------
// Homography

Homography Homography::from_row_major(std::span<const double> values) {
  if (values.size() != 9) throw Error(ErrorCode::InvalidArgument, "homography needs 9 values");
  if (values[8] == 0.0) throw Error(ErrorCode::InvalidArgument, "homography h[2][2] must be non-zero");
  Homography out;
  for (int i = 0; i < 9; ++i) out.h[i] = values[i] / values[8];
  return out;
}

double Homography::determinant() const {
  return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
         h[2] * (h[3] * h[7] - h[4] * h[6]);
}

bool Homography::invertible() const { return std::abs(determinant()) > 1e-9; }

std::optional<Point2> Homography::apply(Point2 p) const {
  const double w = h[6] * p.x + h[7] * p.y + h[8];
  if (!(w > 1e-12)) return std::nullopt;
  return Point2{(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

Homography Homography::inverse() const {
  if (!invertible()) throw Error(ErrorCode::DegenerateGeometry, "homography is singular");
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  const Eigen::Matrix3d inv = m.inverse();
  Homography out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.h[r * 3 + c] = inv(r, c) / inv(2, 2);
  out.inlier_count = inlier_count;
  return out;
}

std::uint64_t seed_from_session_id(const std::string& session_id) { return fnv1a(session_id); }

// ---------------------------------------------------------------------------
// Feature extraction

namespace {

struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0f) {}
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  float bilinear(double x, double y) const {
    const double cx = std::clamp(x, 0.0, width - 1.0);
    const double cy = std::clamp(y, 0.0, height - 1.0);
    const int x0 = static_cast<int>(cx);
    const int y0 = static_cast<int>(cy);
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const float fx = static_cast<float>(cx - x0);
    const float fy = static_cast<float>(cy - y0);
    const float top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
    const float bottom = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
    return top * (1 - fy) + bottom * fy;
  }
};

FloatImage to_float(const GrayImage& img) {
  FloatImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.data[i] = img.pixels[i] / 255.0f;
  return out;
}

FloatImage gaussian_blur(const FloatImage& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k = static_cast<float>(k / sum);

  FloatImage tmp(in.width, in.height);
  FloatImage out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * in.at(std::clamp(x + k, 0, in.width - 1), y);
      }
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp.at(x, std::clamp(y + k, 0, in.height - 1));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

FloatImage downsample(const FloatImage& in) {
  FloatImage out(in.width / 2, in.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = 0.25f * (in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) + in.at(2 * x, 2 * y + 1) +
                              in.at(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

FloatImage harris_response(const FloatImage& img, double k) {
  FloatImage ixx(img.width, img.height), iyy(img.width, img.height), ixy(img.width, img.height);
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      const float gx = 0.5f * (img.at(x + 1, y) - img.at(x - 1, y));
      const float gy = 0.5f * (img.at(x, y + 1) - img.at(x, y - 1));
      ixx.at(x, y) = gx * gx;
      iyy.at(x, y) = gy * gy;
      ixy.at(x, y) = gx * gy;
    }
  }
  ixx = gaussian_blur(ixx, 1.5);
  iyy = gaussian_blur(iyy, 1.5);
  ixy = gaussian_blur(ixy, 1.5);
  FloatImage r(img.width, img.height);
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    const double a = ixx.data[i], b = iyy.data[i], c = ixy.data[i];
    r.data[i] = static_cast<float>(a * b - c * c - k * (a + b) * (a + b));
  }
  return r;
}

double parabolic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace

std::vector<Feature> CornerPatchExtractor::extract(const GrayImage& image) const {
  std::vector<Feature> features;
  if (image.empty()) return features;

  const int radius = opts_.patch_radius;
  const int margin = static_cast<int>(std::ceil(radius * std::sqrt(2.0))) + 2;
  FloatImage level = gaussian_blur(to_float(image), 1.0);

  for (int l = 0; l < opts_.levels; ++l) {
    if (l > 0) level = downsample(gaussian_blur(level, 1.0));
    if (level.width <= 2 * margin + 2 || level.height <= 2 * margin + 2) break;
    const double scale = std::ldexp(1.0, l);

    const FloatImage response = harris_response(level, opts_.harris_k);
    const FloatImage patch_src = gaussian_blur(level, 1.5);
    const float max_r = *std::max_element(response.data.begin(), response.data.end());
    const double threshold = std::max(opts_.min_response, opts_.relative_threshold * max_r);

    std::vector<Keypoint> candidates;
    for (int y = margin; y < level.height - margin; ++y) {
      for (int x = margin; x < level.width - margin; ++x) {
        const float v = response.at(x, y);
        if (v <= threshold) continue;
        bool is_max = true;
        for (int dy = -2; dy <= 2 && is_max; ++dy) {
          for (int dx = -2; dx <= 2; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const float n = response.at(x + dx, y + dy);
            // Plateau ties go to the first pixel in scan order.
            const bool earlier = dy < 0 || (dy == 0 && dx < 0);
            if (n > v || (earlier && n == v)) {
              is_max = false;
              break;
            }
          }
        }
        if (!is_max) continue;
        const double ox = parabolic_offset(response.at(x - 1, y), v, response.at(x + 1, y));
        const double oy = parabolic_offset(response.at(x, y - 1), v, response.at(x, y + 1));
        Keypoint kp;
        kp.xy = {x + ox, y + oy};  // level coordinates for now
        kp.response = v;
        kp.level = l;
        candidates.push_back(kp);
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
    if (static_cast<int>(candidates.size()) > opts_.max_features_per_level) {
      candidates.resize(opts_.max_features_per_level);
    }

    const int g = opts_.grid;
    const double step = 2.0 * radius / g;
    for (auto kp : candidates) {
      const int cx = static_cast<int>(std::lround(kp.xy.x));
      const int cy = static_cast<int>(std::lround(kp.xy.y));
      double m10 = 0.0, m01 = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const double v = patch_src.at(cx + dx, cy + dy);
          m10 += dx * v;
          m01 += dy * v;
        }
      }
      kp.angle = std::atan2(m01, m10);
      const double cs = std::cos(kp.angle), sn = std::sin(kp.angle);

      std::vector<float> desc(static_cast<std::size_t>(g) * g);
      double mean = 0.0;
      for (int j = 0; j < g; ++j) {
        for (int i = 0; i < g; ++i) {
          const double u = -radius + (i + 0.5) * step;
          const double v = -radius + (j + 0.5) * step;
          const double sx = kp.xy.x + cs * u - sn * v;
          const double sy = kp.xy.y + sn * u + cs * v;
          desc[j * g + i] = patch_src.bilinear(sx, sy);
          mean += desc[j * g + i];
        }
      }
      mean /= desc.size();
      double norm = 0.0;
      for (auto& d : desc) {
        d = static_cast<float>(d - mean);
        norm += static_cast<double>(d) * d;
      }
      norm = std::sqrt(norm);
      if (norm < 1e-6) continue;
      for (auto& d : desc) d = static_cast<float>(d / norm);

      // level pixel centres -> base pixel centres
      kp.xy = {(kp.xy.x + 0.5) * scale - 0.5, (kp.xy.y + 0.5) * scale - 0.5};
      features.push_back({kp, std::move(desc)});
    }
  }
  return features;
}

// ---------------------------------------------------------------------------
// Matching

namespace {

float squared_l2(const std::vector<float>& a, const std::vector<float>& b) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

struct Nearest {
  int best = -1;
  float d1 = std::numeric_limits<float>::infinity();
  float d2 = std::numeric_limits<float>::infinity();
};

Nearest nearest(const Feature& q, std::span<const Feature> pool) {
  Nearest n;
  for (int j = 0; j < static_cast<int>(pool.size()); ++j) {
    if (pool[j].descriptor.size() != q.descriptor.size()) continue;
    const float d = squared_l2(q.descriptor, pool[j].descriptor);
    if (d < n.d1) {
      n.d2 = n.d1;
      n.d1 = d;
      n.best = j;
    } else if (d < n.d2) {
      n.d2 = d;
    }
  }
  return n;
}

}  // namespace

std::vector<KeypointMatch> match_features(std::span<const Feature> from, std::span<const Feature> to,
                                          const MatchOptions& opts) {
  std::vector<KeypointMatch> matches;
  std::vector<int> reverse_best(to.size(), -2);
  for (const auto& f : from) {
    const Nearest n = nearest(f, to);
    if (n.best < 0 || !std::isfinite(n.d2)) continue;
    const double d1 = std::sqrt(n.d1);
    const double d2 = std::sqrt(n.d2);
    if (!(d1 < opts.ratio * d2)) continue;
    if (opts.mutual) {
      auto& rb = reverse_best[n.best];
      if (rb == -2) rb = nearest(to[n.best], from).best;
      if (&from[rb] != &f) continue;
    }
    matches.push_back({f.keypoint.xy, to[n.best].keypoint.xy, 1.0 - d1 / d2});
  }
  std::stable_sort(matches.begin(), matches.end(),
                   [](const KeypointMatch& a, const KeypointMatch& b) { return a.score > b.score; });
  return matches;
}

std::vector<KeypointMatch> detect_and_match(const GrayImage& frame, const GrayImage& reference,
                                            const FeatureExtractor& extractor, const MatchOptions& opts) {
  if (frame.empty() || reference.empty()) throw Error(ErrorCode::InvalidArgument, "empty image");
  const auto a = extractor.extract(frame);
  if (a.empty()) throw Error(ErrorCode::NoKeypoints, "frame has no keypoints");
  const auto b = extractor.extract(reference);
  if (b.empty()) throw Error(ErrorCode::NoKeypoints, "reference has no keypoints");
  return match_features(a, b, opts);
}

std::vector<KeypointMatch> detect_and_match(const GrayImage& frame, const GrayImage& reference) {
  return detect_and_match(frame, reference, CornerPatchExtractor{});
}

// ---------------------------------------------------------------------------
// Robust estimation

namespace {

// Similarity that moves the centroid to the origin and the mean distance to sqrt(2).
Eigen::Matrix3d normalizing_transform(std::span<const Point2> pts) {
  double cx = 0, cy = 0;
  for (auto p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= pts.size();
  cy /= pts.size();
  double mean_dist = 0;
  for (auto p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= pts.size();
  const double s = mean_dist > 0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

std::optional<Homography> dlt(std::span<const KeypointMatch> matches) {
  const auto n = matches.size();
  std::vector<Point2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = matches[i].src_xy;
    dst[i] = matches[i].dst_xy;
  }
  const Eigen::Matrix3d ts = normalizing_transform(src);
  const Eigen::Matrix3d td = normalizing_transform(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    const double x = s.x(), y = s.y(), u = d.x(), v = d.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::Matrix<double, 9, 9> ata = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  const Eigen::Matrix<double, 9, 1> hv = eig.eigenvectors().col(0);
  Eigen::Matrix3d hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  const Eigen::Matrix3d hm = td.inverse() * hn * ts;
  if (std::abs(hm(2, 2)) < 1e-15) return std::nullopt;
  Homography out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.h[r * 3 + c] = hm(r, c) / hm(2, 2);
  if (!out.invertible()) return std::nullopt;
  return out;
}

double reprojection_error(const Homography& h, const KeypointMatch& m) {
  const auto p = h.apply(m.src_xy);
  if (!p) return std::numeric_limits<double>::infinity();
  return distance(*p, m.dst_xy);
}

bool collinear(Point2 a, Point2 b, Point2 c) {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double scale = std::max(1.0, distance(a, b) * distance(a, c));
  return std::abs(cross) < 1e-6 * scale;
}

bool degenerate_sample(const std::array<KeypointMatch, 4>& s) {
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        if (collinear(s[i].src_xy, s[j].src_xy, s[k].src_xy)) return true;
        if (collinear(s[i].dst_xy, s[j].dst_xy, s[k].dst_xy)) return true;
      }
    }
  }
  return false;
}

struct Consensus {
  std::vector<int> inliers;
  double sse = 0.0;
};

Consensus score(const Homography& h, std::span<const KeypointMatch> matches, double threshold) {
  Consensus c;
  for (int i = 0; i < static_cast<int>(matches.size()); ++i) {
    const double e = reprojection_error(h, matches[i]);
    if (e <= threshold) {
      c.inliers.push_back(i);
      c.sse += e * e;
    }
  }
  return c;
}

std::vector<KeypointMatch> subset(std::span<const KeypointMatch> matches, const std::vector<int>& idx) {
  std::vector<KeypointMatch> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(matches[i]);
  return out;
}

}  // namespace

Homography fit_homography_dlt(std::span<const KeypointMatch> matches) {
  if (matches.size() < 4) throw Error(ErrorCode::InsufficientMatches, "need at least 4 matches");
  auto h = dlt(matches);
  if (!h) throw Error(ErrorCode::DegenerateGeometry, "degenerate correspondence set");
  const auto c = score(*h, matches, std::numeric_limits<double>::infinity());
  h->inlier_count = static_cast<int>(c.inliers.size());
  h->reprojection_rmse_px = c.inliers.empty() ? 0.0 : std::sqrt(c.sse / c.inliers.size());
  return *h;
}

Homography estimate_homography(std::span<const KeypointMatch> matches, const RansacOptions& ransac) {
  const int n = static_cast<int>(matches.size());
  if (n < 4) throw Error(ErrorCode::InsufficientMatches, std::to_string(n) + " matches, need at least 4");
  if (ransac.iterations < 1 || !(ransac.inlier_px > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "RANSAC needs iterations >= 1 and inlier_px > 0");
  }

  std::mt19937_64 rng(ransac.seed);
  std::optional<Homography> best;
  Consensus best_c;
  for (int it = 0; it < ransac.iterations; ++it) {
    std::array<int, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      // Rejection sampling without replacement; avoids distribution objects so
      // the sequence depends only on the engine.
      while (true) {
        const int cand = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        if (std::find(idx.begin(), idx.begin() + k, cand) == idx.begin() + k) {
          idx[k] = cand;
          break;
        }
      }
    }
    const std::array<KeypointMatch, 4> sample{matches[idx[0]], matches[idx[1]], matches[idx[2]], matches[idx[3]]};
    if (degenerate_sample(sample)) continue;
    const auto h = dlt(sample);
    if (!h) continue;
    auto c = score(*h, matches, ransac.inlier_px);
    if (!best || c.inliers.size() > best_c.inliers.size() ||
        (c.inliers.size() == best_c.inliers.size() && c.sse < best_c.sse)) {
      best = *h;
      best_c = std::move(c);
      if (static_cast<int>(best_c.inliers.size()) == n) break;
    }
  }
  if (!best || best_c.inliers.size() < 4) {
    throw Error(ErrorCode::NoConsensus, "fewer than 4 inliers");
  }

  // Refit on the consensus set until it stops changing; the reported inliers
  // are always those of the returned matrix.
  Homography current = *best;
  Consensus current_c = best_c;
  for (int round = 0; round < 10; ++round) {
    const auto refit = dlt(subset(matches, current_c.inliers));
    if (!refit) break;
    auto c = score(*refit, matches, ransac.inlier_px);
    if (c.inliers.size() < 4 || c.inliers.size() < current_c.inliers.size()) break;
    const bool same = c.inliers == current_c.inliers;
    current = *refit;
    current_c = std::move(c);
    if (same) break;
  }
  current.inlier_count = static_cast<int>(current_c.inliers.size());
  current.reprojection_rmse_px = std::sqrt(current_c.sse / current_c.inliers.size());
  return current;
}

std::vector<PhotoGazePoint> remap_gaze(std::span<const ScreenGazePoint> points, const Homography& screen_to_photo,
                                       Size2 photo_size) {
  if (!screen_to_photo.invertible()) throw Error(ErrorCode::InvalidArgument, "homography is singular");
  std::vector<PhotoGazePoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    PhotoGazePoint g;
    g.timestamp_us = p.timestamp_us;
    if (const auto q = screen_to_photo.apply(p.screen_xy)) {
      g.photo_xy = *q;
      g.in_bounds = p.valid && photo_size.contains(*q);
    } else {
      g.photo_xy = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    out.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------

FrameRegistrar::FrameRegistrar(GrayImage reference, std::shared_ptr<const FeatureExtractor> extractor,
                               RansacOptions ransac, double reuse_motion_px)
    : extractor_(std::move(extractor)), ransac_(ransac), reuse_motion_px_(reuse_motion_px) {
  reference_features_ = extractor_->extract(reference);
  if (reference_features_.empty()) throw Error(ErrorCode::NoKeypoints, "reference has no keypoints");
}

Homography FrameRegistrar::register_frame(const GrayImage& frame) {
  auto features = extractor_->extract(frame);
  if (features.empty()) throw Error(ErrorCode::NoKeypoints, "frame has no keypoints");
  if (previous_) {
    const auto motion = match_features(features, previous_features_);
    if (motion.size() >= 4) {
      std::vector<double> d;
      d.reserve(motion.size());
      for (const auto& m : motion) d.push_back(distance(m.src_xy, m.dst_xy));
      std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
      if (d[d.size() / 2] < reuse_motion_px_) {
        ++reused_;
        previous_features_ = std::move(features);
        return *previous_;
      }
    }
  }
  const auto matches = match_features(features, reference_features_);
  previous_ = estimate_homography(matches, ransac_);
  previous_features_ = std::move(features);
  return *previous_;
}

}  // namespace e2r
