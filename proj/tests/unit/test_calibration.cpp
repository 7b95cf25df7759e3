#include <doctest.h>

#include <array>
#include <random>

#include "e2r/calibration.hpp"
#include "e2r/error.hpp"

using namespace e2r;

namespace {

Point2 affine(Point2 p) { return {3.1 * p.x - 0.4 * p.y + 120.0, 0.2 * p.x + 2.7 * p.y - 40.0}; }

std::vector<CalibrationPair> random_pairs(std::mt19937_64& rng, int n, double noise_sigma,
                                          Point2 (*map)(Point2) = affine) {
  std::uniform_real_distribution<double> ux(80.0, 560.0), uy(60.0, 420.0);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  std::vector<CalibrationPair> out;
  for (int i = 0; i < n; ++i) {
    const Point2 p{ux(rng), uy(rng)};
    auto t = map(p);
    if (noise_sigma > 0) {
      t.x += noise(rng);
      t.y += noise(rng);
    }
    out.push_back({p, t});
  }
  return out;
}

// Closed-form degree-1 least squares: 3x3 normal equations solved by Cramer's rule.
std::array<double, 3> ols_plane(const std::vector<CalibrationPair>& pairs, bool x_axis) {
  double s[3][3] = {};
  double b[3] = {};
  for (const auto& p : pairs) {
    const double row[3] = {1.0, p.pupil_xy.x, p.pupil_xy.y};
    const double t = x_axis ? p.target_xy.x : p.target_xy.y;
    for (int i = 0; i < 3; ++i) {
      b[i] += row[i] * t;
      for (int j = 0; j < 3; ++j) s[i][j] += row[i] * row[j];
    }
  }
  auto det = [](double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const double d = det(s);
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    double m[3][3];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] = j == k ? b[i] : s[i][j];
    }
    out[k] = det(m) / d;
  }
  return out;
}

}  // namespace

TEST_SUITE("calibration") {
  TEST_CASE("monomial order and count") {
    CHECK(monomial_count(1) == 3);
    CHECK(monomial_count(2) == 6);
    CHECK(monomial_count(3) == 10);
    const auto m = monomials({2.0, 3.0}, 2);
    const std::vector<double> expected{1, 2, 3, 4, 6, 9};
    CHECK(m == expected);
  }

  TEST_CASE("exact affine pairs fit with negligible residual") {
    std::mt19937_64 rng(1);
    const auto pairs = random_pairs(rng, 25, 0.0);
    const auto model = fit_calibration(pairs, 2);
    CHECK(model.residual_rmse_px < 1e-6);
    CHECK(model.coeffs_x.size() == 6);
    CHECK(model.n_points == 25);
    for (const auto& p : pairs) {
      const auto q = evaluate(model, p.pupil_xy);
      CHECK(q.x == doctest::Approx(p.target_xy.x).epsilon(1e-9));
      CHECK(q.y == doctest::Approx(p.target_xy.y).epsilon(1e-9));
    }
  }

  TEST_CASE("degree 1 fit matches the normal-equation oracle") {
    std::mt19937_64 rng(2);
    const auto pairs = random_pairs(rng, 40, 3.0);
    const auto model = fit_calibration(pairs, 1);
    const auto cx = ols_plane(pairs, true), cy = ols_plane(pairs, false);
    for (const Point2 p : {Point2{100, 100}, Point2{320, 240}, Point2{500, 400}}) {
      const auto q = evaluate(model, p);
      CHECK(q.x == doctest::Approx(cx[0] + cx[1] * p.x + cx[2] * p.y).epsilon(1e-9));
      CHECK(q.y == doctest::Approx(cy[0] + cy[1] * p.x + cy[2] * p.y).epsilon(1e-9));
    }
  }

  TEST_CASE("degenerate and insufficient inputs") {
    std::vector<CalibrationPair> same(10, CalibrationPair{{200, 200}, {1000, 500}});
    CHECK_THROWS_AS(fit_calibration(same, 2), Error);
    try {
      fit_calibration(same, 2);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateGeometry);
    }
    // Collinear pupils: rank deficient for any degree.
    std::vector<CalibrationPair> line;
    for (int i = 0; i < 12; ++i) line.push_back({{10.0 * i, 20.0 * i}, {double(i), double(i)}});
    try {
      fit_calibration(line, 2);
      FAIL("expected DegenerateGeometry");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateGeometry);
    }
    std::mt19937_64 rng(3);
    try {
      fit_calibration(random_pairs(rng, 5, 0.0), 2);
      FAIL("expected InsufficientPoints");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientPoints);
    }
  }

  TEST_CASE("noisy pairs give a residual near the noise level") {
    std::mt19937_64 rng(42);
    const auto model = fit_calibration(random_pairs(rng, 120, 2.0), 2);
    // Per-axis sigma 2 => expected 2-D RMSE about 2*sqrt(2*(1-6/120)) = 2.76.
    CHECK(model.residual_rmse_px >= 1.0);
    CHECK(model.residual_rmse_px <= 4.0);
  }

  TEST_CASE("residual is non-increasing in degree") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const auto pairs = random_pairs(rng, 60, 4.0, [](Point2 p) {
        return Point2{affine(p).x + 0.002 * p.x * p.y, affine(p).y - 0.001 * p.x * p.x};
      });
      double prev = std::numeric_limits<double>::infinity();
      for (int d = 1; d <= 4; ++d) {
        const double r = fit_calibration(pairs, d).residual_rmse_px;
        CHECK(r <= prev + 1e-9);
        prev = r;
      }
    }
  }

  TEST_CASE("training pairs are reproduced within three RMSE") {
    std::mt19937_64 rng(11);
    const auto pairs = random_pairs(rng, 120, 2.0);
    const auto model = fit_calibration(pairs, 2);
    for (const auto& p : pairs) CHECK(distance(evaluate(model, p.pupil_xy), p.target_xy) <= 3 * model.residual_rmse_px);
  }

  TEST_CASE("translating targets translates predictions") {
    std::mt19937_64 rng(13);
    auto pairs = random_pairs(rng, 50, 1.5);
    const auto a = fit_calibration(pairs, 2);
    for (auto& p : pairs) {
      p.target_xy.x += 250.0;
      p.target_xy.y -= 75.0;
    }
    const auto b = fit_calibration(pairs, 2);
    CHECK(b.residual_rmse_px == doctest::Approx(a.residual_rmse_px).epsilon(1e-9));
    for (const auto& p : pairs) {
      const auto qa = evaluate(a, p.pupil_xy), qb = evaluate(b, p.pupil_xy);
      CHECK(qb.x - qa.x == doctest::Approx(250.0).epsilon(1e-9));
      CHECK(qb.y - qa.y == doctest::Approx(-75.0).epsilon(1e-9));
    }
  }

  TEST_CASE("apply calibration") {
    CalibrationModel identity;
    identity.degree = 1;
    identity.coeffs_x = {0, 1, 0};
    identity.coeffs_y = {0, 0, 1};
    GazeSample s;
    s.pupil_xy = {100, 50};
    s.timestamp_us = 77;
    s.confidence = 0.9;
    s.scene_frame_index = 3;
    const auto p = apply_calibration(identity, s);
    CHECK(p.screen_xy.x == 100);
    CHECK(p.screen_xy.y == 50);
    CHECK(p.valid);
    CHECK(p.timestamp_us == 77);
    CHECK(p.confidence == 0.9);
    CHECK(p.frame == std::optional<std::int64_t>(3));

    CalibrationModel centre = identity;
    centre.coeffs_x = {2560, 4, 0};
    centre.coeffs_y = {768, 0, 4};
    s.pupil_xy = {0, 0};
    const auto c = apply_calibration(centre, s);
    CHECK(c.screen_xy.x == 2560);
    CHECK(c.screen_xy.y == 768);

    CalibrationModel off = identity;
    off.coeffs_x = {-5, 0, 0};
    off.coeffs_y = {300, 0, 0};
    const auto o = apply_calibration(off, s);
    CHECK_FALSE(o.valid);
    CHECK(o.screen_xy.x == 0);
  }

  TEST_CASE("quality gate at 2% of screen width") {
    CalibrationModel m;
    m.residual_rmse_px = 102.4;
    CHECK(passes_quality_gate(m, {}, 0.02));
    m.residual_rmse_px = 102.5;
    CHECK_FALSE(passes_quality_gate(m, {}, 0.02));
  }

  TEST_CASE("pairs CSV and model JSON") {
    const auto pairs = parse_calibration_csv("pupil_x,pupil_y,target_x,target_y\n1,2,3,4\r\n5.5,6,7,8\n");
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[1].pupil_xy.x == 5.5);
    CHECK(pairs[1].target_xy.y == 8);
    CHECK_THROWS_AS(parse_calibration_csv("x,y\n1,2\n"), Error);
    CHECK_THROWS_AS(parse_calibration_csv("pupil_x,pupil_y,target_x,target_y\n1,2,3\n"), Error);

    std::mt19937_64 rng(17);
    const auto model = fit_calibration(random_pairs(rng, 30, 1.0), 3);
    const auto back = calibration_from_json(to_json(model));
    CHECK(back.degree == 3);
    CHECK(back.coeffs_x == model.coeffs_x);
    CHECK(back.norm_scale == model.norm_scale);
    const auto q1 = evaluate(model, {300, 200}), q2 = evaluate(back, {300, 200});
    CHECK(q1.x == q2.x);
    CHECK(q1.y == q2.y);
  }

  TEST_CASE("raw eye samples") {
    const auto s = parse_raw_samples(
        "{\"t_us\":5,\"pupil_x\":10,\"pupil_y\":20,\"conf\":0.7,\"eye\":\"left\",\"frame\":4}\n\n"
        "{\"t_us\":6,\"pupil_x\":11,\"pupil_y\":21}\n");
    REQUIRE(s.size() == 2);
    CHECK(s[0].eye == Eye::Left);
    CHECK(s[0].scene_frame_index == std::optional<std::int64_t>(4));
    CHECK(s[1].confidence == 1.0);
    CHECK_THROWS_AS(parse_raw_samples("{\"t_us\":5}\n"), Error);
  }
}
