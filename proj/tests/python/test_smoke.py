import json
import math

import numpy as np
import pytest

import eye2recall as e2r


def metrics_fixture():
    """100 Hz trace with 37 two-point dwells and 36 jump-plus-drift transitions."""
    rows, t, x = [], 0, 2000.0

    def push(px):
        nonlocal t
        rows.append((t, px, 700.0, 1.0))
        t += 10_000

    for k in range(37):
        for s in range(224):
            push(x + (s % 2) * 2.0)
        if k == 36:
            break
        d = 1.0 if k % 2 == 0 else -1.0
        x += d * 300.0
        push(x)
        for _ in range(48 + (1 if k < 5 else 0)):
            x += d * 8.0
            push(x)
        x += d * 8.0
    return np.array(rows)


def test_constants():
    assert e2r.MIN_FIXATION_US == 300_000
    assert e2r.SACCADE_VELOCITY_DEG_S == 20.0
    assert e2r.BANDWIDTH_FRACTION == 0.05


def test_mad_threshold():
    assert e2r.dispersion_threshold_of([1, 2, 3, 4, 100]) == 4.5


def test_fixture_metrics():
    stream = e2r.stream_from_array(metrics_fixture())
    assert len(stream) == 10057
    thr = e2r.dispersion_threshold(stream)
    assert thr == 2.0
    fix = e2r.detect_fixations(stream, thr)
    sac = e2r.detect_saccades(stream)
    assert len(fix) == 37 and len(sac) == 36
    m = e2r.compute_metrics(fix, sac, stream)
    assert abs(m.fixation_ratio_pct - 82.05) < 0.5
    assert abs(m.saccade_frequency_hz - 0.358) < 0.01
    assert fix[0].duration_us >= 300_000


def test_blinks_leave_gaps():
    rows = [(i * 10_000, 500.0, 500.0, 0.1 if 10 <= i < 14 else 1.0) for i in range(40)]
    stream, spans = e2r.remove_blinks(e2r.stream_from_array(np.array(rows)), 0.5)
    assert len(stream) == 36
    assert spans == [(100_000, 130_000)]
    assert stream.valid_duration_us == 390_000 - 50_000


def test_kde_integrates_to_one():
    rng = np.random.default_rng(3)
    pts = rng.normal([320, 240], 20, size=(200, 2))
    grid = e2r.kde_heatmap(pts, 640, 480)
    assert grid.shape == (384, 512)
    cell_area = (640 / 512) * (480 / 384)
    assert abs(grid.sum() * cell_area - 1.0) < 1e-2
    iy, ix = np.unravel_index(grid.argmax(), grid.shape)
    assert abs((ix + 0.5) * 1.25 - 320) < 10 and abs((iy + 0.5) * 1.25 - 240) < 10


def test_calibration_and_homography():
    rng = np.random.default_rng(1)
    pupil = rng.uniform([50, 40], [600, 440], size=(60, 2))
    target = pupil @ np.array([[8.0, 0.2], [0.1, 3.0]]) + [100, 50]
    model = e2r.fit_calibration(pupil, target, degree=2)
    assert model.residual_rmse_px < 1e-6
    x, y = model(300, 200)
    assert x == pytest.approx(8 * 300 + 0.1 * 200 + 100)

    h_true = np.array([[0.95, 0.05, 12.0], [-0.04, 1.05, -7.0], [1e-4, -5e-5, 1.0]])
    src = rng.uniform([0, 0], [640, 480], size=(40, 2))
    hom = np.c_[src, np.ones(40)] @ h_true.T
    dst = hom[:, :2] / hom[:, 2:]
    dst[32:] = rng.uniform([0, 0], [640, 480], size=(8, 2))
    h, inliers = e2r.estimate_homography(src, dst, seed=4)
    assert inliers >= 32
    np.testing.assert_allclose(h / h[2, 2], h_true, rtol=1e-6, atol=1e-8)


def test_tfidf_hand_values():
    t = e2r.tfidf([("d1", ["tv", "tv", "film"]), ("d2", ["family", "tv"]), ("d3", ["family", "child", "child", "times"])])
    assert t["d1"]["tv"] == pytest.approx(2 / 3 * math.log(1.5), abs=1e-12)
    assert t["d3"]["child"] == pytest.approx(0.5 * math.log(3), abs=1e-12)
    assert e2r.tokenize("We watched TV, then Film!") == ["we", "watched", "tv", "then", "film"]


def test_analyze_labels_the_dwelled_region(tmp_path):
    from PIL import Image

    (tmp_path / "photos").mkdir()
    Image.new("RGB", (320, 240), (120, 90, 60)).save(tmp_path / "photos" / "c.png")
    manifest = {
        "photos": [
            {
                "id": "childhood",
                "theme": "Childhood",
                "path": "photos/c.png",
                "regions": [{"label": "Television", "polygon": [[40, 40], [140, 40], [140, 140], [40, 140]]}],
            }
        ]
    }
    (tmp_path / "library.json").write_text(json.dumps(manifest))
    # Photo (90, 90) is screen (1536 + 6.4 * 90, 6.4 * 90) on the default display.
    lines = [
        json.dumps({"t_us": k * 10_000, "x": 2112.0 + (k % 2) * 2, "y": 576.0, "conf": 1.0}) for k in range(300)
    ]
    r = e2r.analyze("\n".join(lines) + "\n", str(tmp_path / "library.json"), "childhood")
    assert r["fixations"] == 1
    assert r["rois"][0]["label"] == "Television"
    assert r["focus"] == pytest.approx(1.0)


def test_errors_carry_codes(tmp_path):
    with pytest.raises(e2r.Error) as info:
        e2r.ingest("")
    assert info.value.code == "EmptyStream"
    with pytest.raises(e2r.Error) as info:
        e2r.replay(str(tmp_path / "missing"))
    assert info.value.code == "NotFound"
    with pytest.raises(e2r.Error):
        e2r.ViewingGeometry(screen_width_px=0)
