"""Gaze analysis, attention maps and session replay (C++ core)."""

from ._core import (
    BANDWIDTH_FRACTION,
    MIN_FIXATION_US,
    SACCADE_VELOCITY_DEG_S,
    CalibrationModel,
    Error,
    Fixation,
    GazeMetrics,
    GazeStream,
    Saccade,
    ViewingGeometry,
    analyze,
    compute_metrics,
    detect_fixations,
    detect_saccades,
    dispersion_threshold,
    dispersion_threshold_of,
    estimate_homography,
    fit_calibration,
    ingest,
    kde_heatmap,
    remove_blinks,
    replay,
    stream_from_array,
    tfidf,
    tokenize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
