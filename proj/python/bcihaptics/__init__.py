"""Workload-adaptive haptic guidance simulator."""

from ._core import (
    CHANNELS,
    SAMPLE_RATE,
    EegSynth,
    band_power,
    bandpass_gain,
    calibrate,
    friedman_test,
    guide_magnitude,
    mutual_information,
    nearest_wall_distance,
    replay_check,
    run_trial,
    scene_json,
    smooth_index,
    wilcoxon_signed_rank,
)

__all__ = [
    "CHANNELS",
    "SAMPLE_RATE",
    "EegSynth",
    "band_power",
    "bandpass_gain",
    "calibrate",
    "friedman_test",
    "guide_magnitude",
    "mutual_information",
    "nearest_wall_distance",
    "replay_check",
    "run_trial",
    "scene_json",
    "smooth_index",
    "wilcoxon_signed_rank",
]
