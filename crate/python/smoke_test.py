"""Smoke test for the `fmo` extension module.

Build it first, e.g. `pip install --no-build-isolation -e crates/py`.
"""

import json
import sys

import numpy as np

import fmo


def as_array(img):
    return np.frombuffer(img.to_bytes(), dtype="<f4").reshape(img.shape)


def main():
    traj = fmo.generate_trajectory(7, 96, 72)
    psf = traj.psf(3, 96, 72)
    total = sum(w for _, _, w in psf)
    assert abs(total - 1.0) < 1e-9, total
    print(f"trajectory: {traj.n_frames} frames, frame 3 footprint {len(psf)} px")

    cfg = json.loads(fmo.default_config())["generate"]
    cfg.update(n_sequences=1, width=96, height=72, clip_frames=13)
    samples = fmo.generate_dataset(json.dumps(cfg), master_seed=1)
    assert len(samples) == 5
    frames = [as_array(f) for f in samples[0].frames]
    assert frames[0].shape == (72, 96, 3)
    print(f"dataset: {len(samples)} windows, fmo flags {[s.is_fmo for s in samples]}")

    masks = [fmo.baseline_segment(s.frames, s.middle_frame) for s in samples]
    assert all(0.0 <= as_array(m).min() and as_array(m).max() <= 1.0 for m in masks)
    entries = fmo.track(masks)
    print("track:", [e["status"] for e in entries])

    gt_entries = fmo.track([s.gt for s in samples])
    assert all(e["status"] == "measured" for e in gt_entries), gt_entries

    assert fmo.match_counts([[0.7, 0.6]], 2) == (1, 1, 0)
    assert abs(fmo.f1(0.454, 0.791) - 0.577) < 5e-4
    assert fmo.prf(3, 1, 1) == (0.75, 0.75, 0.75)
    assert fmo.bbox_iou([0, 0, 4, 4], [2, 0, 4, 4]) == 1 / 3

    k = fmo.Kalman(0.0, 0.0, 2.0, 1.0)
    for t in range(1, 6):
        k = k.predict().update(2.0 * t, 1.0 * t)
    x, y = k.position
    assert abs(x - 10.0) < 1e-6 and abs(y - 5.0) < 1e-6, k.position

    try:
        fmo.validate_config('{"generate": {"clip_frames": 8}}')
    except ValueError as e:
        print("rejected config:", e)
    else:
        raise AssertionError("short clip accepted")

    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
