"""Compare ADWIN, DDM and EDDM on an error stream whose rate jumps from 0.1 to 0.4.

Run: python3 demos/drift_detectors.py
"""

import numpy as np

from driftml.drift import ADWIN, DDM, EDDM, Status

CHANGE = 2000


def main(seeds=20):
    delays = {"ADWIN": [], "DDM": [], "EDDM": []}
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        errors = np.concatenate([rng.random(CHANGE) < 0.1, rng.random(2000) < 0.4]).astype(int)
        for name, det in (("ADWIN", ADWIN(0.002)), ("DDM", DDM()), ("EDDM", EDDM())):
            hit = next((i for i, e in enumerate(errors) if det.update(int(e)) is Status.DRIFT and i >= CHANGE),
                       None)
            delays[name].append(np.nan if hit is None else hit - CHANGE)
    print(f"error rate 0.1 -> 0.4 at t={CHANGE}, {seeds} seeds")
    for name, d in delays.items():
        d = np.asarray(d, dtype=float)
        print(f"  {name:5s} median delay {np.nanmedian(d):6.0f}  missed {int(np.isnan(d).sum())}")


if __name__ == "__main__":
    main()
