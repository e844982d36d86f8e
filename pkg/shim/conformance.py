#!/usr/bin/env python3
"""Regenerate the shim-vs-engine conformance bound on demand.

Trains a quick model with the training engine, saves it to a temp file, then
drives both the engine predictor and this shim through 1,000 random
(state, command) corrected-mode evaluations and prints the max relative
difference.  Exits nonzero if the 1e-5 bound is violated.
"""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent / "src"))

from gtep import model_io
from gtep.predictor import Predictor
from gtep.rng import Rng
from gtep.telemetry import OracleParams, make_dataset
from gtep.training import TrainConfig, train

from gritsbot_energy_predictor import EnergyPredictor

REL_TOL = 1e-5


def main() -> int:
    print("training reference model ...")
    ds = make_dataset(OracleParams(), n_per_trial=1200)
    model = train(ds, TrainConfig(seed=7, max_epochs=15))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "energy_predictor.gtep"
        model_io.save(model, path)
        engine = Predictor(model_io.load(path))
        shim = EnergyPredictor(path)
        rng = Rng(2025)
        worst = 0.0
        for episode in range(20):
            init = 2500.0 + 2000.0 * float(rng.uniforms(1)[0])
            engine.reset(init)
            shim.reset(init)
            for _ in range(50):
                v = -0.15 + 0.31 * float(rng.uniforms(1)[0])
                w = -3.1416 + 6.2832 * float(rng.uniforms(1)[0])
                measured = 2000.0 + 4000.0 * float(rng.uniforms(1)[0])
                a = engine.step_corrected(v, w, measured)
                b = shim.step_corrected(v, w, measured)
                worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-9))
    ok = worst < REL_TOL
    print(f"max relative difference over 1000 evaluations: {worst:.3e} "
          f"(bound {REL_TOL:g}) -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
