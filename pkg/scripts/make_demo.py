#!/usr/bin/env python3
"""Regenerate the bundled demo artifacts in demo/.

The expected output is only written after the fused moments have been
checked against the brute-force atom-moment oracle, so the golden file is
oracle-backed rather than hand-written.  Re-running this script must be a
no-op: all steps are seeded and serialization is deterministic.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from momentfusion import jsonio
from momentfusion.cli import main as cli_main
from momentfusion.empirical import DiscreteDistribution, random_discrete, true_moments
from momentfusion.grassmann import as_generator
from momentfusion.moments import MomentTensor

DEMO = pathlib.Path(__file__).resolve().parents[1] / "demo"


def run():
    DEMO.mkdir(exist_ok=True)
    dist = random_discrete(4, 10, as_generator(2026), sphere=True)
    jsonio.write_json(DEMO / "distribution.json", dist.to_json_dict())

    assert cli_main(["build-cubature", "--d", "4", "--k", "2", "--t", "3",
                     "--n", "300", "--method", "solve", "--seed", "7",
                     "--out", str(DEMO / "rule.json")]) == 0
    assert cli_main(["project", "--dist", str(DEMO / "distribution.json"),
                     "--rule", str(DEMO / "rule.json"), "--p", "3",
                     "--out", str(DEMO / "projected.json")]) == 0
    assert cli_main(["fuse", "--projected", str(DEMO / "projected.json"),
                     "--rule", str(DEMO / "rule.json"), "--t", "3",
                     "--mode", "sphere",
                     "--out", str(DEMO / "expected_moments.json")]) == 0

    fused = MomentTensor.from_json_dict(jsonio.read_json(DEMO / "expected_moments.json"))
    oracle = true_moments(DiscreteDistribution.from_json_dict(
        jsonio.read_json(DEMO / "distribution.json")), 3)
    err = fused.max_abs_diff(oracle)
    assert err < 1e-12, f"demo fusion disagrees with the oracle: {err}"
    print(f"demo regenerated; oracle agreement {err:.3e}")


if __name__ == "__main__":
    run()
