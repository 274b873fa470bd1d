"""Acceptance suite: one test per criterion, each printing a pass/fail line.

All tolerances come from the checked-in manifest (tolerances.txt) and are
asserted exactly as stated.  Two clauses are implemented faithfully and are
expected to fail at desk scale; the failure analysis lives in the decisions
ledger:

  * criterion 4's concentration clause (true 95th percentile ~ 0.207 > 0.2),
  * criterion 7's normalized-mean band (observed ~ 1.21-1.28x the anchor,
    above the 1.15 cap at every n in the grid).

Everything else must be green.
"""

import math

import numpy as np
import pytest

from coverlab.harness import (
    ExperimentConfig,
    run_barrier_sweep,
    run_cover_experiment,
    run_excursion_length_experiment,
    run_gw_equivalence,
    run_oracle_check,
    run_transfer_check,
    run_curve_report,
)

SEED = 0


def _report(criterion, result, subset=None):
    checks = [c for c in result.checks if subset is None or any(s in c.name for s in subset)]
    ok = all(c.passed for c in checks)
    print(f"ACCEPTANCE {criterion}: {'pass' if ok else 'FAIL'}")
    for c in checks:
        print(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    return ok, checks


@pytest.fixture(scope="module")
def cover_result():
    return run_cover_experiment(ExperimentConfig(name="cover", seed=SEED))


@pytest.fixture(scope="module")
def excursion_result():
    return run_excursion_length_experiment(
        ExperimentConfig(name="excursion", trials=40_000, seed=SEED)
    )


def test_criterion_01_oracle_vs_mc():
    """Oracle-vs-MC equivalence at n = 32, 64: 1e5 trials within 3 sigma."""
    res = run_oracle_check(
        ExperimentConfig(name="oracle-check", trials=100_000, seed=SEED), sections=("mc",)
    )
    ok, checks = _report("1 (oracle vs MC)", res)
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_02_lemma23_brackets():
    """Exact hit probabilities inside the c1 = c2 = 2 brackets on the grid."""
    res = run_oracle_check(
        ExperimentConfig(name="oracle-check", seed=SEED), sections=("bracket",)
    )
    ok, checks = _report("2 (circle-to-circle brackets)", res)
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_03_gw_exactness():
    """GW laws: enumeration equality to 1e-12, NB marginals, chi-square."""
    res = run_gw_equivalence(ExperimentConfig(name="gw-check", trials=100_000, seed=SEED))
    ok, checks = _report("3 (GW exactness)", res)
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_04a_excursion_length_and_tail(excursion_result):
    """E[D_1] within 5% of (2/pi) n^2 log(R/r); exponential tail fit."""
    ok, checks = _report(
        "4a (excursion mean and tail)",
        excursion_result,
        subset=("d1_within_5pct", "d1_mc_vs_exact", "tail_exponential"),
    )
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_04b_concentration_faithful(excursion_result):
    """Concentration clause exactly as stated: p95 < 0.2 at m = 100.

    The true 95th percentile at (n=128, r=4, R=32) is ~0.207 because
    relSD(D_1) ~ 1.05; the stated bound would need relSD <= 0.96.  Kept
    faithful and red; see the decisions ledger.
    """
    ok, checks = _report(
        "4b (concentration, expected red)", excursion_result, subset=("concentration",)
    )
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_05_equilibrium_machinery():
    """Fixed-point residuals, uniformity, q-shape, E[G_1] identity."""
    res = run_oracle_check(
        ExperimentConfig(name="oracle-check", seed=SEED), sections=("equilibrium",)
    )
    ok, checks = _report("5 (equilibrium machinery)", res)
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_06_kac_moments():
    """Kac inequality exact for m = 2, 3 on two domains."""
    res = run_oracle_check(ExperimentConfig(name="oracle-check", seed=SEED), sections=("kac",))
    ok, checks = _report("6 (Kac moments)", res)
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_07a_cover_gap_trend(cover_result):
    """Gap statistic 2 log n - tau_hat moves toward the -log log n correction."""
    ok, checks = _report(
        "7a (cover gap trend)", cover_result, subset=("gap_monotone", "moves_toward")
    )
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_07b_cover_band_faithful(cover_result):
    """Normalized-mean band exactly as stated: [0.75, 1.15] x (4/pi)(1 - ll/2l).

    The finite-n mean sits 21-28% above the second-order anchor (it exceeds
    even the leading 4/pi constant from above at n <= 256), so the 1.15 cap
    fails at every grid point.  Kept faithful and red; see the ledger.
    """
    ok, checks = _report("7b (cover band, expected red)", cover_result, subset=("band",))
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_08_transfer_ratio():
    """Walk/GW ratio inside the Delta bracket; |ratio - 1| shrinks as ell doubles."""
    res = run_transfer_check(ExperimentConfig(name="transfer", trials=50_000, seed=SEED))
    ok, checks = _report("8 (transfer ratio)", res)
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_09_barrier_shape():
    """Lower-mode normalized probabilities bounded below; upper-mode envelope."""
    res = run_barrier_sweep(ExperimentConfig(name="barrier", trials=200_000, seed=SEED))
    ok, checks = _report("9 (barrier shape)", res)
    assert ok, [c.detail for c in checks if not c.passed]


def test_criterion_10_determinism(tmp_path):
    """Every experiment re-run with the same seed emits byte-identical CSV."""
    runs = {
        "cover": ExperimentConfig(
            name="cover", n_values=(16, 24), trials=30, seed=7, workers=1
        ),
        "excursion": ExperimentConfig(name="excursion", n_values=(64,), trials=800, seed=7),
        "transfer": ExperimentConfig(name="transfer", trials=3000, seed=7),
        "gw-check": ExperimentConfig(name="gw-check", trials=5000, seed=7),
        "barrier": ExperimentConfig(name="barrier", trials=20_000, seed=7),
        "curves": ExperimentConfig(name="curves", trials=60, seed=7),
        "oracle-check": ExperimentConfig(name="oracle-check", trials=3000, seed=7),
    }
    from coverlab.harness import REGISTRY

    all_ok = True
    for name, cfg in runs.items():
        outputs = []
        for tag in ("x", "y"):
            out = tmp_path / f"{name}.{tag}.csv"
            cfg_run = ExperimentConfig(**{**cfg.__dict__, "out": out})
            if name == "oracle-check":
                REGISTRY[name](cfg_run, sections=("mc",))
            else:
                REGISTRY[name](cfg_run)
            blobs = [out.read_bytes()]
            late = out.with_suffix(".late.csv")
            if late.exists():
                blobs.append(late.read_bytes())
            outputs.append(b"".join(blobs))
        same = outputs[0] == outputs[1]
        all_ok &= same
        print(f"  [{'pass' if same else 'FAIL'}] determinism_{name}")
    print(f"ACCEPTANCE 10 (determinism): {'pass' if all_ok else 'FAIL'}")
    assert all_ok
