import os

import numpy as np
import pytest

from coverlab.harness import (
    REGISTRY,
    Check,
    ExperimentConfig,
    emit_csv,
    load_tolerances,
    run_barrier_sweep,
    run_cover_experiment,
    run_gw_equivalence,
    run_oracle_check,
)


def test_tolerance_manifest_loads_and_has_provenance_tags():
    tol = load_tolerances()
    assert tol["cover.band_lo"] == 0.75
    assert tol["cover.band_hi"] == 1.15
    assert tol["excursion.conc_p95_max"] == 0.2
    assert tol["gw.exact_tol"] == 1e-12
    # every key used by the runners is present
    for key in (
        "oracle.mc_sigma", "lemma23.c1", "equilibrium.residual_max",
        "barrier.lower_norm_min", "transfer.min_expected_hits",
    ):
        assert key in tol
    from pathlib import Path
    import coverlab

    text = (Path(coverlab.__file__).parent / "tolerances.txt").read_text()
    assert "[PAPER]" in text and "[DERIVED]" in text


def test_registry_covers_cli_surface():
    assert set(REGISTRY) == {
        "cover", "excursion", "transfer", "gw-check", "barrier", "curves", "oracle-check"
    }


def test_emit_csv_deterministic_and_header_only(tmp_path):
    schema = ["a", "b", "c"]
    rows = [dict(a=1, b=0.1234567890123, c="x"), dict(a=2, b=float("inf"), c="y")]
    p1 = emit_csv(tmp_path / "one.csv", rows, schema)
    p2 = emit_csv(tmp_path / "two.csv", rows, schema)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().splitlines()[0] == "a,b,c"
    empty = emit_csv(tmp_path / "empty.csv", [], schema)
    assert empty.read_text() == "a,b,c\n"
    assert b"\r" not in p1.read_bytes()


def test_emit_csv_missing_column_errors(tmp_path):
    with pytest.raises(KeyError):
        emit_csv(tmp_path / "bad.csv", [dict(a=1)], ["a", "b"])


def test_experiment_reruns_are_byte_identical(tmp_path):
    cfg_a = ExperimentConfig(
        name="gw-check", trials=4000, seed=5, out=tmp_path / "a.csv"
    )
    cfg_b = ExperimentConfig(
        name="gw-check", trials=4000, seed=5, out=tmp_path / "b.csv"
    )
    run_gw_equivalence(cfg_a)
    run_gw_equivalence(cfg_b)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cover_experiment_small_run_and_failure_accounting(tmp_path):
    cfg = ExperimentConfig(
        name="cover", n_values=(16, 24), trials=40, seed=3, out=tmp_path / "cover.csv"
    )
    res = run_cover_experiment(cfg)
    assert len(res.rows) == 2
    assert all(r["failures"] == 0 for r in res.rows)
    assert (tmp_path / "cover.csv").exists()
    # a starved budget records failures instead of raising
    starved = run_cover_experiment(
        ExperimentConfig(name="cover", n_values=(16,), trials=10, seed=3, budget_mult=1e-4)
    )
    assert starved.rows[0]["failures"] == 10


def test_cover_anchors_recomputed_not_hardcoded():
    import math

    res = run_cover_experiment(
        ExperimentConfig(name="cover", n_values=(16,), trials=20, seed=1)
    )
    row = res.rows[0]
    logn = math.log(16)
    assert row["anchor_second_order"] == pytest.approx(
        (4 / math.pi) * (1 - math.log(logn) / (2 * logn))
    )
    assert row["band_lo"] == pytest.approx(0.75 * row["anchor_second_order"])


def test_worker_override_matches_serial(tmp_path):
    cfg1 = ExperimentConfig(name="cover", n_values=(16,), trials=30, seed=9, workers=1)
    cfg2 = ExperimentConfig(name="cover", n_values=(16,), trials=30, seed=9, workers=3)
    r1 = run_cover_experiment(cfg1)
    r2 = run_cover_experiment(cfg2)
    assert r1.rows[0]["mean_steps"] == r2.rows[0]["mean_steps"]


def test_workers_env_variable(monkeypatch):
    monkeypatch.setenv("COVERLAB_WORKERS", "2")
    assert ExperimentConfig(name="cover").worker_count() == 2
    monkeypatch.delenv("COVERLAB_WORKERS")
    assert ExperimentConfig(name="cover").worker_count() == 1


def test_tolerance_overrides_apply():
    cfg = ExperimentConfig(name="cover", tolerance_overrides={"cover.band_hi": 9.9})
    assert cfg.tolerances()["cover.band_hi"] == 9.9


def test_oracle_check_sections_isolated():
    res = run_oracle_check(
        ExperimentConfig(name="oracle-check", trials=500), sections=("kac",)
    )
    assert [c.name for c in res.checks] == ["kac_moment_inequality"]
    assert res.all_passed


def test_barrier_sweep_schema_and_csv(tmp_path):
    cfg = ExperimentConfig(name="barrier", trials=20_000, seed=2, out=tmp_path / "b.csv")
    res = run_barrier_sweep(cfg)
    header = (tmp_path / "b.csv").read_text().splitlines()[0].split(",")
    assert header == res.schema
    modes = {r["mode"] for r in res.rows}
    assert {"lower", "upper", "lower_min_r"} <= modes


def test_cli_exit_codes(tmp_path):
    from coverlab.cli import main

    rc = main(["gw-check", "--trials", "4000", "--out", str(tmp_path / "g.csv")])
    assert rc == 0
    assert (tmp_path / "g.csv").exists()
    # usage error
    assert main(["not-an-experiment"]) == 2


def test_cli_failing_assertion_exit_code():
    from coverlab.cli import main

    # an impossible tolerance forces an assertion failure -> exit code 1
    rc = main(["gw-check", "--trials", "2000"])
    assert rc == 0
    import coverlab.harness as h

    res = h.run_gw_equivalence(
        ExperimentConfig(
            name="gw-check", trials=2000, tolerance_overrides={"gw.chisq_pmin": 1.1}
        )
    )
    assert not res.all_passed


def test_schema_registry_documents_every_column():
    from coverlab.harness import EXPERIMENT_SCHEMAS, SCHEMA_DOCS

    assert set(EXPERIMENT_SCHEMAS) == set(REGISTRY)
    for name, schema in EXPERIMENT_SCHEMAS.items():
        assert set(schema) <= set(SCHEMA_DOCS[name]), name


def test_prob_table_csv_dump(tmp_path):
    from coverlab.schedule import dump_prob_table_csv, prob_table

    table = prob_table([8.0, 4.0, 1.0], c1=1.0, c2=1.0)
    out = tmp_path / "table.csv"
    dump_prob_table_csv(table, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "i1,i2,i3,p_minus,p_plus,delta_minus,delta_plus"
    assert len(lines) == 1 + len(table.rows())
    dump_prob_table_csv(table, tmp_path / "again.csv")
    assert out.read_bytes() == (tmp_path / "again.csv").read_bytes()


def test_cli_strict_schedule_too_shallow_is_usage_error():
    from coverlab.cli import main

    assert main(["curves", "--n", "64", "--schedule", "strict", "--trials", "10"]) == 2
