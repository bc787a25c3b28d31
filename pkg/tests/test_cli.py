"""End-to-end command-line runs: pipelines, exit codes, determinism."""

import csv
import hashlib
import json

import numpy as np
import pytest

from sdreg import io, linalg
from sdreg.cli import main
from sdreg.ensembles import HaarLowRankSpec, gen_haar_lowrank
from sdreg.linalg import LinearMapL
from sdreg.scaling import normalization_residual


def _write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _generate(tmp_path, seed=5, **over):
    cfg = {"task": "generate", "seed": seed, "q": 3, "d": 18, "n": 60,
           "r": 1, "ripTrials": 30,
           "outputs": {"map": str(tmp_path / "L.sdr"),
                       "data": str(tmp_path / "Y.sdd"),
                       "factors": str(tmp_path / "X.sdd")}}
    cfg.update(over)
    return _write_config(tmp_path / "gen.json", cfg)


# ---------------------------------------------------------------------------
# the full pipeline, one stage feeding the next


def test_generate_learn_evaluate_pipeline(tmp_path, capsys):
    assert main(["generate", "--config", _generate(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "epsilon" in out and "rip" in out

    L = io.load_model(tmp_path / "L.sdr")
    assert L.kind == "semidefinite"
    assert L.map.components.shape == (18, 3, 3)
    assert normalization_residual(L.map) <= 1e-9
    Y = io.load_data(tmp_path / "Y.sdd")
    assert Y.shape == (18, 60)
    Xs = io.load_factors(tmp_path / "X.sdd")
    # the data really is the map applied to the stored factors
    V = np.stack([linalg.vec(X) for X in Xs], axis=1)
    assert np.allclose(Y, L.map.as_matrix() @ V, atol=1e-12)

    learn_cfg = _write_config(tmp_path / "learn.json", {
        "task": "learn", "seed": 5, "q": 3, "r": 1,
        "data": str(tmp_path / "Y.sdd"),
        "truth": str(tmp_path / "L.sdr"),
        "init": str(tmp_path / "L.sdr"),
        "traceDist": True, "probeCount": 40, "maxOuterIter": 20,
        "outputs": {"model": str(tmp_path / "M.sdr"),
                    "trace": str(tmp_path / "trace.csv")}})
    assert main(["learn", "--config", learn_cfg]) == 0
    out = capsys.readouterr().out
    assert "iterations" in out and "converged" in out

    header, rows = _read_csv(tmp_path / "trace.csv")
    assert header == ["iter", "fitResidual", "mapChange", "distToTruth"]
    assert [int(r[0]) for r in rows] == list(range(1, len(rows) + 1))
    assert float(rows[-1][3]) <= 1e-3

    eval_cfg = _write_config(tmp_path / "eval.json", {
        "task": "evaluate", "seed": 5,
        "truth": str(tmp_path / "L.sdr"),
        "model": str(tmp_path / "M.sdr"),
        "probeCount": 40,
        "outputs": {"csv": str(tmp_path / "eval.csv")}})
    assert main(["evaluate", "--config", eval_cfg]) == 0
    header, rows = _read_csv(tmp_path / "eval.csv")
    assert header == ["dist", "success"]
    assert float(rows[0][0]) <= 1e-3
    assert rows[0][1] == "1"


def test_learn_polyhedral_from_cli(tmp_path, rng):
    d, p, s, n = 6, 8, 2, 120
    D = rng.standard_normal((d, p))
    D /= np.linalg.norm(D, axis=0)
    codes = np.zeros((p, n))
    for j in range(n):
        support = rng.choice(p, size=s, replace=False)
        codes[support, j] = rng.standard_normal(s)
    io.save_data(tmp_path / "Y.sdd", D @ codes)
    cfg = _write_config(tmp_path / "learn.json", {
        "task": "learn", "kind": "polyhedral", "seed": 1,
        "data": str(tmp_path / "Y.sdd"), "p": p, "s": s,
        "maxOuterIter": 10,
        "outputs": {"model": str(tmp_path / "D.sdr")}})
    assert main(["learn", "--config", cfg]) == 0
    model = io.load_model(tmp_path / "D.sdr")
    assert model.kind == "polyhedral"
    assert model.map.shape == (d, p)
    assert model.sparsity == s
    # learned atoms come back unit-length
    assert np.allclose(np.linalg.norm(model.map, axis=0), 1.0, atol=1e-9)


def test_learn_preprocessing_flags_from_cli(tmp_path, capsys):
    assert main(["generate", "--config", _generate(tmp_path)]) == 0
    capsys.readouterr()
    base = {"task": "learn", "seed": 5, "q": 3, "r": 1,
            "data": str(tmp_path / "Y.sdd"),
            "init": str(tmp_path / "L.sdr"), "maxOuterIter": 2,
            "outputs": {"model": str(tmp_path / "plain.sdr")}}
    cfg = _write_config(tmp_path / "plain.json", base)
    assert main(["learn", "--config", cfg]) == 0
    prep = dict(base, center=True, scale=True,
                outputs={"model": str(tmp_path / "prep.sdr")})
    cfg = _write_config(tmp_path / "prep.json", prep)
    assert main(["learn", "--config", cfg]) == 0
    plain_map = io.load_model(tmp_path / "plain.sdr").map.components
    prep_map = io.load_model(tmp_path / "prep.sdr").map.components
    # the flags changed what the learner saw; off by default
    assert not np.allclose(plain_map, prep_map)

    # a zero data column cannot be unit-scaled: config error, exit 2
    Y = np.array(io.load_data(tmp_path / "Y.sdd"))
    Y[:, 0] = 0.0
    io.save_data(tmp_path / "zero.sdd", Y)
    bad = dict(base, scale=True, data=str(tmp_path / "zero.sdd"))
    cfg = _write_config(tmp_path / "bad.json", bad)
    assert main(["learn", "--config", cfg]) == 2
    assert "zero data column" in capsys.readouterr().err


def test_evaluate_sweep_writes_sorted_grid(tmp_path):
    cfg = _write_config(tmp_path / "sweep.json", {
        "task": "evaluate", "seed": 3, "q": 3, "d": 18, "r": 1,
        "sMin": 1.0, "sMax": 1.0, "probeCount": 30, "maxOuterIter": 25,
        "sweep": {"sigmas": [0.25], "ns": [40, 20], "seeds": [1, 0]},
        "outputs": {"csv": str(tmp_path / "sweep.csv"),
                    "cells": str(tmp_path / "cells.csv")}})
    assert main(["evaluate", "--config", cfg]) == 0

    header, rows = _read_csv(tmp_path / "cells.csv")
    assert header == ["sigma", "n", "seed", "iterations", "dist", "success"]
    # rows sorted by (sigma, n, seed) regardless of config order
    key = [(float(r[0]), int(r[1]), int(r[2])) for r in rows]
    assert key == sorted(key)
    assert len(rows) == 4
    assert all(r[5] == "1" for r in rows)

    header, rows = _read_csv(tmp_path / "sweep.csv")
    assert header == ["sigma", "n", "meanIterationsToSuccess"]
    assert len(rows) == 2
    cells = {(float(r[0]), int(r[1])): float(r[2]) for r in rows}
    assert set(cells) == {(0.25, 20), (0.25, 40)}


def test_denoise_from_cli(tmp_path):
    assert main(["generate", "--config",
                 _generate(tmp_path, n=40, sMin=1.0, sMax=1.0)]) == 0
    # test on the training draw: both live on the same planted model
    cfg = _write_config(tmp_path / "den.json", {
        "task": "denoise", "seed": 9,
        "train": str(tmp_path / "Y.sdd"), "test": str(tmp_path / "Y.sdd"),
        "noiseSigma": 0.2, "lambdas": [0.05, 0.2],
        "models": [{"kind": "semidefinite", "q": 3, "r": 1,
                    "name": "sdp", "init": str(tmp_path / "L.sdr"),
                    "maxOuterIter": 5}],
        "outputs": {"csv": str(tmp_path / "den.csv"),
                    "summary": str(tmp_path / "best.csv")}})
    assert main(["denoise", "--config", cfg]) == 0
    header, rows = _read_csv(tmp_path / "den.csv")
    assert header == ["model", "lambda", "normalizedMSE"]
    assert [r[0] for r in rows] == ["euclidean"] * 2 + ["sdp"] * 2
    header, rows = _read_csv(tmp_path / "best.csv")
    assert header == ["model", "bestLambda", "bestNormalizedMSE"]
    assert [r[0] for r in rows] == ["euclidean", "sdp"]
    best = {r[0]: float(r[2]) for r in rows}
    assert best["sdp"] <= best["euclidean"]


def test_diagnose_from_cli(tmp_path):
    assert main(["generate", "--config", _generate(tmp_path)]) == 0
    cfg = _write_config(tmp_path / "diag.json", {
        "task": "diagnose", "seed": 2,
        "factors": str(tmp_path / "X.sdd"),
        "model": str(tmp_path / "L.sdr"),
        "r": 1, "ripTrials": 30,
        "outputs": {"csv": str(tmp_path / "diag.csv")}})
    assert main(["diagnose", "--config", cfg]) == 0
    header, rows = _read_csv(tmp_path / "diag.csv")
    assert header == ["metric", "value", "threshold", "status"]
    metrics = [r[0] for r in rows]
    assert metrics == ["lambda", "delta", "deltaRatio", "omega",
                       "omegaRatio", "rip3", "epsilon", "mapNorm2Squared"]
    for _, value, threshold, status in rows:
        if value:
            float(value)
        if threshold:
            float(threshold)
        assert status in ("", "pass", "fail", "skipped")
    # the generated map is normalized, so its deviation is tiny
    values = dict((r[0], r[1]) for r in rows)
    assert float(values["epsilon"]) <= 1e-9


def test_normalize_from_cli(tmp_path, rng):
    raw = LinearMapL(rng.standard_normal((10, 3, 3)) / np.sqrt(10))
    io.save_model(tmp_path / "raw.sdr", raw)
    cfg = _write_config(tmp_path / "norm.json", {
        "task": "normalize", "model": str(tmp_path / "raw.sdr"),
        "outputs": {"model": str(tmp_path / "norm.sdr"),
                    "report": str(tmp_path / "report.csv")}})
    assert main(["normalize", "--config", cfg]) == 0
    normalized = io.load_model(tmp_path / "norm.sdr")
    assert normalization_residual(normalized.map) <= 1e-9
    header, rows = _read_csv(tmp_path / "report.csv")
    assert header == ["iterations", "residual", "converged"]
    assert rows[0][2] == "1"


# ---------------------------------------------------------------------------
# exit codes


def test_exit_code_2_for_config_problems(tmp_path, capsys):
    assert main(["generate", "--config",
                 str(tmp_path / "missing.json")]) == 2
    bad = _write_config(tmp_path / "bad.json",
                        {"task": "generate", "qq": 3})
    assert main(["generate", "--config", bad]) == 2
    # a config for one task refused by another
    assert main(["learn", "--config", _generate(tmp_path)]) == 2
    # negative seed override
    assert main(["generate", "--config", _generate(tmp_path),
                 "--seed", "-4"]) == 2
    err = capsys.readouterr().err
    assert "config error" in err


def test_exit_code_3_for_numerical_failure(tmp_path, rng, capsys):
    raw = LinearMapL(rng.standard_normal((10, 3, 3)))
    io.save_model(tmp_path / "raw.sdr", raw)
    cfg = _write_config(tmp_path / "norm.json", {
        "task": "normalize", "model": str(tmp_path / "raw.sdr"),
        "maxIter": 1,
        "outputs": {"model": str(tmp_path / "norm.sdr"),
                    "report": str(tmp_path / "report.csv")}})
    assert main(["normalize", "--config", cfg]) == 3
    assert "numerical failure" in capsys.readouterr().err
    # the report is still written for post-mortems; the model is not
    assert (tmp_path / "report.csv").exists()
    assert not (tmp_path / "norm.sdr").exists()


def test_exit_code_4_for_io_problems(tmp_path, capsys):
    cfg = _write_config(tmp_path / "learn.json", {
        "task": "learn", "data": str(tmp_path / "absent.sdd"),
        "q": 3, "r": 1, "outputs": {"model": str(tmp_path / "M.sdr")}})
    assert main(["learn", "--config", cfg]) == 4
    # a data file where a model belongs is a format error, not a crash
    io.save_data(tmp_path / "Y.sdd", np.eye(3))
    cfg = _write_config(tmp_path / "eval.json", {
        "task": "evaluate", "truth": str(tmp_path / "Y.sdd"),
        "model": str(tmp_path / "Y.sdd"), "outputs": {}})
    assert main(["evaluate", "--config", cfg]) == 4
    assert "i/o failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# determinism and the --seed / --out flags


def test_generate_is_deterministic_and_seed_sensitive(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for sub in (a, b, c):
        sub.mkdir()
    cfg = _write_config(tmp_path / "gen.json", {
        "task": "generate", "seed": 5, "q": 3, "d": 12, "n": 20, "r": 1,
        "ripTrials": 10,
        "outputs": {"map": "L.sdr", "data": "Y.sdd", "factors": "X.sdd"}})
    assert main(["generate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["generate", "--config", cfg, "--out", str(b)]) == 0
    assert main(["generate", "--config", cfg, "--out", str(c),
                 "--seed", "6"]) == 0
    for name in ("L.sdr", "Y.sdd", "X.sdd"):
        assert _sha(a / name) == _sha(b / name)
        assert _sha(a / name) != _sha(c / name)


def test_out_dir_leaves_absolute_paths_alone(tmp_path):
    out = tmp_path / "out"
    cfg = _write_config(tmp_path / "gen.json", {
        "task": "generate", "seed": 1, "q": 3, "d": 12, "n": 10, "r": 1,
        "ripTrials": 10,
        "outputs": {"map": str(tmp_path / "abs.sdr"), "data": "rel.sdd"}})
    assert main(["generate", "--config", cfg, "--out", str(out)]) == 0
    assert (tmp_path / "abs.sdr").exists()
    assert (out / "rel.sdd").exists()
