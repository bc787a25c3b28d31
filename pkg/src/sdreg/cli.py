r"""Command-line front end.

::

    sdreg <generate|learn|evaluate|denoise|diagnose|normalize>
          --config <path> [--jobs N] [--seed S] [--out DIR]

Every subcommand reads one JSON config (see the README for schemas).
``--seed`` overrides the config's master seed, ``--out`` redirects
relative output paths into a directory, and ``--jobs`` bounds the worker
processes used by evaluate's sweep mode.  Exit codes: 0 success, 2
config error, 3 numerical failure (divergence, singularity,
non-convergence), 4 I/O or file-format error.  The ``SDREG_LOG``
environment variable (error, info, debug) sets log verbosity; result
tables go to stdout, logs to stderr.
"""

import argparse
import logging
import os
import sys

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as _config
from . import io as _io
from . import seeds
from .ensembles import (HaarLowRankSpec, covariance_stats, gen_dataset,
                        gen_gaussian_map, gen_haar_lowrank, omega,
                        rip_estimate)
from .evaluate import (denoise_experiment, dist, probe_set,
                       recovery_success)
from .exceptions import ConfigError, FormatError, NumericalError
from .learning import (LearnOptions, RegularizerModel, column_normalize,
                       learn_polyhedral, learn_semidefinite,
                       preprocess_data)
from .linalg import LinearMapL
from .scaling import normalization_residual, operator_sinkhorn_normalize
from .solvers import SolverOptions


log = logging.getLogger("sdreg")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO,
               "debug": logging.DEBUG}


def _setup_logging():
    name = os.environ.get("SDREG_LOG", "info").strip().lower()
    level = _LOG_LEVELS.get(name, logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _out_path(out_dir, path):
    """Resolve an output path, creating parent directories."""
    if out_dir and not os.path.isabs(path):
        path = os.path.join(out_dir, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _solver_options(cfg):
    return SolverOptions(max_iter=cfg["solver"]["maxIter"],
                         tol=cfg["solver"]["tol"],
                         damping=cfg["solver"]["damping"],
                         step_size=cfg["solver"]["stepSize"])


def _learn_options(cfg):
    return LearnOptions(max_outer_iter=cfg["maxOuterIter"],
                        cauchy_tol=cfg["cauchyTol"],
                        inner_solver=cfg["innerSolver"],
                        lam=cfg["lam"],
                        solver_opts=_solver_options(cfg),
                        normalize_tol=cfg["normalizeTol"],
                        normalize_max_iter=cfg["normalizeMaxIter"],
                        warm_start=cfg["warmStart"],
                        seed=cfg["seed"])


def _load_semidefinite(path, what):
    model = _io.load_model(path)
    if model.kind != "semidefinite":
        raise ConfigError("%s %s is not a semidefinite model"
                          % (what, path))
    return model


def _gaussian_map_like(rng, d, q):
    """A fresh Gaussian map draw: i.i.d. N(0, 1/d) entries."""
    return LinearMapL(rng.standard_normal((d, q, q)) / np.sqrt(d))


def cmd_generate(cfg, jobs=1, out_dir=None):
    """Generate a normalized Gaussian truth map, factors, and data."""
    q, d, n, r = cfg["q"], cfg["d"], cfg["n"], cfg["r"]
    seed = cfg["seed"]
    L, report = operator_sinkhorn_normalize(gen_gaussian_map(q, d, seed))
    if not report.converged:
        raise NumericalError("normalization of the truth map did not "
                             "converge (residual %.3e)" % report.residual)
    spec = HaarLowRankSpec(q=q, r=r, s_min=cfg["sMin"], s_max=cfg["sMax"],
                           n=n, seed=seed)
    Xs = gen_haar_lowrank(spec)
    Y = gen_dataset(L, Xs)
    if cfg["noiseSigma"] > 0:
        noise = seeds.substream(seed, "observation-noise")
        Y = Y + cfg["noiseSigma"] * noise.standard_normal(Y.shape)

    _io.save_model(_out_path(out_dir, cfg["outputs"]["map"]),
                   RegularizerModel("semidefinite", L, rank=r))
    _io.save_data(_out_path(out_dir, cfg["outputs"]["data"]), Y)
    if cfg["outputs"]["factors"]:
        _io.save_factors(_out_path(out_dir, cfg["outputs"]["factors"]), Xs)

    eps = normalization_residual(L)
    k = min(4 * r, q)
    delta_hat = rip_estimate(L, k, cfg["ripTrials"], seed)
    print("epsilon %.9e" % eps)
    print("rip%d %.9e" % (k, delta_hat))
    log.info("generated d=%d n=%d (epsilon %.3e, rip_%d %.3e)",
             d, n, eps, k, delta_hat)
    return 0


def _initial_map(cfg, d, q):
    """Initial guess for a semidefinite learn per the config."""
    if cfg["init"] is not None:
        model = _load_semidefinite(cfg["init"], "init model")
        return model.map
    if cfg["truth"] is not None and cfg["initSigma"] is not None:
        truth = _load_semidefinite(cfg["truth"], "truth model").map
        rng = seeds.substream(cfg["seed"], "init-noise")
        noisy = truth.components + cfg["initSigma"] * \
            rng.standard_normal((d, q, q)) / np.sqrt(d)
        return LinearMapL(noisy)
    rng = seeds.substream(cfg["seed"], "init")
    return _gaussian_map_like(rng, d, q)


def cmd_learn(cfg, jobs=1, out_dir=None):
    """Learn a model from a data file and write it plus a trace CSV."""
    Y = _io.load_data(cfg["data"])
    if cfg["center"] or cfg["scale"]:
        try:
            Y = preprocess_data(Y, center=cfg["center"],
                                scale=cfg["scale"])
        except ValueError as exc:
            raise ConfigError(str(exc))
    d = Y.shape[0]
    opts = _learn_options(cfg)
    dist_trace = []
    callback = None

    if cfg["kind"] == "semidefinite":
        q, r = cfg["q"], cfg["r"]
        L0 = _initial_map(cfg, d, q)
        if L0.q != q or L0.d != d:
            raise ConfigError("initial map has (d=%d, q=%d), data needs "
                              "(d=%d, q=%d)" % (L0.d, L0.q, d, q))
        if cfg["traceDist"]:
            truth = _load_semidefinite(cfg["truth"], "truth model").map
            probes = probe_set(q, cfg["probeCount"], cfg["seed"])

            def callback(t, L):
                dist_trace.append(dist(truth, L, probes))
                return False

        model = learn_semidefinite(Y, q, r, L0, opts, callback)
    else:
        p, s = cfg["p"], cfg["s"]
        if cfg["init"] is not None:
            init_model = _io.load_model(cfg["init"])
            if init_model.kind != "polyhedral":
                raise ConfigError("init model %s is not polyhedral"
                                  % cfg["init"])
            D0 = init_model.map
            if D0.shape != (d, p):
                raise ConfigError("init dictionary has shape %s, data "
                                  "needs (%d, %d)" % (D0.shape, d, p))
        else:
            rng = seeds.substream(cfg["seed"], "init")
            D0 = column_normalize(rng.standard_normal((d, p)))
        model = learn_polyhedral(Y, p, s, D0, opts)

    _io.save_model(_out_path(out_dir, cfg["outputs"]["model"]), model)
    trace = model.trace
    if cfg["outputs"]["trace"]:
        header = ["iter", "fitResidual", "mapChange"]
        rows = []
        for i in range(trace.iterations):
            row = [i + 1, trace.fit_residual[i], trace.map_change[i]]
            rows.append(row)
        if dist_trace:
            header.append("distToTruth")
            for i, row in enumerate(rows):
                row.append(dist_trace[i])
        _io.write_csv(_out_path(out_dir, cfg["outputs"]["trace"]),
                      header, rows)
    print("iterations %d" % trace.iterations)
    print("converged %d" % int(trace.converged))
    log.info("learn finished after %d outer iterations (%s)",
             trace.iterations, trace.stop_reason)
    return 0


def cmd_evaluate(cfg, jobs=1, out_dir=None):
    """Compare a learned model to the truth, or run a full sweep."""
    if cfg["mode"] == "single":
        truth = _load_semidefinite(cfg["truth"], "truth model").map
        model = _load_semidefinite(cfg["model"], "learned model").map
        probes = probe_set(truth.q, cfg["probeCount"], cfg["seed"])
        value = dist(truth, model, probes)
        success = recovery_success(value)
        print("dist %.9e" % value)
        print("success %d" % int(success))
        if cfg["outputs"]["csv"]:
            _io.write_csv(_out_path(out_dir, cfg["outputs"]["csv"]),
                          ["dist", "success"], [[value, int(success)]])
        return 0
    return _run_sweep(cfg, jobs, out_dir)


def _sweep_cell(args):
    """One (sigma, n, rep) sweep cell; runs in a worker process.

    Regenerates the shared truth map, probes, and the data prefix from
    the master seed, perturbs the initial guess with this rep's noise
    stream, and learns until the surrogate distance first drops below
    the success threshold.
    """
    cfg, sigma, n, rep = args
    q, d, r, seed = cfg["q"], cfg["d"], cfg["r"], cfg["seed"]
    L_star, report = operator_sinkhorn_normalize(
        gen_gaussian_map(q, d, seed))
    if not report.converged:
        raise NumericalError("sweep truth map did not normalize")
    spec = HaarLowRankSpec(q=q, r=r, s_min=cfg["sMin"], s_max=cfg["sMax"],
                           n=n, seed=seed)
    Y = gen_dataset(L_star, gen_haar_lowrank(spec))
    probes = probe_set(q, cfg["probeCount"], seed)

    rng = seeds.substream(seed, "init-noise", rep)
    L0 = LinearMapL(L_star.components
                    + sigma * rng.standard_normal((d, q, q)) / np.sqrt(d))
    opts = _learn_options(cfg)

    state = {"iterations": opts.max_outer_iter, "dist": np.inf,
             "success": 0}

    def callback(t, L):
        value = dist(L_star, L, probes)
        state["dist"] = value
        if recovery_success(value):
            state["iterations"] = t
            state["success"] = 1
            return True
        return False

    learn_semidefinite(Y, q, r, L0, opts, callback)
    return (sigma, n, rep, state["iterations"], state["dist"],
            state["success"])


def _run_sweep(cfg, jobs, out_dir):
    sweep = cfg["sweep"]
    cells = [(cfg, sigma, n, rep)
             for sigma in sorted(sweep["sigmas"])
             for n in sorted(sweep["ns"])
             for rep in sorted(sweep["seeds"])]
    log.info("sweep: %d cells on %d worker(s)", len(cells), jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    results.sort(key=lambda row: (row[0], row[1], row[2]))

    if cfg["outputs"]["cells"]:
        _io.write_csv(_out_path(out_dir, cfg["outputs"]["cells"]),
                      ["sigma", "n", "seed", "iterations", "dist",
                       "success"],
                      [[r[0], r[1], r[2], r[3], r[4], r[5]]
                       for r in results])

    table = {}
    for sigma, n, rep, iters, _, _ in results:
        table.setdefault((sigma, n), []).append(iters)
    rows = [[sigma, n, float(np.mean(iters))]
            for (sigma, n), iters in sorted(table.items())]
    _io.write_csv(_out_path(out_dir, cfg["outputs"]["csv"]),
                  ["sigma", "n", "meanIterationsToSuccess"], rows)
    for sigma, n, mean_iters in rows:
        print("sigma %g n %d meanIterationsToSuccess %.17g"
              % (sigma, n, mean_iters))
    return 0


def cmd_denoise(cfg, jobs=1, out_dir=None):
    """Learn configured models on training data and score denoising."""
    train = _io.load_data(cfg["train"])
    test = _io.load_data(cfg["test"])
    model_configs = []
    for m in cfg["models"]:
        entry = {"kind": m["kind"],
                 "opts": LearnOptions(max_outer_iter=m["maxOuterIter"],
                                      cauchy_tol=m["cauchyTol"],
                                      inner_solver=m["innerSolver"],
                                      lam=m["lam"],
                                      warm_start=m["warmStart"],
                                      seed=cfg["seed"])}
        if m["name"]:
            entry["name"] = m["name"]
        if m["kind"] == "semidefinite":
            entry["q"], entry["r"] = m["q"], m["r"]
        else:
            entry["p"], entry["s"] = m["p"], m["s"]
        if m["init"]:
            init_model = _io.load_model(m["init"])
            if init_model.kind != m["kind"]:
                raise ConfigError("init model %s has kind %s, expected %s"
                                  % (m["init"], init_model.kind, m["kind"]))
            entry["init"] = init_model.map
        model_configs.append(entry)

    table = denoise_experiment(train, test, cfg["noiseSigma"],
                               cfg["lambdas"], model_configs, cfg["seed"])
    _io.write_csv(_out_path(out_dir, cfg["outputs"]["csv"]),
                  ["model", "lambda", "normalizedMSE"],
                  [[name, lam, nmse] for name, lam, nmse in table.rows])
    summary = [[name, table.best[name][0], table.best[name][1]]
               for name in dict.fromkeys(n for n, _, _ in table.rows)]
    if cfg["outputs"]["summary"]:
        _io.write_csv(_out_path(out_dir, cfg["outputs"]["summary"]),
                      ["model", "bestLambda", "bestNormalizedMSE"],
                      summary)
    print("snr %.6g" % table.snr)
    for name, lam, nmse in summary:
        print("model %s bestLambda %g bestNormalizedMSE %.9e"
              % (name, lam, nmse))
    return 0


def cmd_diagnose(cfg, jobs=1, out_dir=None):
    """Emit the convergence-theory diagnostics for factors and a map."""
    Xs = _io.load_factors(cfg["factors"])
    q = Xs.shape[1]
    stats = covariance_stats(Xs)
    lam, delta = stats.lam, stats.delta
    delta_ratio = delta / lam
    omega_value = omega(Xs, q_max=cfg["omegaMax"]) if q <= cfg["omegaMax"] \
        else None

    model = None
    if cfg["model"] is not None:
        model = _load_semidefinite(cfg["model"], "model")
        if model.map.q != q:
            raise ConfigError("model q=%d does not match factors q=%d"
                              % (model.map.q, q))

    rows = [["lambda", lam, "", ""], ["delta", delta, "", ""]]
    if model is not None:
        L = model.map
        d = L.d
        thr_delta = np.sqrt(d) / (150.0 * q ** 3)
        rows.append(["deltaRatio", delta_ratio, thr_delta,
                     "pass" if delta_ratio <= thr_delta else "fail"])
        thr_omega = d / (40.0 * q ** 2)
        if omega_value is None:
            rows.append(["omega", "", "", "skipped"])
            rows.append(["omegaRatio", "", thr_omega, "skipped"])
        else:
            ratio = omega_value / lam
            rows.append(["omega", omega_value, "", ""])
            rows.append(["omegaRatio", ratio, thr_omega,
                         "pass" if ratio <= thr_omega else "fail"])
        r = cfg["r"] if cfg["r"] is not None else model.rank
        k = min(4 * r, q)
        delta_hat = rip_estimate(L, k, cfg["ripTrials"], cfg["seed"])
        rows.append(["rip%d" % k, delta_hat, 1.0 / 20.0,
                     "pass" if delta_hat <= 1.0 / 20.0 else "fail"])
        eps = normalization_residual(L)
        rows.append(["epsilon", eps, "", ""])
        norm2sq = L.norm2() ** 2
        thr_norm = 5.0 * q ** 2 / d
        rows.append(["mapNorm2Squared", norm2sq, thr_norm,
                     "pass" if norm2sq <= thr_norm else "fail"])
    else:
        rows.append(["deltaRatio", delta_ratio, "", ""])
        if omega_value is None:
            rows.append(["omega", "", "", "skipped"])
            rows.append(["omegaRatio", "", "", "skipped"])
        else:
            rows.append(["omega", omega_value, "", ""])
            rows.append(["omegaRatio", omega_value / lam, "", ""])

    _io.write_csv(_out_path(out_dir, cfg["outputs"]["csv"]),
                  ["metric", "value", "threshold", "status"], rows)
    for metric, value, threshold, status in rows:
        print("%s %s %s %s" % (metric,
                               "%.9e" % value if value != "" else "-",
                               "%.9e" % threshold if threshold != "" else
                               "-", status or "-"))
    log.info("diagnostics are informational; theorem thresholds are "
             "sufficient, not necessary")
    return 0


def cmd_normalize(cfg, jobs=1, out_dir=None):
    """Normalize a stored map and write the result."""
    model = _load_semidefinite(cfg["model"], "model")
    L, report = operator_sinkhorn_normalize(model.map, cfg["tol"],
                                            cfg["maxIter"])
    if cfg["outputs"]["report"]:
        _io.write_csv(_out_path(out_dir, cfg["outputs"]["report"]),
                      ["iterations", "residual", "converged"],
                      [[report.iterations, report.residual,
                        int(report.converged)]])
    print("iterations %d" % report.iterations)
    print("residual %.9e" % report.residual)
    print("converged %d" % int(report.converged))
    if not report.converged:
        raise NumericalError("normalization did not reach tol %.3e in %d "
                             "iterations (residual %.3e)"
                             % (cfg["tol"], cfg["maxIter"],
                                report.residual))
    _io.save_model(_out_path(out_dir, cfg["outputs"]["model"]),
                   RegularizerModel("semidefinite", L, rank=model.rank))
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "learn": cmd_learn,
    "evaluate": cmd_evaluate,
    "denoise": cmd_denoise,
    "diagnose": cmd_diagnose,
    "normalize": cmd_normalize,
}


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def main(argv=None):
    """CLI entry point; returns the process exit code."""
    parser = argparse.ArgumentParser(
        prog="sdreg",
        description="Learn and apply semidefinite-representable "
                    "regularizers.")
    parser.add_argument("task", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True,
                        help="path to the JSON experiment config")
    parser.add_argument("--jobs", type=_positive_int, default=1,
                        help="worker processes for sweep grids")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's master seed")
    parser.add_argument("--out", default=None,
                        help="directory for relative output paths")
    args = parser.parse_args(argv)
    _setup_logging()
    try:
        cfg = _config.load_config(args.config, args.task)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg["seed"] = args.seed
        return _COMMANDS[args.task](cfg, jobs=args.jobs, out_dir=args.out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3
    except (FormatError, OSError) as exc:
        log.error("i/o failure: %s", exc)
        print("i/o failure: %s" % exc, file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
