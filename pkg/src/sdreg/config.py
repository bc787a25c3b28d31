r"""Experiment configuration: strict JSON schemas for every CLI task.

A config is a single JSON document.  Validation is strict -- unknown
keys are rejected, required keys per task are checked before any
computation, and every failure raises
:class:`~sdreg.exceptions.ConfigError` with a message naming the
offending key.  Validated configs come back as plain dicts with all
defaults filled in, so downstream code never guesses.

See the README for the full schema of each task.
"""

import json

from .exceptions import ConfigError


__all__ = ["load_config", "validate_config"]


def _reject_unknown(cfg, allowed, where):
    for key in cfg:
        if key not in allowed:
            raise ConfigError("unknown key %r in %s" % (key, where))


def _get(cfg, key, types, where, required=False, default=None, check=None,
         expect=""):
    """Fetch and type-check one config value.

    ``types`` is a type or tuple; bools are rejected unless bool is
    explicitly listed (bool is an int subclass in Python, and JSON
    ``true`` where a number belongs is a config mistake).
    """
    if key not in cfg:
        if required:
            raise ConfigError("missing required key %r in %s"
                              % (key, where))
        return default
    value = cfg[key]
    if not isinstance(types, tuple):
        types = (types,)
    if isinstance(value, bool) and bool not in types:
        raise ConfigError("%s.%s must be %s, got a boolean"
                          % (where, key, expect or "a number"))
    if not isinstance(value, types):
        raise ConfigError("%s.%s must be %s, got %r"
                          % (where, key, expect or types[0].__name__,
                             type(value).__name__))
    if check is not None and not check(value):
        raise ConfigError("%s.%s has an invalid value: %r"
                          % (where, key, value))
    return value


def _get_int(cfg, key, where, required=False, default=None, minimum=None):
    check = None if minimum is None else (lambda v: v >= minimum)
    expect = "an integer" if minimum is None else (
        "an integer >= %d" % minimum)
    return _get(cfg, key, int, where, required, default, check, expect)


def _get_num(cfg, key, where, required=False, default=None, positive=False,
             nonnegative=False):
    if positive:
        check, expect = (lambda v: v > 0), "a positive number"
    elif nonnegative:
        check, expect = (lambda v: v >= 0), "a nonnegative number"
    else:
        check, expect = None, "a number"
    value = _get(cfg, key, (int, float), where, required, default, check,
                 expect)
    return value if value is None else float(value)


def _get_str(cfg, key, where, required=False, default=None, choices=None):
    check = None if choices is None else (lambda v: v in choices)
    expect = "a string" if choices is None else (
        "one of %s" % ", ".join(repr(c) for c in choices))
    return _get(cfg, key, str, where, required, default, check, expect)


def _get_bool(cfg, key, where, default=False):
    return _get(cfg, key, bool, where, default=default, expect="a boolean")


def _get_dict(cfg, key, where, required=False):
    value = _get(cfg, key, dict, where, required, None, None, "an object")
    return {} if value is None else value


def _get_list(cfg, key, where, required=False, default=None):
    value = _get(cfg, key, list, where, required, default, None, "a list")
    return value


def _num_list(cfg, key, where, required=False, positive=False):
    values = _get_list(cfg, key, where, required)
    if values is None:
        return None
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("%s.%s[%d] must be a number" % (where, key, i))
        if positive and v <= 0:
            raise ConfigError("%s.%s[%d] must be positive" % (where, key, i))
        out.append(float(v))
    if not out:
        raise ConfigError("%s.%s must be a nonempty list" % (where, key))
    return out


def _int_list(cfg, key, where, required=False, minimum=1):
    values = _get_list(cfg, key, where, required)
    if values is None:
        return None
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            raise ConfigError("%s.%s[%d] must be an integer >= %d"
                              % (where, key, i, minimum))
        out.append(v)
    if not out:
        raise ConfigError("%s.%s must be a nonempty list" % (where, key))
    return out


def _outputs(cfg, where, required_keys, optional_keys=()):
    outs = _get_dict(cfg, "outputs", where, required=bool(required_keys))
    sub = where + ".outputs"
    _reject_unknown(outs, set(required_keys) | set(optional_keys), sub)
    result = {}
    for key in required_keys:
        result[key] = _get_str(outs, key, sub, required=True)
    for key in optional_keys:
        result[key] = _get_str(outs, key, sub)
    return result


_SOLVER_KEYS = ("maxIter", "tol", "damping", "stepSize")


def _solver_opts(cfg, where):
    sub_cfg = _get_dict(cfg, "solver", where)
    sub = where + ".solver"
    _reject_unknown(sub_cfg, _SOLVER_KEYS, sub)
    return {
        "maxIter": _get_int(sub_cfg, "maxIter", sub, default=1000,
                            minimum=1),
        "tol": _get_num(sub_cfg, "tol", sub, default=1e-9, positive=True),
        "damping": _get_num(sub_cfg, "damping", sub, default=1.0,
                            positive=True),
        "stepSize": _get_num(sub_cfg, "stepSize", sub, positive=True),
    }


_LEARN_KEYS = ("maxOuterIter", "cauchyTol", "innerSolver", "lam",
               "warmStart", "normalizeTol", "normalizeMaxIter", "solver")


def _learn_opts(cfg, where):
    opts = {
        "maxOuterIter": _get_int(cfg, "maxOuterIter", where, default=150,
                                 minimum=1),
        "cauchyTol": _get_num(cfg, "cauchyTol", where, default=1e-7,
                              positive=True),
        "innerSolver": _get_str(cfg, "innerSolver", where, default="svp",
                                choices=("svp", "nuclearProx")),
        "lam": _get_num(cfg, "lam", where, positive=True),
        "warmStart": _get_bool(cfg, "warmStart", where),
        "normalizeTol": _get_num(cfg, "normalizeTol", where, default=1e-9,
                                 positive=True),
        "normalizeMaxIter": _get_int(cfg, "normalizeMaxIter", where,
                                     default=2000, minimum=1),
        "solver": _solver_opts(cfg, where),
    }
    if opts["innerSolver"] == "nuclearProx" and opts["lam"] is None:
        raise ConfigError("%s: innerSolver 'nuclearProx' requires lam"
                          % where)
    return opts


def _validate_generate(cfg):
    where = "generate"
    allowed = {"task", "seed", "q", "d", "n", "r", "sMin", "sMax",
               "noiseSigma", "ripTrials", "outputs"}
    _reject_unknown(cfg, allowed, where)
    out = {
        "task": "generate",
        "seed": _get_int(cfg, "seed", where, default=0, minimum=0),
        "q": _get_int(cfg, "q", where, required=True, minimum=2),
        "d": _get_int(cfg, "d", where, required=True, minimum=1),
        "n": _get_int(cfg, "n", where, required=True, minimum=1),
        "r": _get_int(cfg, "r", where, required=True, minimum=1),
        "sMin": _get_num(cfg, "sMin", where, default=0.5, positive=True),
        "sMax": _get_num(cfg, "sMax", where, default=1.0, positive=True),
        "noiseSigma": _get_num(cfg, "noiseSigma", where, default=0.0,
                               nonnegative=True),
        "ripTrials": _get_int(cfg, "ripTrials", where, default=100,
                              minimum=1),
        "outputs": _outputs(cfg, where, ("map", "data"), ("factors",)),
    }
    if out["r"] >= out["q"]:
        raise ConfigError("generate: r must be smaller than q")
    if out["sMin"] > out["sMax"]:
        raise ConfigError("generate: sMin must not exceed sMax")
    return out


def _validate_learn(cfg):
    where = "learn"
    allowed = {"task", "seed", "kind", "data", "center", "scale", "q",
               "r", "p", "s", "truth", "init", "initSigma", "traceDist",
               "probeCount", "outputs"} | set(_LEARN_KEYS)
    _reject_unknown(cfg, allowed, where)
    kind = _get_str(cfg, "kind", where, default="semidefinite",
                    choices=("semidefinite", "polyhedral"))
    out = {
        "task": "learn",
        "seed": _get_int(cfg, "seed", where, default=0, minimum=0),
        "kind": kind,
        "data": _get_str(cfg, "data", where, required=True),
        "center": _get_bool(cfg, "center", where),
        "scale": _get_bool(cfg, "scale", where),
        "truth": _get_str(cfg, "truth", where),
        "init": _get_str(cfg, "init", where),
        "initSigma": _get_num(cfg, "initSigma", where, positive=True),
        "traceDist": _get_bool(cfg, "traceDist", where),
        "probeCount": _get_int(cfg, "probeCount", where, default=100,
                               minimum=1),
        "outputs": _outputs(cfg, where, ("model",), ("trace",)),
    }
    out.update(_learn_opts(cfg, where))
    if kind == "semidefinite":
        out["q"] = _get_int(cfg, "q", where, required=True, minimum=2)
        out["r"] = _get_int(cfg, "r", where, required=True, minimum=1)
        if out["r"] >= out["q"]:
            raise ConfigError("learn: r must be smaller than q")
        for key in ("p", "s"):
            if key in cfg:
                raise ConfigError("learn: key %r does not apply to "
                                  "semidefinite models" % key)
    else:
        out["p"] = _get_int(cfg, "p", where, required=True, minimum=1)
        out["s"] = _get_int(cfg, "s", where, required=True, minimum=1)
        if out["s"] > out["p"]:
            raise ConfigError("learn: s must not exceed p")
        for key in ("q", "r"):
            if key in cfg:
                raise ConfigError("learn: key %r does not apply to "
                                  "polyhedral models" % key)
    if out["init"] is not None and out["initSigma"] is not None:
        raise ConfigError("learn: init and initSigma are mutually "
                          "exclusive")
    if out["initSigma"] is not None and out["truth"] is None:
        raise ConfigError("learn: initSigma requires a truth model path")
    if out["traceDist"] and out["truth"] is None:
        raise ConfigError("learn: traceDist requires a truth model path")
    if out["traceDist"] and kind != "semidefinite":
        raise ConfigError("learn: traceDist applies to semidefinite "
                          "models only")
    return out


def _validate_evaluate(cfg):
    where = "evaluate"
    if "sweep" in cfg:
        allowed = {"task", "seed", "sweep", "q", "d", "r", "sMin", "sMax",
                   "probeCount", "outputs"} | set(_LEARN_KEYS)
        _reject_unknown(cfg, allowed, where)
        sweep_cfg = _get_dict(cfg, "sweep", where, required=True)
        sub = where + ".sweep"
        _reject_unknown(sweep_cfg, ("sigmas", "ns", "seeds"), sub)
        out = {
            "task": "evaluate",
            "mode": "sweep",
            "seed": _get_int(cfg, "seed", where, default=0, minimum=0),
            "q": _get_int(cfg, "q", where, required=True, minimum=2),
            "d": _get_int(cfg, "d", where, required=True, minimum=1),
            "r": _get_int(cfg, "r", where, required=True, minimum=1),
            "sMin": _get_num(cfg, "sMin", where, default=0.5,
                             positive=True),
            "sMax": _get_num(cfg, "sMax", where, default=1.0,
                             positive=True),
            "probeCount": _get_int(cfg, "probeCount", where, default=100,
                                   minimum=1),
            "sweep": {
                "sigmas": _num_list(sweep_cfg, "sigmas", sub,
                                    required=True, positive=True),
                "ns": _int_list(sweep_cfg, "ns", sub, required=True),
                "seeds": _int_list(sweep_cfg, "seeds", sub, required=True,
                                   minimum=0),
            },
            "outputs": _outputs(cfg, where, ("csv",), ("cells",)),
        }
        out.update(_learn_opts(cfg, where))
        if out["r"] >= out["q"]:
            raise ConfigError("evaluate: r must be smaller than q")
        if out["sMin"] > out["sMax"]:
            raise ConfigError("evaluate: sMin must not exceed sMax")
        return out
    allowed = {"task", "seed", "truth", "model", "probeCount", "outputs"}
    _reject_unknown(cfg, allowed, where)
    return {
        "task": "evaluate",
        "mode": "single",
        "seed": _get_int(cfg, "seed", where, default=0, minimum=0),
        "truth": _get_str(cfg, "truth", where, required=True),
        "model": _get_str(cfg, "model", where, required=True),
        "probeCount": _get_int(cfg, "probeCount", where, default=100,
                               minimum=1),
        "outputs": _outputs(cfg, where, (), ("csv",)),
    }


_MODEL_KEYS = ("kind", "name", "q", "r", "p", "s", "init", "maxOuterIter",
               "cauchyTol", "innerSolver", "lam", "warmStart")


def _validate_model_config(cfg, where):
    _reject_unknown(cfg, _MODEL_KEYS, where)
    kind = _get_str(cfg, "kind", where, required=True,
                    choices=("semidefinite", "polyhedral"))
    out = {
        "kind": kind,
        "name": _get_str(cfg, "name", where),
        "init": _get_str(cfg, "init", where),
        "maxOuterIter": _get_int(cfg, "maxOuterIter", where, default=150,
                                 minimum=1),
        "cauchyTol": _get_num(cfg, "cauchyTol", where, default=1e-7,
                              positive=True),
        "innerSolver": _get_str(cfg, "innerSolver", where, default="svp",
                                choices=("svp", "nuclearProx")),
        "lam": _get_num(cfg, "lam", where, positive=True),
        "warmStart": _get_bool(cfg, "warmStart", where),
    }
    if kind == "semidefinite":
        out["q"] = _get_int(cfg, "q", where, required=True, minimum=2)
        out["r"] = _get_int(cfg, "r", where, required=True, minimum=1)
        if out["r"] >= out["q"]:
            raise ConfigError("%s: r must be smaller than q" % where)
    else:
        out["p"] = _get_int(cfg, "p", where, required=True, minimum=1)
        out["s"] = _get_int(cfg, "s", where, required=True, minimum=1)
        if out["s"] > out["p"]:
            raise ConfigError("%s: s must not exceed p" % where)
    if out["innerSolver"] == "nuclearProx" and out["lam"] is None:
        raise ConfigError("%s: innerSolver 'nuclearProx' requires lam"
                          % where)
    return out


def _validate_denoise(cfg):
    where = "denoise"
    allowed = {"task", "seed", "train", "test", "noiseSigma", "lambdas",
               "models", "outputs"}
    _reject_unknown(cfg, allowed, where)
    models_raw = _get_list(cfg, "models", where, required=True)
    if not models_raw:
        raise ConfigError("denoise: models must be a nonempty list")
    models = []
    for i, m in enumerate(models_raw):
        if not isinstance(m, dict):
            raise ConfigError("denoise.models[%d] must be an object" % i)
        models.append(_validate_model_config(m, "denoise.models[%d]" % i))
    return {
        "task": "denoise",
        "seed": _get_int(cfg, "seed", where, default=0, minimum=0),
        "train": _get_str(cfg, "train", where, required=True),
        "test": _get_str(cfg, "test", where, required=True),
        "noiseSigma": _get_num(cfg, "noiseSigma", where, required=True,
                               positive=True),
        "lambdas": _num_list(cfg, "lambdas", where, required=True,
                             positive=True),
        "models": models,
        "outputs": _outputs(cfg, where, ("csv",), ("summary",)),
    }


def _validate_diagnose(cfg):
    where = "diagnose"
    allowed = {"task", "seed", "factors", "model", "r", "ripTrials",
               "omegaMax", "outputs"}
    _reject_unknown(cfg, allowed, where)
    return {
        "task": "diagnose",
        "seed": _get_int(cfg, "seed", where, default=0, minimum=0),
        "factors": _get_str(cfg, "factors", where, required=True),
        "model": _get_str(cfg, "model", where),
        "r": _get_int(cfg, "r", where, minimum=1),
        "ripTrials": _get_int(cfg, "ripTrials", where, default=200,
                              minimum=1),
        "omegaMax": _get_int(cfg, "omegaMax", where, default=6, minimum=1),
        "outputs": _outputs(cfg, where, ("csv",)),
    }


def _validate_normalize(cfg):
    where = "normalize"
    allowed = {"task", "seed", "model", "tol", "maxIter", "outputs"}
    _reject_unknown(cfg, allowed, where)
    return {
        "task": "normalize",
        "seed": _get_int(cfg, "seed", where, default=0, minimum=0),
        "model": _get_str(cfg, "model", where, required=True),
        "tol": _get_num(cfg, "tol", where, default=1e-9, positive=True),
        "maxIter": _get_int(cfg, "maxIter", where, default=2000,
                            minimum=1),
        "outputs": _outputs(cfg, where, ("model",), ("report",)),
    }


_VALIDATORS = {
    "generate": _validate_generate,
    "learn": _validate_learn,
    "evaluate": _validate_evaluate,
    "denoise": _validate_denoise,
    "diagnose": _validate_diagnose,
    "normalize": _validate_normalize,
}


def validate_config(cfg, task=None):
    """Validate a parsed config dict and fill in defaults.

    Parameters
    ----------
    cfg : dict
        The parsed JSON document.
    task : str, optional
        The subcommand being run; if the config carries a ``task`` key it
        must match.

    Returns
    -------
    dict
        Normalized config with defaults applied.

    Raises
    ------
    ConfigError
        Naming the offending key for every failure mode.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    declared = cfg.get("task")
    if declared is not None and not isinstance(declared, str):
        raise ConfigError("task must be a string")
    if task is None:
        task = declared
    if task is None:
        raise ConfigError("no task given (config lacks a 'task' key)")
    if declared is not None and declared != task:
        raise ConfigError("config declares task %r but %r was requested"
                          % (declared, task))
    if task not in _VALIDATORS:
        raise ConfigError("unknown task %r (expected one of %s)"
                          % (task, ", ".join(sorted(_VALIDATORS))))
    return _VALIDATORS[task](cfg)


def load_config(path, task=None):
    """Read, parse, and validate a JSON config file."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    try:
        cfg = json.loads(text)
    except ValueError as exc:
        raise ConfigError("config %s is not valid JSON: %s" % (path, exc))
    return validate_config(cfg, task)
