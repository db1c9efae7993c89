"""Experiment configuration: schema, validation, canonical form, and hashing.

Configs are YAML files with four sections (experiment, acquisition, model,
output).  Unknown keys are rejected with their dotted path; absent fields take
the documented defaults.  The canonical serialization fixes key order so
loading and re-serializing a file is idempotent, and the config hash covers
every semantically meaningful field (everything except the output directory).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import yaml

from .entropy import QuadratureSpec
from .errors import ConfigError, InputError

__all__ = [
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "canonical_dict",
    "serialize_config",
    "config_hash",
]

_MODES = ("sequential", "async")
_FSTAR_METHODS = ("rfm", "gumbel")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated settings for one experiment (all seeds of one benchmark)."""

    benchmark: str
    mode: str
    seeds: tuple
    benchmark_seed: int = 0
    q: int = 1
    budget: float | None = None
    max_iterations: int | None = None
    n_fstar: int = 10
    n_bases: int = 1000
    n_candidates: int = 1024
    fstar_method: str = "rfm"
    noisy_gain: bool = False
    quad: QuadratureSpec = QuadratureSpec()
    n_latent: int = 2
    refit_every: int = 5
    noise_variance: float = 1e-6
    hyperopt_budget: int = 60
    hyperopt_starts: int = 8
    lengthscale_bounds: tuple | None = None
    output_dir: str = "results"
    record_wall_time: bool = False


def _fail(key, message):
    raise ConfigError(f"config field {key!r}: {message}", key=key)


def _as_int(value, key, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(key, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(key, f"must be >= {minimum}, got {value}")
    return int(value)


def _as_float(value, key, positive=False, nonnegative=False):
    if isinstance(value, bool):
        _fail(key, f"expected a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        _fail(key, f"expected a number, got {value!r}")
    if positive and not out > 0:
        _fail(key, f"must be > 0, got {value!r}")
    if nonnegative and not out >= 0:
        _fail(key, f"must be >= 0, got {value!r}")
    return out


def _as_bool(value, key):
    if not isinstance(value, bool):
        _fail(key, f"expected true/false, got {value!r}")
    return value


def _as_str(value, key, choices=None):
    if not isinstance(value, str):
        _fail(key, f"expected a string, got {value!r}")
    if choices is not None and value not in choices:
        _fail(key, f"must be one of {', '.join(choices)}; got {value!r}")
    return value


def _section(data, name, source):
    got = data.get(name, {})
    if got is None:
        got = {}
    if not isinstance(got, dict):
        _fail(name, f"section must be a mapping in {source}")
    return dict(got)


def _reject_unknown(section, known, prefix):
    for key in section:
        if key not in known:
            _fail(f"{prefix}.{key}" if prefix else str(key), "unknown key")


def config_from_dict(data, source="<dict>"):
    """Validate a parsed mapping into an ExperimentConfig."""
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping in {source}", key="")
    _reject_unknown(data, {"experiment", "acquisition", "model", "output"}, "")

    exp = _section(data, "experiment", source)
    _reject_unknown(
        exp,
        {"benchmark", "benchmark_seed", "mode", "q", "seeds", "budget",
         "max_iterations"},
        "experiment",
    )
    if "benchmark" not in exp:
        _fail("experiment.benchmark", "required")
    benchmark = _as_str(exp["benchmark"], "experiment.benchmark")
    if "mode" not in exp:
        _fail("experiment.mode", "required")
    mode = _as_str(exp["mode"], "experiment.mode", _MODES)
    if "seeds" not in exp:
        _fail("experiment.seeds", "required")
    seeds_raw = exp["seeds"]
    if not isinstance(seeds_raw, (list, tuple)) or len(seeds_raw) == 0:
        _fail("experiment.seeds", "must be a nonempty list of integers")
    seeds = tuple(
        _as_int(s, f"experiment.seeds[{i}]", minimum=0)
        for i, s in enumerate(seeds_raw)
    )
    benchmark_seed = _as_int(exp.get("benchmark_seed", 0), "experiment.benchmark_seed", 0)
    q = _as_int(exp.get("q", 1), "experiment.q", minimum=1)
    budget = exp.get("budget")
    if budget is not None:
        # budget 0 is the documented degenerate case: init rows only
        budget = _as_float(budget, "experiment.budget", nonnegative=True)
    max_iterations = exp.get("max_iterations")
    if max_iterations is not None:
        max_iterations = _as_int(max_iterations, "experiment.max_iterations", 0)
    if budget is None and max_iterations is None:
        _fail("experiment.budget", "either budget or max_iterations is required")

    acq = _section(data, "acquisition", source)
    _reject_unknown(
        acq,
        {"n_fstar", "n_bases", "n_candidates", "fstar_method", "noisy_gain",
         "quadrature"},
        "acquisition",
    )
    n_fstar = _as_int(acq.get("n_fstar", 10), "acquisition.n_fstar", 1)
    n_bases = _as_int(acq.get("n_bases", 1000), "acquisition.n_bases", 1)
    n_candidates = _as_int(acq.get("n_candidates", 1024), "acquisition.n_candidates", 2)
    fstar_method = _as_str(
        acq.get("fstar_method", "rfm"), "acquisition.fstar_method", _FSTAR_METHODS
    )
    noisy_gain = _as_bool(acq.get("noisy_gain", False), "acquisition.noisy_gain")
    quad_raw = acq.get("quadrature", {}) or {}
    if not isinstance(quad_raw, dict):
        _fail("acquisition.quadrature", "must be a mapping")
    _reject_unknown(quad_raw, {"n_nodes", "halfwidth_sigmas"}, "acquisition.quadrature")
    try:
        quad = QuadratureSpec(
            n_nodes=_as_int(quad_raw.get("n_nodes", 64), "acquisition.quadrature.n_nodes"),
            halfwidth_sigmas=_as_float(
                quad_raw.get("halfwidth_sigmas", 8.0),
                "acquisition.quadrature.halfwidth_sigmas",
            ),
        )
    except InputError as err:
        _fail("acquisition.quadrature", str(err))

    if mode == "async":
        if fstar_method == "gumbel":
            _fail(
                "acquisition.fstar_method",
                "gumbel sampling cannot provide the joint (f*, f_Q) draws the "
                "asynchronous acquisition requires",
            )
        if noisy_gain:
            _fail("acquisition.noisy_gain", "only available in sequential mode")

    mdl = _section(data, "model", source)
    _reject_unknown(
        mdl,
        {"n_latent", "refit_every", "noise_variance", "hyperopt",
         "lengthscale_bounds"},
        "model",
    )
    n_latent = _as_int(mdl.get("n_latent", 2), "model.n_latent", 1)
    refit_every = _as_int(mdl.get("refit_every", 5), "model.refit_every", 1)
    noise_variance = _as_float(
        mdl.get("noise_variance", 1e-6), "model.noise_variance", positive=True
    )
    hyp = mdl.get("hyperopt", {}) or {}
    if not isinstance(hyp, dict):
        _fail("model.hyperopt", "must be a mapping")
    _reject_unknown(hyp, {"budget", "n_starts"}, "model.hyperopt")
    hyperopt_budget = _as_int(hyp.get("budget", 60), "model.hyperopt.budget", 0)
    hyperopt_starts = _as_int(hyp.get("n_starts", 8), "model.hyperopt.n_starts", 1)
    ls_bounds = mdl.get("lengthscale_bounds")
    if ls_bounds is not None:
        if not isinstance(ls_bounds, (list, tuple)) or len(ls_bounds) != 2:
            _fail("model.lengthscale_bounds", "must be [low, high]")
        lo = _as_float(ls_bounds[0], "model.lengthscale_bounds[0]", positive=True)
        hi = _as_float(ls_bounds[1], "model.lengthscale_bounds[1]", positive=True)
        if lo > hi:
            _fail("model.lengthscale_bounds", "low must be <= high")
        ls_bounds = (lo, hi)

    out = _section(data, "output", source)
    _reject_unknown(out, {"dir", "record_wall_time"}, "output")
    output_dir = _as_str(out.get("dir", "results"), "output.dir")
    record_wall_time = _as_bool(
        out.get("record_wall_time", False), "output.record_wall_time"
    )

    return ExperimentConfig(
        benchmark=benchmark,
        benchmark_seed=benchmark_seed,
        mode=mode,
        seeds=seeds,
        q=q,
        budget=budget,
        max_iterations=max_iterations,
        n_fstar=n_fstar,
        n_bases=n_bases,
        n_candidates=n_candidates,
        fstar_method=fstar_method,
        noisy_gain=noisy_gain,
        quad=quad,
        n_latent=n_latent,
        refit_every=refit_every,
        noise_variance=noise_variance,
        hyperopt_budget=hyperopt_budget,
        hyperopt_starts=hyperopt_starts,
        lengthscale_bounds=ls_bounds,
        output_dir=output_dir,
        record_wall_time=record_wall_time,
    )


def load_config(path):
    """Parse and validate a YAML config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", key="")
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML in {path}: {err}", key="")
    if data is None:
        raise ConfigError(f"config file is empty: {path}", key="")
    return config_from_dict(data, source=str(path))


def canonical_dict(config):
    """Nested mapping with fixed key order and plain scalar types."""
    return {
        "experiment": {
            "benchmark": config.benchmark,
            "benchmark_seed": config.benchmark_seed,
            "mode": config.mode,
            "q": config.q,
            "seeds": list(config.seeds),
            "budget": config.budget,
            "max_iterations": config.max_iterations,
        },
        "acquisition": {
            "n_fstar": config.n_fstar,
            "n_bases": config.n_bases,
            "n_candidates": config.n_candidates,
            "fstar_method": config.fstar_method,
            "noisy_gain": config.noisy_gain,
            "quadrature": {
                "n_nodes": config.quad.n_nodes,
                "halfwidth_sigmas": config.quad.halfwidth_sigmas,
            },
        },
        "model": {
            "n_latent": config.n_latent,
            "refit_every": config.refit_every,
            "noise_variance": config.noise_variance,
            "hyperopt": {
                "budget": config.hyperopt_budget,
                "n_starts": config.hyperopt_starts,
            },
            "lengthscale_bounds": (
                list(config.lengthscale_bounds)
                if config.lengthscale_bounds is not None
                else None
            ),
        },
        "output": {
            "dir": config.output_dir,
            "record_wall_time": config.record_wall_time,
        },
    }


def serialize_config(config):
    """Canonical YAML text for a config."""
    return yaml.safe_dump(canonical_dict(config), sort_keys=False)


def config_hash(config):
    """Hash of every run-affecting field (the output directory is excluded)."""
    payload = canonical_dict(config)
    del payload["output"]["dir"]
    text = yaml.safe_dump(payload, sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
