"""Command-line interface.

    swarmfold <command> [--config FILE] [--key value ...] [--dry-run]

Commands: simulate, sample, fit, train, wahba, arm, embed. A config file is
YAML with flat dotted keys (``integrator.dt: 0.001``); every key has a flag
of the same name with dashes for underscores (``--integrator.dt``,
``--t-end``). Flags override the file. Unknown keys are errors.

Exit codes: 0 success, 2 configuration error, 3 input/output error,
4 numerical failure. SWARMFOLD_SEED sets the default seed.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import yaml

from . import dirstat, dynamics as dy, manifold as mf, training
from .dirstat.gof import complexify
from .errors import (DimensionMismatch, InvalidNoiseParameter, InvalidParameter, InvalidParams,
                     InvalidStepSize, OffManifoldPoint, SwarmfoldError)
from .io import (FormatError, atomic_write_text, dumps, read_samples_csv, samples_csv_text,
                 trajectory_csv_text, trajectory_json_obj, trajectory_metadata, write_json)
from .noise import make_rng

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
SEED_ENV = "SWARMFOLD_SEED"
UINT64_MAX = 2 ** 64 - 1


class ConfigError(Exception):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class Key:
    kind: str  # int, float, str, bool, floats, path
    default: object = None
    choices: tuple = ()
    check: Optional[Callable] = None  # returns an error message or None
    required: bool = False
    help: str = ""


def _ge(lo):
    return lambda v: None if v >= lo else f"must be >= {lo}"


def _gt(lo):
    return lambda v: None if v > lo else f"must be > {lo}"


def _within(lo, hi):
    return lambda v: None if lo <= v <= hi else f"must lie in [{lo}, {hi}]"


def _unit_interval_open(v):
    return None if 0 <= v < 1 else "must lie in [0, 1)"


def _dt(v):
    return None if 0 < v <= 0.1 else "must lie in (0, 0.1]"


MODELS = ("phase", "multiplicative", "global-circle", "subensemble", "sphere", "complex-sphere", "so", "u")
NOISY_MODELS = ("phase", "multiplicative", "sphere")
METHODS = ("auto",) + dy.METHODS

COMMON = {
    "seed": Key("int", None, check=_within(0, UINT64_MAX), help="64-bit unsigned seed"),
    "output": Key("path", help="output file (stdout when omitted)"),
}

SCHEMAS = {
    "simulate": {
        "model": Key("str", choices=MODELS, required=True, help="model to integrate"),
        "n": Key("int", 10, check=_ge(1), help="number of particles"),
        "k": Key("float", 1.0, help="coupling strength"),
        "beta": Key("float", 0.0, help="phase shift"),
        "omega": Key("float", 0.0, help="natural frequency (phase models)"),
        "noise_kappa": Key("float", 0.0, check=_ge(0.0), help="noise level"),
        "noise_c": Key("float", 0.5, check=_within(-1.0, 1.0), help="multiplicative noise constant"),
        "d": Key("int", 3, check=_ge(2), help="sphere dimension d (S^{d-1}), complex m or matrix size"),
        "blocks": Key("int", 2, check=_ge(1), help="number of sub-ensembles"),
        "t_end": Key("float", 10.0, check=_ge(0.0), help="final time"),
        "record_every": Key("int", 100, check=_ge(1), help="steps between recorded snapshots"),
        "integrator.dt": Key("float", 1e-3, check=_dt, help="step size"),
        "integrator.method": Key("str", "auto", choices=METHODS, help="integration scheme"),
        "format": Key("str", "csv", choices=("csv", "json")),
    },
    "sample": {
        "family": Key("str", choices=tuple(dirstat.FAMILIES), required=True),
        "n": Key("int", 1000, check=_ge(1), help="sample size"),
        "mu": Key("floats", help="location (angle, or unit vector)"),
        "kappa": Key("float", 1.0, check=_ge(0.0), help="concentration"),
        "r": Key("float", check=_unit_interval_open, help="wrapped Cauchy / Kato-Jones radius"),
        "phi": Key("float", 0.0, help="wrapped Cauchy angle"),
        "nu": Key("float", 0.0, help="Kato-Jones angle"),
        "eta": Key("float", check=_ge(0.0), help="hyperbolic von Mises eta"),
        "alpha_exp": Key("float", help="hyperbolic von Mises exponent"),
        "psi": Key("float", 0.0, help="hyperbolic von Mises angle"),
        "zeta": Key("floats", help="spherical Cauchy parameter inside the ball"),
        "w_re": Key("floats", help="real part of the complex-ball parameter"),
        "w_im": Key("floats", help="imaginary part of the complex-ball parameter"),
        "z": Key("floats", help="Bingham diagonal concentrations"),
        "format": Key("str", "csv", choices=("csv", "json")),
    },
    "fit": {
        "family": Key("str", choices=tuple(dirstat.FAMILIES), required=True),
        "input": Key("path", required=True, help="samples CSV"),
    },
    "train": {
        "method": Key("str", "score-matching", choices=("score-matching", "mle")),
        "input": Key("path", help="phase samples CSV; a synthetic network is used when omitted"),
        "n": Key("int", 4, check=_within(2, 12), help="oscillators in the synthetic network"),
        "samples": Key("int", 100000, check=_ge(10), help="synthetic sample count"),
        "iterations": Key("int", 1500, check=_ge(1), help="MLE iterations"),
        "lr": Key("float", training.DEFAULT_LR, check=_gt(0.0), help="MLE learning rate"),
        "timing": Key("bool", False, help="include wall-clock time in the report"),
    },
    "wahba": {
        "input": Key("path", required=True, help="instance CSV"),
        "method": Key("str", "svd", choices=("svd", "stochastic")),
        "budget": Key("int", 400, check=_ge(1), help="ES generations"),
        "mc_samples": Key("int", 32, check=_ge(1), help="policy samples per loss estimate"),
    },
    "arm": {
        "input": Key("path", required=True, help="observation CSV"),
        "joints": Key("int", 0, check=_ge(0), help="joint count (0: take from the data)"),
        "budget": Key("int", 500, check=_ge(1), help="ES generations"),
    },
    "embed": {
        "input": Key("path", required=True, help="layer cloud JSON"),
        "budget": Key("int", 300, check=_ge(1), help="ES generations"),
        "strict": Key("bool", False, help="fail when the thresholds are infeasible"),
    },
}
COMMANDS = tuple(SCHEMAS)

FAMILY_KEYS = {
    "von-mises": {"mu", "kappa"},
    "wrapped-cauchy": {"r", "phi"},
    "kato-jones": {"mu", "nu", "r", "kappa"},
    "hyperbolic-von-mises": {"eta", "alpha_exp", "psi"},
    "vmf": {"mu", "kappa"},
    "spherical-cauchy": {"zeta"},
    "bergman-cauchy": {"w_re", "w_im"},
    "bingham": {"z"},
}
FAMILY_REQUIRED = {
    "wrapped-cauchy": {"r"}, "kato-jones": {"r"}, "hyperbolic-von-mises": {"eta", "alpha_exp"},
    "vmf": {"mu"}, "spherical-cauchy": {"zeta"}, "bergman-cauchy": {"w_re", "w_im"}, "bingham": {"z"},
}


def schema_for(command: str) -> dict:
    return {**COMMON, **SCHEMAS[command]}


def flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


# ---------------------------------------------------------------------------
# parsing and validation


def _coerce(kind, value):
    """Convert a raw value (YAML scalar or flag string) to the key's type."""
    if kind == "int":
        if isinstance(value, bool):
            raise ValueError("expected an integer")
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError("expected an integer")
            return int(value)
        return int(str(value).strip(), 0) if isinstance(value, str) else int(value)
    if kind == "float":
        if isinstance(value, bool):
            raise ValueError("expected a number")
        v = float(value)
        if not math.isfinite(v):
            raise ValueError("expected a finite number")
        return v
    if kind == "bool":
        if isinstance(value, bool):
            return value
        s = str(value).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected true or false")
    if kind == "floats":
        if isinstance(value, str):
            value = [t for t in value.replace(",", " ").split()]
        elif not isinstance(value, (list, tuple)):
            value = [value]
        out = [_coerce("float", v) for v in value]
        if not out:
            raise ValueError("expected at least one number")
        return out
    if kind in ("str", "path"):
        if not isinstance(value, (str, int, float)) or isinstance(value, bool):
            raise ValueError("expected a string")
        return str(value)
    raise AssertionError(kind)


def flatten(obj, prefix=""):
    """Nested mappings become dotted keys."""
    out = {}
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def validate(config: dict) -> list:
    """All problems with a config (dotted keys, including ``command``), as messages.

    Returns an empty list for a valid config. Never raises for bad content.
    """
    errors = []
    if not isinstance(config, dict):
        return ["config must be a mapping of keys to values"]
    cfg = flatten(config)
    cmd = cfg.get("command")
    if cmd is None:
        errors.append(f"command: required key missing (one of {', '.join(COMMANDS)})")
        return errors
    if cmd not in SCHEMAS:
        errors.append(f"command: unknown command {cmd!r} (one of {', '.join(COMMANDS)})")
        return errors
    schema = schema_for(cmd)
    for key in sorted(cfg):
        if key == "command":
            continue
        if key not in schema:
            errors.append(f"{key}: unknown key for command {cmd!r}")
            continue
        spec = schema[key]
        try:
            v = _coerce(spec.kind, cfg[key])
        except (TypeError, ValueError) as exc:
            errors.append(f"{key}: {exc}")
            continue
        if spec.choices and v not in spec.choices:
            errors.append(f"{key}: {v!r} is not one of {', '.join(spec.choices)}")
            continue
        if spec.check is not None:
            msg = spec.check(v)
            if msg:
                errors.append(f"{key}: {msg}")
    for key, spec in sorted(schema.items()):
        if spec.required and key not in cfg:
            errors.append(f"{key}: required key missing")
    if cmd == "simulate" and cfg.get("model") in MODELS and cfg.get("model") not in NOISY_MODELS:
        try:
            if _coerce("float", cfg.get("noise_kappa", 0.0)) > 0:
                errors.append(f"noise_kappa: model {cfg['model']!r} has no noise term")
        except (TypeError, ValueError):
            pass
    if cmd == "sample" and cfg.get("family") in FAMILY_KEYS:
        fam = cfg["family"]
        allowed = FAMILY_KEYS[fam]
        for key in sorted(set(cfg) & set(SCHEMAS["sample"])):
            if key in ("family", "n", "format") or key in allowed:
                continue
            errors.append(f"{key}: not a parameter of family {fam!r}")
        for key in sorted(FAMILY_REQUIRED.get(fam, ())):
            if key not in cfg:
                errors.append(f"{key}: required for family {fam!r}")
    return errors


def resolve(config: dict, env=None) -> dict:
    """Validated config with defaults filled in and values typed."""
    errors = validate(config)
    if errors:
        raise ConfigError(errors)
    cfg = flatten(config)
    schema = schema_for(cfg["command"])
    out = {"command": cfg["command"]}
    for key, spec in schema.items():
        if key in cfg:
            out[key] = _coerce(spec.kind, cfg[key])
        elif spec.default is not None:
            out[key] = spec.default
    if out["command"] == "sample":
        keep = FAMILY_KEYS[out["family"]] | {"family", "n", "format", "seed", "output"}
        out = {k: v for k, v in out.items() if k in keep or k == "command"}
    if "seed" not in out:
        env = os.environ if env is None else env
        raw = env.get(SEED_ENV)
        if raw is None or raw == "":
            out["seed"] = 0
        else:
            try:
                s = int(raw, 0)
            except ValueError:
                raise ConfigError([f"seed: environment variable {SEED_ENV}={raw!r} is not an integer"]) from None
            if not 0 <= s <= UINT64_MAX:
                raise ConfigError([f"seed: environment variable {SEED_ENV} is outside the 64-bit unsigned range"])
            out["seed"] = s
    return out


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: invalid YAML in {path}: {exc}"]) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError([f"config: {path} must hold a mapping of keys to values"])
    data = flatten(data)
    base = os.path.dirname(os.path.abspath(path))
    for key in ("input", "output"):
        if isinstance(data.get(key), str) and not os.path.isabs(data[key]):
            data[key] = os.path.join(base, data[key])
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmfold", description="Swarm dynamics on manifolds, "
                                     "directional statistics and learning tasks.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=f"run {cmd}")
        p.add_argument("--config", help="YAML config with flat dotted keys")
        p.add_argument("--dry-run", action="store_true", help="validate and print the resolved config")
        for key, spec in schema_for(cmd).items():
            extra = {"choices": spec.choices} if spec.choices else {}
            if spec.kind == "bool":
                p.add_argument(flag_name(key), dest=key, nargs="?", const="true", default=None,
                               help=spec.help, **extra)
            else:
                p.add_argument(flag_name(key), dest=key, default=None, help=spec.help, **extra)
    return parser


def config_from_args(ns: argparse.Namespace) -> dict:
    cfg = load_config_file(ns.config) if ns.config else {}
    if "command" in cfg and cfg["command"] != ns.command:
        raise ConfigError([f"command: config file is for {cfg['command']!r}, not {ns.command!r}"])
    cfg["command"] = ns.command
    for key in schema_for(ns.command):
        v = getattr(ns, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


# ---------------------------------------------------------------------------
# commands


def _emit(cfg, text: str):
    path = cfg.get("output")
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def _random_state(cfg, g):
    model, n, d = cfg["model"], cfg["n"], cfg["d"]
    if model in ("phase", "multiplicative", "global-circle", "subensemble"):
        return g.uniform(0.0, 2.0 * np.pi, n)
    if model == "sphere":
        return dirstat.uniform_sphere(n, d, g)
    if model == "complex-sphere":
        return dirstat.uniform_complex_sphere(n, d, g)
    if model == "so":
        Q = np.array([mf.polar_project(g.standard_normal((d, d))) for _ in range(n)])
        Q[np.linalg.det(Q) < 0, :, 0] *= -1.0
        return Q
    Z = g.standard_normal((n, d, d)) + 1j * g.standard_normal((n, d, d))
    return np.array([mf.polar_project(z) for z in Z])


def build_model(cfg):
    g = make_rng(cfg["seed"])
    X = _random_state(cfg, g)
    model = cfg["model"]
    k, beta, omega, kappa = cfg["k"], cfg["beta"], cfg["omega"], cfg["noise_kappa"]
    if model == "phase":
        return dy.PhaseEnsemble(X, omega, k, beta, kappa)
    if model == "multiplicative":
        return dy.PhaseEnsemble(X, omega, k, beta, kappa, cfg["noise_c"])
    if model == "global-circle":
        return dy.GlobalCircleModel.from_phases(X, k, beta, omega)
    if model == "subensemble":
        D = min(cfg["blocks"], cfg["n"])
        parts = np.array_split(X, D)
        return dy.SubEnsembleModel(tuple(parts), k, beta, omega)
    if model == "sphere":
        return dy.SphereEnsemble(X, None, k, noise_kappa=kappa)
    if model == "complex-sphere":
        return dy.ComplexSphereEnsemble(X, None, k)
    return dy.MatrixEnsemble(X, None, k)


def integrator_for(cfg):
    method = cfg["integrator.method"]
    if method == "auto":
        noisy = cfg["noise_kappa"] > 0 or cfg["model"] == "multiplicative"
        method = "euler-maruyama" if noisy else "projected-rk4"
    return dy.IntegratorConfig(method, cfg["integrator.dt"])


def cmd_simulate(cfg):
    model = build_model(cfg)
    icfg = integrator_for(cfg)
    traj = dy.simulate(model, icfg, cfg["t_end"], cfg["record_every"], seed=cfg["seed"])
    if cfg["format"] == "json":
        _emit(cfg, dumps(trajectory_json_obj(traj)))
    else:
        _emit(cfg, trajectory_csv_text(traj))
        if cfg.get("output"):
            write_json(cfg["output"] + ".meta.json", trajectory_metadata(traj))


def family_params(cfg):
    fam = cfg["family"]
    if fam == "von-mises":
        return dirstat.VonMisesParams(_scalar(cfg, "mu", 0.0), cfg["kappa"])
    if fam == "wrapped-cauchy":
        return dirstat.WrappedCauchyParams.from_polar(cfg["r"], cfg["phi"])
    if fam == "kato-jones":
        return dirstat.KatoJonesParams(_scalar(cfg, "mu", 0.0), cfg["nu"], cfg["r"], cfg["kappa"])
    if fam == "hyperbolic-von-mises":
        return dirstat.HyperbolicVonMisesParams(cfg["eta"], cfg["alpha_exp"], cfg["psi"])
    if fam == "vmf":
        return dirstat.VonMisesFisherParams(np.array(cfg["mu"]), cfg["kappa"])
    if fam == "spherical-cauchy":
        return dirstat.SphericalCauchyParams(np.array(cfg["zeta"]))
    if fam == "bergman-cauchy":
        if len(cfg["w_re"]) != len(cfg["w_im"]):
            raise InvalidParams("w_re and w_im must have the same length")
        return dirstat.BergmanSphericalCauchyParams(np.array(cfg["w_re"]) + 1j * np.array(cfg["w_im"]))
    z = np.array(cfg["z"])
    return dirstat.BinghamParams(np.eye(z.size), z)


def _scalar(cfg, key, default):
    v = cfg.get(key)
    if v is None:
        return default
    if len(v) != 1:
        raise InvalidParams(f"{key} must be a single angle for circle families")
    return v[0]


def cmd_sample(cfg):
    params = family_params(cfg)
    pts = dirstat.sample(params, cfg["n"], rng=cfg["seed"])
    if cfg["format"] == "json":
        _emit(cfg, dumps({**dirstat.params_to_dict(params), "seed": cfg["seed"], "samples": pts}))
    else:
        _emit(cfg, samples_csv_text(pts))


def _load_points(path, family):
    X = read_samples_csv(path)
    if family in dirstat.CIRCLE_FAMILIES:
        if X.shape[1] != 1:
            raise FormatError(f"{family} expects one angle per sample, found {X.shape[1]} components")
        return X[:, 0]
    if family == "bergman-cauchy":
        return complexify(X)
    return X


def cmd_fit(cfg):
    pts = _load_points(cfg["input"], cfg["family"])
    _emit(cfg, dumps(dirstat.fit_report(cfg["family"], pts)))


def cmd_train(cfg):
    seed = cfg["seed"]
    truth = None
    if cfg.get("input"):
        data = read_samples_csv(cfg["input"])
    else:
        N = cfg["n"]
        g = make_rng(seed)
        K = np.triu(g.uniform(-1.0, 1.0, (N, N)), 1)
        truth = K + K.T
        data = training.equilibrium_samples(truth, cfg["samples"], seed=seed)
    N = data.shape[1]
    problem = training.TrainProblem(dy.PhaseEnsemble(np.zeros(N)), data, learn_beta=cfg["method"] == "mle")
    settings = {k: cfg[k] for k in ("method", "iterations", "lr") if k in cfg}
    if cfg["method"] == "score-matching":
        K, beta = training.score_matching_fit(data)
        out = {"config": settings, "seed": seed, "K": K, "beta": beta}
    else:
        res = training.mle_train(problem, iterations=cfg["iterations"], lr=cfg["lr"], seed=seed)
        res.config = settings
        out = res.report(include_timing=cfg["timing"])
        K, beta = res.kappa.K, res.kappa.beta
    # signed couplings show up as beta = pi; kappa = K exp(i beta) is reported as well
    kappa = np.asarray(K) * np.exp(1j * np.asarray(beta))
    out["kappa"] = kappa
    if truth is not None:
        out["true_kappa"] = truth
        out["max_abs_error"] = float(np.max(np.abs(kappa - truth)))
    _emit(cfg, dumps(out))


def cmd_wahba(cfg):
    from .tasks import wahba

    inst = wahba.read_instance_csv(cfg["input"])
    if cfg["method"] == "svd":
        R = wahba.wahba_svd(inst)
        out = {"method": "svd", "rotation": R, "loss": float(wahba.wahba_loss(R, inst)),
               "quaternion": mf.rotation_to_quaternion(R)}
    else:
        res = wahba.wahba_stochastic(inst, seed=cfg["seed"], generations=cfg["budget"],
                                     mc_samples=cfg["mc_samples"])
        out = {"method": "stochastic", **res.report()}
    out["seed"] = cfg["seed"]
    _emit(cfg, dumps(out))


def cmd_arm(cfg):
    from .tasks import arm

    obs = arm.read_observation_csv(cfg["input"])
    D = cfg["joints"] or None
    fitter = arm.arm_fit_spatial if obs.spatial else arm.arm_fit_planar
    res = fitter(obs, D, seed=cfg["seed"], generations=cfg["budget"])
    out = {"kind": "spatial" if obs.spatial else "planar", "joints": obs.m, **res.report(),
           "predicted": res.predicted}
    _emit(cfg, dumps(out))


def cmd_embed(cfg):
    from .tasks import multilayer

    cloud = multilayer.read_layer_cloud(cfg["input"])
    res = multilayer.multilayer_align(cloud, seed=cfg["seed"], generations=cfg["budget"], strict=cfg["strict"])
    out = res.report()
    out["aligned_layers"] = res.aligned(cloud)
    _emit(cfg, dumps(out))


HANDLERS = {"simulate": cmd_simulate, "sample": cmd_sample, "fit": cmd_fit, "train": cmd_train,
            "wahba": cmd_wahba, "arm": cmd_arm, "embed": cmd_embed}
CONFIG_FAILURES = (InvalidParameter, InvalidParams, InvalidNoiseParameter, InvalidStepSize,
                   DimensionMismatch, OffManifoldPoint)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(config_from_args(ns))
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    if ns.dry_run:
        sys.stdout.write(dumps(cfg))
        return EXIT_OK
    try:
        HANDLERS[cfg["command"]](cfg)
    except FormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CONFIG_FAILURES as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SwarmfoldError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main():  # pragma: no cover - console entry point
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
