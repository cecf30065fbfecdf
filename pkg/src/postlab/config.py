"""Reading experiment configurations and writing reports as YAML.

Config grammar (YAML mapping)::

    seed: 42                 # optional; --seed and POSTLAB_SEED take over when absent
    trials: 0                # default Monte Carlo trials per experiment
    tau: 1.0e-12             # support threshold
    tol_cluster: 1.0e-8      # eigenvalue clustering tolerance
    operators:               # optional named matrices, referenced by name below
      H: {pauli: x}
    experiments:
      - name: contextuality  # one of postlab.experiments.EXPERIMENTS
        dim: 5               # optional, inferred from operators
        rules: [born, app, {kind: generalized, alpha: 0.5}]   # or a single `rule:`
        trials: 100000
        seed: 7              # optional per-experiment seed
        params: {...}        # experiment-specific, see PARAM_SCHEMA

A matrix is a row-major list of rows whose entries are ``[re, im]`` pairs or
plain reals, or one of ``{diag: [...]}``, ``{pauli: x|y|z|i}``,
``{identity: n}``, or the name of a matrix (``X5``, ``Y5``, ``sigma_x``,
``sigma_y``, ``sigma_z`` and anything under ``operators``). A state is
``uniform``, ``{basis: k}`` or a list of amplitudes (normalized on reading).
"""

from __future__ import annotations

import math

import numpy as np
import yaml

from .errors import ConfigError, PostlabError
from .experiments import (
    DEFAULT_EPSILONS,
    EXPERIMENTS,
    PAPER_PAYOFF,
    PAPER_X,
    PAPER_Y,
    ExperimentConfig,
    ExperimentReport,
    default_schedule,
)
from .hilbert import PAULI, EPS_HERM, TOL_CLUSTER, basis_state, max_entry, uniform_state
from .measurement import APP, BORN, TAU, MeasurementRule, generalized, parse_rule

BUILTIN_OPERATORS = {
    "X5": PAPER_X,
    "Y5": PAPER_Y,
    "sigma_x": PAULI["x"],
    "sigma_y": PAULI["y"],
    "sigma_z": PAULI["z"],
}

# parameter name -> value kind, per experiment
PARAM_SCHEMA = {
    "invariance": {"observables": "operators", "unitary_count": "int", "unitaries": "operators",
                   "states": "states"},
    "equivalence": {"pairs": "pairs", "n_states": "int"},
    "contextuality": {"coarse": "operators", "fine": "operators", "state": "state"},
    "noncontextuality": {"dims": "ints", "n_states": "int", "n_contexts": "int",
                         "include_example_contexts": "bool"},
    "decorrelation": {"observables": "operators", "state": "state", "cases": "cases"},
    "perturbation": {"observables": "operators", "base_state": "state", "target_branch": "int",
                     "epsilons": "floats"},
    "payoff": {"fine": "operators", "payoff": "payoff", "state": "state"},
    "branch_tree": {"schedule": "schedule", "state": "state", "max_leaves": "int"},
    "certainty": {"decompositions": "int", "dims": "ints"},
}


def default_params(name: str) -> dict:
    """Explicit defaults; the five-level example wherever observables are needed."""
    x, y = PAPER_X, PAPER_Y
    defaults = {
        "invariance": {"observables": [x, y], "unitary_count": 100},
        "equivalence": {"pairs": [
            {"a": [x, y], "b": [y], "expect": True},
            {"a": [x], "b": [x, y], "expect": False},
            {"a": [x], "b": [2 * x + np.eye(5)], "expect": True},
        ], "n_states": 100},
        "contextuality": {"coarse": [x], "fine": [x, y], "state": uniform_state(5)},
        "noncontextuality": {"dims": [3, 4, 5, 6], "n_states": 20, "n_contexts": 50,
                             "include_example_contexts": True},
        "decorrelation": {"observables": [PAULI["z"]], "state": uniform_state(2), "cases": [
            {"hamiltonian": PAULI["x"], "t": math.pi / 6},
            {"hamiltonian": PAULI["z"], "t": math.pi / 6},
        ]},
        "perturbation": {"observables": [PAULI["z"]], "base_state": basis_state(2, 0),
                         "epsilons": list(DEFAULT_EPSILONS)},
        "payoff": {"fine": [y], "payoff": dict(PAPER_PAYOFF), "state": uniform_state(5)},
        "branch_tree": {"schedule": default_schedule(), "state": uniform_state(2)},
        "certainty": {"decompositions": 1000, "dims": list(range(2, 9))},
    }
    return defaults[name]


def _num(value, path):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(path, "must be finite")
    return out


def _int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        try:
            f = float(value)
        except (TypeError, ValueError):
            raise ConfigError(path, f"expected an integer, got {value!r}") from None
        if f != int(f):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(f)
    return value


def _complex(entry, path):
    if isinstance(entry, (list, tuple)):
        if len(entry) != 2:
            raise ConfigError(path, "complex entries are [re, im] pairs")
        return complex(_num(entry[0], path + "[0]"), _num(entry[1], path + "[1]"))
    return complex(_num(entry, path))


class _Parser:
    def __init__(self, named):
        self.named = named

    def matrix(self, spec, path, hermitian=True):
        if isinstance(spec, str):
            if spec in self.named:
                m = np.asarray(self.named[spec], dtype=complex)
            elif spec in BUILTIN_OPERATORS:
                m = np.asarray(BUILTIN_OPERATORS[spec], dtype=complex)
            else:
                raise ConfigError(path, f"unknown operator name {spec!r}")
        elif isinstance(spec, np.ndarray):
            m = spec.astype(complex)
        elif isinstance(spec, dict):
            if "diag" in spec:
                m = np.diag([_complex(v, f"{path}.diag[{i}]") for i, v in enumerate(spec["diag"])])
            elif "pauli" in spec:
                key = str(spec["pauli"]).lower()
                if key not in PAULI:
                    raise ConfigError(path + ".pauli", f"unknown Pauli matrix {spec['pauli']!r}")
                m = PAULI[key].copy()
            elif "identity" in spec:
                m = np.eye(_int(spec["identity"], path + ".identity"), dtype=complex)
            else:
                raise ConfigError(path, "matrix mapping needs one of diag, pauli, identity")
        elif isinstance(spec, list):
            rows = []
            for i, row in enumerate(spec):
                if not isinstance(row, list):
                    raise ConfigError(f"{path}[{i}]", "matrix rows must be lists")
                rows.append([_complex(e, f"{path}[{i}][{j}]") for j, e in enumerate(row)])
            if not rows or any(len(r) != len(rows) for r in rows):
                raise ConfigError(path, "matrix must be square")
            m = np.array(rows, dtype=complex)
        else:
            raise ConfigError(path, f"cannot read a matrix from {spec!r}")
        if hermitian:
            dev = max_entry(m - m.conj().T)
            if dev > EPS_HERM:
                raise ConfigError(path, f"operator is not Hermitian (deviation {dev:.3g})")
        return m

    def operators(self, spec, path, hermitian=True):
        if not isinstance(spec, list) or not spec:
            raise ConfigError(path, "expected a nonempty list of operators")
        return [self.matrix(s, f"{path}[{i}]", hermitian) for i, s in enumerate(spec)]

    def state(self, spec, path, dim):
        if isinstance(spec, np.ndarray):
            v = spec.astype(complex)
        elif spec == "uniform":
            if dim is None:
                raise ConfigError(path, "uniform state needs a known dimension")
            v = uniform_state(dim)
        elif isinstance(spec, dict) and "basis" in spec:
            if dim is None:
                raise ConfigError(path, "basis state needs a known dimension")
            k = _int(spec["basis"], path + ".basis")
            if not 0 <= k < dim:
                raise ConfigError(path + ".basis", f"index outside [0, {dim})")
            v = basis_state(dim, k)
        elif isinstance(spec, list):
            v = np.array([_complex(e, f"{path}[{i}]") for i, e in enumerate(spec)])
        else:
            raise ConfigError(path, f"cannot read a state from {spec!r}")
        if dim is not None and v.shape[0] != dim:
            raise ConfigError(path, f"state has dimension {v.shape[0]}, expected {dim}")
        n = np.linalg.norm(v)
        if n == 0:
            raise ConfigError(path, "state is zero")
        return v / n


def _rule(spec, path):
    if isinstance(spec, MeasurementRule):
        return spec
    if isinstance(spec, str):
        try:
            return parse_rule(spec)
        except ValueError as exc:
            if "alpha" in str(exc):
                raise ConfigError(path + ".alpha", str(exc)) from None
            raise ConfigError(path, str(exc)) from None
    if isinstance(spec, dict):
        kind = str(spec.get("kind", "")).lower()
        if kind in ("born", "pp"):
            return BORN
        if kind == "app":
            return APP
        if kind == "generalized":
            if "alpha" not in spec:
                raise ConfigError(path + ".alpha", "generalized rule needs alpha")
            a = _num(spec["alpha"], path + ".alpha")
            if not 0.0 <= a <= 1.0:
                raise ConfigError(path + ".alpha", f"alpha must lie in [0, 1], got {a!r}")
            return generalized(a)
        raise ConfigError(path + ".kind", f"unknown rule kind {spec.get('kind')!r}")
    raise ConfigError(path, f"cannot read a rule from {spec!r}")


def _matrices_in(value):
    if isinstance(value, np.ndarray):
        yield value
    elif isinstance(value, dict):
        for v in value.values():
            yield from _matrices_in(v)
    elif isinstance(value, (list, tuple)):
        for v in value:
            yield from _matrices_in(v)


def _parse_params(name, raw, parser, path, dim):
    schema = PARAM_SCHEMA[name]
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "params must be a mapping")
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{path}.{key}", f"unknown parameter for {name!r}")
    out = default_params(name)
    parsed = {}
    # operators first, so states can take their dimension from them
    order = sorted(raw, key=lambda k: schema[k] in ("state", "states"))
    for key in order:
        kind, value, p = schema[key], raw[key], f"{path}.{key}"
        if kind == "operators":
            parsed[key] = parser.operators(value, p, hermitian=(key != "unitaries"))
            if dim is None:
                dim = parsed[key][0].shape[0]
        elif kind == "int":
            parsed[key] = _int(value, p)
        elif kind == "ints":
            parsed[key] = [_int(v, f"{p}[{i}]") for i, v in enumerate(value)]
        elif kind == "floats":
            parsed[key] = [_num(v, f"{p}[{i}]") for i, v in enumerate(value)]
        elif kind == "bool":
            parsed[key] = bool(value)
        elif kind == "pairs":
            parsed[key] = [{
                "a": parser.operators(pr.get("a"), f"{p}[{i}].a"),
                "b": parser.operators(pr.get("b"), f"{p}[{i}].b"),
                **({"expect": bool(pr["expect"])} if "expect" in pr else {}),
            } for i, pr in enumerate(value)]
        elif kind == "cases":
            parsed[key] = [{"hamiltonian": parser.matrix(c.get("hamiltonian"), f"{p}[{i}].hamiltonian"),
                            "t": _num(c.get("t"), f"{p}[{i}].t")} for i, c in enumerate(value)]
        elif kind == "payoff":
            items = value.items() if isinstance(value, dict) else value
            pay = {}
            for i, item in enumerate(items):
                k, v = item
                pay[_num(k, f"{p}[{i}][0]")] = _num(v, f"{p}[{i}][1]")
            parsed[key] = pay
        elif kind == "schedule":
            steps = []
            for i, st in enumerate(value):
                sp = f"{p}[{i}]"
                if "measure" in st:
                    steps.append({"measure": parser.operators(st["measure"], sp + ".measure")})
                elif "evolve" in st:
                    steps.append({"evolve": parser.matrix(st["evolve"], sp + ".evolve"),
                                  "t": _num(st.get("t"), sp + ".t")})
                else:
                    raise ConfigError(sp, "schedule steps need measure or evolve")
            parsed[key] = steps
            if dim is None:
                dim = next(s["measure"][0].shape[0] for s in steps if "measure" in s)
        elif kind == "state":
            parsed[key] = parser.state(value, p, dim)
        elif kind == "states":
            parsed[key] = [parser.state(v, f"{p}[{i}]", dim) for i, v in enumerate(value)]
    out.update(parsed)
    if dim is None:
        dim = _default_dim(name, out)
    # defaults that depend on dimension
    for key, kind in schema.items():
        if kind == "state" and key not in parsed and key in out:
            out[key] = uniform_state(dim) if key == "state" else basis_state(dim, 0)
    if name == "invariance" and "observables" not in parsed and dim != 5:
        del out["observables"]
    for key, value in out.items():
        if schema.get(key) in ("cases", "pairs", "schedule", "operators", "state", "states") and name != "noncontextuality":
            for m in _matrices_in(value):
                if m.shape[0] != dim:
                    raise ConfigError(f"{path}.{key}", f"dimension {m.shape[0]} does not match experiment dimension {dim}")
    return out, dim


def _default_dim(name, params):
    for key in ("observables", "coarse", "fine"):
        if key in params:
            return params[key][0].shape[0]
    if name == "branch_tree":
        return next(s["measure"][0].shape[0] for s in params["schedule"] if "measure" in s)
    if name == "equivalence":
        return params["pairs"][0]["a"][0].shape[0]
    return None


def parse_config(text: str, *, seed: int | None = None, trials: int | None = None,
                 tau: float | None = None) -> list[ExperimentConfig]:
    """Parse a YAML config document into validated :class:`ExperimentConfig` objects.

    Keyword overrides replace the document values (command-line flags).
    Unless an experiment sets its own seed, experiment ``k`` receives
    ``seed XOR k``.
    """
    try:
        doc = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"malformed YAML: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be a mapping")
    base_seed = seed if seed is not None else _int(doc.get("seed", 0), "seed")
    base_trials = trials if trials is not None else _int(doc.get("trials", 0), "trials")
    base_tau = tau if tau is not None else _num(doc.get("tau", TAU), "tau")
    tol = _num(doc.get("tol_cluster", TOL_CLUSTER), "tol_cluster")
    if base_tau <= 0:
        raise ConfigError("tau", "must be positive")
    if base_trials < 0:
        raise ConfigError("trials", "must be >= 0")
    parser = _Parser({})
    for name, spec in (doc.get("operators") or {}).items():
        parser.named[name] = parser.matrix(spec, f"operators.{name}")

    exps = doc.get("experiments") or []
    if not isinstance(exps, list):
        raise ConfigError("experiments", "must be a list")
    configs = []
    for k, e in enumerate(exps):
        path = f"experiments[{k}]"
        if isinstance(e, str):
            e = {"name": e}
        if not isinstance(e, dict):
            raise ConfigError(path, "experiment entries must be mappings")
        name = e.get("name")
        if name not in EXPERIMENTS:
            raise ConfigError(path + ".name", f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
        if "rule" in e:
            rules = (_rule(e["rule"], path + ".rule"),)
        else:
            raw_rules = e.get("rules", ["born", "app"])
            if not isinstance(raw_rules, list) or not raw_rules:
                raise ConfigError(path + ".rules", "expected a nonempty list")
            rules = tuple(_rule(r, f"{path}.rules[{i}]") for i, r in enumerate(raw_rules))
        dim = _int(e["dim"], path + ".dim") if e.get("dim") is not None else None
        if dim is not None and not 1 <= dim <= 4096:
            raise ConfigError(path + ".dim", "dimension must lie in [1, 4096]")
        params, dim = _parse_params(name, e.get("params"), parser, path + ".params", dim)
        n_trials = trials if trials is not None else _int(e.get("trials", base_trials), path + ".trials")
        if n_trials < 0:
            raise ConfigError(path + ".trials", "must be >= 0")
        exp_seed = _int(e["seed"], path + ".seed") if "seed" in e and seed is None else base_seed ^ k
        configs.append(ExperimentConfig(
            name=name, dim=dim,
            rules=rules, seed=exp_seed, trials=n_trials,
            tau=base_tau if tau is not None else _num(e.get("tau", base_tau), path + ".tau"),
            tol_cluster=tol, params=params,
        ))
    return configs


def demo_document(trials: int = 100_000) -> str:
    """YAML for the built-in suite: every default experiment on the five-level example."""
    from .experiments import DEFAULT_SUITE

    doc = {
        "seed": 42,
        "trials": trials,
        "experiments": [{"name": n, "rules": ["born", "app", "generalized(0.5)"]} for n in DEFAULT_SUITE],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def to_plain(obj):
    """Convert arrays, rules, tuples and numpy scalars into YAML-safe builtins.

    Complex arrays become nested ``[re, im]`` pairs; real-valued ones plain floats.
    """
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            if obj.ndim == 0:
                return [float(obj.real), float(obj.imag)]
            return [to_plain(x) for x in obj]
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, MeasurementRule):
        return str(obj)
    if isinstance(obj, dict):
        if obj and all(isinstance(k, float) for k in obj):
            return [[k, to_plain(v)] for k, v in obj.items()]
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(x) for x in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _compact(obj):
    if isinstance(obj, np.ndarray) and obj.ndim == 2 and obj.shape[0] == obj.shape[1]:
        d = np.diag(obj)
        if np.array_equal(obj, np.diag(d)) and not np.any(d.imag):
            return {"diag": d.real.tolist()}
    if isinstance(obj, dict) and not (obj and all(isinstance(k, float) for k in obj)):
        return {k: _compact(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_compact(x) for x in obj]
    return obj


def config_to_plain(cfg: ExperimentConfig) -> dict:
    return {
        "name": cfg.name,
        "dim": cfg.dim,
        "rules": [str(r) for r in cfg.rules],
        "seed": cfg.seed,
        "trials": cfg.trials,
        "tau": cfg.tau,
        "tol_cluster": cfg.tol_cluster,
        "params": to_plain(_compact(cfg.params)),
    }


def report_to_plain(rep: ExperimentReport) -> dict:
    return {
        "name": rep.name,
        "status": rep.status,
        "analytic": to_plain(rep.analytic),
        "empirical": to_plain(rep.empirical),
        "verdicts": [{"claim": v.claim, "status": v.status, "margin": to_plain(v.margin),
                      "detail": v.detail} for v in rep.verdicts],
    }


def dump(data) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)


def flatten(data, prefix=""):
    """``(path, value)`` rows for every scalar leaf of a nested plain structure."""
    if isinstance(data, dict):
        for k, v in data.items():
            yield from flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(data, list):
        for i, v in enumerate(data):
            yield from flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, data


__all__ = [
    "parse_config",
    "default_params",
    "demo_document",
    "to_plain",
    "config_to_plain",
    "report_to_plain",
    "dump",
    "flatten",
    "ConfigError",
    "PostlabError",
]
