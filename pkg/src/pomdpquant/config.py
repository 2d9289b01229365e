"""Run configuration: TOML parsing, validation with field diagnostics, and
round-trip emission."""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .finite_mdp import WeightingMeasure
from .models import (UTILITIES, FinitePomdp, MachineRepairParams, ModelError, Sense, machine_repair,
                     population_growth)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


MODEL_KINDS = ("machine-repair", "population", "finite")

_MACHINE_FIELDS = {
    "epsilon": float, "kappa": float, "alpha": float, "repair_cost": float, "break_cost": float,
    "working_repair_stay": float, "broken_idle_stay": float, "initial_state": int,
}
_POPULATION_FIELDS = {"lambda": float, "tau": float, "theta": float, "initial_state": float}

_DEFAULTS = {
    "quantization": {"metric": "l2", "nu": "dirac", "nu_samples": 8, "nu_seed": 0},
    "solver": {"tolerance": 1e-9, "max_iterations": 1_000_000},
    "eval": {"seed": 42, "replications": 10_000},
    "output": {"dir": "out", "timing": True},
}

EXAMPLES = {
    "machine-repair": {
        "model": {"kind": "machine-repair", "epsilon": 0.17, "kappa": 0.9, "alpha": 0.9545,
                  "discount": 0.3, "repair_cost": 1.0, "break_cost": 2.0, "initial_state": 1},
        "quantization": {"n": 200, "n_list": list(range(10, 201, 10)), "metric": "l2", "nu": "dirac"},
        "solver": {"tolerance": 1e-9, "max_iterations": 1_000_000},
        "eval": {"seed": 42, "replications": 10_000, "horizon": 30},
        "output": {"dir": "out/machine-repair"},
    },
    "population": {
        "model": {"kind": "population", "lambda": 1.0, "tau": 0.5, "discount": 0.2, "actions": 20,
                  "utility": "square", "initial_state": 2.0},
        "quantization": {"n": 180, "n_list": [29, 45, 58, 90, 116, 180, 232, 360, 464, 720],
                         "metric": "tv", "nu": "dirac"},
        "solver": {"tolerance": 1e-9, "max_iterations": 1_000_000},
        "eval": {"seed": 42, "replications": 10_000, "horizon": 30},
        "output": {"dir": "out/population"},
    },
}


def _num(section: str, key: str, value, kind, *, positive=False, open_unit=False):
    where = f"{section}.{key}"
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
    else:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        value = float(value)
    if positive and not value > 0:
        raise ConfigError(f"{where}: must be positive, got {value!r}")
    if open_unit and not 0 < value < 1:
        raise ConfigError(f"{where}: must lie in (0, 1), got {value!r}")
    return value


def _require(section: dict, name: str, key: str):
    if key not in section:
        raise ConfigError(f"{name}.{key}: required field missing")
    return section[key]


@dataclass(eq=True)
class RunConfig:
    data: dict

    # -- construction ---------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        data = copy.deepcopy(raw)
        if "model" not in data or not isinstance(data["model"], dict):
            raise ConfigError("model: required section missing")
        for sec, defaults in _DEFAULTS.items():
            data.setdefault(sec, {})
            if not isinstance(data[sec], dict):
                raise ConfigError(f"{sec}: expected a table")
            for k, v in defaults.items():
                data[sec].setdefault(k, v)
        cfg = cls(data)
        cfg._validate()
        return cfg

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config syntax error: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.loads(text)

    def dumps(self) -> str:
        return tomli_w.dumps(self.data)

    def with_overrides(self, **fields) -> "RunConfig":
        """Override ``section.key`` fields given as keyword ``section__key``."""
        data = copy.deepcopy(self.data)
        for name, value in fields.items():
            if value is None:
                continue
            sec, key = name.split("__")
            data.setdefault(sec, {})[key] = value
        return RunConfig.from_dict(data)

    # -- validation -----------------------------------------------------------
    def _validate(self):
        m = self.data["model"]
        kind = _require(m, "model", "kind")
        if kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind: unknown kind {kind!r} (expected one of {', '.join(MODEL_KINDS)})")
        _num("model", "discount", _require(m, "model", "discount"), float, open_unit=True)
        if kind == "machine-repair":
            for key, typ in _MACHINE_FIELDS.items():
                if key in m:
                    _num("model", key, m[key], typ)
        elif kind == "population":
            for key, typ in _POPULATION_FIELDS.items():
                if key in m:
                    _num("model", key, m[key], typ, positive=key != "initial_state")
            if "actions" in m:
                acts = m["actions"]
                if isinstance(acts, list):
                    if not acts:
                        raise ConfigError("model.actions: action grid is empty")
                    for a in acts:
                        _num("model", "actions", a, float)
                else:
                    _num("model", "actions", acts, int, positive=True)
            if m.get("utility", "square") not in UTILITIES:
                raise ConfigError(f"model.utility: unknown utility {m['utility']!r}")
        else:
            for key in ("transition", "channel", "cost"):
                _require(m, "model", key)
        q = self.data["quantization"]
        if "n" in q:
            _num("quantization", "n", q["n"], int, positive=True)
        if "n_list" in q:
            if not isinstance(q["n_list"], list):
                raise ConfigError("quantization.n_list: expected a list of integers")
            for n in q["n_list"]:
                _num("quantization", "n_list", n, int, positive=True)
        if q["metric"] not in ("l1", "l2", "linf", "tv"):
            raise ConfigError(f"quantization.metric: unknown metric {q['metric']!r}")
        if q["nu"] not in ("dirac", "uniform"):
            raise ConfigError(f"quantization.nu: expected 'dirac' or 'uniform', got {q['nu']!r}")
        _num("quantization", "nu_samples", q["nu_samples"], int, positive=True)
        s = self.data["solver"]
        _num("solver", "tolerance", s["tolerance"], float, positive=True)
        _num("solver", "max_iterations", s["max_iterations"], int, positive=True)
        if not isinstance(self.data["output"]["timing"], bool):
            raise ConfigError("output.timing: expected true or false")
        if "sense" in s and s["sense"] not in ("minimize", "maximize"):
            raise ConfigError(f"solver.sense: expected 'minimize' or 'maximize', got {s['sense']!r}")
        e = self.data["eval"]
        _num("eval", "seed", e["seed"], int)
        _num("eval", "replications", e["replications"], int, positive=True)
        if "horizon" in e and e["horizon"] != "auto":
            _num("eval", "horizon", e["horizon"], int, positive=True)
        try:
            self.model()
        except ModelError as exc:
            raise ConfigError(f"model: {exc}") from None

    # -- accessors ------------------------------------------------------------
    @property
    def kind(self) -> str:
        return self.data["model"]["kind"]

    def model(self):
        model = self._base_model()
        sense = self.data["solver"].get("sense")
        return model if sense is None else replace(model, sense=Sense(sense))

    def _base_model(self):
        m = self.data["model"]
        if self.kind == "machine-repair":
            fields = {k: m[k] for k in _MACHINE_FIELDS if k in m}
            return machine_repair(MachineRepairParams(discount=float(m["discount"]), **fields))
        if self.kind == "population":
            acts = m.get("actions", 20)
            return population_growth(
                lam=float(m.get("lambda", 1.0)), tau=float(m.get("tau", 0.5)),
                discount=float(m["discount"]), actions=acts, utility=m.get("utility", "square"),
                theta=m.get("theta"), initial_state=float(m.get("initial_state", 2.0)))
        try:
            return FinitePomdp(np.array(m["transition"], float), np.array(m["channel"], float),
                               np.array(m["cost"], float), float(m["discount"]),
                               Sense(m.get("sense", "minimize")),
                               None if "initial" not in m else np.array(m["initial"], float))
        except ValueError as exc:
            raise ModelError(str(exc)) from None

    @property
    def n(self) -> int:
        q = self.data["quantization"]
        if "n" in q:
            return q["n"]
        if q.get("n_list"):
            return max(q["n_list"])
        raise ConfigError("quantization.n: required field missing")

    @property
    def n_list(self) -> list[int]:
        q = self.data["quantization"]
        if "n_list" in q:
            if not q["n_list"]:
                raise ConfigError("quantization.n_list: empty list")
            return sorted(q["n_list"])
        if "n" in q:
            return [q["n"]]
        raise ConfigError("quantization.n_list: required field missing")

    @property
    def metric(self) -> str:
        metric = self.data["quantization"]["metric"]
        if self.kind == "population":
            return "tv"
        return "l2" if metric == "tv" else metric

    @property
    def nu(self) -> WeightingMeasure:
        q = self.data["quantization"]
        return WeightingMeasure(q["nu"], q["nu_samples"], q["nu_seed"])

    @property
    def tolerance(self) -> float:
        return float(self.data["solver"]["tolerance"])

    @property
    def max_iterations(self) -> int:
        return self.data["solver"]["max_iterations"]

    @property
    def seed(self) -> int:
        return self.data["eval"]["seed"]

    @property
    def replications(self) -> int:
        return self.data["eval"]["replications"]

    @property
    def horizon(self) -> int | None:
        """Fixed rollout horizon, or None to derive it from the truncation bound."""
        h = self.data["eval"].get("horizon", "auto")
        return None if h == "auto" else h

    @property
    def timing(self) -> bool:
        return bool(self.data["output"]["timing"])

    @property
    def out_dir(self) -> str:
        return self.data["output"]["dir"]


def example_config(name: str) -> RunConfig:
    if name not in EXAMPLES:
        raise ConfigError(f"unknown example {name!r} (expected one of {', '.join(EXAMPLES)})")
    return RunConfig.from_dict(EXAMPLES[name])
