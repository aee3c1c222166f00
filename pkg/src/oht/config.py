"""JSON config files: scenarios, outlier sets and simulation specs.

Scenario file::

    {"M": 4, "alphabet": ["a", "b"], "P_N": [0.8, 0.2], "anomalies": [[0.2, 0.8]]}

``alphabet`` may be replaced by ``alphabet_size`` or omitted (inferred from
``P_N``). ``P_A`` may replace ``anomalies`` when every outlier shares one law.

Simulation spec file::

    {"scenario": {...} or "scenario_file": "path.json",
     "truth": [1] or null, "n": [100, 300], "lambda": 0.25 or "auto:0.1",
     "trials": 10000, "seed": 1}
"""

from __future__ import annotations

import json
from pathlib import Path

from .distributions import Alphabet, Distribution
from .hypotheses import OutlierSet
from .montecarlo import DEFAULT_TRIALS, ExperimentSpec
from .theory import Scenario


class ConfigError(ValueError):
    """Invalid config; the message starts with the offending field."""


def _field(name, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: file not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def scenario_from_dict(data: dict, where: str = "scenario") -> Scenario:
    if "M" not in data:
        raise ConfigError(f"{where}.M: missing")
    if "P_N" not in data:
        raise ConfigError(f"{where}.P_N: missing")
    M = _field(f"{where}.M", int, data["M"])
    if "alphabet" in data:
        alphabet = _field(f"{where}.alphabet", Alphabet.from_symbols, data["alphabet"])
    elif "alphabet_size" in data:
        alphabet = _field(f"{where}.alphabet_size", Alphabet, data["alphabet_size"])
    else:
        alphabet = None
    P_N = _field(f"{where}.P_N", Distribution, data["P_N"], alphabet)
    if "anomalies" in data:
        anomalies = [
            _field(f"{where}.anomalies[{i}]", Distribution, mass, P_N.alphabet)
            for i, mass in enumerate(data["anomalies"])
        ]
        return _field(f"{where}.anomalies", Scenario, M, P_N, anomalies)
    if "P_A" in data:
        P_A = _field(f"{where}.P_A", Distribution, data["P_A"], P_N.alphabet)
        return _field(f"{where}.P_A", Scenario.all_same, M, P_N, P_A)
    raise ConfigError(f"{where}.anomalies: missing (or give P_A)")


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "M": scenario.M,
        "alphabet": list(scenario.P_N.alphabet.symbols),
        "P_N": scenario.P_N.mass.tolist(),
        "anomalies": [P.mass.tolist() for P in scenario.anomalies],
    }


def load_scenario(path) -> Scenario:
    return scenario_from_dict(load_json(path), where=str(path))


def parse_set(text, M: int, where: str = "--set") -> OutlierSet:
    """Accept ``[1,2]``, ``1,2`` or a list of ints."""
    if isinstance(text, str):
        text = text.strip()
        members = json.loads(text) if text.startswith("[") else [int(t) for t in text.split(",") if t]
    else:
        members = text
    return _field(where, OutlierSet, members, M)


def parse_lambda(value, where: str = "lambda"):
    if isinstance(value, str) and value.startswith("auto:"):
        eps = _field(where, float, value[5:])
        if not 0 < eps < 1:
            raise ConfigError(f"{where}: epsilon must lie in (0, 1), got {eps}")
        return value
    lam = _field(where, float, value)
    if not lam > 0:
        raise ConfigError(f"{where}: must be positive, got {lam}")
    return lam


def parse_grid(text: str, where: str = "--lambda-grid") -> list:
    """``lo:hi:steps`` -> ``steps`` evenly spaced values including both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{where}: expected lo:hi:steps, got {text!r}")
    lo, hi = _field(where, float, parts[0]), _field(where, float, parts[1])
    steps = _field(where, int, parts[2])
    if steps < 1 or hi < lo:
        raise ConfigError(f"{where}: need steps >= 1 and hi >= lo")
    if steps == 1:
        return [lo]
    return [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]


def spec_from_dict(data: dict, base_dir=".", trials=None, seed=None, lam=None) -> ExperimentSpec:
    if "scenario" in data:
        scenario = scenario_from_dict(data["scenario"])
    elif "scenario_file" in data:
        scenario = load_scenario(Path(base_dir) / data["scenario_file"])
    else:
        raise ConfigError("scenario: missing (or give scenario_file)")
    truth = data.get("truth")
    truth = None if truth is None else parse_set(truth, scenario.M, "truth")
    if "n" not in data:
        raise ConfigError("n: missing")
    n_grid = data["n"] if isinstance(data["n"], list) else [data["n"]]
    n_grid = [_field("n", int, n) for n in n_grid]
    if lam is None:
        if "lambda" not in data:
            raise ConfigError("lambda: missing")
        lam = data["lambda"]
    lam = parse_lambda(lam, "lambda")
    trials = _field("trials", int, trials if trials is not None else data.get("trials", DEFAULT_TRIALS))
    seed = _field("seed", int, seed if seed is not None else data.get("seed", 0))
    return _field("spec", ExperimentSpec, scenario, truth, n_grid, lam, trials, seed)
