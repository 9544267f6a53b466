"""Scenario and analysis configurations, including YAML scenario files."""

import os
import re
from dataclasses import dataclass, fields
from enum import Enum

import yaml

from .errors import ConfigError
from .selection import Family

_MIN_SCENARIO_N = 50
_TRUNCATION_CAP = 0.75


class Case(Enum):
    """Simulation designs: mean sin(pi x) or exp(-6x^3/5), homo- or heteroscedastic errors."""

    CASE1 = 1
    CASE2 = 2
    CASE3 = 3
    CASE4 = 4


class Mechanism(Enum):
    LOGIT = 1
    PROBIT = 2
    TRUNCATED_LOGIT = 3

    @property
    def working_family(self):
        """Family fitted to data generated under this mechanism."""
        if self == Mechanism.PROBIT:
            return Family.PROBIT
        return Family.LOGIT

    @property
    def cap(self):
        return _TRUNCATION_CAP if self == Mechanism.TRUNCATED_LOGIT else 1.0


def _normalizeName(value):
    return re.sub(r"[\s_\-]", "", str(value)).lower()


def parseCase(value):
    """Accept 1, "1", "case1", "Case 1" or "CASE1"."""
    name = _normalizeName(value)
    if name.startswith("case"):
        name = name[len("case"):]
    for case in Case:
        if name == str(case.value):
            return case
    raise ConfigError("unknown case {0!r}".format(value), keys=("case",))


def parseMechanism(value):
    """Accept "logit", "probit" or "truncated_logit" in any case and separator style."""
    name = _normalizeName(value)
    for mechanism in Mechanism:
        if name == _normalizeName(mechanism.name):
            return mechanism
    raise ConfigError("unknown mechanism {0!r}".format(value), keys=("mechanism",))


def parseFamily(value):
    name = _normalizeName(value)
    for family in Family:
        if name == _normalizeName(family.name):
            return family
    raise ConfigError("unknown selection family {0!r}".format(value), keys=("family",))


@dataclass(frozen=True)
class Scenario:
    case: Case
    mechanism: Mechanism
    params: tuple
    n: int
    alpha_levels: tuple = (0.05, 0.01)
    replications: int = 1000
    base_seed: int = 0
    grid_size: int = 401
    rho: float = 0.25
    pi_floor: float = 0.01
    name: str = ""
    plot_data: bool = False

    def __post_init__(self):
        bad = []
        if not isinstance(self.case, Case):
            bad.append("case")
        if not isinstance(self.mechanism, Mechanism):
            bad.append("mechanism")
        if len(self.params) != 2:
            bad.append("params")
        if not self.n >= _MIN_SCENARIO_N:
            bad.append("n")
        if not self.alpha_levels or not all(0.0 < a < 1.0 for a in self.alpha_levels):
            bad.append("alpha_levels")
        if not self.replications >= 1:
            bad.append("replications")
        if not 0 <= self.base_seed < 2 ** 64:
            bad.append("base_seed")
        if not self.grid_size >= 2:
            bad.append("grid_size")
        if not self.rho > 0.2:
            bad.append("rho")
        if not 0.0 < self.pi_floor < 1.0:
            bad.append("pi_floor")
        if bad:
            raise ConfigError("invalid scenario values", keys=bad)

    @property
    def label(self):
        if self.name:
            return self.name
        return "case{0}_{1}_{2:g}_{3:g}_n{4}".format(
            self.case.value, self.mechanism.name.lower(), self.params[0], self.params[1], self.n)

    def toDict(self):
        return {
            "name": self.label,
            "case": self.case.value,
            "mechanism": self.mechanism.name.lower(),
            "params": list(self.params),
            "n": self.n,
            "alpha_levels": list(self.alpha_levels),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "grid_size": self.grid_size,
            "rho": self.rho,
            "pi_floor": self.pi_floor}


_SCENARIO_KEYS = {f.name for f in fields(Scenario)}


def _coerce(key, value, kind):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError("cannot read {0}={1!r}".format(key, value), keys=(key,))


def scenarioFromDict(entry):
    """Build a Scenario from a mapping of recognised keys."""
    if not isinstance(entry, dict):
        raise ConfigError("scenario entry must be a mapping, got {0}".format(type(entry).__name__))
    unknown = sorted(set(entry) - _SCENARIO_KEYS)
    if unknown:
        raise ConfigError("unknown scenario keys", keys=unknown)
    missing = sorted(k for k in ("case", "mechanism", "params", "n") if k not in entry)
    if missing:
        raise ConfigError("missing scenario keys", keys=missing)

    kwargs = dict(entry)
    kwargs["case"] = parseCase(entry["case"])
    kwargs["mechanism"] = parseMechanism(entry["mechanism"])
    params = entry["params"]
    if not isinstance(params, (list, tuple)) or len(params) != 2:
        raise ConfigError("params must be a pair", keys=("params",))
    kwargs["params"] = tuple(_coerce("params", p, float) for p in params)
    kwargs["n"] = _coerce("n", entry["n"], int)
    if "alpha_levels" in entry:
        levels = entry["alpha_levels"]
        if not isinstance(levels, (list, tuple)):
            levels = [levels]
        kwargs["alpha_levels"] = tuple(_coerce("alpha_levels", a, float) for a in levels)
    for key, kind in (("replications", int), ("base_seed", int), ("grid_size", int),
                      ("rho", float), ("pi_floor", float), ("name", str)):
        if key in entry:
            kwargs[key] = _coerce(key, entry[key], kind)
    if "plot_data" in entry:
        if not isinstance(entry["plot_data"], bool):
            raise ConfigError("plot_data must be true or false", keys=("plot_data",))
    return Scenario(**kwargs)


def loadScenarios(filename):
    """Read a YAML file with optional `defaults:` merged into each `scenarios:` entry."""
    if not os.path.isfile(filename):
        raise ConfigError("no such scenario file: {0}".format(filename))
    with open(filename, "r", encoding="utf-8") as file:
        try:
            raw = yaml.safe_load(file)
        except yaml.YAMLError as err:
            raise ConfigError("malformed YAML in {0}: {1}".format(filename, err))

    if not isinstance(raw, dict):
        raise ConfigError("scenario file must contain a mapping")
    unknown = sorted(set(raw) - {"defaults", "scenarios"})
    if unknown:
        raise ConfigError("unknown top-level keys", keys=unknown)
    defaults = raw.get("defaults") or {}
    entries = raw.get("scenarios") or []
    if not isinstance(defaults, dict):
        raise ConfigError("defaults must be a mapping", keys=("defaults",))
    if not isinstance(entries, list) or not entries:
        raise ConfigError("scenarios must be a nonempty list", keys=("scenarios",))

    scenarios = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ConfigError("scenario {0} must be a mapping".format(i), keys=("scenarios",))
        merged = dict(defaults)
        merged.update(entry)
        try:
            scenarios.append(scenarioFromDict(merged))
        except ConfigError as err:
            raise ConfigError("scenario {0}: {1}".format(i, err.detail), keys=err.keys)
    return scenarios


@dataclass(frozen=True)
class AnalysisConfig:
    """Options for the analysis pipeline on an observed CSV file."""

    input: str
    family: Family = Family.LOGIT
    alpha_levels: tuple = (0.05,)
    rho: float = 0.25
    grid_size: int = 401
    pi_floor: float = 0.01
    groups: int = 10
    null: str = "none"
    format: str = "json"
    out_dir: str = "."
    seed: int = 0

    def __post_init__(self):
        bad = []
        if not isinstance(self.family, Family):
            bad.append("family")
        if not self.alpha_levels or not all(0.0 < a < 1.0 for a in self.alpha_levels):
            bad.append("alpha")
        if not self.rho > 0.2:
            bad.append("rho")
        if not self.grid_size >= 2:
            bad.append("grid_size")
        if not 0.0 < self.pi_floor < 1.0:
            bad.append("pi_floor")
        if not self.groups >= 3:
            bad.append("groups")
        if self.format not in ("json", "csv"):
            bad.append("format")
        if bad:
            raise ConfigError("invalid analysis options", keys=bad)

    @property
    def null_kind(self):
        """"none", "linear" or "file"."""
        if self.null in ("none", "linear"):
            return self.null
        return "file"
