"""Experiment configuration: INI-style files with per-scenario schemas.

Every key is validated against the scenario's schema before any
computation starts; unknown sections or keys are rejected outright so
a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .exceptions import ConfigError
from .optimizers import METHODS

SCENARIO_NAMES = ("discriminate", "diamond-estimate", "illuminate",
                  "noise-sweep", "multi", "generalize-sweep", "oracle")

_REQUIRED = object()


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s):
    return tuple(float(tok) for tok in s.replace(",", " ").split())


def _parse_ints(s):
    return tuple(int(tok) for tok in s.replace(",", " ").split())


CHANNEL_KINDS = ("identity", "z", "phase-flip", "depolarizing",
                 "haar", "haar2")


def parse_channel_spec(s):
    """'phase-flip:0.3' -> ('phase-flip', 0.3); bare names allowed."""
    name, sep, arg = s.strip().partition(":")
    name = name.strip()
    if name not in CHANNEL_KINDS:
        raise ValueError(f"unknown channel kind {name!r}; "
                         f"choose from {CHANNEL_KINDS}")
    if name in ("identity", "z"):
        if sep:
            raise ValueError(f"channel {name!r} takes no parameter")
        return (name, None)
    if not sep:
        raise ValueError(f"channel {name!r} needs a parameter, "
                         f"e.g. {name}:0.3")
    if name in ("phase-flip", "depolarizing"):
        value = float(arg)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} probability {value} outside [0, 1]")
        return (name, value)
    return (name, int(arg))


@dataclass
class Field:
    parse: callable
    default: object = _REQUIRED
    check: callable = None

    def load(self, key, raw):
        try:
            value = self.parse(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
        if self.check is not None:
            msg = self.check(value)
            if msg:
                raise ConfigError(f"bad value for {key}: {msg}")
        return value


def _positive(v):
    return None if v > 0 else f"{v} must be positive"


def _nonnegative(v):
    return None if v >= 0 else f"{v} must be nonnegative"


def _unit_interval_grid(vs):
    for v in vs:
        if not 0.0 <= v <= 1.0:
            return f"grid value {v} outside [0, 1]"
    return None


def _optimizer_name(v):
    return None if v in METHODS else f"unknown optimizer {v!r}"


_OPT_KEYS = {
    "optimizer": Field(str, "nelder-mead", _optimizer_name),
    "max_iters": Field(int, 5000, _positive),
    "restarts": Field(int, 8, _positive),
    "patience": Field(int, 50, _positive),
    "min_improvement": Field(float, 1e-6, _positive),
    "learning_rate": Field(float, 0.1, _positive),
    "spsa_step": Field(float, 0.15, _positive),
    "spsa_perturb": Field(float, 0.1, _positive),
    "polish_iters": Field(int, 0, _nonnegative),
    "polish_patience": Field(int, 0, _nonnegative),
    "polish_min_improvement": Field(float, 0.0, _nonnegative),
}

_CHANNEL_KEYS = {
    "channel0": Field(parse_channel_spec, ("identity", None)),
    "channel1": Field(parse_channel_spec),
    "reference_qubits": Field(int, -1),
    "probe_layers": Field(int, 1, _positive),
    "measure_layers": Field(int, 2, _positive),
}

SCHEMAS = {
    "run": {
        "scenario": Field(str, _REQUIRED,
                          lambda v: None if v in SCENARIO_NAMES
                          else f"unknown scenario {v!r}"),
        "seed": Field(int, 0, _nonnegative),
        "output": Field(str, "out"),
    },
    "discriminate": {**_CHANNEL_KEYS, **_OPT_KEYS},
    "diamond-estimate": {
        "family": Field(str, _REQUIRED,
                        lambda v: None if v in ("phase-flip", "haar-2q")
                        else f"unknown family {v!r}"),
        "p_grid": Field(_parse_floats, (0.1, 0.3, 0.5, 0.7, 0.9),
                        _unit_interval_grid),
        "n_unitaries": Field(int, 10, _positive),
        "unitary_seed": Field(int, 0, _nonnegative),
        "probe_layers": Field(int, 1, _positive),
        "measure_layers": Field(int, 2, _positive),
        **_OPT_KEYS,
    },
    "illuminate": {
        "ns": Field(float, 0.1, _positive),
        "eta": Field(float, 1e-3,
                     lambda v: None if 0 <= v <= 1 else "outside [0, 1]"),
        "nb_grid": Field(_parse_floats, (0.5, 1.0, 2.0)),
        "cutoff": Field(int, 20, lambda v: None if v >= 2 else "too small"),
        "save_probes": Field(_parse_bool, True),
        # the cost landscape is flat at the 1e-4 scale of the signal,
        # so the measurement re-tuning needs a much finer stall gate
        # than the generic defaults
        **{**_OPT_KEYS,
           "polish_iters": Field(int, 4000, _nonnegative),
           "polish_patience": Field(int, 300, _nonnegative),
           "polish_min_improvement": Field(float, 1e-10, _nonnegative)},
    },
    "noise-sweep": {
        **_CHANNEL_KEYS,
        "variance_grid": Field(_parse_floats, (0.0, 1e-4, 1e-3, 1e-2)),
        "n_samples": Field(int, 200, _positive),
        **_OPT_KEYS,
    },
    "multi": {
        "k": Field(int, 3, lambda v: None if v >= 2 else "need k >= 2"),
        "layers_grid": Field(_parse_ints, (5, 7)),
        "unitary_seed": Field(int, 1, _nonnegative),
        # the readout landscape at a hundred parameters favors a large
        # stochastic exploration phase over simplex search; each depth
        # is then polished layer-block by layer-block
        **{**_OPT_KEYS, "optimizer": Field(str, "spsa", _optimizer_name),
           "max_iters": Field(int, 8000, _positive),
           "restarts": Field(int, 3, _positive),
           "patience": Field(int, 2500, _positive),
           "spsa_step": Field(float, 8.0, _positive),
           "spsa_perturb": Field(float, 0.3, _positive)},
        "refine_cycles": Field(int, 2, _nonnegative),
        "refine_iters": Field(int, 2500, _positive),
        "refine_patience": Field(int, 250, _positive),
        "refine_min_improvement": Field(float, 1e-9, _positive),
    },
    "generalize-sweep": {
        "probe": Field(str),
        "ns": Field(float, 0.1, _positive),
        "eta_grid": Field(_parse_floats, (0.0, 1e-3, 2e-3, 5e-3),
                          _unit_interval_grid),
        "nb_grid": Field(_parse_floats, (0.5, 1.0, 2.0)),
        "cutoff": Field(int, 20, lambda v: None if v >= 2 else "too small"),
    },
    "oracle": {
        "task": Field(str, "tmsv-reference",
                      lambda v: None if v == "tmsv-reference"
                      else f"unknown oracle task {v!r}"),
        "ns": Field(float, 0.1, _positive),
        "cutoff": Field(int, 20, lambda v: None if v >= 2 else "too small"),
        "top_k": Field(int, 5, _positive),
    },
}


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int
    output: str
    params: dict = field(default_factory=dict)

    def echo(self):
        run = {"scenario": self.scenario, "seed": self.seed,
               "output": self.output}
        return {"run": run, self.scenario: {
            k: list(v) if isinstance(v, tuple) else v
            for k, v in self.params.items()}}


def _load_section(schema, section_name, items):
    out = {}
    for key, raw in items:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in section "
                              f"[{section_name}]")
        out[key] = schema[key].load(f"[{section_name}] {key}", raw)
    for key, spec in schema.items():
        if key in out:
            continue
        if spec.default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r} in "
                              f"section [{section_name}]")
        out[key] = spec.default
    return out


def parse_config(path):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if "run" not in parser:
        raise ConfigError("config needs a [run] section")
    run = _load_section(SCHEMAS["run"], "run", parser.items("run"))
    scenario = run["scenario"]
    for section in parser.sections():
        if section not in ("run", scenario):
            raise ConfigError(f"section [{section}] does not belong to "
                              f"scenario {scenario!r}")
    items = parser.items(scenario) if scenario in parser else []
    params = _load_section(SCHEMAS[scenario], scenario, items)
    _cross_validate(scenario, params)
    return ExperimentConfig(scenario, run["seed"], run["output"], params)


def _cross_validate(scenario, params):
    if scenario == "noise-sweep":
        for v in params["variance_grid"]:
            if v < 0:
                raise ConfigError(f"variance {v} must be nonnegative")
    if scenario == "illuminate" and params["eta"] == 0.0:
        raise ConfigError("illuminate needs eta > 0 (hypotheses coincide)")
    if scenario == "multi":
        for layers in params["layers_grid"]:
            if layers < 1:
                raise ConfigError("layers must be positive")
    if scenario == "diamond-estimate" and params["family"] == "phase-flip":
        if not params["p_grid"]:
            raise ConfigError("p_grid must not be empty")
    if not math.isfinite(params.get("ns", 0.0)):
        raise ConfigError("ns must be finite")
