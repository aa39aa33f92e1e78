"""Experiment configuration: an INI dialect with per-model presets.

A config has an ``[experiment]`` section, a ``[model]`` section whose keys
depend on ``experiment.model``, and one section per sampler kind
(``[sshmc]``, ``[hmc]``, ``[hmc-gibbs]``). Missing keys are filled from the
model preset; unknown sections or keys are rejected. Values that may be
absent are written ``none``.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass

from sshmc.errors import ConfigError
from sshmc.integrators import DEFAULT_ENERGY_CAP, AblaSpec, LeapfrogSpec
from sshmc.samplers import SAMPLER_KINDS, SamplerConfig

MODELS = ("funnel", "hblr", "sv", "lgcpp")


class _Optional:
    def __init__(self, inner):
        self.inner = inner


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


EXPERIMENT_KEYS = {
    "model": str,
    "sampler": str,
    "n_iter": int,
    "burn_in": int,
    "thin": int,
    "seed": int,
    "energy_cap": float,
    "emit_trace": _bool,
    "emit_summary": _bool,
    "emit_energy_trace": _bool,
    "histograms": _names,
    "histogram_bins": int,
}

MODEL_KEYS = {
    "funnel": {"n": int, "phi_mass": _Optional(float)},
    "hblr": {"data_path": _Optional(str), "lam": float, "phi_mass": float},
    "sv": {
        "T": int,
        "phi_ar": float,
        "sigma": float,
        "beta": float,
        "data_seed": int,
        "data_path": _Optional(str),
    },
    "lgcpp": {
        "d": int,
        "sigma": float,
        "beta": float,
        "mu": _Optional(float),
        "prior_scale": float,
        "data_seed": int,
        "data_path": _Optional(str),
    },
}

SAMPLER_KEYS = {
    "sshmc": {"eps_theta": float, "steps_theta": int, "eps_phi": float, "steps_phi": int, "alba_steps": int},
    "hmc": {"epsilon": float, "steps": int, "mass_diag": _Optional(_floats)},
    "hmc-gibbs": {"eps_theta": float, "steps_theta": int, "eps_phi": float, "steps_phi": int},
}


def _experiment_defaults(model: str) -> dict:
    return {
        "model": model,
        "sampler": "sshmc",
        "n_iter": 6000,
        "burn_in": 1000,
        "thin": 1,
        "seed": 0,
        "energy_cap": DEFAULT_ENERGY_CAP,
        "emit_trace": True,
        "emit_summary": True,
        "emit_energy_trace": False,
        "histograms": (),
        "histogram_bins": 40,
    }


def preset(model: str, model_params: dict | None = None) -> dict:
    """Full default config for ``model`` as ``{section: {key: value}}``.

    ``model_params`` lets sampler defaults follow the model size (the funnel's
    hyperparameter step size scales with ``n``).
    """
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; choose one of {MODELS}")
    exp = _experiment_defaults(model)
    if model == "funnel":
        params = {"n": 100, "phi_mass": None}
        params.update(model_params or {})
        # a unit-mass time scale for v under the literal M_v = 1/(n + 1/9)
        eps_phi = 0.1 / math.sqrt(params["n"] + 1.0 / 9.0) if params["phi_mass"] is None else 0.1
        exp["histograms"] = ("v",)
        samplers = {
            "sshmc": {"eps_theta": 0.1, "steps_theta": 2, "eps_phi": eps_phi, "steps_phi": 1, "alba_steps": 120},
            "hmc": {"epsilon": 0.15, "steps": 300, "mass_diag": None},
            "hmc-gibbs": {"eps_theta": 0.1, "steps_theta": 20, "eps_phi": 0.1, "steps_phi": 20},
        }
    elif model == "hblr":
        params = {"data_path": None, "lam": 1.0, "phi_mass": 10.0}
        params.update(model_params or {})
        exp["histograms"] = ("gamma",)
        samplers = {
            "sshmc": {"eps_theta": 0.2, "steps_theta": 2, "eps_phi": 0.2, "steps_phi": 1, "alba_steps": 10},
            "hmc": {"epsilon": 0.07, "steps": 24, "mass_diag": None},
            "hmc-gibbs": {"eps_theta": 0.2, "steps_theta": 6, "eps_phi": 0.2, "steps_phi": 6},
        }
    elif model == "sv":
        params = {"T": 200, "phi_ar": 0.98, "sigma": 0.15, "beta": 0.65, "data_seed": 0, "data_path": None}
        params.update(model_params or {})
        exp["histograms"] = ("log_beta", "log_sigma2", "atanh_phi")
        samplers = {
            "sshmc": {"eps_theta": 0.05, "steps_theta": 5, "eps_phi": 0.05, "steps_phi": 2, "alba_steps": 10},
            "hmc": {"epsilon": 0.05, "steps": 40, "mass_diag": None},
            "hmc-gibbs": {"eps_theta": 0.05, "steps_theta": 10, "eps_phi": 0.05, "steps_phi": 10},
        }
    else:
        params = {"d": 16, "sigma": 1.9, "beta": 0.03, "mu": None, "prior_scale": 1.5, "data_seed": 0, "data_path": None}
        params.update(model_params or {})
        exp["n_iter"] = 2500
        exp["burn_in"] = 500
        exp["histograms"] = ("log_sigma", "log_beta")
        samplers = {
            "sshmc": {"eps_theta": 0.06, "steps_theta": 2, "eps_phi": 0.04, "steps_phi": 1, "alba_steps": 10},
            "hmc": {"epsilon": 0.05, "steps": 20, "mass_diag": None},
            "hmc-gibbs": {"eps_theta": 0.07, "steps_theta": 20, "eps_phi": 0.05, "steps_phi": 10},
        }
    return {"experiment": exp, "model": params, **samplers}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully populated configuration."""

    sections: dict

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.sections == other.sections

    @property
    def model(self) -> str:
        return self.sections["experiment"]["model"]

    @property
    def sampler_kind(self) -> str:
        return self.sections["experiment"]["sampler"]

    @property
    def experiment(self) -> dict:
        return self.sections["experiment"]

    @property
    def model_params(self) -> dict:
        return self.sections["model"]

    def sampler_config(self) -> SamplerConfig:
        exp = self.experiment
        common = dict(
            kind=exp["sampler"],
            n_iter=exp["n_iter"],
            burn_in=exp["burn_in"],
            thin=exp["thin"],
            seed=exp["seed"],
            energy_cap=exp["energy_cap"],
        )
        if exp["sampler"] == "sshmc":
            return SamplerConfig(**common, abla=AblaSpec(**self.sections["sshmc"]))
        if exp["sampler"] == "hmc":
            h = self.sections["hmc"]
            return SamplerConfig(
                **common, leapfrog=LeapfrogSpec(h["epsilon"], h["steps"]), hmc_mass_diag=h["mass_diag"]
            )
        g = self.sections["hmc-gibbs"]
        return SamplerConfig(
            **common,
            gibbs_theta=LeapfrogSpec(g["eps_theta"], g["steps_theta"]),
            gibbs_phi=LeapfrogSpec(g["eps_phi"], g["steps_phi"]),
        )

    def with_overrides(self, overrides) -> "ExperimentConfig":
        return parse_config(render_config(self), overrides=overrides)

    def digest(self) -> str:
        """Short hash of the rendered config."""
        return hashlib.sha256(render_config(self).encode("utf-8")).hexdigest()[:16]


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` for error messages."""
    where = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
        elif section and "=" in stripped and not stripped.startswith(("#", ";")):
            where[(section, stripped.split("=", 1)[0].strip())] = lineno
    return where


def _convert(kind, raw: str):
    if isinstance(kind, _Optional):
        if raw.strip().lower() in ("none", ""):
            return None
        return _convert(kind.inner, raw)
    if kind is str:
        return raw.strip()
    return kind(raw)


def _schema(model: str) -> dict:
    return {"experiment": EXPERIMENT_KEYS, "model": MODEL_KEYS[model], **SAMPLER_KEYS}


def parse_override(item: str) -> tuple[str, str, str]:
    """``"section.key=value"`` -> ``(section, key, value)``."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    lhs, value = item.split("=", 1)
    if "." not in lhs:
        raise ConfigError(f"override {item!r} must name a section, e.g. sshmc.eps_theta=0.1")
    section, key = lhs.strip().rsplit(".", 1)
    return section.strip(), key.strip(), value.strip()


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Parse, fill defaults from the model preset and validate.

    ``overrides`` is an iterable of ``section.key=value`` strings applied on
    top of the text. Raises ``ConfigError`` naming the line and key of a
    syntax problem, or listing every validation problem at once.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    for item in overrides:
        section, key, value = parse_override(item)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)

    lines = _line_index(text)
    if not parser.has_option("experiment", "model"):
        raise ConfigError("experiment.model is required")
    model = parser.get("experiment", "model").strip()
    if model not in MODELS:
        raise ConfigError(f"experiment.model must be one of {MODELS}, got {model!r}")
    schema = _schema(model)

    problems = []
    raw_values: dict = {}
    for section in parser.sections():
        if section not in schema:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            where = f" (line {lines[(section, key)]})" if (section, key) in lines else ""
            if key not in schema[section]:
                problems.append(f"unknown key {section}.{key}{where}")
                continue
            try:
                raw_values.setdefault(section, {})[key] = _convert(schema[section][key], raw)
            except (TypeError, ValueError) as exc:
                problems.append(f"bad value for {section}.{key}{where}: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))

    sections = preset(model, raw_values.get("model"))
    for section, values in raw_values.items():
        sections[section].update(values)
    cfg = ExperimentConfig(sections)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    problems = []
    exp = cfg.experiment
    if exp["sampler"] not in SAMPLER_KINDS:
        problems.append(f"experiment.sampler must be one of {SAMPLER_KINDS}")
    if exp["histogram_bins"] < 2:
        problems.append("experiment.histogram_bins must be at least 2")
    p = cfg.model_params
    if cfg.model == "funnel" and p["n"] < 1:
        problems.append("model.n must be positive")
    if cfg.model == "hblr" and not (p["lam"] > 0 and p["phi_mass"] > 0):
        problems.append("model.lam and model.phi_mass must be positive")
    if cfg.model == "sv":
        if p["T"] < 2:
            problems.append("model.T must be at least 2")
        if not (abs(p["phi_ar"]) < 1 and p["sigma"] > 0 and p["beta"] > 0):
            problems.append("sv truths need |phi_ar| < 1, sigma > 0, beta > 0")
    if cfg.model == "lgcpp":
        if p["d"] < 2:
            problems.append("model.d must be at least 2")
        if not (p["sigma"] > 0 and p["beta"] > 0 and p["prior_scale"] > 0):
            problems.append("lgcpp sigma, beta and prior_scale must be positive")
    for key in ("data_seed",):
        if key in p and not 0 <= p[key] < 2**64:
            problems.append(f"model.{key} must be a 64-bit unsigned integer")
    if not problems:
        try:
            cfg.sampler_config()
        except ValueError as exc:
            problems.append(str(exc))
    if problems:
        raise ConfigError("; ".join(problems))


def _render_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_render_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: ExperimentConfig) -> str:
    """Text that ``parse_config`` maps back to an equal config."""
    out = []
    for section, values in cfg.sections.items():
        out.append(f"[{section}]")
        out.extend(f"{key} = {_render_value(value)}" for key, value in values.items())
        out.append("")
    return "\n".join(out)
