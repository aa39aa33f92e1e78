"""Experiment execution and file output.

Outputs of one run (all optional except the trace and summary defaults):

* ``trace.csv``: comment header, then one row per retained sample with the
  parameter columns followed by ``H_before,H_after,accepted``.
* ``summary.json``: diagnostics, known truths and posterior means.
* ``hist_<name>.csv``: normalized histogram of one column.
* ``energy.csv``: ``H_before``/``H_after``/``accepted`` for every iteration.

Every CSV starts with ``#`` lines holding the config hash, the seed and the
full rendered config; ``read_embedded_config`` recovers it so a file can be
regenerated from its own header. Files are staged in memory and written
atomically once the run has succeeded.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sshmc.config import ExperimentConfig, parse_config, render_config
from sshmc.data import load_statlog
from sshmc.diagnostics import summarize
from sshmc.models.funnel import V_SCALE, make_funnel
from sshmc.models.hblr import make_hblr
from sshmc.models.lgcpp import default_mu, gen_lgcpp_data, make_lgcpp
from sshmc.models.sv import gen_sv_data, make_sv, to_natural
from sshmc.samplers import ChainTrace, run_chain

TRACE_TAIL = ("H_before", "H_after", "accepted")
CONFIG_PREFIX = "# config: "


@dataclass
class BuiltModel:
    target: object
    mass: object
    truths: dict = field(default_factory=dict)
    true_latent: np.ndarray | None = None
    true_hypers: dict = field(default_factory=dict)


def _seeded(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def load_series(path) -> dict:
    """Read a ``gen-data`` CSV into ``{column: array}``."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    values = np.loadtxt(io.StringIO("".join(lines[1:])), delimiter=",", ndmin=2)
    return {name: values[:, j] for j, name in enumerate(header)}


def generate_data(cfg: ExperimentConfig) -> dict:
    """Synthetic data set for ``sv`` or ``lgcpp`` from ``model.data_seed``."""
    if cfg.model not in ("sv", "lgcpp"):
        raise ValueError(f"no data generator for model {cfg.model!r}")
    p = cfg.model_params
    rng = _seeded(p["data_seed"])
    if cfg.model == "sv":
        y, x = gen_sv_data(p["T"], p["phi_ar"], p["sigma"], p["beta"], rng)
        return {"y": y, "x_true": x}
    mu = p["mu"] if p["mu"] is not None else default_mu(p["sigma"])
    y, x = gen_lgcpp_data(p["d"], p["sigma"], p["beta"], mu, rng)
    return {"y": y, "x_true": x}


def build_model(cfg: ExperimentConfig) -> BuiltModel:
    p = cfg.model_params
    if cfg.model == "funnel":
        target, mass = make_funnel(p["n"], p["phi_mass"])
        return BuiltModel(target, mass, truths={"v": (0.0, V_SCALE**2)})
    if cfg.model == "hblr":
        target, mass = make_hblr(load_statlog(p["data_path"]), p["lam"], p["phi_mass"])
        return BuiltModel(target, mass)
    data = load_series(p["data_path"]) if p["data_path"] else generate_data(cfg)
    true_latent = data.get("x_true")
    if cfg.model == "sv":
        target, mass = make_sv(data["y"])
        hypers = {} if p["data_path"] else {"phi": p["phi_ar"], "sigma": p["sigma"], "beta": p["beta"]}
        return BuiltModel(target, mass, true_latent=true_latent, true_hypers=hypers)
    mu = p["mu"] if p["mu"] is not None else default_mu(p["sigma"])
    target, mass = make_lgcpp(p["d"], data["y"], mu, p["prior_scale"])
    hypers = {} if p["data_path"] else {"sigma": p["sigma"], "beta": p["beta"]}
    return BuiltModel(target, mass, true_latent=true_latent, true_hypers=hypers)


def header_lines(cfg: ExperimentConfig, title: str) -> list[str]:
    lines = [f"# {title}", f"# config_hash: {cfg.digest()}", f"# seed: {cfg.experiment['seed']}"]
    lines += [CONFIG_PREFIX + ln for ln in render_config(cfg).splitlines()]
    return lines


def read_embedded_config(path) -> ExperimentConfig:
    """Config recovered from the comment header of an output CSV."""
    text = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith(CONFIG_PREFIX):
                text.append(line[len(CONFIG_PREFIX) :].rstrip("\n"))
    if not text:
        raise ValueError(f"{path} has no embedded config")
    return parse_config("\n".join(text))


def _fmt(value) -> str:
    return repr(float(value))


def trace_csv(cfg: ExperimentConfig, trace: ChainTrace) -> str:
    out = header_lines(cfg, "sshmc trace")
    out.append(",".join(list(trace.names) + list(TRACE_TAIL)))
    kept = trace.kept_iterations
    hb = trace.hamiltonian_before[kept]
    ha = trace.hamiltonian_after[kept]
    acc = trace.accepted[kept]
    for row, h0, h1, a in zip(trace.samples, hb, ha, acc):
        out.append(",".join([_fmt(v) for v in row] + [_fmt(h0), _fmt(h1), str(int(a))]))
    return "\n".join(out) + "\n"


def read_trace(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """``(parameter names, samples, accepted flags)`` from a trace CSV."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    if tuple(header[-3:]) != TRACE_TAIL:
        raise ValueError(f"{path} is not a trace file")
    body = np.loadtxt(io.StringIO("".join(lines[1:])), delimiter=",", ndmin=2)
    return header[:-3], body[:, :-3], body[:, -1].astype(bool)


def emit_histogram(trace: ChainTrace, dimension: str, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Bin edges and probability masses (summing to one) of one trace column."""
    if dimension not in trace.names:
        raise KeyError(f"unknown dimension {dimension!r}")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    counts, edges = np.histogram(trace.column(dimension), bins=bins)
    masses = counts / counts.sum()
    return edges, masses


def histogram_csv(cfg: ExperimentConfig, trace: ChainTrace, dimension: str) -> str:
    edges, masses = emit_histogram(trace, dimension, cfg.experiment["histogram_bins"])
    out = header_lines(cfg, f"histogram of {dimension}")
    out.append("bin_left,bin_right,mass")
    out += [f"{_fmt(lo)},{_fmt(hi)},{_fmt(m)}" for lo, hi, m in zip(edges[:-1], edges[1:], masses)]
    return "\n".join(out) + "\n"


def energy_csv(cfg: ExperimentConfig, trace: ChainTrace) -> str:
    out = header_lines(cfg, "energy trace")
    out.append("iteration,H_before,H_after,accepted")
    for i, (h0, h1, a) in enumerate(zip(trace.hamiltonian_before, trace.hamiltonian_after, trace.accepted)):
        out.append(f"{i},{_fmt(h0)},{_fmt(h1)},{int(a)}")
    return "\n".join(out) + "\n"


def summary_dict(cfg: ExperimentConfig, built: BuiltModel, trace: ChainTrace) -> dict:
    report = summarize(trace, truths=built.truths)
    out = {
        "config_hash": cfg.digest(),
        "seed": cfg.experiment["seed"],
        "model": cfg.model,
        "sampler": cfg.sampler_kind,
        "diagnostics": report.to_dict(),
        "elapsed_total": float(trace.elapsed_total),
        "posterior_means": {name: float(v) for name, v in zip(trace.names, trace.samples.mean(axis=0))},
    }
    n = built.target.n
    if cfg.model == "sv":
        natural = np.array([to_natural(row) for row in trace.samples[:, n:]])
        out["posterior_means_natural"] = dict(zip(("phi", "sigma", "beta"), natural.mean(axis=0).tolist()))
    if cfg.model == "lgcpp":
        hyp = np.exp(trace.samples[:, n:])
        out["posterior_means_natural"] = {"sigma": float(hyp[:, 0].mean()), "beta": float(hyp[:, 1].mean())}
    if built.true_hypers:
        out["true_hyperparameters"] = built.true_hypers
    if built.true_latent is not None:
        mean_field = trace.samples[:, :n].mean(axis=0)
        out["latent_correlation"] = float(np.corrcoef(mean_field, built.true_latent)[0, 1])
    return out


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(out_dir, files: dict[str, str]) -> list[Path]:
    """Write every file atomically; on failure remove what was written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = out_dir / name
            _atomic_write(path, text)
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


def run_experiment(cfg: ExperimentConfig, out_dir, init=None) -> tuple[ChainTrace, dict]:
    """Run the configured chain and write its outputs under ``out_dir``."""
    built = build_model(cfg)
    trace = run_chain(built.target, built.mass, cfg.sampler_config(), init=init)
    summary = summary_dict(cfg, built, trace)
    exp = cfg.experiment
    files = {}
    if exp["emit_trace"]:
        files["trace.csv"] = trace_csv(cfg, trace)
    if exp["emit_summary"]:
        files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    for name in exp["histograms"]:
        files[f"hist_{name}.csv"] = histogram_csv(cfg, trace, name)
    if exp["emit_energy_trace"]:
        files["energy.csv"] = energy_csv(cfg, trace)
    write_outputs(out_dir, files)
    return trace, summary


def data_csv(cfg: ExperimentConfig, data: dict) -> str:
    out = header_lines(cfg, f"synthetic {cfg.model} data")
    names = list(data)
    out.append(",".join(names))
    for row in zip(*(data[k] for k in names)):
        out.append(",".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"
