"""Autocovariance, effective sample size and run summaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from sshmc.errors import DegenerateVarianceError

__all__ = ["autocovariance", "ess", "DiagnosticsReport", "summarize"]


def autocovariance(seq, max_lag: int | None = None) -> np.ndarray:
    """Biased (divide by N) autocovariance at lags ``0..max_lag``, via FFT."""
    x = np.asarray(seq, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 values")
    if max_lag is None:
        max_lag = n - 1
    if not 0 <= max_lag < n:
        raise ValueError("max_lag must lie in [0, len(seq))")
    x = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    if not acov[0] > 0.0:
        raise DegenerateVarianceError("sequence has zero variance")
    return acov


def ess(seq) -> float:
    """Geyer's initial monotone sequence estimate of effective sample size.

    Pair sums ``rho[2k] + rho[2k+1]`` are accumulated until the first
    negative pair, each pair clipped to the running minimum. The estimate is
    capped at ``N``.
    """
    x = np.asarray(seq, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("need at least 10 values for an ESS estimate")
    if not np.all(np.isfinite(x)):
        raise ValueError("sequence contains non-finite values")
    if np.ptp(x) <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
        raise DegenerateVarianceError("sequence has (numerically) zero variance")
    acov = autocovariance(x)
    rho = acov / acov[0]
    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    negative = np.flatnonzero(pairs < 0.0)
    stop = negative[0] if negative.size else n_pairs
    monotone = np.minimum.accumulate(pairs[:stop])
    assert np.all(np.diff(monotone) <= 0.0)
    tau = -1.0 + 2.0 * float(np.sum(monotone))
    if tau <= 0.0:
        return float(n)
    return float(min(n / tau, n))


@dataclass
class DiagnosticsReport:
    names: list[str]
    ess: np.ndarray
    acceptance_rate: float
    gradient_evaluations: int
    retained: int
    elapsed: float
    moment_errors: dict = field(default_factory=dict)
    degenerate: list[str] = field(default_factory=list)

    @property
    def ess_min(self) -> float:
        return float(np.nanmin(self.ess))

    @property
    def ess_median(self) -> float:
        return float(np.nanmedian(self.ess))

    @property
    def ess_max(self) -> float:
        return float(np.nanmax(self.ess))

    @property
    def ess_per_gradient(self) -> np.ndarray:
        return self.ess / max(self.gradient_evaluations, 1)

    def ess_of(self, name: str) -> float:
        return float(self.ess[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "ess": [None if np.isnan(e) else float(e) for e in self.ess],
            "ess_min": self.ess_min,
            "ess_median": self.ess_median,
            "ess_max": self.ess_max,
            "acceptance_rate": self.acceptance_rate,
            "gradient_evaluations": int(self.gradient_evaluations),
            "min_ess_per_gradient": self.ess_min / max(self.gradient_evaluations, 1),
            "retained": int(self.retained),
            "elapsed": float(self.elapsed),
            "moment_errors": self.moment_errors,
            "degenerate": list(self.degenerate),
        }


def summarize(trace, truths: dict | None = None) -> DiagnosticsReport:
    """ESS per dimension, acceptance and optional moment errors.

    ``truths`` maps a column name to ``(mean, second_moment)``; the report
    then holds the squared errors of the sample estimates of both.
    """
    samples = np.asarray(trace.samples)
    if samples.shape[0] == 0:
        raise ValueError("trace has no retained samples")
    values = np.empty(samples.shape[1])
    degenerate = []
    for j, name in enumerate(trace.names):
        try:
            values[j] = ess(samples[:, j])
        except DegenerateVarianceError:
            values[j] = np.nan
            degenerate.append(name)
    errors = {}
    for name, (mean, second) in (truths or {}).items():
        col = samples[:, trace.names.index(name)]
        errors[name] = {
            "mean": float(np.mean(col)),
            "second_moment": float(np.mean(col**2)),
            "sq_err_mean": float((np.mean(col) - mean) ** 2),
            "sq_err_second_moment": float((np.mean(col**2) - second) ** 2),
        }
    return DiagnosticsReport(
        names=list(trace.names),
        ess=values,
        acceptance_rate=float(np.mean(trace.accepted)),
        gradient_evaluations=int(trace.gradient_evaluations),
        retained=samples.shape[0],
        elapsed=float(trace.elapsed),
        moment_errors=errors,
        degenerate=degenerate,
    )
