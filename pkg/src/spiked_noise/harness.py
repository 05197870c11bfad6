"""Monte Carlo engine: risk experiments, identity checks and report output.

Replicate ``i`` of grid point ``j`` always draws from the stream
``make_rng(seed, j, i)`` and results are reduced in replicate order, so a
report depends on the configuration only, never on the number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np
import yaml
from numpy.typing import NDArray

from .benchmarks import ledoit_wolf, stein_isotonized
from .errors import ConfigError, InvalidModelError, NearDegenerateWarning, NegativeNoiseError, SpikedNoiseError
from .model import CovarianceModel, SpikedModel, make_rng, materialize, model_from_dict, sample_data
from .spectra import SpectralData, decompose
from .spiked import assemble, candidate_profile, select_rank
from .ure import EstimatorProfile, evaluate_ure, frobenius_loss, haff_loss

__all__ = [
    "SCHEMA_VERSION",
    "ESTIMATORS",
    "LOSSES",
    "ExperimentConfig",
    "RiskRow",
    "RiskReport",
    "Failure",
    "run_risk_experiment",
    "UreCheck",
    "verify_ure",
    "IdentityCheck",
    "SteinHaffReport",
    "verify_stein_haff",
    "emit",
    "CSV_COLUMNS",
]

SCHEMA_VERSION = 1
CSV_COLUMNS = ("method", "loss", "n", "p", "risk", "se", "gain", "excluded")


@dataclass(frozen=True)
class Draw:
    """One replicate: data, sample covariance, its spectrum and the truth."""

    x: NDArray[np.float64]
    s: NDArray[np.float64]
    spec: SpectralData
    truth: NDArray[np.float64]


def _sample(d: Draw) -> NDArray[np.float64]:
    return d.s


def _spiked(d: Draw) -> NDArray[np.float64]:
    return assemble(d.spec).matrix()


def _ledoit_wolf(d: Draw) -> NDArray[np.float64]:
    return ledoit_wolf(d.x).matrix


def _stein(d: Draw) -> NDArray[np.float64]:
    return stein_isotonized(d.spec).matrix


def _oracle(d: Draw) -> NDArray[np.float64]:
    return d.truth


ESTIMATORS: dict[str, Callable[[Draw], NDArray[np.float64]]] = {
    "sample": _sample,
    "spiked": _spiked,
    "ledoit-wolf": _ledoit_wolf,
    "stein-isotonized": _stein,
    "oracle": _oracle,
}

LOSSES: dict[str, Callable[[Any, Any], float]] = {
    "haff": haff_loss,
    "frobenius": frobenius_loss,
}

_CONFIG_KEYS = {"model", "pairs", "grid", "replicates", "estimators", "losses", "seed", "threads"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict[str, Any]
    pairs: tuple[tuple[int, int], ...]
    replicates: int = 100
    estimators: tuple[str, ...] = ("sample", "spiked", "ledoit-wolf", "stein-isotonized")
    losses: tuple[str, ...] = ("haff", "frobenius")
    seed: int = 0
    threads: int = 1

    @classmethod
    def from_dict(cls, doc: Any) -> "ExperimentConfig":
        """Validate a config mapping, reporting every offending field at once."""
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping")
        problems: list[str] = []
        for key in sorted(set(doc) - _CONFIG_KEYS):
            problems.append(f"{key}: unknown field")

        model = doc.get("model")
        if not isinstance(model, dict):
            problems.append("model: required mapping with kind spiked or ar")
            model = {}

        pairs: list[tuple[int, int]] = []
        if "pairs" in doc and "grid" in doc:
            problems.append("pairs: give either pairs or grid, not both")
        elif "pairs" in doc:
            raw = doc["pairs"]
            if not isinstance(raw, list) or not raw:
                problems.append("pairs: expected a non-empty list of {n, p}")
            else:
                for i, item in enumerate(raw):
                    try:
                        n, p = (int(item["n"]), int(item["p"])) if isinstance(item, dict) else (int(item[0]), int(item[1]))
                    except (KeyError, IndexError, TypeError, ValueError):
                        problems.append(f"pairs[{i}]: expected {{n, p}} integers")
                        continue
                    pairs.append((n, p))
        elif "grid" in doc:
            grid = doc["grid"]
            try:
                c = float(grid["c"])
                ps = [int(v) for v in grid["p"]]
                if not 0 < c <= 1:
                    raise ValueError
                pairs = [(int(round(p / c)), p) for p in ps]
            except (KeyError, TypeError, ValueError):
                problems.append("grid: expected c in (0, 1] and a list p")
        else:
            problems.append("pairs: required (or grid)")
        for i, (n, p) in enumerate(pairs):
            if p < 1 or n < p:
                problems.append(f"pairs[{i}]: need n >= p >= 1, got n={n}, p={p}")
            else:
                try:
                    model_from_dict(model, p)
                except (InvalidModelError, TypeError, ValueError) as exc:
                    problems.append(f"model: {exc}")
                    break

        def _int(key: str, default: int, lo: int) -> int:
            val = doc.get(key, default)
            if isinstance(val, bool) or not isinstance(val, int) or val < lo:
                problems.append(f"{key}: expected an integer >= {lo}, got {val!r}")
                return default
            return val

        replicates = _int("replicates", 100, 1)
        seed = _int("seed", 0, 0)
        threads = _int("threads", 1, 1)

        def _names(key: str, default: tuple[str, ...], known: Iterable[str]) -> tuple[str, ...]:
            val = doc.get(key, list(default))
            if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
                problems.append(f"{key}: expected a list of names")
                return default
            bad = [v for v in val if v not in known]
            if bad:
                problems.append(f"{key}: unknown {', '.join(bad)} (known: {', '.join(sorted(known))})")
            return tuple(val)

        estimators = _names("estimators", cls.estimators, ESTIMATORS)
        losses = _names("losses", cls.losses, LOSSES)
        if problems:
            raise ConfigError(problems)
        return cls(dict(model), tuple(pairs), replicates, estimators, losses, seed, threads)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            doc = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        return cls.from_dict(doc)

    def with_overrides(self, **kw: Any) -> "ExperimentConfig":
        doc = self.to_dict()
        doc.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": dict(self.model),
            "pairs": [{"n": n, "p": p, "c": p / n} for n, p in self.pairs],
            "replicates": self.replicates,
            "estimators": list(self.estimators),
            "losses": list(self.losses),
            "seed": self.seed,
            "threads": self.threads,
        }


@dataclass(frozen=True)
class RiskRow:
    method: str
    loss: str
    n: int
    p: int
    risk: float | None
    se: float | None
    gain: float | None
    excluded: int
    count: int


@dataclass(frozen=True)
class Failure:
    n: int
    p: int
    replicate: int
    method: str
    message: str


@dataclass(frozen=True)
class RiskReport:
    config: dict[str, Any]
    rows: tuple[RiskRow, ...]
    failures: tuple[Failure, ...] = ()

    def row(self, method: str, loss: str, n: int, p: int) -> RiskRow:
        for r in self.rows:
            if (r.method, r.loss, r.n, r.p) == (method, loss, n, p):
                return r
        raise KeyError((method, loss, n, p))

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "rows": [asdict(r) for r in self.rows],
            "failures": [asdict(f) for f in self.failures],
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RiskReport":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported value {version!r}")
        return cls(
            doc["config"],
            tuple(RiskRow(**r) for r in doc["rows"]),
            tuple(Failure(**f) for f in doc.get("failures", [])),
        )


def _draw(model: CovarianceModel, truth: NDArray[np.float64], n: int, rng: np.random.Generator) -> Draw:
    x = sample_data(model, n, rng)
    s = x.T @ x / n
    s = 0.5 * (s + s.T)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearDegenerateWarning)
        spec = decompose(s, n)
    return Draw(x, s, spec, truth)


def _replicate(cfg: ExperimentConfig, j: int, i: int, model, truth) -> tuple[NDArray[np.float64], list[tuple[str, str]]]:
    n, _ = cfg.pairs[j]
    d = _draw(model, truth, n, make_rng(cfg.seed, j, i))
    out = np.full((len(cfg.estimators), len(cfg.losses)), np.nan)
    failed: list[tuple[str, str]] = []
    for a, name in enumerate(cfg.estimators):
        try:
            est = ESTIMATORS[name](d)
            for b, loss in enumerate(cfg.losses):
                out[a, b] = LOSSES[loss](est, truth)
        except (SpikedNoiseError, np.linalg.LinAlgError, FloatingPointError) as exc:
            out[a, :] = np.nan
            failed.append((name, f"{type(exc).__name__}: {exc}"))
            continue
        if not np.all(np.isfinite(out[a])):
            out[a, :] = np.nan
            failed.append((name, "non-finite loss"))
    return out, failed


def _mean_se(v: NDArray[np.float64]) -> tuple[float | None, float | None]:
    if v.size == 0:
        return None, None
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else None
    return mean, se


def run_risk_experiment(cfg: ExperimentConfig, threads: int | None = None) -> RiskReport:
    """Monte Carlo risks of every configured estimator under every configured loss.

    All estimators see the same draw within a replicate. A replicate where
    an estimator fails is excluded for that estimator only and recorded in
    ``failures``.
    """
    workers = threads if threads is not None else cfg.threads
    rows: list[RiskRow] = []
    failures: list[Failure] = []
    for j, (n, p) in enumerate(cfg.pairs):
        model = model_from_dict(cfg.model, p)
        truth = materialize(model)
        reps = range(cfg.replicates)
        if workers <= 1:
            results = [_replicate(cfg, j, i, model, truth) for i in reps]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda i: _replicate(cfg, j, i, model, truth), reps))
        losses = np.stack([r[0] for r in results])
        for i, (_, failed) in enumerate(results):
            failures.extend(Failure(n, p, i, name, msg) for name, msg in failed)
        means: dict[tuple[str, str], tuple[float | None, float | None, int]] = {}
        for a, name in enumerate(cfg.estimators):
            for b, loss in enumerate(cfg.losses):
                v = losses[:, a, b]
                ok = v[np.isfinite(v)]
                mean, se = _mean_se(ok)
                means[(name, loss)] = (mean, se, int(v.size - ok.size))
        for (name, loss), (mean, se, excluded) in means.items():
            ref = means.get(("sample", loss))
            gain = None
            if ref is not None and ref[0] is not None and mean is not None and mean > 0:
                gain = ref[0] / mean - 1.0
            rows.append(RiskRow(name, loss, n, p, mean, se, gain, excluded, cfg.replicates - excluded))
    return RiskReport(cfg.to_dict(), tuple(rows), tuple(failures))


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(report: RiskReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def emit(report: RiskReport, out_dir: str | os.PathLike, stem: str = "risk", formats: Iterable[str] = ("csv", "json")) -> list[Path]:
    """Write the report as ``<stem>.csv`` and/or ``<stem>.json`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = out / f"{stem}.{fmt}"
        if fmt == "csv":
            path.write_text(report_csv(report))
        elif fmt == "json":
            path.write_text(json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written


@dataclass(frozen=True)
class UreCheck:
    method: str
    replicates: int
    ure_mean: float
    ure_se: float
    loss_mean: float
    loss_se: float
    excluded: int = 0

    @property
    def z(self) -> float:
        return (self.ure_mean - self.loss_mean) / math.hypot(self.ure_se, self.loss_se)


def _fixed_rank(spec: SpectralData, rank: int) -> tuple[EstimatorProfile, NDArray[np.float64]]:
    profile = candidate_profile(spec, rank)
    if not profile.psi[-1] > 0:
        raise NegativeNoiseError("noise estimate is not positive at this rank")
    o = spec.eigenvectors
    return profile, (o * profile.psi) @ o.T


def verify_ure(
    model: CovarianceModel,
    n: int,
    replicates: int,
    seed: int = 0,
    method: str = "spiked",
    rank_source: str = "independent",
    threads: int = 1,
) -> UreCheck:
    """Compare the mean risk estimate ``F + G`` with the mean realised Haff loss.

    ``method="sample"`` checks ``S``. For ``method="spiked"`` the rank is
    held fixed while differentiating, and ``rank_source`` says where it
    comes from: ``"independent"`` runs the rank selection on a second,
    independent draw (the setting in which ``F + G`` is unbiased), while
    ``"same"`` selects it on the sample being evaluated, which biases the
    estimate downwards because selection favours small ``F + G``.
    """
    if method not in ("sample", "spiked"):
        raise ConfigError(f"method: unknown {method!r} (known: sample, spiked)")
    if rank_source not in ("independent", "same"):
        raise ConfigError(f"rank_source: unknown {rank_source!r} (known: independent, same)")
    truth = materialize(model)

    def one(i: int) -> tuple[float, float]:
        d = _draw(model, truth, n, make_rng(seed, 0, i))
        try:
            if method == "sample":
                rank = d.spec.p
            elif rank_source == "independent":
                aux = _draw(model, truth, n, make_rng(seed, 1, i))
                rank = select_rank(aux.spec)[0]
            else:
                rank = select_rank(d.spec)[0]
            profile, est = _fixed_rank(d.spec, rank)
            return evaluate_ure(d.spec, profile).total, haff_loss(est, truth)
        except SpikedNoiseError:
            return math.nan, math.nan

    if threads <= 1:
        vals = [one(i) for i in range(replicates)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, range(replicates)))
    arr = np.array(vals)
    ok = arr[np.all(np.isfinite(arr), axis=1)]
    um, us = _mean_se(ok[:, 0])
    lm, ls = _mean_se(ok[:, 1])
    return UreCheck(method, ok.shape[0], um, us, lm, ls, replicates - ok.shape[0])


@dataclass(frozen=True)
class IdentityCheck:
    lhs_mean: float
    lhs_se: float
    rhs_mean: float
    rhs_se: float
    diff_se: float

    @property
    def z(self) -> float:
        diff = self.lhs_mean - self.rhs_mean
        if self.diff_se == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.diff_se


@dataclass(frozen=True)
class SteinHaffReport:
    psi: str
    p: int
    n: int
    replicates: int
    first: IdentityCheck
    second: IdentityCheck
    rhs_first_max_dev: float


# value, first derivative and second derivative of psi as functions of l
PSI_FAMILIES: dict[str, Callable[[NDArray[np.float64]], tuple[NDArray[np.float64], ...]]] = {
    "l": lambda l: (l, np.ones_like(l), np.zeros_like(l)),
    "l2": lambda l: (l * l, 2.0 * l, np.full_like(l, 2.0)),
    "const": lambda l: (np.ones_like(l), np.zeros_like(l), np.zeros_like(l)),
}


def stein_haff_rhs(l: NDArray[np.float64], n: int, psi: NDArray[np.float64], dpsi: NDArray[np.float64]) -> float:
    """``sum (n-p-1)/n psi/l + (2/n) sum psi' + (1/n) sum_{k != b} (psi_k - psi_b)/(l_k - l_b)``."""
    p = l.shape[0]
    diff = l[:, None] - l[None, :]
    np.fill_diagonal(diff, np.inf)
    dd = (psi[:, None] - psi[None, :]) / diff
    return float((n - p - 1) / n * np.sum(psi / l) + 2.0 / n * np.sum(dpsi) + np.sum(dd) / n)


def second_order_psi(
    l: NDArray[np.float64], n: int, psi: NDArray[np.float64], dpsi: NDArray[np.float64], d2psi: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """``psi*`` whose first-order identity gives the mean of ``tr((Sigma^-1 O Psi O^T)^2)``, and its derivative.

    ``psi*_k = (n-p-1)/n psi_k^2/l_k + (4/n) psi_k psi'_k + (2/n) psi_k u_k`` with
    ``u_k = sum_{b != k} (psi_k - psi_b)/(l_k - l_b)``.
    """
    p = l.shape[0]
    a = n - p - 1
    diff = l[:, None] - l[None, :]
    np.fill_diagonal(diff, np.inf)
    inv = 1.0 / diff
    dd = (psi[:, None] - psi[None, :]) * inv
    u = dd.sum(axis=1)
    du = np.sum((dpsi[:, None] - dd) * inv, axis=1)
    star = a / n * psi**2 / l + 4.0 / n * psi * dpsi + 2.0 / n * psi * u
    dstar = (
        a / n * (2.0 * psi * dpsi / l - psi**2 / l**2)
        + 4.0 / n * (dpsi**2 + psi * d2psi)
        + 2.0 / n * (dpsi * u + psi * du)
    )
    return star, dstar


def verify_stein_haff(
    psi_choice: str,
    p: int,
    n: int,
    replicates: int,
    sigma: CovarianceModel | None = None,
    seed: int = 0,
) -> SteinHaffReport:
    """Monte Carlo check of the first- and second-order Stein-Haff identities.

    First order: ``E tr(Sigma^-1 O Psi O^T)`` against the mean of
    :func:`stein_haff_rhs`. Second order: ``E tr((Sigma^-1 O Psi O^T)^2)``
    against the same right-hand side applied to :func:`second_order_psi`.
    z-scores use the paired per-replicate differences.
    """
    if psi_choice not in PSI_FAMILIES:
        raise ConfigError(f"psi: unknown family {psi_choice!r} (known: {', '.join(PSI_FAMILIES)})")
    model = sigma if sigma is not None else SpikedModel((), 1.0, p)
    if model.p != p:
        raise InvalidModelError(f"model dimension {model.p} does not match p={p}")
    truth = materialize(model)
    fam = PSI_FAMILIES[psi_choice]
    rows = np.empty((replicates, 4))
    for i in range(replicates):
        d = _draw(model, truth, n, make_rng(seed, 0, i))
        l, o = d.spec.eigenvalues, d.spec.eigenvectors
        psi, dpsi, d2psi = fam(l)
        m = np.linalg.solve(truth, (o * psi) @ o.T)
        star, dstar = second_order_psi(l, n, psi, dpsi, d2psi)
        rows[i] = (np.trace(m), stein_haff_rhs(l, n, psi, dpsi), np.sum(m * m.T), stein_haff_rhs(l, n, star, dstar))

    def check(lhs: NDArray[np.float64], rhs: NDArray[np.float64]) -> IdentityCheck:
        r = math.sqrt(lhs.size)
        return IdentityCheck(
            float(lhs.mean()), float(lhs.std(ddof=1) / r), float(rhs.mean()), float(rhs.std(ddof=1) / r),
            float((lhs - rhs).std(ddof=1) / r),
        )

    dev = float(np.max(np.abs(rows[:, 1] - p))) if psi_choice == "l" else math.nan
    return SteinHaffReport(psi_choice, p, n, replicates, check(rows[:, 0], rows[:, 1]), check(rows[:, 2], rows[:, 3]), dev)
