"""Command-line interface.

Exit codes: 0 success, 1 invalid input or configuration, 2 a numerical check
failed beyond its tolerance.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .asymptotics import RegimeParams, clt_constants, eigenvalue_limit, mp_inverse_moment, stieltjes_limits
from .benchmarks import ledoit_wolf, stein_isotonized
from .errors import ConfigError, DegenerateSampleError, NearDegenerateWarning, RegimeError, SpikedNoiseError
from .harness import ESTIMATORS, LOSSES, PSI_FAMILIES, ExperimentConfig, emit, run_risk_experiment, verify_stein_haff, verify_ure
from .model import SpikedModel
from .spectra import decompose
from .spiked import assemble

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2
Z_LIMIT = 3.0
THREADS_ENV = "SPIKED_NOISE_THREADS"
BUNDLED = Path(__file__).parent / "figures"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return None
    try:
        val = int(env)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: expected an integer, got {env!r}")
    if val < 1:
        raise ConfigError(f"{THREADS_ENV}: expected an integer >= 1, got {val}")
    return val


def load_matrix(path: str | os.PathLike, header: bool = False) -> np.ndarray:
    """Read a comma- or whitespace-delimited matrix, one observation per row."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if header:
        lines = lines[1:]
    if not lines:
        raise ConfigError(f"{path}: no data rows")
    delim = "," if "," in lines[0] else None
    try:
        data = np.loadtxt(lines, delimiter=delim, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: not a numeric matrix ({exc})") from exc
    return data


def _cmd_estimate(args: argparse.Namespace) -> int:
    x = load_matrix(args.input, args.header)
    n, p = x.shape
    if n < p:
        raise RegimeError(f"input has n={n} observations for p={p} variables; need n >= p")
    s = x.T @ x / n
    s = 0.5 * (s + s.T)
    summary: dict = {"method": args.estimator, "n": n, "p": p}
    if args.estimator == "spiked":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NearDegenerateWarning)
            spec = decompose(s, n)
        est = assemble(spec)
        matrix = est.matrix()
        summary.update(
            rho_tilde=est.rho_hat,
            sigma2_tilde=est.sigma2_hat,
            gammas_tilde=[float(g) for g in est.gammas_hat] if est.rho_hat < p else [],
            diagnostics=est.diagnostics.to_dict() if est.diagnostics else None,
        )
    elif args.estimator == "sample":
        matrix = s
    elif args.estimator == "ledoit-wolf":
        res = ledoit_wolf(x)
        matrix = res.matrix
        summary["shrinkage"] = res.shrinkage
    else:
        res = stein_isotonized(decompose(s, n))
        matrix = res.matrix
        summary["floored"] = res.floored
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "covariance.csv", matrix, delimiter=",", fmt="%.17g")
    (out / "estimate.json").write_text(json.dumps(summary, indent=2, allow_nan=False) + "\n")
    print(f"method={args.estimator} n={n} p={p}")
    if args.estimator == "spiked":
        g = ", ".join(f"{v:.6g}" for v in summary["gammas_tilde"])
        print(f"rho_tilde={summary['rho_tilde']} sigma2_tilde={summary['sigma2_tilde']:.6g}")
        print(f"gammas_tilde=({g})")
    print(f"wrote {out / 'covariance.csv'} and {out / 'estimate.json'}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    cfg = cfg.with_overrides(
        seed=args.seed,
        threads=_threads(args.threads),
        replicates=args.replicates,
        estimators=args.estimator,
        losses=args.loss,
    )
    report = run_risk_experiment(cfg)
    paths = emit(report, args.out, stem=args.stem)
    if args.plot:
        from .plotting import plot_report

        paths += plot_report(report, args.out, stem=args.stem)
    print(f"{'method':<18}{'loss':<11}{'n':>6}{'p':>6}{'risk':>13}{'se':>11}{'gain':>9}{'excl':>6}")
    for r in report.rows:
        risk = "nan" if r.risk is None else f"{r.risk:.5g}"
        se = "" if r.se is None else f"{r.se:.3g}"
        gain = "" if r.gain is None else f"{r.gain:.3g}"
        print(f"{r.method:<18}{r.loss:<11}{r.n:>6}{r.p:>6}{risk:>13}{se:>11}{gain:>9}{r.excluded:>6}")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_verify_ure(args: argparse.Namespace) -> int:
    model = SpikedModel(tuple(args.gammas), args.sigma2, args.p)
    threads = _threads(args.threads) or 1
    check = verify_ure(model, args.n, args.replicates, args.seed, args.method, args.rank_source, threads)
    print(f"method={check.method} p={args.p} n={args.n} replicates={check.replicates} excluded={check.excluded}")
    print(f"mean F+G    = {check.ure_mean:.6g} (se {check.ure_se:.3g})")
    print(f"mean loss   = {check.loss_mean:.6g} (se {check.loss_se:.3g})")
    print(f"z           = {check.z:.3f}")
    return EXIT_OK if abs(check.z) <= Z_LIMIT else EXIT_NUMERIC


def _cmd_verify_stein_haff(args: argparse.Namespace) -> int:
    rep = verify_stein_haff(args.psi, args.p, args.n, args.replicates, seed=args.seed)
    worst = 0.0
    print(f"psi={rep.psi} p={rep.p} n={rep.n} replicates={rep.replicates}")
    for name, chk in (("first", rep.first), ("second", rep.second)):
        print(f"{name:<7} lhs={chk.lhs_mean:.6g} (se {chk.lhs_se:.3g})  rhs={chk.rhs_mean:.6g} (se {chk.rhs_se:.3g})  z={chk.z:.3f}")
        worst = max(worst, abs(chk.z))
    if rep.psi == "l":
        print(f"first-order rhs max |rhs - p| = {rep.rhs_first_max_dev:.3g}")
    return EXIT_OK if worst <= Z_LIMIT else EXIT_NUMERIC


def _cmd_asymptotics(args: argparse.Namespace) -> int:
    params = RegimeParams(args.c, args.sigma2, (args.gamma,))
    print(f"c={args.c} sigma2={args.sigma2} gamma={args.gamma} threshold={params.threshold:.6g}")
    print(f"eigenvalue limit        = {eigenvalue_limit(args.gamma, params):.6g}")
    print(f"bulk edge               = {(1 + math.sqrt(args.c)) ** 2 * args.sigma2:.6g}")
    for m in (1, 2):
        print(f"inverse moment m={m}      = {mp_inverse_moment(m, params):.6g}")
    if params.supercritical:
        a, b, c = stieltjes_limits(args.gamma, params)
        print(f"stieltjes limits        = ({a:.6g}, {b:.6g}, {c:.6g})")
        lo, hi, var = clt_constants(params)
        print(f"clt mean bounds         = [{lo:.6g}, {hi:.6g}]  variance = {var:.6g}")
    else:
        print("spike is subcritical: stieltjes limits and clt constants undefined")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spiked-noise", description="Noise and spiked covariance estimation in high dimensions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", help="estimate a covariance matrix from a data file")
    est.add_argument("input", help="delimited text, one observation per row")
    est.add_argument("--estimator", choices=[k for k in ESTIMATORS if k != "oracle"], default="spiked")
    est.add_argument("--header", action="store_true", help="skip the first line of the input")
    est.add_argument("--out", default=".", help="output directory")
    est.set_defaults(func=_cmd_estimate)

    sim = sub.add_parser("simulate", help="Monte Carlo risk experiment from a config file")
    sim.add_argument("--config", default=str(BUNDLED / "spiked.cfg"), help="YAML experiment config")
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--seed", type=int, help="override the config seed")
    sim.add_argument("--threads", type=int, help=f"worker threads (fallback ${THREADS_ENV})")
    sim.add_argument("--replicates", type=int, help="override the replicate count")
    sim.add_argument("--estimator", action="append", choices=sorted(ESTIMATORS), help="repeat to select estimators")
    sim.add_argument("--loss", action="append", choices=sorted(LOSSES), help="repeat to select losses")
    sim.add_argument("--stem", default="risk", help="output file stem")
    sim.add_argument("--plot", action="store_true", help="also render PNG figures next to the CSV")
    sim.set_defaults(func=_cmd_simulate)

    ure = sub.add_parser("verify-ure", help="check unbiasedness of the risk estimate")
    ure.add_argument("--p", type=int, default=10)
    ure.add_argument("--n", type=int, default=40)
    ure.add_argument("--gammas", type=float, nargs="*", default=[4.0, 3.0, 2.0, 1.0])
    ure.add_argument("--sigma2", type=float, default=1.0)
    ure.add_argument("--replicates", type=int, default=2000)
    ure.add_argument("--method", choices=["spiked", "sample"], default="spiked")
    ure.add_argument("--rank-source", choices=["independent", "same"], default="independent")
    ure.add_argument("--seed", type=int, default=0)
    ure.add_argument("--threads", type=int, help=f"worker threads (fallback ${THREADS_ENV})")
    ure.set_defaults(func=_cmd_verify_ure)

    sh = sub.add_parser("verify-stein-haff", help="check the Stein-Haff identities by simulation")
    sh.add_argument("--psi", choices=sorted(PSI_FAMILIES), default="l")
    sh.add_argument("--p", type=int, default=5)
    sh.add_argument("--n", type=int, default=20)
    sh.add_argument("--replicates", type=int, default=5000)
    sh.add_argument("--seed", type=int, default=0)
    sh.set_defaults(func=_cmd_verify_stein_haff)

    asy = sub.add_parser("asymptotics", help="print closed-form limits")
    asy.add_argument("--gamma", type=float, required=True)
    asy.add_argument("--c", type=float, required=True)
    asy.add_argument("--sigma2", type=float, default=1.0)
    asy.set_defaults(func=_cmd_asymptotics)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_INVALID
    except (RegimeError, DegenerateSampleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SpikedNoiseError as exc:
        kind = EXIT_INVALID if isinstance(exc, ValueError) else EXIT_NUMERIC
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return kind


if __name__ == "__main__":
    sys.exit(main())
