"""``obsched`` command line: experiments as CSV, plus the property checks.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

Default seeds per command: eval 7, table1 2019 (optimizer) / 2020 (report),
sweep-independent 11, sweep-symmetric 13, cost-surface 2019, ccp 2019.
"""

from __future__ import annotations

import contextlib
import csv
import functools
import sys

import click

from . import experiments as exp
from .ccp import CcpConfig, NotConverged, ccp_solve
from .checks import CHECKS, run_checks
from .config import ConfigError, ExperimentConfig, build_pair, load_config
from .cost import evaluate_cost
from .source import SourceError


class NumericalFailure(click.ClickException):
    exit_code = 2


def _floats(text):
    if text is None:
        return None
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from exc


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file."),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="PRNG seed."),
        click.option("--samples", type=click.IntRange(min=10_000), help="Monte Carlo sample count."),
        click.option("--method", type=click.Choice(["mc", "quad"]), help="Expectation method."),
        click.option("--out", type=click.Path(dir_okay=False), help="Output CSV (default stdout)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def source_options(fn):
    opts = [
        click.option("--sigma1-sq", type=float),
        click.option("--sigma2-sq", type=float),
        click.option("--rho", type=float),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _load(config_path, **flags) -> ExperimentConfig:
    keys = {
        "seed": "eval.seed",
        "samples": "eval.samples",
        "method": "eval.method",
        "out": "out",
        "sigma1_sq": "source.sigma1_sq",
        "sigma2_sq": "source.sigma2_sq",
        "rho": "source.rho",
        "scheduler": "policy.scheduler",
        "estimator": "policy.estimator",
        "a": "policy.a",
    }
    overrides = {keys.get(k, k): v for k, v in flags.items()}
    return load_config(config_path, overrides)


def guarded(fn):
    """Translate library exceptions into the CLI exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, SourceError) as exc:
            raise click.UsageError(str(exc)) from exc
        except NotConverged as exc:
            raise NumericalFailure(str(exc)) from exc
        except ArithmeticError as exc:
            raise NumericalFailure(f"{type(exc).__name__}: {exc}") from exc
        except ValueError as exc:
            raise click.UsageError(str(exc)) from exc

    return wrapper


@contextlib.contextmanager
def _writer(out):
    if out is None:
        yield csv.writer(sys.stdout, lineterminator="\n")
        sys.stdout.flush()
    else:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            yield csv.writer(fh, lineterminator="\n")


def f6(v: float) -> str:
    return f"{v:.6f}"


def _seed_of(report_seed):
    return "" if report_seed is None else str(report_seed)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Observation-driven sensor scheduling and remote estimation experiments."""


@cli.command("eval")
@common_options
@source_options
@click.option("--scheduler", help="max, open-loop, nearest-neighbor, linear, decorrelating")
@click.option("--estimator", help="mean, soft, linear, decorrelating, cond-mean")
@click.option("--a", nargs=2, type=float, default=None, help="Slopes for the linear pair.")
@guarded
def eval_cmd(config_path, a, **flags):
    """Cost of one scheduler/estimator pair."""
    cfg = _load(config_path, a=list(a) if a else None, **flags)
    src = cfg.source.build()
    evaluation = cfg.eval.resolve(samples=100_000, seed=7)
    sch, est = build_pair(cfg.policy, src, evaluation)
    rep = evaluate_cost(src, sch, est, evaluation)
    with _writer(cfg.out) as w:
        w.writerow(["scheduler", "estimator", "sigma1_sq", "sigma2_sq", "rho", "cost", "stderr", "samples", "seed", "method"])
        w.writerow(
            [
                sch.name,
                est.name,
                f"{src.sigma1_sq:.6g}",
                f"{src.sigma2_sq:.6g}",
                f"{src.rho:.6g}",
                f6(rep.cost),
                f6(rep.stderr),
                rep.samples,
                _seed_of(rep.seed),
                rep.method,
            ]
        )


@cli.command()
@common_options
@click.option("--report-samples", type=click.IntRange(min=10_000), help="Fresh samples for the reported cost.")
@click.option("--report-seed", type=click.IntRange(0, 2**64 - 1))
@click.option("--rhos", help="Comma-separated correlations (default 0,0.1,...,0.9).")
@guarded
def table1(config_path, rhos, **flags):
    """Optimal piecewise-linear slopes and costs for sigma^2 = (5, 7)."""
    cfg = _load(config_path, rhos=_floats(rhos), **flags)
    optimizer = cfg.eval.resolve(samples=1_000_000, seed=2019)
    rows = exp.table1(
        rhos=cfg.rhos or exp.TABLE1_RHOS,
        optimizer=optimizer,
        report_samples=cfg.report_samples,
        report_seed=cfg.report_seed,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
    )
    quad = optimizer.method == "quad"
    with _writer(cfg.out) as w:
        w.writerow(["rho", "Jq", "a1", "a2", "iterations", "converged", "stderr", "samples", "seed"])
        for r in rows:
            w.writerow(
                [
                    r.rho,
                    f6(r.jq),
                    f6(r.a1),
                    f6(r.a2),
                    r.iterations,
                    str(r.converged).lower(),
                    f6(r.stderr),
                    optimizer.angles if quad else cfg.report_samples,
                    "" if quad else cfg.report_seed,
                ]
            )
    failed = [r.rho for r in rows if not r.converged]
    if failed:
        raise NumericalFailure(f"CCP did not converge for rho = {failed}")


@cli.command("sweep-independent")
@common_options
@click.option("--sigma1-grid", help="Comma-separated sigma1^2 values.")
@click.option("--sigma2-sq", type=float, help="Fixed sigma2^2 (default 1).")
@guarded
def sweep_independent(config_path, sigma1_grid, sigma2_sq, **flags):
    """Max/mean against open-loop scheduling for independent sensors."""
    cfg = _load(config_path, sigma1_grid=_floats(sigma1_grid), sigma2_sq=sigma2_sq, **flags)
    evaluation = cfg.eval.resolve(samples=100_000, seed=11)
    s2 = cfg.source.sigma2_sq
    rows = exp.sweep_independent(cfg.sigma1_grid or exp.SWEEP_SIGMA1, s2, evaluation)
    with _writer(cfg.out) as w:
        w.writerow(["sigma1_sq", "cost_max_mean", "cost_open_loop", "stderr", "seed"])
        for r in rows:
            w.writerow([r.sigma1_sq, f6(r.cost_max_mean), f6(r.cost_open_loop), f6(r.stderr), _seed(evaluation)])


def _seed(evaluation):
    return "" if evaluation.method == "quad" else evaluation.seed


@cli.command("sweep-symmetric")
@common_options
@click.option("--rhos", help="Comma-separated correlations in [0, 0.95].")
@click.option("--sigma-sq", type=float, help="Common variance (default 1).")
@guarded
def sweep_symmetric(config_path, rhos, sigma_sq, **flags):
    """Soft-thresholding, decorrelating and piecewise-linear pairs, equal variances."""
    cfg = _load(config_path, rhos=_floats(rhos), sigma_sq=sigma_sq, **flags)
    evaluation = cfg.eval.resolve(samples=100_000, seed=13)
    rows = exp.sweep_symmetric(cfg.rhos or exp.SWEEP_RHOS, cfg.sigma_sq, evaluation)
    with _writer(cfg.out) as w:
        w.writerow(
            [
                "rho",
                "cost_soft",
                "cost_decorrelating",
                "cost_linear",
                "stderr_soft",
                "stderr_decorrelating",
                "stderr_linear",
                "a_star",
                "seed",
            ]
        )
        for r in rows:
            w.writerow(
                [
                    r.rho,
                    f6(r.cost_soft),
                    f6(r.cost_decorrelating),
                    f6(r.cost_linear),
                    f6(r.stderr_soft),
                    f6(r.stderr_decorrelating),
                    f6(r.stderr_linear),
                    f6(r.a_star),
                    _seed(evaluation),
                ]
            )


@cli.command("eta-curve")
@common_options
@click.option("--rhos", help="Comma-separated correlations (default 0,0.3,0.6,0.9).")
@click.option("--sigma-sq", type=float)
@click.option("--xi-max", type=float)
@click.option("--points", type=int)
@guarded
def eta_curve(config_path, rhos, sigma_sq, xi_max, points, **flags):
    """Soft-thresholding function eta(xi) per correlation."""
    cfg = _load(config_path, rhos=_floats(rhos), sigma_sq=sigma_sq, xi_max=xi_max, points=points, **flags)
    rows = exp.eta_curve(cfg.rhos or (0.0, 0.3, 0.6, 0.9), cfg.sigma_sq, cfg.xi_max, cfg.points)
    with _writer(cfg.out) as w:
        w.writerow(["rho", "xi", "eta"])
        for rho, xi, eta in rows:
            w.writerow([rho, f6(xi), f6(eta)])


@cli.command("cost-surface")
@common_options
@source_options
@click.option("--resolution", type=int, help="Grid points per axis (default 200).")
@click.option("--a-min", type=float, default=None)
@click.option("--a-max", type=float, default=None)
@guarded
def cost_surface(config_path, resolution, a_min, a_max, **flags):
    """J_q over a square grid of slopes; the minimizer goes to stderr."""
    a_range = None
    if a_min is not None or a_max is not None:
        a_range = [0.0 if a_min is None else a_min, 1.0 if a_max is None else a_max]
    cfg = _load(config_path, resolution=resolution, a_range=a_range, **flags)
    src = cfg.source.build()
    evaluation = cfg.eval.resolve(samples=1_000_000, seed=2019)
    rows, best, rep = exp.cost_surface(src, cfg.a_range, cfg.resolution, evaluation)
    with _writer(cfg.out) as w:
        w.writerow(["a1", "a2", "Jq", "seed"])
        seed = _seed(evaluation)
        for a1, a2, j in rows:
            w.writerow([f6(a1), f6(a2), f6(j), seed])
    click.echo(f"grid minimum a = ({best[0]:.6f}, {best[1]:.6f}), Jq = {rep.cost:.6f}", err=True)


@cli.command()
@common_options
@source_options
@click.option("--a0", nargs=2, type=float, default=None, help="Starting slopes.")
@click.option("--tol", type=float)
@click.option("--max-iter", type=int)
@guarded
def ccp(config_path, a0, tol, max_iter, **flags):
    """Convex-concave iterations for the piecewise-linear pair."""
    cfg = _load(config_path, a0=list(a0) if a0 else None, tol=tol, max_iter=max_iter, **flags)
    src = cfg.source.build()
    evaluation = cfg.eval.resolve(samples=1_000_000, seed=2019)
    trace = ccp_solve(src, CcpConfig(a0=cfg.a0, tol=cfg.tol, max_iter=cfg.max_iter, eval=evaluation))
    with _writer(cfg.out) as w:
        w.writerow(["iter", "a1", "a2", "Jq"])
        for k, (a, j) in enumerate(zip(trace.iterates, trace.costs)):
            w.writerow([k, f6(a[0]), f6(a[1]), f6(j)])
    if not trace.converged:
        raise NotConverged(trace)


@cli.command()
@click.option("--only", multiple=True, help="Run just the named check (repeatable).")
@guarded
def check(only):
    """Run the numerical property suite; exit 1 if any property fails."""
    unknown = sorted(set(only) - set(CHECKS))
    if unknown:
        raise click.UsageError(f"unknown check(s): {', '.join(unknown)}")
    results = run_checks(list(only) or None)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        click.echo(f"{status}  {r.name:<{width}}  {r.detail}  ({r.seconds:.1f}s)")
    failed = [r.name for r in results if not r.passed]
    if failed:
        click.echo("failed: " + ", ".join(failed), err=True)
        sys.exit(1)


def main(argv=None) -> int:
    """Console entry point; maps click's usage exit code (2) onto 1."""
    try:
        rv = cli.main(args=argv, prog_name="obsched", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except NumericalFailure as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except SystemExit as exc:  # sys.exit inside a command
        return exc.code if isinstance(exc.code, int) else 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
