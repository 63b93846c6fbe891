"""Command-line surface: evaluate, fit, sweep, validate.

Output is JSON by default; CSV is reserved for tabular things (the
det-scan file, matrix dumps).  All numbers are written with 17
significant digits so a written value re-reads bit-exactly, and the
decimal separator is always '.' regardless of locale.

Exit codes: 0 success, 1 check-suite failure, 2 bad flags or input,
3 cubature non-convergence, 4 fit non-convergence.
"""

import csv
import io
import json
import math
import sys

import click
import numpy as np

from .expectations import CubatureNotConverged
from .expected_info import SweepSpec, det_scan, expected_info
from .likelihood import FitControls, fit_mle, loglik, observed_info, score
from .model import (PARAM_NAMES, Dataset, DpParams, density_esn2,
                    moments_esn2, validate)
from .validation import RngSeed, ValidationConfig, run_validation_suite


class CubatureFailure(click.ClickException):
    exit_code = 3


def _fmt(x):
    return format(float(x), ".17g")


def _dp_options(f):
    for name in reversed(PARAM_NAMES):
        f = click.option(f"--{name}", type=float, default=None,
                         help=f"{name} component")(f)
    f = click.option("--dp", "dp_tuple", default=None, metavar="T",
                     help="all 8 parameters, comma separated, in "
                          "(xi1,xi2,omega11,omega12,omega22,"
                          "alpha1,alpha2,tau) order")(f)
    return f


def _resolve_dp(dp_tuple, named):
    """Merge --dp with named flags; disagreement is a usage error."""
    values = {}
    if dp_tuple is not None:
        parts = dp_tuple.split(",")
        if len(parts) != 8:
            raise click.UsageError(
                f"--dp needs 8 comma-separated values, got {len(parts)}")
        try:
            values = {name: float(p) for name, p in zip(PARAM_NAMES, parts)}
        except ValueError as exc:
            raise click.UsageError(f"--dp: {exc}") from None
    for name in PARAM_NAMES:
        given = named.get(name)
        if given is None:
            continue
        if name in values and values[name] != given:
            raise click.UsageError(
                f"--{name}={given} conflicts with --dp value {values[name]}")
        values[name] = given
    missing = [name for name in PARAM_NAMES if name not in values]
    if missing:
        raise click.UsageError(
            "missing parameter components: " + ", ".join(missing))
    try:
        return validate(DpParams(**values))
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None


def _load_table(path):
    """Two-column CSV to Dataset; optional header; row-numbered errors."""
    y1, y2 = [], []
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows:
        raise click.UsageError(f"{path}: no data rows")
    start = 0
    try:
        [float(cell) for cell in rows[0]]
    except ValueError:
        start = 1  # header row
    if start == len(rows):
        raise click.UsageError(f"{path}: no data rows after the header")
    for k, row in enumerate(rows[start:], start=start + 1):
        if len(row) != 2:
            raise click.UsageError(
                f"{path} row {k}: expected 2 columns, got {len(row)}")
        try:
            a, b = float(row[0]), float(row[1])
        except ValueError as exc:
            raise click.UsageError(f"{path} row {k}: {exc}") from None
        if not (math.isfinite(a) and math.isfinite(b)):
            raise click.UsageError(
                f"{path} row {k}: non-finite value")
        y1.append(a)
        y2.append(b)
    return Dataset(np.array(y1), np.array(y2))


def _matrix_csv(matrix):
    out = io.StringIO()
    for row in matrix:
        out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


def _emit(payload, fmt, csv_text):
    if fmt == "csv":
        click.echo(csv_text, nl=False)
    else:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))


_FORMAT = click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
                       default="json", help="output format")
_DATA = click.option("--data", "data_path", type=click.Path(exists=True),
                     default=None, help="two-column CSV of observations")


@click.group()
def main():
    """Bivariate extended skew-normal toolkit."""


@main.group("eval")
def eval_group():
    """Evaluate model quantities at a parameter point."""


def _dp_payload(dp):
    return {name: getattr(dp, name) for name in PARAM_NAMES}


def _require_data(data_path):
    if data_path is None:
        raise click.UsageError("--data is required for this quantity")
    return _load_table(data_path)


@eval_group.command("density")
@_dp_options
@_DATA
@_FORMAT
def eval_density(dp_tuple, fmt, data_path, **named):
    dp = _resolve_dp(dp_tuple, named)
    data = _require_data(data_path)
    values = density_esn2(data.y1, data.y2, dp)
    _emit({"dp": _dp_payload(dp), "density": [float(v) for v in values]},
          fmt, "".join(_fmt(v) + "\n" for v in values))


@eval_group.command("loglik")
@_dp_options
@_DATA
@_FORMAT
def eval_loglik(dp_tuple, fmt, data_path, **named):
    dp = _resolve_dp(dp_tuple, named)
    data = _require_data(data_path)
    value = loglik(dp, data)
    _emit({"dp": _dp_payload(dp), "loglik": value}, fmt, _fmt(value) + "\n")


@eval_group.command("score")
@_dp_options
@_DATA
@_FORMAT
def eval_score(dp_tuple, fmt, data_path, **named):
    dp = _resolve_dp(dp_tuple, named)
    data = _require_data(data_path)
    vec = score(dp, data)
    _emit({"dp": _dp_payload(dp), "score": [float(v) for v in vec]},
          fmt, ",".join(_fmt(v) for v in vec) + "\n")


@eval_group.command("oinfo")
@_dp_options
@_DATA
@_FORMAT
def eval_oinfo(dp_tuple, fmt, data_path, **named):
    dp = _resolve_dp(dp_tuple, named)
    data = _require_data(data_path)
    info = observed_info(dp, data)
    _emit({"dp": _dp_payload(dp), "kind": info.kind,
           "matrix": info.matrix.tolist()},
          fmt, _matrix_csv(info.matrix))


@eval_group.command("einfo")
@_dp_options
@_FORMAT
def eval_einfo(dp_tuple, fmt, **named):
    dp = _resolve_dp(dp_tuple, named)
    try:
        info = expected_info(dp)
    except CubatureNotConverged as exc:
        raise CubatureFailure(str(exc)) from None
    _emit({"dp": _dp_payload(dp), "kind": info.kind,
           "matrix": info.matrix.tolist()},
          fmt, _matrix_csv(info.matrix))


@eval_group.command("moments")
@_dp_options
@_FORMAT
def eval_moments(dp_tuple, fmt, **named):
    dp = _resolve_dp(dp_tuple, named)
    mean, cov = moments_esn2(dp)
    csv_text = (",".join(_fmt(v) for v in mean) + "\n") + _matrix_csv(cov)
    _emit({"dp": _dp_payload(dp), "mean": mean.tolist(),
           "cov": cov.tolist()}, fmt, csv_text)


@main.command("det-scan")
@_dp_options
@click.option("--sweep", "sweep_param",
              type=click.Choice(["alpha1", "alpha2", "tau"]), required=True,
              help="parameter to sweep (only alpha1, alpha2, tau)")
@click.option("--from", "start", type=float, required=True)
@click.option("--to", "stop", type=float, required=True)
@click.option("--points", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="output CSV path (default: standard output)")
def det_scan_cmd(dp_tuple, sweep_param, start, stop, points, out_path,
                 **named):
    """Determinant of the expected information along a parameter sweep."""
    base = _resolve_dp(dp_tuple, named)
    if points < 1:
        raise click.UsageError("--points must be at least 1")
    grid = np.linspace(start, stop, points)
    try:
        spec = SweepSpec(sweep_param, tuple(float(g) for g in grid), base)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    rows = det_scan(spec)
    out = io.StringIO()
    out.write("param,value,det,min_eig,converged\n")
    for row in rows:
        out.write(f"{sweep_param},{_fmt(row.param_value)},{_fmt(row.det)},"
                  f"{_fmt(row.min_eigenvalue)},"
                  f"{'true' if row.converged else 'false'}\n")
    if out_path is None:
        click.echo(out.getvalue(), nl=False)
    else:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(out.getvalue())


def _moment_start(data):
    """Moment-based starting point.

    The Gaussian fit with alpha = 0, tau = 0 is an exact stationary
    point of the likelihood (the alpha = 0 singularity), so the slant
    starts at a skewness-informed kick instead of zero.
    """
    cov = np.cov(np.vstack([data.y1, data.y2]), ddof=1)
    alphas = []
    for col in (data.y1, data.y2):
        resid = col - np.mean(col)
        sd = float(np.std(resid))
        skew = float(np.mean(resid ** 3)) / sd ** 3 if sd > 0.0 else 0.0
        alphas.append(float(np.clip(3.0 * skew, -2.0, 2.0)) or 0.1)
    return DpParams(float(np.mean(data.y1)), float(np.mean(data.y2)),
                    float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1]),
                    alphas[0], alphas[1], 0.0)


@main.command("fit")
@click.option("--data", "data_path", type=click.Path(exists=True),
              required=True, help="two-column CSV of observations")
@click.option("--init", "init_tuple", default=None, metavar="T",
              help="starting point, 8 comma-separated values "
                   "(default: moment-based)")
@click.option("--grad-tol", type=float, default=1e-6, show_default=True)
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.pass_context
def fit_cmd(ctx, data_path, init_tuple, grad_tol, max_iter):
    """Maximum likelihood fit; standard errors from the expected info."""
    data = _load_table(data_path)
    if data.n < 5:
        raise click.UsageError(
            f"need at least 5 rows to fit, got {data.n}")
    if init_tuple is None:
        init = _moment_start(data)
    else:
        init = _resolve_dp(init_tuple, {})
    result = fit_mle(data, init,
                     FitControls(grad_tol=grad_tol, max_iter=max_iter))

    std_errors = None
    warning = None
    try:
        info = expected_info(result.dp_hat).matrix
        eigs = np.linalg.eigvalsh(info)
        if eigs[0] <= 1e-12 * max(eigs[-1], 0.0):
            warning = ("expected information is singular at the estimate; "
                       "no standard errors")
        else:
            std_errors = {
                name: math.sqrt(v / data.n) for name, v in
                zip(PARAM_NAMES, np.diag(np.linalg.inv(info)))}
    except CubatureNotConverged as exc:
        warning = f"expected information did not converge: {exc}"

    payload = {"dp_hat": _dp_payload(result.dp_hat),
               "std_errors": std_errors,
               "loglik": result.loglik,
               "converged": result.converged,
               "final_score_norm": result.final_score_norm}
    if warning is not None:
        payload["warning"] = warning
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if not result.converged:
        ctx.exit(4)


@main.command("check")
@click.option("--level", type=click.Choice(["fast", "full"]), default="fast",
              show_default=True, help="full adds the Monte Carlo oracles")
@click.option("--seed", type=int, default=20260815, show_default=True)
@click.pass_context
def check_cmd(ctx, level, seed):
    """Run the validation suite; exit 0 only if every check passes."""
    report = run_validation_suite(
        ValidationConfig(level=level, seed=RngSeed(seed)))
    click.echo(report.summary(), err=True)
    click.echo(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    if not report.passed:
        ctx.exit(1)


if __name__ == "__main__":
    main()
