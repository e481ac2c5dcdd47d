"""Configuration-driven entry point: problem catalog, epsilon sweeps, rate
fits, and report emission.

Sweeps fix one fine domain grid for all epsilon (n = q * max denominator
cells per axis) so the discretization error cancels when oscillatory and
effective eigenvalues are compared on the same mesh.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from . import coeff as cf
from .corrector import (
    align_eigenfunctions,
    boundary_correctors,
    derivative_bundle,
    full_corrector,
    nonlinear_expansion,
    pivot_problem,
    second_corrector,
    solve_psi1,
    third_corrector,
)
from .domain import DomainGrid, assemble_effective, assemble_oscillatory
from .effective import build_corrector_set, effective_linear, effective_nonlinear
from .eigen import principal_eigenpair, principal_eigenpair_bellman
from .errors import ConfigError, ErgodicaError, SolverError
from .torus import GridFunction, PeriodicGrid

ALL_MEASUREMENTS = ("lambda_rate", "eigfun_rate", "z_rate", "v_norm",
                    "residual_slope")
EXACT_FLOOR = 1e-9
CSV_COLUMNS = ("eps", "lambda_eps", "lambda_bar", "abs_err_lambda",
               "eigfun_err", "z_norm", "v_norm", "seconds")


# ---------------------------------------------------------------------------
# problem catalog

def _linear(spec):
    return {"mode": "linear", "spec": spec, "dim": spec.dim}


def _bellman(bspec):
    return {"mode": "bellman", "spec": bspec, "dim": bspec.dim}


def build_problem(name, params=None):
    """Instantiate a catalog problem by name."""
    params = dict(params or {})
    delta = params.pop("delta", 0.5)
    if name == "sin-a":
        field = cf.sin_field_1d(delta=delta)
        return _linear(cf.LinearOperatorSpec(field, 1 - abs(delta), 1 + abs(delta)))
    if name == "sin-abc":
        # default drift amplitude is large enough that the first-order term
        # of lambda_eps - lambda_bar dominates the sweep window (it vanishes
        # identically when b = 0)
        b_amp = params.pop("b_amp", 1.0)
        c0 = params.pop("c0", 0.2)
        c_amp = params.pop("c_amp", 0.4)
        field = cf.sin_field_1d(delta=delta, b_amp=b_amp, c0=c0, c_amp=c_amp)
        c1 = max(abs(b_amp), abs(c0) + abs(c_amp))
        return _linear(cf.LinearOperatorSpec(field, 1 - abs(delta), 1 + abs(delta),
                                             c1=c1))
    if name == "sep-2d":
        field = cf.separable_sin_field_2d(delta=delta)
        return _linear(cf.LinearOperatorSpec(field, 1 - abs(delta), 1 + abs(delta)))
    if name == "pucci-1d":
        lam = params.pop("lambda_ell", 1.0)
        Lam = params.pop("Lambda_ell", 2.0)
        return _bellman(cf.pucci_controls_1d(cf.PucciSpec(lam, Lam, "plus")))
    if name == "bellman-2ctl-1d":
        a2 = params.pop("a2", 1.2)
        f1 = cf.sin_field_1d(delta=delta)
        f2 = cf.constant_field(1, a2, name="const")
        lam = min(1 - abs(delta), a2)
        Lam = max(1 + abs(delta), a2)
        return _bellman(cf.BellmanSpec([
            cf.LinearOperatorSpec(f1, lam, Lam),
            cf.LinearOperatorSpec(f2, lam, Lam),
        ]))
    if name == "constant":
        dim = int(params.pop("dim", 1))
        field = cf.constant_field(dim, params.pop("a0", 1.0),
                                  params.pop("b0", None), params.pop("c0", 0.0))
        a0 = field.a(np.zeros((1, dim)))[0]
        eigs = np.linalg.eigvalsh(a0)
        return _linear(cf.LinearOperatorSpec(field, eigs.min(), eigs.max()))
    raise ConfigError(f"unknown catalog problem {name!r}")


# ---------------------------------------------------------------------------
# configuration

@dataclass
class SweepConfig:
    problem: str
    eps_list: list
    params: dict = dc_field(default_factory=dict)
    q: int = 64
    n_torus: int = 512
    mode: str = "linear"
    measurements: tuple = ("lambda_rate",)
    tol: float = 1e-9
    out: str = "."
    format: str = "csv"
    # wall-clock timing breaks byte-identical reruns; disable to compare runs
    timing: bool = True
    seed: int = 0  # reserved; the pipeline itself is deterministic

    def __post_init__(self):
        eps = list(self.eps_list)
        if not eps or any(not (0 < e < 1) for e in eps):
            raise ConfigError("eps_list must be nonempty with entries in (0, 1)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("eps_list must be strictly decreasing")
        for e in eps:
            frac = Fraction(e).limit_denominator(10 ** 6)
            if frac.numerator != 1 or abs(float(frac) - e) > 1e-12:
                raise ConfigError(f"eps={e} is not the reciprocal of an integer")
        if self.q < 16:
            raise ConfigError("oversampling q must be >= 16")
        if self.mode not in ("linear", "bellman"):
            raise ConfigError("mode must be 'linear' or 'bellman'")
        bad = set(self.measurements) - set(ALL_MEASUREMENTS)
        if bad:
            raise ConfigError(f"unknown measurements {sorted(bad)}")

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f for f in cls.__dataclass_fields__}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "measurements" in raw:
            raw["measurements"] = tuple(raw["measurements"])
        return cls(**raw)

    def denominators(self):
        return [Fraction(e).limit_denominator(10 ** 6).denominator
                for e in self.eps_list]


# ---------------------------------------------------------------------------
# rate fitting

def fit_rate(eps_list, errors):
    """Least-squares slope of log(error) against log(eps).

    Returns (slope, constant, r2) for the model error ~ C * eps^slope;
    nonpositive error rows are dropped, and at least 3 must survive.
    """
    eps = np.asarray(eps_list, dtype=float)
    err = np.asarray(errors, dtype=float)
    keep = np.isfinite(err) & (err > 0)
    eps, err = eps[keep], err[keep]
    if len(eps) < 3:
        raise SolverError(f"rate fit needs >= 3 positive points, got {len(eps)}")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if sst == 0 else 1.0 - np.sum(resid ** 2) / sst
    return float(slope), float(np.exp(intercept)), float(r2)


# ---------------------------------------------------------------------------
# sweep

@dataclass
class SweepReport:
    problem: str
    mode: str
    lambda_bar: float
    grid: dict
    measurements: tuple
    rows: list
    fits: dict
    failures: list

    def as_dict(self):
        return {
            "problem": self.problem,
            "mode": self.mode,
            "lambda_bar": self.lambda_bar,
            "grid": self.grid,
            "measurements": list(self.measurements),
            "rows": self.rows,
            "fits": self.fits,
            "failures": self.failures,
        }


def _fit_column(report, name, eps, values):
    vals = np.asarray(values, dtype=float)
    good = np.isfinite(vals)
    if good.sum() == 0:
        report.fits[name] = {"error": "no data"}
        return
    if np.all(np.abs(vals[good]) <= EXACT_FLOOR):
        report.fits[name] = {"exact": True}
        return
    try:
        slope, constant, r2 = fit_rate(np.asarray(eps)[good], vals[good])
        report.fits[name] = {"slope": slope, "constant": constant, "r2": r2,
                             "points": int(good.sum())}
    except ErgodicaError as exc:
        report.fits[name] = {"error": str(exc)}


def run_sweep(config: SweepConfig) -> SweepReport:
    """Run the full per-epsilon study described by the configuration."""
    problem = build_problem(config.problem, config.params)
    if problem["mode"] != config.mode:
        raise ConfigError(
            f"problem {config.problem!r} is {problem['mode']!r}, config says "
            f"{config.mode!r}"
        )
    dim = problem["dim"]
    spec = problem["spec"]
    tg = PeriodicGrid(dim, config.n_torus)
    n_cells = config.q * max(config.denominators())
    grid = DomainGrid.unit(dim, n_cells)
    meas = set(config.measurements)

    if config.mode == "linear":
        correctors = build_corrector_set(spec, tg)
        eff = effective_linear(spec, correctors)
        eff_op = assemble_effective(eff, grid)
        eff_pair = principal_eigenpair(eff_op, tol=config.tol)
    else:
        if dim != 1:
            raise ConfigError("bellman sweeps are supported in 1D only")
        m_plus = effective_nonlinear(spec, np.array([[1.0]]), tg)
        m_minus = -effective_nonlinear(spec, np.array([[-1.0]]), tg)
        eff_spec = cf.BellmanSpec([
            cf.LinearOperatorSpec(cf.constant_field(1, m_plus),
                                  spec.lambda_ell, spec.Lambda_ell),
            cf.LinearOperatorSpec(cf.constant_field(1, m_minus),
                                  spec.lambda_ell, spec.Lambda_ell),
        ])
        correctors = eff = eff_op = None
        eff_pair, _ = principal_eigenpair_bellman(eff_spec, 1.0, grid,
                                                  tol=config.tol)
    lam_bar = eff_pair.lam
    u = eff_pair.phi

    if config.mode == "linear" and dim == 1 and (meas & {"v_norm", "residual_slope"}):
        bundle = derivative_bundle(u, 3)
        psi1 = solve_psi1(eff, bundle, grid, op=eff_op)
        psi1_bundle = derivative_bundle(psi1, 2)
    else:
        bundle = psi1 = psi1_bundle = None

    def one_row(eps):
        t0 = time.perf_counter()
        row = {"eps": eps, "lambda_bar": lam_bar}
        if config.mode == "linear":
            op = assemble_oscillatory(spec, eps, grid)
            pair = principal_eigenpair(op, tol=config.tol)
        else:
            op = None
            pair, _ = principal_eigenpair_bellman(spec, eps, grid, tol=config.tol)
        row["lambda_eps"] = pair.lam
        row["abs_err_lambda"] = abs(pair.lam - lam_bar)
        if config.mode == "linear" and (meas & {"eigfun_rate", "z_rate"}):
            w = pivot_problem(spec, eps, grid, u, lam_bar, op=op)
            t_eps, z = align_eigenfunctions(w, pair)
            row["t_eps"] = t_eps
            diff = (1 + t_eps) * pair.phi.values - u.values
            row["eigfun_err"] = float(np.max(np.abs(diff)))
            row["eigfun_err_l2"] = float(
                np.sqrt(np.sum(grid.inner_weights() * diff ** 2)))
            row["z_norm"] = float(np.max(np.abs(z.values)))
            row["w_minus_u"] = float(np.max(np.abs(w.values - u.values)))
        if bundle is not None:
            w2 = second_corrector(correctors, bundle, eps)
            w3 = third_corrector(correctors, bundle, psi1_bundle, eps)
            z2, z3 = boundary_correctors(spec, eps, grid, w2, w3, op=op)
            exp = full_corrector(psi1, w2, z2, w3, z3, eps)
            row["v_norm"] = exp.sup_norm_v
            if "residual_slope" in meas:
                corrected = GridFunction(grid, u.values + exp.v_eps.values)
                res = op.apply(corrected) + lam_bar * grid.restrict(u.values)
                x_int = grid.interior_points()[:, 0]
                core = np.abs(res)[(x_int >= 0.1) & (x_int <= 0.9)]
                row["residual"] = float(core.max())
        if config.mode == "bellman" and "residual_slope" in meas:
            _, rep = nonlinear_expansion(spec, pair, eps, grid, tg, lam_bar)
            row["residual"] = rep["expansion_residual_interior"]
            row["w2F_residual"] = rep["w2F_residual"]
        if config.timing:
            row["seconds"] = time.perf_counter() - t0
        return row

    rows, failures = [], []
    workers = int(os.environ.get("ERGODICA_THREADS", "1"))
    results = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(one_row, e) for e in config.eps_list]
            for e, f in zip(config.eps_list, futs):
                try:
                    results.append(f.result())
                except ErgodicaError as exc:
                    failures.append({"eps": e, "reason": str(exc)})
    else:
        for e in config.eps_list:
            try:
                results.append(one_row(e))
            except ErgodicaError as exc:
                failures.append({"eps": e, "reason": str(exc)})
    rows = results

    report = SweepReport(
        problem=config.problem, mode=config.mode, lambda_bar=lam_bar,
        grid={"dim": dim, "n_cells": n_cells, "n_torus": config.n_torus,
              "q": config.q},
        measurements=config.measurements, rows=rows, fits={}, failures=failures,
    )
    eps = [r["eps"] for r in rows]

    def column(key):
        return [r.get(key, np.nan) for r in rows]

    if "lambda_rate" in meas:
        _fit_column(report, "lambda", eps, column("abs_err_lambda"))
    if "eigfun_rate" in meas and config.mode == "linear":
        _fit_column(report, "eigfun", eps, column("eigfun_err"))
        _fit_column(report, "w_minus_u", eps, column("w_minus_u"))
    if "z_rate" in meas and config.mode == "linear":
        _fit_column(report, "z", eps, column("z_norm"))
    if "v_norm" in meas and bundle is not None:
        _fit_column(report, "v", eps, column("v_norm"))
        vn = column("v_norm")
        report.fits["v_over_eps"] = {
            "ratios": [v / e for v, e in zip(vn, eps) if np.isfinite(v)]
        }
    if "residual_slope" in meas:
        _fit_column(report, "residual", eps, column("residual"))
    return report


# ---------------------------------------------------------------------------
# output

def _fmt(x):
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    return f"{x:.12e}" if isinstance(x, float) else str(x)


def emit_report(report: SweepReport, format="csv", out_dir="."):
    """Write the sweep report; returns the list of files written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if format not in ("csv", "json"):
        raise ConfigError(f"unknown report format {format!r}")
    if format == "csv":
        path = os.path.join(out_dir, "sweep.csv")
        lines = [",".join(CSV_COLUMNS)]
        for row in report.rows:
            lines.append(",".join(_fmt(row.get(k, np.nan)) for k in CSV_COLUMNS))
        _write_text(path, "\n".join(lines) + "\n")
        written.append(path)
    else:
        path = os.path.join(out_dir, "sweep.json")
        _write_text(path, json.dumps(report.as_dict(), indent=2, sort_keys=True)
                    + "\n")
        written.append(path)
    return written


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def _phi_csv(pair, grid, path):
    pts = grid.points()
    vals = pair.phi.flat
    header = ("x1,value" if grid.dim == 1 else "x1,x2,value")
    lines = [header]
    for p, v in zip(pts, vals):
        coords = ",".join(f"{c:.12e}" for c in p)
        lines.append(f"{coords},{v:.12e}")
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# CLI commands

def _cmd_effective(config, args):
    problem = build_problem(config.problem, config.params)
    tg = PeriodicGrid(problem["dim"], config.n_torus)
    if problem["mode"] != "linear":
        raise ConfigError("'effective' applies to linear problems")
    correctors = build_corrector_set(problem["spec"], tg)
    eff = effective_linear(problem["spec"], correctors)
    print(json.dumps(eff.as_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_eigen(config, args):
    problem = build_problem(config.problem, config.params)
    dim = problem["dim"]
    n_cells = config.q * max(config.denominators())
    grid = DomainGrid.unit(dim, n_cells)
    if args.effective:
        if problem["mode"] != "linear":
            raise ConfigError("--effective applies to linear problems")
        tg = PeriodicGrid(dim, config.n_torus)
        eff = effective_linear(problem["spec"],
                               build_corrector_set(problem["spec"], tg))
        pair = principal_eigenpair(assemble_effective(eff, grid), tol=config.tol)
    else:
        eps = args.eps if args.eps is not None else config.eps_list[0]
        if problem["mode"] == "linear":
            op = assemble_oscillatory(problem["spec"], eps, grid)
            pair = principal_eigenpair(op, tol=config.tol)
        else:
            pair, _ = principal_eigenpair_bellman(problem["spec"], eps, grid,
                                                  tol=config.tol)
    print(json.dumps({
        "lambda": pair.lam,
        "cw_lower": pair.cw_lower,
        "cw_upper": pair.cw_upper,
        "residual": pair.residual,
        "iterations": pair.iterations,
    }, indent=2, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _phi_csv(pair, grid, os.path.join(args.out, "phi.csv"))
    return 0


def _cmd_corrector(config, args):
    problem = build_problem(config.problem, config.params)
    if problem["mode"] != "linear" or problem["dim"] != 1:
        raise ConfigError("'corrector' supports 1D linear problems")
    spec = problem["spec"]
    eps = args.eps if args.eps is not None else config.eps_list[0]
    tg = PeriodicGrid(1, config.n_torus)
    n_cells = config.q * max(config.denominators())
    grid = DomainGrid.unit(1, n_cells)
    correctors = build_corrector_set(spec, tg)
    eff = effective_linear(spec, correctors)
    eff_op = assemble_effective(eff, grid)
    pair = principal_eigenpair(eff_op, tol=config.tol)
    bundle = derivative_bundle(pair.phi, 3)
    psi1 = solve_psi1(eff, bundle, grid, op=eff_op)
    w2 = second_corrector(correctors, bundle, eps)
    w3 = third_corrector(correctors, bundle, derivative_bundle(psi1, 2), eps)
    op = assemble_oscillatory(spec, eps, grid)
    z2, z3 = boundary_correctors(spec, eps, grid, w2, w3, op=op)
    exp = full_corrector(psi1, w2, z2, w3, z3, eps)
    corrected = GridFunction(grid, pair.phi.values + exp.v_eps.values)
    res = op.apply(corrected) + pair.lam * grid.restrict(pair.phi.values)
    print(json.dumps({
        "sup_norm_v": exp.sup_norm_v,
        "residual_slope_inputs": {
            "eps": eps,
            "residual_sup": float(np.max(np.abs(res))),
        },
    }, indent=2, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for name, fn in (("psi1", psi1), ("w2_trace", w2), ("v_eps", exp.v_eps)):
            pts = grid.points()[:, 0]
            lines = ["x1,value"] + [
                f"{x:.12e},{v:.12e}" for x, v in zip(pts, fn.flat)
            ]
            _write_text(os.path.join(args.out, f"{name}.csv"),
                        "\n".join(lines) + "\n")
    return 0


def _cmd_sweep(config, args):
    report = run_sweep(config)
    out = args.out or config.out
    fmt = args.format or config.format
    written = emit_report(report, format=fmt, out_dir=out)
    for path in written:
        print(path)
    summary = {name: fit for name, fit in report.fits.items()}
    print(json.dumps({"lambda_bar": report.lambda_bar, "fits": summary},
                     indent=2, sort_keys=True))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ergodica",
        description="Periodic homogenization of principal eigenvalue problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("effective", "eigen", "corrector", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        if name in ("eigen", "corrector"):
            p.add_argument("--eps", type=float, default=None)
        if name == "eigen":
            p.add_argument("--effective", action="store_true")
        if name == "sweep":
            p.add_argument("--format", choices=("csv", "json"), default=None)
    args = parser.parse_args(argv)
    handlers = {
        "effective": _cmd_effective,
        "eigen": _cmd_eigen,
        "corrector": _cmd_corrector,
        "sweep": _cmd_sweep,
    }
    try:
        config = SweepConfig.from_file(args.config)
        return handlers[args.command](config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ErgodicaError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
