"""Experiment driver: parameter sweeps over the preconditioner pipeline.

Each run builds mesh, coefficient, partition, partition of unity, coarse space
and preconditioner, then solves with PCG and reports the Lanczos eigenvalue
estimates, condition number and coarse-space size, mirroring the benchmark
table layout (one row per overlap width / ring count / seed).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .coarse import build_coarse_space, build_forms
from .fem import assemble_load, assemble_stiffness
from .mesh import ConstantSpec, LogUniformSpec, build_mesh, sample_coefficient
from .partition import build_partition, build_pou
from .precond import build_preconditioner
from .krylov import pcg

NUMERIC_COLUMNS = ("iter", "lambda_min", "lambda_max", "kappa", "pD")
CSV_COLUMNS = (
    "n", "m", "k", "d", "seed", "stat",
    "iter", "lambda_min", "lambda_max", "kappa", "pD", "converged", "error",
)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m: int
    d_values: tuple = (1,)
    k_values: tuple = (1,)
    coarse: str = "ms"
    lambda_spec: str = "auto"
    rho: str = "const:1"
    f: float = 1.0
    tol: float = 1e-6
    maxit: int = 1000
    seeds: tuple = (1, 2, 3, 4, 5)

    def validate(self) -> None:
        if self.coarse not in ("none", "galvis", "ms", "glb"):
            raise ValueError(f"unknown coarse kind '{self.coarse}'")
        if not 0 < self.tol < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        for d in self.d_values:
            if d >= self.m:
                raise ValueError(f"overlap d={d} must be smaller than m={self.m}")
        for k in self.k_values:
            if k > self.n:
                raise ValueError(f"ring count k={k} cannot exceed n={self.n}")


def resolve_threshold(spec: str, kind: str, m: int, d: int) -> float:
    """Eigenvalue selection threshold from its formula name or literal value.

    ``auto`` picks the benchmark defaults: 1+log(m+2d) for the baseline space
    and 1+log(m) for the minimization spaces, natural logarithm (the base-10
    spellings are exposed for comparison).
    """
    if spec == "auto":
        spec = "logm2d" if kind == "galvis" else "logm"
    if spec == "logm":
        return 1.0 + math.log(m)
    if spec == "logm2d":
        return 1.0 + math.log(m + 2 * d)
    if spec == "log10m":
        return 1.0 + math.log10(m)
    if spec == "log10m2d":
        return 1.0 + math.log10(m + 2 * d)
    try:
        return float(spec)
    except ValueError:
        raise ValueError(f"unknown threshold spec '{spec}'") from None


def parse_rho_spec(text: str, seed: int):
    """Coefficient generator from 'const:VALUE' or 'loguniform:LO:HI'."""
    parts = text.split(":")
    if parts[0] == "const" and len(parts) == 2:
        return ConstantSpec(float(parts[1]))
    if parts[0] == "loguniform" and len(parts) == 3:
        return LogUniformSpec(float(parts[1]), float(parts[2]), seed)
    raise ValueError(f"cannot parse coefficient spec '{text}'")


def _aggregate(group: list) -> list:
    rows = []
    for stat, fn in (("mean", np.mean), ("min", np.min), ("max", np.max)):
        agg = dict(group[0])
        agg["seed"] = None
        agg["stat"] = stat
        for col in NUMERIC_COLUMNS:
            vals = [g[col] for g in group if g.get(col) is not None]
            agg[col] = float(fn(vals)) if vals else None
        agg["converged"] = all(g.get("converged") for g in group)
        rows.append(agg)
    return rows


def run_experiment(config: ExperimentConfig) -> list:
    """Run the sweep; one row per (k, d, seed), plus mean/min/max rows per group.

    A failing run contributes a diagnostic row and does not disturb the rest of
    the sweep.
    """
    config.validate()
    mesh = build_mesh(config.n, config.m)
    random_rho = config.rho.startswith("loguniform")
    seeds = tuple(config.seeds) if random_rho else (None,)
    k_values = tuple(config.k_values) if config.coarse == "ms" else (None,)

    rows: list = []
    partitions: dict = {}
    for k in k_values:
        for d in config.d_values:
            group = []
            for seed in seeds:
                base = {
                    "n": config.n,
                    "m": config.m,
                    "k": k,
                    "d": d,
                    "seed": seed,
                    "stat": None,
                }
                try:
                    group.append({**base, **_run_single(config, mesh, partitions, d, k, seed)})
                except Exception as err:  # noqa: BLE001 - sweep isolation
                    group.append({**base, "error": f"{type(err).__name__}: {err}"})
            rows.extend(group)
            clean = [g for g in group if "error" not in g]
            if len(seeds) > 1 and clean:
                rows.extend(_aggregate(clean))
    return rows


def _run_single(config, mesh, partitions, d, k, seed) -> dict:
    if d not in partitions:
        part = build_partition(mesh, d)
        partitions[d] = (part, build_pou(part))
    partition, pou = partitions[d]
    rho = sample_coefficient(mesh, parse_rho_spec(config.rho, seed if seed is not None else 0))
    A = assemble_stiffness(mesh, rho)
    b = assemble_load(mesh, config.f)
    threshold = resolve_threshold(config.lambda_spec, config.coarse, config.m, d)
    if config.coarse == "none":
        space = None
    elif config.coarse == "galvis":
        space = build_coarse_space(
            "galvis", mesh=mesh, rho=rho, partition=partition, pou=pou, threshold=threshold
        )
    else:
        from .spectral import build_aux_space

        aux = build_aux_space(mesh, rho, partition, pou, threshold)
        forms = build_forms(mesh, rho, partition, pou, aux)
        space = build_coarse_space(config.coarse, forms=forms, k=k)
    M = build_preconditioner(A, partition, space)
    report = pcg(A, M, b, tol=config.tol, maxit=config.maxit)
    report.pD = space.pD if space is not None else 0.0
    return {
        "iter": report.iterations,
        "lambda_min": report.lambda_min,
        "lambda_max": report.lambda_max,
        "kappa": report.kappa,
        "pD": report.pD,
        "converged": report.converged,
    }


def _fmt(value, spec: str) -> str:
    if value is None:
        return "-"
    return format(value, spec)


def emit(rows: list, fmt: str, config: ExperimentConfig) -> str:
    """Serialize sweep rows as an aligned table, CSV, or JSON."""
    if fmt == "json":
        return json.dumps(
            {"config": asdict(config), "version": __version__, "rows": rows},
            indent=2,
        )
    if fmt == "csv":
        lines = [
            f"# config: {json.dumps(asdict(config))}",
            f"# version: {__version__}",
            ",".join(CSV_COLUMNS),
        ]
        for row in rows:
            cells = []
            for col in CSV_COLUMNS:
                v = row.get(col)
                if v is None:
                    cells.append("")
                elif isinstance(v, bool):
                    cells.append(str(int(v)))
                elif isinstance(v, float):
                    cells.append(repr(v))
                else:
                    cells.append(str(v))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"
    if fmt == "table":
        header = f"{'n(m)':>8} {'k':>3} {'d':>3} {'seed':>5} {'iter':>5} " \
                 f"{'lambda_min':>11} {'lambda_max':>11} {'kappa':>8} {'pD':>6}"
        lines = [header]
        for row in rows:
            if "error" in row:
                lines.append(
                    f"{row['n']:>5}({row['m']}) {_fmt(row.get('k'), '')!s:>3} "
                    f"{row['d']:>3} {_fmt(row.get('seed'), ''):>5} ERROR {row['error']}"
                )
                continue
            tag = row["stat"] if row["stat"] else _fmt(row.get("seed"), "")
            lines.append(
                f"{row['n']:>5}({row['m']}) {_fmt(row.get('k'), ''):>3} {row['d']:>3} "
                f"{tag:>5} {_fmt(row.get('iter'), '.0f'):>5} "
                f"{_fmt(row.get('lambda_min'), '.2f'):>11} "
                f"{_fmt(row.get('lambda_max'), '.2f'):>11} "
                f"{_fmt(row.get('kappa'), '.2f'):>8} "
                f"{_fmt(row.get('pD'), '.2f'):>6}"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown output format '{fmt}'")


def parse_report_csv(text: str) -> list:
    """Parse rows back from the CSV emitted by :func:`emit` (round-trip exact)."""
    rows = []
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    for line in lines[1:]:
        cells = line.split(",")
        row: dict = {}
        for col, cell in zip(header, cells):
            if cell == "":
                row[col] = None
            elif col in ("n", "m", "k", "d", "seed"):
                row[col] = int(cell)
            elif col == "iter":
                row[col] = int(float(cell))
            elif col == "converged":
                row[col] = bool(int(cell))
            elif col in ("stat", "error"):
                row[col] = cell
            else:
                row[col] = float(cell)
        if row.get("error") is None:
            row.pop("error", None)
        rows.append(row)
    return rows


def _int_list(text: str) -> tuple:
    if not text.strip():
        return ()
    return tuple(int(tok) for tok in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schwarz-ms",
        description="Two-level overlapping Schwarz benchmark sweeps",
    )
    parser.add_argument("--n", type=int, required=True, help="subdomains per side")
    parser.add_argument("--m", type=int, required=True, help="fine squares per subdomain side")
    parser.add_argument("--d", type=_int_list, default=(1,), help="overlap layers, comma separated")
    parser.add_argument("--k", type=_int_list, default=(1,), help="oversampling rings, comma separated")
    parser.add_argument(
        "--coarse", choices=("none", "galvis", "ms", "glb"), default="ms"
    )
    parser.add_argument(
        "--lambda",
        dest="lambda_spec",
        default="auto",
        help="threshold: auto, logm, logm2d, log10m, log10m2d, or a number",
    )
    parser.add_argument("--rho", default="const:1", help="const:VALUE or loguniform:LO:HI")
    parser.add_argument("--seed", type=_int_list, default=(1, 2, 3, 4, 5))
    parser.add_argument("--f", type=float, default=1.0, help="constant source")
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--maxit", type=int, default=1000)
    parser.add_argument("--format", choices=("table", "csv", "json"), default="table")
    parser.add_argument("--out", default=None, help="output file (default stdout)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = ExperimentConfig(
        n=args.n,
        m=args.m,
        d_values=args.d,
        k_values=args.k,
        coarse=args.coarse,
        lambda_spec=args.lambda_spec,
        rho=args.rho,
        f=args.f,
        tol=args.tol,
        maxit=args.maxit,
        seeds=args.seed,
    )
    try:
        rows = run_experiment(config)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    text = emit(rows, args.format, config)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 2 if any("error" in row for row in rows) else 0


def console_main() -> None:
    raise SystemExit(main())
