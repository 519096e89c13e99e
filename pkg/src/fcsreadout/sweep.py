"""Parameter sweeps with long-format CSV output and optional SVG plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import information as inf
from .config import ConfigError, NumericsConfig, RunConfig, apply_axis, check_grid, parse_outputs
from .params import ModelParams

HEADER = ("axis", "method", "value_kind", "value", "diag_truncation", "diag_residual", "diag_error")


@dataclass(frozen=True)
class SweepSpec:
    name: str
    axis: str
    grid: tuple
    fixed: ModelParams = field(default_factory=ModelParams)
    methods: tuple = ("meanfield",)
    outputs: tuple = ("cfi",)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)

    def __post_init__(self):
        check_grid(self.grid)
        object.__setattr__(self, "outputs", parse_outputs(self.outputs))

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "SweepSpec":
        if cfg.sweep is None:
            raise ConfigError("configuration has no [sweep] section")
        s = cfg.sweep
        return cls(s.name, s.axis, s.grid, cfg.model, s.methods, s.outputs, cfg.numerics)


@dataclass(frozen=True)
class ResultRow:
    axis_value: float
    method: str
    value_kind: str
    value: float
    diag_truncation: int | None = None
    diag_residual: float | None = None
    diag_error: str = ""

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.value)

    def cells(self) -> list:
        def fmt(x):
            return "" if x is None else f"{x:.12g}"
        trunc = "" if self.diag_truncation is None else str(self.diag_truncation)
        return [fmt(self.axis_value), self.method, self.value_kind, fmt(self.value), trunc,
                fmt(self.diag_residual), self.diag_error]


def make_provider(method: str, num: NumericsConfig):
    if method == "meanfield":
        return inf.MeanFieldProvider(chi_step=num.chi_step)
    return inf.NumericProvider(num.route, num.n_max_override, num.horizon, num.chi_step, num.strict)


def _diag(provider, diag: dict):
    if isinstance(provider, inf.MeanFieldProvider):
        return None, None, ""
    note = ""
    if not diag.get("converged", True):
        note = f"truncation-limited: guard={diag.get('guard', float('nan')):.2e} change={diag.get('truncation_change', float('nan')):.2e}"
    return diag.get("n_max"), diag.get("residual", 0.0), note


def _point_rows(spec: SweepSpec, value: float, method: str) -> list:
    params = apply_axis(spec.fixed, spec.axis, value)
    provider = make_provider(method, spec.numerics)
    rows = []
    cache = {}

    def guarded(kind, fn):
        try:
            return fn()
        except Exception as exc:  # recorded in-row, the sweep continues
            rows.append(ResultRow(value, method, kind, math.nan, None, None, f"{type(exc).__name__}: {exc}"))
            return None

    def cfi():
        if "cfi" not in cache:
            cache["cfi"] = inf.cfi_gaussian(provider, params, spec.numerics.omega_step, detail=True)
        return cache["cfi"]

    def qfi():
        if "qfi" not in cache:
            cache["qfi"] = provider.qfi_rate(params)
        return cache["qfi"]

    for out in spec.outputs:
        if out == "cfi":
            res = guarded("cfi", cfi)
            if res is not None:
                rows.append(ResultRow(value, method, "cfi", res.value, *_diag(provider, res.diagnostics)))
        elif out == "qfi":
            res = guarded("qfi", qfi)
            if res is not None:
                rows.append(ResultRow(value, method, "qfi", res[0], *_diag(provider, res[1])))
        elif out == "eta":
            c = guarded("eta", cfi)
            q = guarded("eta", qfi) if c is not None else None
            if c is not None and q is not None:
                if q[0] > 0:
                    rows.append(ResultRow(value, method, "eta", c.value / q[0], *_diag(provider, q[1])))
                else:
                    rows.append(ResultRow(value, method, "eta", math.nan, None, None, "zero QFI"))
        elif out.startswith("cumulants:"):
            order = int(out.split(":")[1])
            cs = guarded("kappa", lambda: provider.rates(params, order))
            if cs is not None:
                t, r, note = _diag(provider, cs.diagnostics)
                for k, rate in enumerate(cs.rates, 1):
                    resid = r if r is not None else cs.imag_residuals[k - 1]
                    rows.append(ResultRow(value, method, f"kappa{k}", rate, t, resid, note))
        elif out == "distribution":
            t_final = spec.numerics.dist_time or 100.0 / params.gamma
            d = guarded("distribution", lambda: inf.distribution(provider, params, t_final))
            if d is not None:
                rows.append(ResultRow(value, method, "dist_mean", d.mean(), None, None, ""))
                rows.append(ResultRow(value, method, "dist_variance", d.variance(), None, None, ""))
    return rows


def evaluate_point(spec: SweepSpec, value: float) -> list:
    rows = []
    for method in spec.methods:
        rows.extend(_point_rows(spec, value, method))
    return rows


def _workers(workers):
    if workers is None:
        workers = int(os.environ.get("FCS_WORKERS", "1") or 1)
    return max(1, int(workers))


def run_sweep(spec: SweepSpec, out_dir=None, workers=None, plots: bool = True) -> list:
    """Evaluate every grid point; rows keep grid order regardless of workers.

    With ``out_dir`` the rows are written to ``<name>.csv`` next to a
    ``<name>.meta.json`` sidecar and, if requested, ``<name>.svg``.
    """
    t0 = time.time()
    n = _workers(workers)
    if n == 1:
        per_point = [evaluate_point(spec, v) for v in spec.grid]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            per_point = list(pool.map(evaluate_point, [spec] * len(spec.grid), spec.grid))
    rows = [r for chunk in per_point for r in chunk]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{spec.name}.csv").write_text(rows_to_csv(rows))
        meta = {
            "name": spec.name,
            "axis": spec.axis,
            "grid": list(spec.grid),
            "methods": list(spec.methods),
            "outputs": list(spec.outputs),
            "model": {**asdict(spec.fixed), "beta_sq": spec.fixed.beta_sq},
            "numerics": asdict(spec.numerics),
            "failed_rows": sum(r.failed for r in rows),
            "elapsed_s": round(time.time() - t0, 3),
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
        (out / f"{spec.name}.meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        if plots:
            plot_rows(spec, rows, out / f"{spec.name}.svg")
    return rows


def rows_to_csv(rows) -> str:
    """The ``axis`` column holds the swept coordinate; its name is in the sidecar."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_rows(spec: SweepSpec, rows, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kinds = list(dict.fromkeys(r.value_kind for r in rows if not r.failed))
    if not kinds:
        return
    fig, axes = plt.subplots(len(kinds), 1, figsize=(5.5, 2.6 * len(kinds)), squeeze=False)
    styles = {"meanfield": dict(ls="-", marker=""), "numeric": dict(ls="--", marker="o", ms=3)}
    for ax, kind in zip(axes[:, 0], kinds):
        for method in spec.methods:
            pts = [(r.axis_value, r.value) for r in rows
                   if r.value_kind == kind and r.method == method and not r.failed]
            if pts:
                x, y = zip(*pts)
                ax.plot(x, y, label=method, **styles.get(method, {}))
        ax.set_ylabel(kind)
        ax.legend(fontsize=8)
    axes[-1, 0].set_xlabel(spec.axis)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
