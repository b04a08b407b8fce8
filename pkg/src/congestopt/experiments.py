"""INI-driven experiments: solves, source maps, dilation sweeps, network tables
and curvature diagnostics.

A config file has an ``[experiment]`` section naming the ``kind`` and
optional sections ``[grid]``, ``[phases]``, ``[source]``, ``[solver]``,
``[probes]``, ``[diagnostics]``, ``[sweep]`` and ``[network]``.  Missing keys
take the defaults below.  Every run writes ``report.json`` (sorted keys, no
timestamps) into its output directory.
"""
from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import dilation, fieldio, network
from .congestion import CongestionFunction, SubgradientPolicy, build_envelope
from .diagnostics import check_optimality, curvature, extract_contour, write_contours_csv
from .errors import ConfigError, IncompatibleReports, NoContour
from .grid import Grid, ScalarField, SourceConfig, build_source, integrate
from .solver import SolverConfig, minimize, recover

KINDS = ("solve", "source", "dilation_sweep", "network_table", "diagnostics")

_SCHEMA = {
    "experiment": {"kind": str, "name": str, "output": str},
    "grid": {"nx": int, "ny": int},
    "phases": {"a": float, "b": float, "p": float, "k_area": float},
    "source": {"lambda": float, "x0": "pair", "x1": "pair", "normalization": str},
    "solver": {
        "preset": str,
        "grad_tolerance": float,
        "max_iterations": int,
        "memory": int,
        "c1": float,
        "c2": float,
        "smoothing": float,
        "dense": bool,
        "policy": str,
    },
    "probes": {"radius": float},
    "diagnostics": {"level": float, "k_perimeter": float, "tolerance": float, "window_cells": float},
    "sweep": {"seeds": int, "seed_start": int, "radii": "floats", "resolution": int, "delta_pixels": float},
    "network": {"alpha": float, "p": float, "k": float, "sigma_values": "floats"},
}


@dataclass
class ExperimentConfig:
    kind: str = "solve"
    name: str = "experiment"
    output: str | None = None
    nx: int = 30
    ny: int = 30
    a: float = 1.0
    b: float = 4.0
    p: float = 2.0
    k_area: float = 0.06
    lam: float = 0.02
    x0: tuple = (0.3, 0.3)
    x1: tuple = (0.7, 0.7)
    normalization: str = "paper"
    solver: SolverConfig = field(default_factory=SolverConfig)
    probe_radius: float = 0.1
    level: float = 0.5
    k_perimeter: float = 0.01
    tolerance: float = 1e-6
    window_cells: float = 8.0
    seeds: int = 100
    seed_start: int = 0
    radii: tuple = (0.02, 0.05, 0.1)
    resolution: int = 512
    delta_pixels: float = 2.0
    net_alpha: float = 1.0
    net_p: float = 2.0
    net_k: float = 1.0
    sigma_values: tuple = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0)

    def validate(self, path="<config>"):
        def bad(where, msg):
            raise ConfigError(f"{path}:{where}", msg)

        if self.kind not in KINDS:
            bad("experiment.kind", f"unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.kind in ("solve", "source", "diagnostics"):
            if self.nx < 8 or self.ny < 8:
                bad("grid", f"grid must be at least 8x8, got {self.nx}x{self.ny}")
            if not 0 < self.a < self.b:
                bad("phases", f"need 0 < a < b, got a={self.a}, b={self.b}")
            if not self.p > 1:
                bad("phases.p", "exponent must exceed 1")
            if not self.k_area > 0:
                bad("phases.k_area", "area price must be positive")
            if not self.lam > 0:
                bad("source.lambda", "variance must be positive")
            for key, c in (("x0", self.x0), ("x1", self.x1)):
                if not all(0.0 <= v <= 1.0 for v in c):
                    bad(f"source.{key}", f"centre {c} outside the unit square")
            if self.normalization not in ("paper", "probability"):
                bad("source.normalization", "expected 'paper' or 'probability'")
        if self.kind == "diagnostics" and not 0 < self.level < 1:
            bad("diagnostics.level", "level must lie in (0, 1)")
        if self.kind == "dilation_sweep":
            if self.seeds < 1 or self.resolution < 32:
                bad("sweep", "need seeds >= 1 and resolution >= 32")
            if not all(r > 0 for r in self.radii):
                bad("sweep.radii", "radii must be positive")
        if self.kind == "network_table":
            try:
                network.NetworkCostParams(self.net_alpha, self.net_p, self.net_k)
            except ValueError as exc:
                bad("network", str(exc))
        return self

    # derived objects ---------------------------------------------------------
    def grid(self) -> Grid:
        return Grid(self.nx, self.ny)

    def source_config(self) -> SourceConfig:
        return SourceConfig(self.lam, tuple(self.x0), tuple(self.x1), self.normalization)

    def envelope(self):
        h1 = CongestionFunction(self.a, self.p)
        h2 = CongestionFunction(self.b, self.p)
        return build_envelope(h1, h2, self.k_area, policy=self.solver.policy)

    def describe(self) -> dict:
        d = {"kind": self.kind, "name": self.name}
        if self.kind in ("solve", "source", "diagnostics"):
            d.update(
                grid={"nx": self.nx, "ny": self.ny},
                phases={"a": self.a, "b": self.b, "p": self.p, "k_area": self.k_area},
                source={
                    "lambda": self.lam,
                    "x0": list(self.x0),
                    "x1": list(self.x1),
                    "normalization": self.normalization,
                },
            )
        if self.kind in ("solve", "diagnostics"):
            s = self.solver
            d["solver"] = {
                "grad_tolerance": s.grad_tolerance,
                "max_iterations": s.max_iterations,
                "memory": s.memory,
                "c1": s.c1,
                "c2": s.c2,
                "smoothing": s.smoothing,
                "dense": s.dense,
                "policy": s.policy.value,
            }
            d["probes"] = {"radius": self.probe_radius}
        if self.kind == "diagnostics":
            d["diagnostics"] = {
                "level": self.level,
                "k_perimeter": self.k_perimeter,
                "tolerance": self.tolerance,
                "window_cells": self.window_cells,
            }
        if self.kind == "dilation_sweep":
            d["sweep"] = {
                "seeds": self.seeds,
                "seed_start": self.seed_start,
                "radii": list(self.radii),
                "resolution": self.resolution,
                "delta_pixels": self.delta_pixels,
            }
        if self.kind == "network_table":
            d["network"] = {
                "alpha": self.net_alpha,
                "p": self.net_p,
                "k": self.net_k,
                "sigma_values": list(self.sigma_values),
            }
        return d


def _convert(raw: str, typ, where: str, path):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if typ == "pair":
            vals = tuple(float(v) for v in raw.split(","))
            if len(vals) != 2:
                raise ValueError("expected two comma-separated numbers")
            return vals
        if typ == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        return typ(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{path}:{where}", str(exc)) from None


def parse_config(text: str, path="<config>", default_name: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(path), f"unreadable config: {exc}") from None
    if not cp.has_section("experiment"):
        raise ConfigError(f"{path}:experiment", "missing [experiment] section")
    values = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"{path}:{sec}", "unknown section")
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"{path}:{sec}.{key}", "unknown key")
            values[(sec, key)] = _convert(raw, _SCHEMA[sec][key], f"{sec}.{key}", path)

    cfg = ExperimentConfig()
    simple = {
        ("experiment", "kind"): "kind",
        ("experiment", "name"): "name",
        ("experiment", "output"): "output",
        ("grid", "nx"): "nx",
        ("grid", "ny"): "ny",
        ("phases", "a"): "a",
        ("phases", "b"): "b",
        ("phases", "p"): "p",
        ("phases", "k_area"): "k_area",
        ("source", "lambda"): "lam",
        ("source", "x0"): "x0",
        ("source", "x1"): "x1",
        ("source", "normalization"): "normalization",
        ("probes", "radius"): "probe_radius",
        ("diagnostics", "level"): "level",
        ("diagnostics", "k_perimeter"): "k_perimeter",
        ("diagnostics", "tolerance"): "tolerance",
        ("diagnostics", "window_cells"): "window_cells",
        ("sweep", "seeds"): "seeds",
        ("sweep", "seed_start"): "seed_start",
        ("sweep", "radii"): "radii",
        ("sweep", "resolution"): "resolution",
        ("sweep", "delta_pixels"): "delta_pixels",
        ("network", "alpha"): "net_alpha",
        ("network", "p"): "net_p",
        ("network", "k"): "net_k",
        ("network", "sigma_values"): "sigma_values",
    }
    for key, attr in simple.items():
        if key in values:
            setattr(cfg, attr, values[key])
    if ("experiment", "name") not in values:
        cfg.name = default_name or Path(str(path)).stem

    overrides = {k: v for (sec, k), v in values.items() if sec == "solver" and k != "preset"}
    try:
        cfg.solver = SolverConfig.preset(values.get(("solver", "preset"), "default"), **overrides)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}:solver", str(exc)) from None
    return cfg.validate(path)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from None
    return parse_config(text, p)


# presets -------------------------------------------------------------------

def preset_names() -> list[str]:
    root = resources.files("congestopt") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    res = resources.files("congestopt") / "presets" / f"{name}.ini"
    if not res.is_file():
        raise ConfigError(name, f"no such preset; known: {', '.join(preset_names())}")
    return res.read_text()


def resolve_config(spec: str) -> ExperimentConfig:
    """A path to an INI file, or the name of a bundled preset."""
    p = Path(spec)
    if p.is_file():
        return load_config(p)
    if spec in preset_names():
        return parse_config(preset_text(spec), f"preset:{spec}", spec)
    raise ConfigError(spec, "neither a readable config file nor a bundled preset")


# metrics -------------------------------------------------------------------

def probe_centers(cfg: ExperimentConfig) -> dict:
    mid = tuple(0.5 * (u + v) for u, v in zip(cfg.x0, cfg.x1))
    return {"source_x0": tuple(cfg.x0), "source_x1": tuple(cfg.x1), "midpoint": mid}


def disc_mean(field: ScalarField, center, radius: float) -> float:
    X, Y = field.grid.cell_centers() if field.centering == "cell" else field.grid.nodes()
    sel = (X - center[0]) ** 2 + (Y - center[1]) ** 2 < radius**2
    if not sel.any():
        return float("nan")
    return float(field.values[sel].mean())


def theta_metrics(theta: ScalarField, cfg: ExperimentConfig) -> dict:
    discs = {k: disc_mean(theta, c, cfg.probe_radius) for k, c in probe_centers(cfg).items()}
    src = 0.5 * (discs["source_x0"] + discs["source_x1"])
    mid = discs["midpoint"]
    return {
        "mean_theta": float(theta.values.mean()),
        "probe_discs": discs,
        "probe_radius": cfg.probe_radius,
        "source_disc_mean": src,
        "midpoint_disc_mean": mid,
        "concentration_margin": (src - mid) / max(src, mid) if max(src, mid) > 0 else 0.0,
    }


# runners -------------------------------------------------------------------

@dataclass
class RunResult:
    report: dict
    output: Path
    exit_code: int = 0


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n")


def _output_dir(cfg, output):
    out = Path(output or cfg.output or Path("runs") / cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve(cfg: ExperimentConfig, out: Path):
    grid = cfg.grid()
    f = build_source(grid, cfg.source_config())
    e = cfg.envelope()
    u, rep = minimize(f, e, cfg.solver)
    rec = recover(u, e, smoothing=cfg.solver.smoothing)
    fieldio.write_csv(u, out / "u.csv")
    fieldio.write_csv(rec.sigma.magnitude(), out / "sigma_mag.csv")
    fieldio.write_csv(rec.theta, out / "theta.csv")
    fieldio.write_theta_pgm(rec.theta, out / "theta.pgm")
    report = {
        "config": cfg.describe(),
        "envelope": {"r1": e.r1, "r2": e.r2, "kink": e.kink},
        "solve": rep.to_dict(),
        "relaxed_primal_of_flux": rec.primal_value,
        "metrics": theta_metrics(rec.theta, cfg),
    }
    return e, rec, rep, report


def run_solve(cfg, out):
    _, _, rep, report = _solve(cfg, out)
    _write_json(report, out / "report.json")
    return RunResult(report, out, 0 if rep.converged else 3)


def _node_position(grid, flat_index):
    X, Y = grid.nodes()
    idx = np.unravel_index(flat_index, X.shape)
    return [float(X[idx]), float(Y[idx])]


def run_source(cfg, out):
    grid = cfg.grid()
    src = cfg.source_config()
    f = build_source(grid, src)
    fp = build_source(grid, src, which="plus")
    fieldio.write_csv(f, out / "f.csv")
    fieldio.write_pgm(f.values, out / "f.pgm")
    report = {
        "config": cfg.describe(),
        "source": {
            "max": float(f.values.max()),
            "min": float(f.values.min()),
            "integral": integrate(f),
            "supply_mass": integrate(fp),
            "argmax": _node_position(grid, np.argmax(f.values)),
            "argmin": _node_position(grid, np.argmin(f.values)),
        },
    }
    _write_json(report, out / "report.json")
    return RunResult(report, out, 0)


def point_disc_refinement(radii=(0.02, 0.05, 0.1), resolutions=(256, 512)) -> dict:
    """Mean |slack| of the inequality for a point-generated disc at two resolutions."""
    out = {}
    for n in resolutions:
        E = dilation.point(n)
        sl = [dilation.check_dilation_inequality(E, r).slack for r in radii]
        out[str(n)] = {"slacks": sl, "mean_abs_slack": float(np.mean(np.abs(sl)))}
    return out


def run_dilation_sweep(cfg, out):
    seeds = range(cfg.seed_start, cfg.seed_start + cfg.seeds)
    rows = dilation.sweep(seeds, cfg.radii, cfg.resolution, cfg.delta_pixels)
    dilation.write_sweep_csv(rows, out / "sweep.csv")
    slack = np.array([r.slack for r in rows])
    co = np.array([r.coarea_error for r in rows])
    com = np.array([r.coarea_error_midpoint for r in rows])
    by_r = {}
    for r in cfg.radii:
        sel = np.array([row.r == r for row in rows])
        by_r[repr(float(r))] = {
            "min_slack": float(slack[sel].min()),
            "max_abs_coarea_error": float(np.abs(co[sel]).max()),
        }
    report = {
        "config": cfg.describe(),
        "samples": len(rows),
        "min_slack": float(slack.min()),
        "all_slack_above_minus_3pct": bool(slack.min() >= -0.03),
        "coarea": {
            "max_abs_error": float(np.abs(co).max()),
            "fraction_above_5pct": float(np.mean(np.abs(co) > 0.05)),
            "max_abs_error_midpoint": float(np.abs(com).max()),
            "fraction_above_5pct_midpoint": float(np.mean(np.abs(com) > 0.05)),
        },
        "by_radius": by_r,
        "point_disc": point_disc_refinement(cfg.radii),
    }
    _write_json(report, out / "report.json")
    return RunResult(report, out, 0)


def run_network_table(cfg, out):
    prm = network.NetworkCostParams(cfg.net_alpha, cfg.net_p, cfg.net_k)
    tab = network.cost_table(prm, cfg.sigma_values)
    lines = ["sigma,width,cost"] + [",".join(repr(float(v)) for v in row) for row in tab]
    (out / "network.csv").write_text("\n".join(lines) + "\n")
    report = {
        "config": cfg.describe(),
        "threshold": prm.threshold,
        "rows": [{"sigma": r[0], "width": r[1], "cost": r[2]} for r in tab.tolist()],
    }
    _write_json(report, out / "report.json")
    return RunResult(report, out, 0)


def run_diagnostics(cfg, out):
    e, rec, rep, report = _solve(cfg, out)
    h = min(cfg.grid().hx, cfg.grid().hy)
    try:
        contours = extract_contour(rec.theta, cfg.level)
    except NoContour as exc:
        contours = []
        report["diagnostics"] = {"contours": 0, "message": str(exc)}
    reports = []
    for c in contours:
        if c.n_vertices < 8:
            continue
        curvature(c, cfg.window_cells * h)
        cr = check_optimality(c, rec.sigma, e, cfg.k_perimeter, tolerance=cfg.tolerance)
        reports.append(cr.to_dict())
    if contours:
        write_contours_csv(contours, out / "contours.csv")
        report["diagnostics"] = {
            "contours": len(contours),
            "level": cfg.level,
            "reports": [
                {k: r[k] for k in ("evaluated", "skipped", "violation_fraction", "negative_curvature_fraction", "curvature_summary", "note")}
                for r in reports
            ],
        }
        _write_json({"contours": reports}, out / "curvature_report.json")
    _write_json(report, out / "report.json")
    return RunResult(report, out, 0 if rep.converged else 3)


_RUNNERS = {
    "solve": run_solve,
    "source": run_source,
    "dilation_sweep": run_dilation_sweep,
    "network_table": run_network_table,
    "diagnostics": run_diagnostics,
}


def run(cfg: ExperimentConfig, output=None) -> RunResult:
    out = _output_dir(cfg, output)
    return _RUNNERS[cfg.kind](cfg, out)


# comparison ----------------------------------------------------------------

METRICS = ("mean_theta", "probe_discs", "concentration", "objective", "gap", "all")


def load_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise IncompatibleReports(f"{path}: unreadable report ({exc})") from None


def compare(report_a: dict, report_b: dict, metric: str = "all") -> dict:
    """Deltas ``b - a`` of the requested metric(s) between two solve reports."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")
    for rep in (report_a, report_b):
        if "solve" not in rep or "metrics" not in rep:
            raise IncompatibleReports("both reports must come from solve runs")
    ca, cb = report_a["config"], report_b["config"]
    if ca["grid"] != cb["grid"]:
        raise IncompatibleReports(f"grids differ: {ca['grid']} vs {cb['grid']}")
    pa = {k: ca["phases"][k] for k in ("a", "b", "p")}
    pb = {k: cb["phases"][k] for k in ("a", "b", "p")}
    if pa != pb:
        raise IncompatibleReports(f"phase coefficients differ: {pa} vs {pb}")
    ma, mb = report_a["metrics"], report_b["metrics"]
    sa, sb = report_a["solve"], report_b["solve"]
    out = {}
    if metric in ("mean_theta", "all"):
        out["mean_theta"] = _delta(ma["mean_theta"], mb["mean_theta"])
    if metric in ("probe_discs", "all"):
        out["probe_discs"] = {k: _delta(ma["probe_discs"][k], mb["probe_discs"][k]) for k in ma["probe_discs"]}
    if metric in ("concentration", "all"):
        oa = "sources" if ma["source_disc_mean"] > ma["midpoint_disc_mean"] else "midpoint"
        ob = "sources" if mb["source_disc_mean"] > mb["midpoint_disc_mean"] else "midpoint"
        out["concentration"] = {
            **_delta(ma["concentration_margin"], mb["concentration_margin"]),
            "higher_a": oa,
            "higher_b": ob,
            "ordering_flips": oa != ob,
        }
    if metric in ("objective", "all"):
        out["objective"] = _delta(sa["final_objective"], sb["final_objective"])
    if metric in ("gap", "all"):
        out["gap"] = _delta(sa["relative_gap"], sb["relative_gap"])
    return out


def _delta(a, b):
    return {"a": a, "b": b, "delta": b - a, "ordering": "equal" if a == b else ("increase" if b > a else "decrease")}
