"""Scenario schema, pipelines, and run artifacts.

A scenario is a JSON object

    {
      "id":   "viii-generic",            # directory-safe name
      "kind": "bianchi",                 # bianchi | gowdy | model-verify |
                                         # classify | blowdown |
                                         # reduced-volume | sweep
      "params": { ... },                 # kind-specific, see _PIPELINES
      "tol":  1e-8,                      # monotonicity tolerance (> 0)
      "seed": 7                          # required iff params request a
                                         # nonzero "perturb"
    }

Kind-specific params:
  bianchi        lam [3], h0 [3], t0, t1, direction [3], num_samples,
                 perturb (relative jitter of h0/direction, needs seed)
  gowdy          mode ("polarized"|"unpolarized"), R0, R1, nth, cfl,
                 num_samples, data ({"bessel": {n, amp}} or
                 {"fourier": {...}} or {"unpolarized": {"U": {...},
                 "A": {...}}}), perturb
  model-verify   models (list of kind names or "all"), fault (test hook:
                 "flip-K-sign" corrupts the listed models' states so the
                 harness provably catches sign errors)
  classify       source: {"model": name, "model_params": {...}} or
                 {"bianchi": {...}}; t0, t1, num
  blowdown       same source; max_views, force
  reduced-volume same source; fiber (direction index), t0, t1, num
  sweep          scenarios: list of inline scenario objects

Artifacts under <out>/<id>/: scenario.json (echo), report.json, and one
CSV per emitted series (header row, time column first, every number
printed with 17 significant digits so reruns diff bitwise).

Exit code contract: 0 all monotone checks pass; 1 a check failed;
2 schema error (nothing written); 3 numerical failure (partial artifacts).
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import functionals as fn
from . import gowdy, scaling
from .bianchi import (BianchiSpec, EvolutionFailure, EvolveConfig,
                      constraint_residuals, evolve, spacetime_curvature_norm)
from .models import ModelId, default_zoo, model_state, model_trajectory
from .series import FunctionalReport, MonotoneSeries, monotone_check
from .state import SymmetrySplit, Trajectory
from .tensors import DomainError, shape_distance

SCHEMA_VERSION = 1
KINDS = ("bianchi", "gowdy", "model-verify", "classify", "blowdown",
         "reduced-volume", "sweep")
EXIT_OK, EXIT_CHECK_FAILED, EXIT_SCHEMA, EXIT_NUMERICAL = 0, 1, 2, 3

# report.json keys that legitimately differ between reruns; compare skips them
VOLATILE_KEYS = {"tool_version", "wall_clock_s"}


class SchemaError(ValueError):
    """Scenario file or object violates the schema."""


# ----------------------------------------------------------------- validation

@dataclass
class Scenario:
    id: str
    kind: str
    params: dict
    tol: float = 1e-8
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "params": self.params,
                "tol": self.tol, "seed": self.seed}


def _requests_perturbation(params: dict) -> bool:
    for key, val in params.items():
        if key == "perturb" and val:
            return True
        if isinstance(val, dict) and _requests_perturbation(val):
            return True
        if key == "scenarios" and isinstance(val, list):
            if any(isinstance(v, dict) and _requests_perturbation(v.get("params", {}))
                   for v in val):
                return True
    return False


def validate_scenario(obj, _nested: bool = False) -> Scenario:
    if not isinstance(obj, dict):
        raise SchemaError(f"scenario must be a JSON object, got {type(obj).__name__}")
    unknown = set(obj) - {"id", "kind", "params", "tol", "seed"}
    if unknown:
        raise SchemaError(f"unknown scenario fields: {sorted(unknown)}")
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid or any(c in sid for c in "/\\ \t\n"):
        raise SchemaError(f"id must be a nonempty path-safe string, got {sid!r}")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"kind must be one of {KINDS}, got {kind!r}")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError("params must be an object")
    tol = obj.get("tol", 1e-8)
    if not isinstance(tol, (int, float)) or not tol > 0 or not math.isfinite(tol):
        raise SchemaError(f"tol must be a positive finite number, got {tol!r}")
    for key, val in params.items():
        if key.endswith("tol") and (not isinstance(val, (int, float)) or not val > 0):
            raise SchemaError(f"params.{key} must be positive, got {val!r}")
    seed = obj.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise SchemaError(f"seed must be an integer, got {seed!r}")
    if _requests_perturbation(params) and seed is None:
        raise SchemaError("perturbations requested but no seed given: "
                          "runs would not be reproducible")
    if kind == "sweep":
        if _nested:
            raise SchemaError("sweeps cannot nest")
        children = params.get("scenarios")
        if not isinstance(children, list) or not children:
            raise SchemaError("sweep params.scenarios must be a nonempty list")
        seen = set()
        for ch in children:
            c = validate_scenario(ch, _nested=True)
            if c.id in seen:
                raise SchemaError(f"duplicate scenario id in sweep: {c.id!r}")
            seen.add(c.id)
    sc = Scenario(id=sid, kind=kind, params=params, tol=float(tol), seed=seed)
    _check_params(sc)
    return sc


def _check_vec3(params: dict, key: str, where: str) -> None:
    v = params.get(key)
    if not isinstance(v, list) or len(v) != 3 \
            or not all(isinstance(x, (int, float)) for x in v):
        raise SchemaError(f"{where}.{key} must be a list of 3 numbers, got {v!r}")


def _check_bianchi_params(p: dict, where: str) -> None:
    _check_vec3(p, "lam", where)
    _check_vec3(p, "h0", where)
    if "direction" in p:
        _check_vec3(p, "direction", where)
    t1 = p.get("t1")
    if not isinstance(t1, (int, float)) or not t1 > p.get("t0", 1.0):
        raise SchemaError(f"{where}.t1 must be a number beyond t0, got {t1!r}")


def _check_source_params(p: dict, kind: str) -> None:
    from .models import MODEL_KINDS
    if "bianchi" in p:
        _check_bianchi_params(p["bianchi"], f"{kind}.bianchi")
    elif "model" in p:
        if p["model"] not in MODEL_KINDS:
            raise SchemaError(f"{kind}.model must be one of {MODEL_KINDS}, "
                              f"got {p['model']!r}")
    else:
        raise SchemaError(f"{kind} params need either 'model' or 'bianchi'")


def _check_params(sc: Scenario) -> None:
    """Kind-specific shape checks, run before any artifact is written."""
    from .models import MODEL_KINDS
    p = sc.params
    if sc.kind == "bianchi":
        _check_bianchi_params(p, "bianchi")
    elif sc.kind == "gowdy":
        mode = p.get("mode", "polarized")
        if mode not in ("polarized", "unpolarized"):
            raise SchemaError(f"gowdy.mode must be polarized|unpolarized, got {mode!r}")
        data = p.get("data", {"bessel": {"n": 1, "amp": 0.5}})
        if mode == "polarized" and not ("bessel" in data or "fourier" in data):
            raise SchemaError("polarized gowdy data needs 'bessel' or 'fourier'")
        if mode == "unpolarized" and "unpolarized" not in data:
            raise SchemaError("unpolarized gowdy data needs data.unpolarized")
        nth = p.get("nth", 256)
        if not isinstance(nth, int) or nth < 8:
            raise SchemaError(f"gowdy.nth must be an integer >= 8, got {nth!r}")
        if not float(p.get("R1", 10.0)) > float(p.get("R0", 1.0)):
            raise SchemaError("gowdy.R1 must exceed R0")
    elif sc.kind == "model-verify":
        models = p.get("models", "all")
        if models != "all":
            if not isinstance(models, list) or not models:
                raise SchemaError("model-verify params.models must be 'all' or a "
                                  "nonempty list of model kinds")
            unknown = [m for m in models if m not in MODEL_KINDS]
            if unknown:
                raise SchemaError(f"unknown model kinds: {unknown}")
        fault = p.get("fault")
        if fault not in (None, "flip-K-sign"):
            raise SchemaError(f"unknown fault {fault!r} (supported: flip-K-sign)")
    elif sc.kind in ("classify", "blowdown", "reduced-volume"):
        _check_source_params(p, sc.kind)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise SchemaError(f"cannot read scenario file {path}: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"scenario file {path} is not valid JSON: {e}") from e
    return validate_scenario(obj)


# ------------------------------------------------------------------ CSV output

def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_series_csv(path: Path, series: MonotoneSeries) -> None:
    """Columns: t, value, residual (per-interval residual on the row opening
    the interval; last row's residual cell is empty)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "value", "residual"])
        res = series.residuals
        for i, (t, v) in enumerate(zip(series.times, series.values)):
            r = _fmt(res[i]) if res is not None and i < len(res) else ""
            w.writerow([_fmt(t), _fmt(v), r])


def write_columns_csv(path: Path, header: Sequence[str], columns) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(header))
        for row in zip(*cols):
            w.writerow([_fmt(x) for x in row])


# ------------------------------------------------------------------- pipelines

_ZOO_DEFAULTS = {m.kind: m for m in default_zoo()}


def _model_from_json(name: str, extra: Optional[dict]) -> ModelId:
    if extra:
        kw = dict(extra)
        if "p" in kw:
            kw["p"] = tuple(kw["p"])
        return ModelId(name, **kw)
    if name in _ZOO_DEFAULTS:
        return _ZOO_DEFAULTS[name]
    return ModelId(name)


def _bianchi_trajectory(p: dict, rng: Optional[np.random.Generator]) -> Trajectory:
    lam = tuple(float(x) for x in p["lam"])
    h0 = np.asarray(p["h0"], dtype=float)
    direction = np.asarray(p.get("direction", (1.0, 0.0, 0.0)), dtype=float)
    eps = float(p.get("perturb", 0.0))
    if eps:
        h0 = h0 * (1.0 + eps * rng.standard_normal(3))
        direction = direction + eps * rng.standard_normal(3)
    spec = BianchiSpec.from_anisotropy(lam, tuple(h0), float(p.get("t0", 1.0)),
                                       tuple(direction))
    cfg = EvolveConfig(num_samples=int(p.get("num_samples", 400)))
    return evolve(spec, float(p["t1"]), cfg)


def _source_trajectory(p: dict, rng) -> tuple[Trajectory, dict]:
    """Trajectory for classify/blowdown/reduced-volume sources."""
    if "bianchi" in p:
        return _bianchi_trajectory(p["bianchi"], rng), {"source": "bianchi"}
    if "model" in p:
        m = _model_from_json(p["model"], p.get("model_params"))
        t0, t1 = float(p.get("t0", 1.0)), float(p.get("t1", 1e4))
        traj = model_trajectory(m, t0, t1, num=int(p.get("num", 80)))
        return traj, {"source": "model", "model": m.kind}
    raise SchemaError("source needs either params.bianchi or params.model")


def _pipeline_bianchi(sc: Scenario, outdir: Path, rng) -> dict:
    traj = _bianchi_trajectory(sc.params, rng)
    report = FunctionalReport(scenario_id=sc.id)
    fm = fn.fm_volume(traj)
    report.add("fm_volume", monotone_check(fm, sc.tol),
               float(np.max(np.abs(fm.residuals))))
    write_series_csv(outdir / "fm_volume.csv", fm)
    si = fn.scale_invariant_integrals(traj)
    write_columns_csv(
        outdir / "scale_invariant_partials.csv",
        ["t", "anisotropy", "lapse_defect", "curvature_gap"],
        [si.times, si.partials["anisotropy"], si.partials["lapse_defect"],
         si.partials["curvature_gap"]],
    )
    cls = scaling.classify(traj)
    write_columns_csv(outdir / "curvature_evidence.csv",
                      ["t", "t2_rm"], [cls.times, cls.values])
    cons = np.abs(np.array([constraint_residuals(s) for s in traj.states]))
    extras = {
        "classification": {"verdict": cls.verdict, "slope": cls.slope,
                           "slope_half": cls.slope_half, "window": cls.window},
        "scale_invariant": {"vacuous": si.vacuous, "dvol_exponent": si.dvol_exponent,
                            "decade_tails": si.decade_tails},
        "max_constraint_residuals": {
            "hamiltonian": float(np.max(cons[:, 0])),
            "momentum": float(np.max(cons[:, 1])),
            "gauge": float(np.max(cons[:, 2])),
        },
        "evolver_stats": traj.stats,
    }
    try:
        dv = fn.dvol_infty_estimate(traj)
        extras["dvol_infty"] = {"upper_bound": dv.value, "exponent": dv.exponent,
                                "window": dv.window}
    except fn.InsufficientDataError as e:
        extras["dvol_infty"] = {"error": str(e)}
    out = report.to_dict()
    out.update(extras)
    return out


def _fourier_field(nth: int, spec: dict) -> tuple[np.ndarray, np.ndarray]:
    th = gowdy.theta_grid(nth)
    def build(mean, cos, sin):
        out = np.full(nth, float(mean))
        for k, c in enumerate(cos or ()):
            out += c * np.cos((k + 1) * th)
        for k, s in enumerate(sin or ()):
            out += s * np.sin((k + 1) * th)
        return out
    f = build(spec.get("mean", 0.0), spec.get("cos"), spec.get("sin"))
    f_R = build(spec.get("mean_R", 0.0), spec.get("cos_R"), spec.get("sin_R"))
    return f, f_R


def _gowdy_initial(p: dict, rng):
    nth = int(p.get("nth", 256))
    R0 = float(p.get("R0", 1.0))
    data = p.get("data", {"bessel": {"n": 1, "amp": 0.5}})
    eps = float(p.get("perturb", 0.0))
    mode = p.get("mode", "polarized")
    if mode == "polarized":
        if "bessel" in data:
            b = data["bessel"]
            amp = float(b.get("amp", 1.0))
            if eps:
                amp *= 1.0 + eps * rng.standard_normal()
            return gowdy.bessel_mode_data(R0, nth, n=int(b.get("n", 1)), amp=amp)
        if "fourier" in data:
            f = dict(data["fourier"])
            if eps:
                for key in ("cos", "sin", "cos_R", "sin_R"):
                    if key in f:
                        arr = np.asarray(f[key], dtype=float)
                        f[key] = tuple(arr * (1.0 + eps * rng.standard_normal(arr.shape)))
            return gowdy.polarized_data(
                R0, nth, mean=f.get("mean", 0.0), mean_R=f.get("mean_R", 0.0),
                cos=f.get("cos", ()), sin=f.get("sin", ()),
                cos_R=f.get("cos_R", ()), sin_R=f.get("sin_R", ()))
        raise SchemaError("polarized gowdy data needs 'bessel' or 'fourier'")
    if mode == "unpolarized":
        d = data.get("unpolarized")
        if not d:
            raise SchemaError("unpolarized gowdy data needs data.unpolarized")
        U, U_R = _fourier_field(nth, d.get("U", {}))
        A, A_R = _fourier_field(nth, d.get("A", {}))
        if eps:
            U = U * (1.0 + eps * rng.standard_normal(nth))
            A = A * (1.0 + eps * rng.standard_normal(nth))
        return gowdy.unpolarized_data(R0, nth, U, U_R, A, A_R)
    raise SchemaError(f"gowdy mode must be polarized|unpolarized, got {mode!r}")


def _pipeline_gowdy(sc: Scenario, outdir: Path, rng) -> dict:
    p = sc.params
    state0 = _gowdy_initial(p, rng)
    R1 = float(p.get("R1", 10.0))
    num = int(p.get("num_samples", 60))
    cfl = float(p.get("cfl", 0.4))
    if isinstance(state0, gowdy.GowdyState):
        traj = gowdy.evolve_polarized(state0, R1, num_samples=num, cfl=cfl)
    else:
        traj = gowdy.evolve_unpolarized(state0, R1, num_samples=num, cfl=cfl)
    report = FunctionalReport(scenario_id=sc.id)
    es = fn.gowdy_energy_series(traj)
    report.add("gowdy_energy_hat", monotone_check(es, sc.tol),
               float(np.max(np.abs(es.residuals))))
    write_series_csv(outdir / "energy_hat.csv", es)
    em = fn.equivolume_momentum(traj)
    report.add("equivolume_momentum", monotone_check(em, sc.tol),
               float(np.max(np.abs(em.residuals))))
    write_series_csv(outdir / "equivolume_momentum.csv", em)
    out = report.to_dict()
    out["evolver_stats"] = {k: v for k, v in traj.stats.items()}
    out["kind_detail"] = traj.kind
    return out


_ZOO_CHECK_TOL = {"constraint": 1e-9, "gauge": 1e-9, "curvature_law": 1e-10,
                  "curvature_flat": 1e-12, "curvature_kasner_plateau": 1e-3,
                  "milne_volume_density": 1e-12}


def verify_zoo(models: Optional[Sequence[str]] = None, fault: Optional[str] = None):
    """Model-zoo invariant checks; returns list of (model, check, residual, ok).

    Checks per model at 20 log-spaced times in [1, 1e4]: Hamiltonian and
    momentum constraint residuals; Hubble gauge residual; the curvature law
    appropriate to the model — flat members must have t^2 |Rm|_T at machine
    zero, self-similar members must have it constant to 1e-10 relative, and
    Taub-nil (the one member that is not self-similar: its dimensionful twist
    parameter is what lets its rescalings converge to Kasner) must have it
    strictly decreasing onto the plateau of its limit Kasner; Milne's
    normalized volume density must be constant; Taub-nil's det-normalized
    shape distance to its limit Kasner must be strictly decreasing.
    fault="flip-K-sign" negates K before checking (harness self-test).
    """
    zoo = {m.kind: m for m in default_zoo()}
    names = list(zoo) if models is None else list(models)
    if not names:
        raise SchemaError("empty model list")
    unknown = [n for n in names if n not in zoo]
    if unknown:
        raise SchemaError(f"unknown model kinds: {unknown} (zoo has {sorted(zoo)})")
    ts = np.geomspace(1.0, 1e4, 20)
    rows = []

    def add(model, check, residual, ok):
        rows.append((model, check, float(residual), bool(ok)))

    for name in names:
        m = zoo[name]
        states = [model_state(m, float(t)) for t in ts]
        if fault == "flip-K-sign":
            for s in states:
                s.K[...] = -s.K
        cons = np.abs(np.array([constraint_residuals(s) for s in states]))
        add(name, "constraint", np.max(cons[:, :2]),
            np.max(cons[:, :2]) < _ZOO_CHECK_TOL["constraint"])
        add(name, "gauge", np.max(cons[:, 2]),
            np.max(cons[:, 2]) < _ZOO_CHECK_TOL["gauge"])
        y = np.array([t * t * spacetime_curvature_norm(s)
                      for t, s in zip(ts, states)])
        if name == "TaubNil":
            # t^2 |Rm| rises through the transition bump between the two
            # Kasner regimes, then decays monotonically onto the plateau of
            # the limit Kasner.  Require the bump to sit in the first fifth
            # of the log window and strict decay past it.
            plateau = spacetime_curvature_norm(
                model_state(ModelId("Kasner", p=m.p), 1.0))
            res = abs(y[-1] / plateau - 1.0)
            imax = int(np.argmax(y))
            add(name, "curvature_kasner_plateau", res,
                imax <= len(y) // 5
                and np.all(np.diff(y[imax:]) < 0.0)
                and res < _ZOO_CHECK_TOL["curvature_kasner_plateau"])
        elif np.max(y) < _ZOO_CHECK_TOL["curvature_flat"]:
            add(name, "curvature_flat", np.max(y), True)
        else:
            var = float(np.max(y) - np.min(y)) / float(np.max(y))
            add(name, "curvature_law", var, var < _ZOO_CHECK_TOL["curvature_law"])
        if name == "Milne":
            dens = np.array([(-s.hubble) ** 3 * s.vol for s in states])
            drift = np.max(np.abs(dens / dens[0] - 1.0))
            add(name, "milne_volume_density", drift,
                drift < _ZOO_CHECK_TOL["milne_volume_density"])
        if name == "TaubNil":
            kas = ModelId("Kasner", p=m.p)
            dists = np.array([
                shape_distance(s.h, model_state(kas, float(t)).h)
                for t, s in zip(ts, states)
            ])
            add(name, "kasner_convergence", dists[-1],
                np.all(np.diff(dists) < 0.0))
    return rows


def _pipeline_model_verify(sc: Scenario, outdir: Path, rng) -> dict:
    models = sc.params.get("models", "all")
    rows = verify_zoo(None if models == "all" else models,
                      fault=sc.params.get("fault"))
    lines = [{"model": m, "check": c, "residual": r, "passed": ok}
             for m, c, r, ok in rows]
    write_columns_csv(outdir / "residuals.csv", ["index", "residual"],
                      [np.arange(len(rows)), [r[2] for r in rows]])
    return {
        "scenario_id": sc.id,
        "passed": all(l["passed"] for l in lines),
        "checks": {f"{l['model']}.{l['check']}": {"passed": l["passed"],
                                                  "max_violation": l["residual"],
                                                  "at_index": None, "detail": ""}
                   for l in lines},
        "residual_norms": {},
        "lines": lines,
    }


def _pipeline_classify(sc: Scenario, outdir: Path, rng) -> dict:
    traj, src = _source_trajectory(sc.params, rng)
    rep = scaling.classify(traj)
    write_columns_csv(outdir / "curvature_evidence.csv",
                      ["t", "t2_rm"], [rep.times, rep.values])
    report = FunctionalReport(scenario_id=sc.id)
    fm = fn.fm_volume(traj)
    report.add("fm_volume", monotone_check(fm, sc.tol),
               float(np.max(np.abs(fm.residuals))))
    write_series_csv(outdir / "fm_volume.csv", fm)
    out = report.to_dict()
    out["classification"] = {
        "verdict": rep.verdict, "slope": rep.slope, "slope_half": rep.slope_half,
        "sup_last": rep.sup_last, "median_full": rep.median_full,
        "window": rep.window, **src,
    }
    return out


def _pipeline_blowdown(sc: Scenario, outdir: Path, rng) -> dict:
    traj, src = _source_trajectory(sc.params, rng)
    bd = scaling.blowdown(traj, max_views=int(sc.params.get("max_views", 8)),
                          force=bool(sc.params.get("force", False)))
    for k, v in enumerate(bd.views):
        write_columns_csv(outdir / f"view_{k:02d}.csv", ["u", "H", "rm"],
                          [v.us, v.H_of_u, v.rm_of_u])
    report = FunctionalReport(scenario_id=sc.id)
    fm = fn.fm_volume(traj)
    report.add("fm_volume", monotone_check(fm, sc.tol),
               float(np.max(np.abs(fm.residuals))))
    write_series_csv(outdir / "fm_volume.csv", fm)
    out = report.to_dict()
    out["blowdown"] = {
        "passed": bd.passed,
        "H0": [float(x) for x in bd.H0],
        "C_run": bd.C_run,
        "ratios": [float(x) for x in bd.ratios],
        "t_i": [v.t_i for v in bd.views],
        "Q_i": [v.Q_i for v in bd.views],
        "unit_curvature_error": max(abs(v.rm0 - 1.0) for v in bd.views),
        **src,
    }
    out["passed"] = bool(out["passed"] and bd.passed)
    return out


def _pipeline_reduced_volume(sc: Scenario, outdir: Path, rng) -> dict:
    traj, src = _source_trajectory(sc.params, rng)
    split = None
    if "fiber" in sc.params:
        f = int(sc.params["fiber"])
        split = SymmetrySplit(fiber=(f,), base=tuple(i for i in range(3) if i != f))
    rep = fn.reduced_volume(traj, split=split)
    report = FunctionalReport(scenario_id=sc.id)
    report.add("reduced_volume", monotone_check(rep.series, sc.tol),
               float(np.max(rep.diss_residuals)))
    write_series_csv(outdir / "reduced_volume.csv", rep.series)
    out = report.to_dict()
    out["reduced_volume"] = {
        "energy_residual_max": float(np.max(rep.energy_residuals)),
        "dissipation_residual_max": float(np.max(rep.diss_residuals)),
        "lapse_margin_min": float(np.min(rep.lapse_margins)),
        "fitted_exponent": rep.fitted_exponent,
        "rigidity": rep.rigidity,
        "checks": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                   for k, v in rep.checks.items()},
        **src,
    }
    return out


_PIPELINES = {
    "bianchi": _pipeline_bianchi,
    "gowdy": _pipeline_gowdy,
    "model-verify": _pipeline_model_verify,
    "classify": _pipeline_classify,
    "blowdown": _pipeline_blowdown,
    "reduced-volume": _pipeline_reduced_volume,
}


# --------------------------------------------------------------------- runner

def default_out_root() -> Path:
    return Path(os.environ.get("FLOWLAB_OUT", "flowlab-out"))


def run_scenario(sc: Scenario, out_root, threads: int = 1) -> tuple[int, Path]:
    """Execute one validated scenario; returns (exit_code, artifact_dir)."""
    out_root = Path(out_root)
    outdir = out_root / sc.id
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "scenario.json").write_text(
        json.dumps(sc.to_dict(), indent=2, sort_keys=True) + "\n")
    rng = np.random.default_rng(sc.seed) if sc.seed is not None else None
    start = time.perf_counter()
    if sc.kind == "sweep":
        return _run_sweep(sc, outdir, threads)
    try:
        report = _PIPELINES[sc.kind](sc, outdir, rng)
        code = EXIT_OK if report.get("passed", False) else EXIT_CHECK_FAILED
    except (DomainError, EvolutionFailure, gowdy.GowdyFailure,
            FloatingPointError, np.linalg.LinAlgError) as e:
        report = {"scenario_id": sc.id, "passed": False,
                  "error": f"{type(e).__name__}: {e}"}
        code = EXIT_NUMERICAL
    report["schema_version"] = SCHEMA_VERSION
    report["kind"] = sc.kind
    report["tool_version"] = __version__
    report["wall_clock_s"] = time.perf_counter() - start
    (outdir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n")
    return code, outdir


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


def _run_sweep(sc: Scenario, outdir: Path, threads: int) -> tuple[int, Path]:
    children = [validate_scenario(ch, _nested=True)
                for ch in sc.params["scenarios"]]
    start = time.perf_counter()

    def one(child: Scenario):
        return child.id, run_scenario(child, outdir, threads=1)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, children))
    else:
        results = [one(c) for c in children]
    results.sort(key=lambda r: r[0])
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "scenario_id": sc.id,
        "passed": all(code == EXIT_OK for _, code in results),
        "results": [{"id": cid, "exit_code": code} for cid, code in results],
        "tool_version": __version__,
        "wall_clock_s": time.perf_counter() - start,
    }
    (outdir / "report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return (EXIT_OK if summary["passed"] else EXIT_CHECK_FAILED), outdir


# -------------------------------------------------------------------- compare

class StructuralDiffError(ValueError):
    """Run directories are not comparable field-for-field."""


@dataclass
class CompareReport:
    diffs: list = field(default_factory=list)   # (file, row, col, a, b)
    checked_files: int = 0

    @property
    def clean(self) -> bool:
        return not self.diffs


def _compare_json(a, b, tol, path, diffs):
    if isinstance(a, dict) and isinstance(b, dict):
        keys_a = set(a) - VOLATILE_KEYS
        keys_b = set(b) - VOLATILE_KEYS
        if keys_a != keys_b:
            raise StructuralDiffError(
                f"{path}: report keys differ: {sorted(keys_a ^ keys_b)}")
        for k in sorted(keys_a):
            _compare_json(a[k], b[k], tol, f"{path}.{k}", diffs)
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            raise StructuralDiffError(f"{path}: list lengths differ "
                                      f"({len(a)} vs {len(b)})")
        for i, (x, y) in enumerate(zip(a, b)):
            _compare_json(x, y, tol, f"{path}[{i}]", diffs)
    elif isinstance(a, (int, float)) and isinstance(b, (int, float)) \
            and not isinstance(a, bool) and not isinstance(b, bool):
        if not (math.isfinite(a) and math.isfinite(b)):
            if repr(a) != repr(b):
                diffs.append((path, None, None, a, b))
        elif abs(a - b) > tol * max(1.0, abs(a), abs(b)):
            diffs.append((path, None, None, a, b))
    elif type(a) is not type(b):
        raise StructuralDiffError(f"{path}: types differ "
                                  f"({type(a).__name__} vs {type(b).__name__})")
    elif a != b:
        diffs.append((path, None, None, a, b))


def compare_runs(dir_a, dir_b, tol: float = 0.0) -> CompareReport:
    """Field-wise comparison of two artifact directories.

    Numeric cells must agree within tol (relative to max(1, |a|, |b|);
    tol=0 demands bitwise-identical text).  Mismatched file sets, headers,
    or shapes raise StructuralDiffError.
    """
    a, b = Path(dir_a), Path(dir_b)
    for d in (a, b):
        if not d.is_dir():
            raise StructuralDiffError(f"not a run directory: {d}")
    files_a = sorted(p.relative_to(a).as_posix() for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b).as_posix() for p in b.rglob("*") if p.is_file())
    if files_a != files_b:
        raise StructuralDiffError(
            f"file sets differ: only-in-A={sorted(set(files_a) - set(files_b))} "
            f"only-in-B={sorted(set(files_b) - set(files_a))}")
    rep = CompareReport()
    for rel in files_a:
        pa, pb = a / rel, b / rel
        rep.checked_files += 1
        if rel.endswith(".json"):
            ja = json.loads(pa.read_text())
            jb = json.loads(pb.read_text())
            _compare_json(ja, jb, tol, rel, rep.diffs)
            continue
        if not rel.endswith(".csv"):
            if pa.read_bytes() != pb.read_bytes():
                rep.diffs.append((rel, None, None, "<binary>", "<binary>"))
            continue
        rows_a = list(csv.reader(open(pa)))
        rows_b = list(csv.reader(open(pb)))
        if not rows_a or not rows_b or rows_a[0] != rows_b[0]:
            raise StructuralDiffError(f"{rel}: headers differ")
        if len(rows_a) != len(rows_b):
            raise StructuralDiffError(f"{rel}: row counts differ "
                                      f"({len(rows_a)} vs {len(rows_b)})")
        for i, (ra, rb) in enumerate(zip(rows_a[1:], rows_b[1:]), start=1):
            if len(ra) != len(rb):
                raise StructuralDiffError(f"{rel}:{i}: column counts differ")
            for j, (xa, xb) in enumerate(zip(ra, rb)):
                if xa == xb:
                    continue
                if tol == 0.0 or not xa or not xb:
                    rep.diffs.append((rel, i, rows_a[0][j], xa, xb))
                    continue
                va, vb = float(xa), float(xb)
                if abs(va - vb) > tol * max(1.0, abs(va), abs(vb)):
                    rep.diffs.append((rel, i, rows_a[0][j], xa, xb))
    return rep
