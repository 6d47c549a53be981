"""Isoperimetric scan: fractional perimeters of mass-calibrated candidate
sets against the halfspace of the same Gaussian mass."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from gaussfrac.ou_spectral import check_s
from gaussfrac.variational.perimeter import PerimeterResult, frac_perimeter
from gaussfrac.variational.sets import (
    MASS_TOL,
    Ball,
    Halfspace,
    PerturbedHalfspace,
    Quadrant,
    SetSpec,
    Strip,
    calibrate_mass,
)

FAMILIES = ("halfspace", "strip", "ball", "quadrant", "perturbed")
HALFSPACE_ANGLES = (0.0, math.pi / 7, math.pi / 4, math.pi / 3, math.pi / 2)
PERTURBATIONS = (0.1, 0.2, 0.3, 0.4, 0.5)
ROTATION_TOL = 1e-6
ROUTE_TOL = 0.02


def candidate_sets(dim: int = 2, families=None) -> list[SetSpec]:
    """Uncalibrated templates for the requested families, in a fixed order."""
    fams = FAMILIES if families is None else tuple(families)
    bad = [f for f in fams if f not in FAMILIES]
    if bad:
        raise ValueError(f"unknown families {bad}; expected a subset of {FAMILIES}")
    if dim < 2 and any(f != "halfspace" for f in fams):
        raise ValueError("non-halfspace candidates need d >= 2")
    out: list[SetSpec] = []
    for fam in FAMILIES:
        if fam not in fams:
            continue
        if fam == "halfspace":
            if dim == 1:
                out += [Halfspace(1, np.array([1.0])), Halfspace(1, np.array([-1.0]))]
            else:
                for th in HALFSPACE_ANGLES:
                    h = np.zeros(dim)
                    h[:2] = math.cos(th), math.sin(th)
                    out.append(Halfspace(dim, h))
        elif fam == "strip":
            out.append(Strip(dim, None, 1.0))
        elif fam == "ball":
            out.append(Ball(dim, 1.0))
        elif fam == "quadrant":
            out.append(Quadrant(dim))
        else:
            out += [PerturbedHalfspace(dim, eps=eps, k=2.0) for eps in PERTURBATIONS]
    return out


def _label(E: SetSpec) -> str:
    if isinstance(E, Halfspace):
        if E.dim == 1:
            return f"halfspace[{E.h[0]:+.0f}]"
        return f"halfspace[{math.degrees(math.atan2(E.h[1], E.h[0])):.2f}deg]"
    if isinstance(E, PerturbedHalfspace):
        return f"perturbed_halfspace[eps={E.eps:g},k={E.k:g}]"
    return E.name


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


@dataclass
class CandidateRecord:
    """One calibrated candidate.  ``margin`` = perimeter - halfspace baseline."""

    label: str
    family: str
    params: dict
    mass: float
    mass_error: float
    perimeter: float
    error_estimate: float
    method: str
    cross_value: float
    cross_error: float
    cross_method: str
    margin: float = 0.0
    tolerance: float = 0.0
    status: str = ""

    @property
    def route_gap(self) -> float:
        if not math.isfinite(self.cross_value):
            return math.nan
        return abs(self.perimeter - self.cross_value) / max(self.perimeter, 1e-300)

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "family": self.family,
            "params": self.params,
            "mass": self.mass,
            "mass_error": self.mass_error,
            "perimeter": self.perimeter,
            "error_estimate": self.error_estimate,
            "method": self.method,
            "cross_value": self.cross_value,
            "cross_error": self.cross_error,
            "cross_method": self.cross_method,
            "route_gap": self.route_gap,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "status": self.status,
        }


@dataclass
class IsoReport:
    """Outcome of an isoperimetric scan; serialisation has a fixed key order."""

    s: float
    m: float
    dim: int
    method: str
    cross_method: str
    records: list[CandidateRecord] = field(default_factory=list)
    baseline: float = math.nan
    baseline_error: float = 0.0
    rotation_spread: float = 0.0

    @property
    def violations(self) -> list[CandidateRecord]:
        return [r for r in self.records if r.status in ("violation", "tie", "route-mismatch")]

    @property
    def rotation_ok(self) -> bool:
        return self.rotation_spread <= ROTATION_TOL

    @property
    def passed(self) -> bool:
        return not self.violations and self.rotation_ok

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "m": self.m,
            "dim": self.dim,
            "method": self.method,
            "cross_method": self.cross_method,
            "mass_tolerance": MASS_TOL,
            "baseline": self.baseline,
            "baseline_error": self.baseline_error,
            "rotation_spread": self.rotation_spread,
            "rotation_ok": self.rotation_ok,
            "passed": self.passed,
            "candidates": [r.as_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.as_dict()), indent=2, ensure_ascii=False) + "\n"

    def to_csv(self) -> str:
        cols = ["label", "family", "mass", "perimeter", "error_estimate", "method", "cross_value",
                "cross_method", "route_gap", "margin", "tolerance", "status"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in self.records:
            d = r.as_dict()
            writer.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in cols])
        return buf.getvalue()


def _evaluate(E: SetSpec, m: float, s: float, method: str, cross_method: str | None) -> CandidateRecord:
    E = calibrate_mass(E, m)
    mass = E.gaussian_mass()
    use = method if (method != "semigroup" or E.has_decorrelation) else "spectral"
    main: PerimeterResult = frac_perimeter(E, s, method=use)
    cross_v, cross_e, cm = math.nan, math.nan, ""
    if cross_method and cross_method != use:
        other = frac_perimeter(E, s, method=cross_method)
        cross_v, cross_e, cm = other.value, other.error_estimate, cross_method
    return CandidateRecord(
        _label(E), E.name, _jsonable(E.describe()), mass, abs(mass - m), main.value, main.error_estimate, use,
        cross_v, cross_e, cm,
    )


def isoperimetric_scan(m: float, s: float, dim: int = 2, families=None, method: str = "semigroup",
                       cross_method: str | None = "spectral", candidates=None, workers: int | None = None) -> IsoReport:
    """Calibrate every candidate to mass m and compare perimeters.

    ``method`` gives the reported perimeter (the semigroup route falls back
    to the spectral one for sets without a decorrelation formula) and
    ``cross_method`` an independent second route.  A candidate's tolerance
    combines both sets' error estimates and the mass-matching error times
    the slope of the halfspace profile m -> P(m).  Statuses: ``baseline``
    (halfspaces), ``ok`` (margin > tolerance), ``tie`` (|margin| within
    tolerance), ``violation`` (margin < -tolerance) and ``route-mismatch``
    (the two routes differ by more than 2%).
    """
    if not 0.0 < m < 1.0:
        raise ValueError("mass must lie in (0, 1)")
    s = check_s(s)
    if s >= 0.5:
        raise ValueError("indicator perimeters are finite only for s < 1/2")
    sets = list(candidates) if candidates is not None else candidate_sets(dim, families)
    if not any(isinstance(E, Halfspace) for E in sets):
        sets.insert(0, Halfspace(dim))
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(lambda E: _evaluate(E, m, s, method, cross_method), sets))
    else:
        records = [_evaluate(E, m, s, method, cross_method) for E in sets]

    halves = [r for r in records if r.family == "halfspace"]
    vals = np.array([r.perimeter for r in halves])
    baseline = float(vals.min())
    base_err = max(r.error_estimate for r in halves)
    # slope of the halfspace profile: I(m) = phi(Phi^{-1}(m)) scales dP/dm
    h = 1e-4 * min(m, 1.0 - m)
    slope = abs(frac_perimeter(calibrate_mass(Halfspace(dim), m + h), s, method="spectral").value
                - frac_perimeter(calibrate_mass(Halfspace(dim), m - h), s, method="spectral").value) / (2 * h)
    report = IsoReport(s, m, dim, method, cross_method or "", records, baseline, base_err,
                       float(vals.max() - vals.min()))
    for r in records:
        r.margin = r.perimeter - baseline
        r.tolerance = r.error_estimate + base_err + slope * (r.mass_error + MASS_TOL)
        if r.family == "halfspace":
            r.status = "baseline"
        elif r.margin < -r.tolerance:
            r.status = "violation"
        elif r.margin <= r.tolerance:
            r.status = "tie"
        else:
            r.status = "ok"
        if math.isfinite(r.route_gap) and r.route_gap > ROUTE_TOL:
            r.status = "route-mismatch"
    return report
