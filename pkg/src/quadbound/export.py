"""JSON and CSV files for branches and single gaits."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .continuation import Branch, BranchPoint, SpecialKind, SpecialPoint
from .model import ModelError, ModelParams
from .shoot import Z_NAMES, SolutionVector

BRANCH_FORMAT = "quadbound-branch/1"
SOLUTION_FORMAT = "quadbound-solution/1"


def _plain(v):
    """JSON-safe copy: arrays to lists, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, SolutionVector):
        return [float(x) for x in v.z]
    return v


def branch_to_dict(branch: Branch) -> dict:
    return {
        "format": BRANCH_FORMAT,
        "name": branch.name,
        "params": _plain(branch.params.to_mapping()),
        "step": branch.step,
        "termination": branch.termination,
        "columns": list(Z_NAMES),
        "points": [
            {"Z": [float(x) for x in p.z.z], "energy": float(p.energy), "label": p.label,
             "test": _plain(p.test), "sigma": _plain(p.sigma)}
            for p in branch.points
        ],
        "special": [
            {"kind": s.kind.value, "index": s.index, "Z": [float(x) for x in s.z.z], "energy": float(s.energy),
             "info": _plain(s.info)}
            for s in branch.special
        ],
    }


def branch_from_dict(d: dict) -> Branch:
    if d.get("format") != BRANCH_FORMAT:
        raise ModelError(f"not a branch file (format {d.get('format')!r})")
    params = ModelParams.from_mapping(d["params"])
    br = Branch(params, float(d["step"]), termination=d.get("termination", ""), name=d.get("name", ""))
    for p in d["points"]:
        br.points.append(BranchPoint(SolutionVector(p["Z"]), float(p["energy"]), p.get("label", ""),
                                     float(p.get("test", 0.0)), tuple(float(x) for x in p.get("sigma", (math.nan,) * 2))))
    for s in d["special"]:
        info = dict(s.get("info", {}))
        if "sigma" in info:
            info["sigma"] = tuple(float(x) for x in info["sigma"])
        br.special.append(SpecialPoint(SpecialKind(s["kind"]), int(s["index"]), SolutionVector(s["Z"]),
                                       float(s["energy"]), info))
    return br


def write_branch_json(branch: Branch, path: str | Path) -> None:
    Path(path).write_text(json.dumps(branch_to_dict(branch), indent=1) + "\n")


def read_branch_json(path: str | Path) -> Branch:
    try:
        return branch_from_dict(json.loads(Path(path).read_text()))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"{path}: malformed branch file ({exc})") from None


PLOT_COLUMNS = ("index", "E_tot", "xdot", "y", "alpha_F", "alpha_H", "phidot", "t_stride", "label", "special")


def write_branch_csv(branch: Branch, path: str | Path) -> None:
    """One row per point plus one per special point (flagged in the last column)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLOT_COLUMNS)

        def row(i, z, e, label, flag):
            w.writerow([i, repr(float(e))] + [repr(float(getattr(z, n))) for n in PLOT_COLUMNS[2:8]] + [label, flag])

        for i, p in enumerate(branch.points):
            row(i, p.z, p.energy, p.label, "")
        for s in branch.special:
            label = branch.points[s.index].label if 0 <= s.index < len(branch.points) else ""
            row(s.index, s.z, s.energy, label, s.kind.value)


def solution_to_dict(z: SolutionVector, params: ModelParams, label: str = "") -> dict:
    return {"format": SOLUTION_FORMAT, "params": _plain(params.to_mapping()), "label": label,
            "Z": {k: float(v) for k, v in z.to_dict().items()}}


def write_solution_json(z: SolutionVector, params: ModelParams, path: str | Path, label: str = "") -> None:
    Path(path).write_text(json.dumps(solution_to_dict(z, params, label), indent=1) + "\n")


def read_solution_json(path: str | Path) -> tuple[SolutionVector, ModelParams | None]:
    """A converged gait written by :func:`write_solution_json` (params may be absent)."""
    try:
        d = json.loads(Path(path).read_text())
        zd = d["Z"] if "Z" in d else d
        if isinstance(zd, list):
            z = SolutionVector(zd)
        else:
            unknown = set(zd) - set(Z_NAMES)
            if unknown:
                raise ModelError(f"{path}: unknown solution entries {sorted(unknown)}")
            z = SolutionVector.from_dict(zd)
        params = ModelParams.from_mapping(d["params"]) if "params" in d else None
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"{path}: malformed solution file ({exc})") from None
    return z, params
