"""Readers and writers for chains, partitions, matrices and report directories.

Chain files are CSV with a first line ``n=<k>`` followed by ``k`` rows of
``k`` numbers, or JSON ``{"n": k, "pi": [[...]]}``.  Numbers are written
with 17 significant digits so that a write/read round trip is exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .chain import TransitionModel, validate
from .errors import DimensionMismatch, ValidationError
from .partition import BinaryPartition, ProbabilisticPartition


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header_fields(line: str) -> dict:
    out = {}
    for part in line.strip().split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise ValidationError(f"malformed header {line.strip()!r}")
        try:
            out[key.strip()] = int(value)
        except ValueError:
            raise ValidationError(f"malformed header {line.strip()!r}") from None
    return out


def _read_rows(lines, width: int, count: int) -> np.ndarray:
    rows = [r for r in csv.reader(lines) if r and any(c.strip() for c in r)]
    if len(rows) != count or any(len(r) != width for r in rows):
        raise DimensionMismatch(f"expected {count} rows of {width} values")
    try:
        return np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"non-numeric entry: {exc}") from None


def _write_rows(fh, mat: np.ndarray) -> None:
    for row in np.atleast_2d(mat):
        fh.write(",".join(fmt(x) for x in row) + "\n")


# ---------------------------------------------------------------------------
# chains


def write_chain(model: TransitionModel, path, format: str = "csv") -> None:
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps({"n": model.n, "pi": model.pi.tolist()}) + "\n")
        return
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"n={model.n}\n")
        _write_rows(fh, model.pi)


def read_chain(path, check: bool = True) -> TransitionModel:
    """Load a chain from CSV or JSON (chosen by content) and validate it."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
            n = int(data["n"])
            pi = np.asarray(data["pi"], dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"malformed chain JSON: {exc}") from None
        if pi.shape != (n, n):
            raise DimensionMismatch(f"declared n={n} but matrix is {pi.shape}")
    else:
        lines = text.splitlines()
        if not lines:
            raise ValidationError("empty chain file")
        n = _header_fields(lines[0]).get("n")
        if n is None:
            raise ValidationError("chain header must be n=<integer>")
        pi = _read_rows(lines[1:], n, n)
    model = TransitionModel(pi)
    if check:
        validate(model)
    return model


# ---------------------------------------------------------------------------
# partitions and plain matrices


def write_partition(part, path) -> None:
    psi = part.matrix() if isinstance(part, BinaryPartition) else part.psi
    n, m = psi.shape
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"n={n},m={m}\n")
        _write_rows(fh, psi)


def read_partition(path) -> ProbabilisticPartition:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValidationError("empty partition file")
    head = _header_fields(lines[0])
    if "n" not in head or "m" not in head:
        raise ValidationError("partition header must be n=<..>,m=<..>")
    return ProbabilisticPartition(_read_rows(lines[1:], head["m"], head["n"]))


def write_assignment(part: BinaryPartition, path) -> None:
    Path(path).write_text(",".join(str(int(a)) for a in part.assignment) + "\n")


def write_matrix(mat, path, format: str = "csv") -> None:
    mat = np.atleast_2d(np.asarray(mat, float))
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps({"rows": mat.shape[0], "cols": mat.shape[1], "data": mat.tolist()}) + "\n")
        return
    with path.open("w", encoding="utf-8") as fh:
        _write_rows(fh, mat)


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return np.asarray(json.loads(text)["data"], dtype=float)
    return np.array([[float(c) for c in r] for r in csv.reader(text.splitlines()) if r])


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _csv_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return fmt(x)


def write_table(rows, header, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_value(x) for x in row) + "\n")


# ---------------------------------------------------------------------------
# reports


def write_solve_report(report, outdir, format: str = "csv", extra: dict | None = None) -> Path:
    """``psi``, ``alpha``, ``theta``, ``phi``, ``trace`` and ``meta.json`` in ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "json" if format == "json" else "csv"
    if format == "json":
        write_matrix(report.final_partition.psi, out / f"psi.{ext}", "json")
    else:
        write_partition(report.final_partition, out / "psi.csv")
    write_matrix(report.final_alpha.alpha[None, :], out / f"alpha.{ext}", format)
    write_matrix(report.final_theta.theta, out / f"theta.{ext}", format)
    write_matrix(report.final_phi.phi, out / f"phi.{ext}", format)
    write_table(
        [
            (r.iteration, r.energy.expected_distortion, r.energy.mutual_information, r.energy.free_energy, r.cross_entropy)
            for r in report.trace
        ],
        ["iter", "expected_distortion", "mutual_information", "free_energy", "cross_entropy"],
        out / "trace.csv",
    )
    meta = {
        "beta": report.beta,
        "variant": report.variant,
        "seed": report.seed,
        "iterations": report.iterations,
        "stalled": report.stalled,
        "m": report.m,
        "free_energy": report.energy.free_energy,
        "expected_distortion": report.energy.expected_distortion,
        "mutual_information": report.energy.mutual_information,
    }
    meta.update(extra or {})
    write_json(meta, out / "meta.json")
    return out


SWEEP_HEADER = ["beta", "m", "distortion", "MI", "free_energy", "is_critical", "is_corrected"]


def write_sweep(sweep_report, outdir) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(
        [
            (r.beta, r.m, r.distortion, r.mutual_information, r.free_energy, r.is_critical, r.is_corrected)
            for r in sweep_report.sorted_rows()
        ],
        SWEEP_HEADER,
        out / "sweep.csv",
    )
    write_json(
        [{"beta_c": c.beta_c, "group_split": c.group_index} for c in sweep_report.criticals],
        out / "criticals.json",
    )
    return out


def write_scaling(scaling, outdir) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(scaling.points, ["epsilon", "seed", "l1_error"], out / "ncd_scaling.csv")
    write_json(
        {"slope": scaling.slope, "intercept": scaling.intercept, "r2": scaling.r2, "phi_slope": scaling.phi_slope},
        out / "ncd_fit.json",
    )
    return out


__all__ = [
    "read_chain",
    "read_matrix",
    "read_partition",
    "write_assignment",
    "write_chain",
    "write_json",
    "write_matrix",
    "write_partition",
    "write_scaling",
    "write_solve_report",
    "write_sweep",
    "write_table",
]
