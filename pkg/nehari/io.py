"""
io.py

Result files: state and curve CSVs, JSON sidecars and the curve figure.

Nothing written here carries a timestamp, so identical runs give identical
bytes.
"""

import csv
import json
import math
import pathlib

import numpy as np

STATE_COLUMNS = {"r", "x"}
CURVE_HEADER = ["c", "lambda", "grad_norm", "fiber_t"]


def _fmt(value) -> str:
    if value is None:
        return ""
    return "%.17g" % value


def write_state_csv(path, coords, values, coordinate_name: str = "r") -> pathlib.Path:
    if coordinate_name not in STATE_COLUMNS:
        raise ValueError(f"Unknown coordinate column '{coordinate_name}' (expected r or x)")
    coords = np.asarray(coords, dtype=float)
    values = np.asarray(values, dtype=float)
    if coords.shape != values.shape:
        raise ValueError(f"Coordinates {coords.shape} and values {values.shape} differ in shape")
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([coordinate_name, "u"])
        for x, u in zip(coords, values):
            writer.writerow([_fmt(x), _fmt(u)])
    return path


def read_state_csv(path) -> tuple[str, np.ndarray, np.ndarray]:
    """Return (coordinate_name, coords, values); ValueError on anything malformed."""
    path = pathlib.Path(path)
    if not path.exists():
        raise FileNotFoundError(f"State file not found: {path}")
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"State file {path} is empty")
    header = [h.strip() for h in rows[0]]
    if len(header) != 2 or header[0] not in STATE_COLUMNS or header[1] != "u":
        raise ValueError(f"State file {path} must start with header 'r,u' or 'x,u', got {','.join(header)!r}")
    coords, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            x, u = float(row[0]), float(row[1])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        if not (math.isfinite(x) and math.isfinite(u)):
            raise ValueError(f"{path}:{lineno}: non-finite value")
        coords.append(x)
        values.append(u)
    if not coords:
        raise ValueError(f"State file {path} has no data rows")
    return header[0], np.array(coords), np.array(values)


def write_curve_csv(path, curve) -> pathlib.Path:
    """Successful points only, ordered by c."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for pt in curve.ok_points:
            writer.writerow([_fmt(pt.c), _fmt(pt.lambda_), _fmt(pt.grad_norm), _fmt(pt.fiber_t)])
    return path


def read_curve_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CURVE_HEADER:
            raise ValueError(f"Curve file {path} must have header {','.join(CURVE_HEADER)}")
        return [{k: float(v) for k, v in row.items()} for row in reader]


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps_json(data) -> str:
    return json.dumps(_clean(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path, data) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_json(data))
    return path


def plot_curve_svg(path, curves, lambda1: float | None = None, lambda_target: float | None = None,
                   title: str = "") -> pathlib.Path:
    """
    Energy curves as SVG, lambda on the horizontal axis and c on the vertical.

    ``curves`` is a list of (label, Curve). A configured lambda_target is
    drawn as a dashed vertical line; lambda1 as a dotted one.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "nehari", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, 6))
        for label, curve in curves:
            ok = curve.ok_points
            ax.plot([pt.lambda_ for pt in ok], [pt.c for pt in ok], marker="o", markersize=3, label=label)
        if lambda1 is not None:
            ax.axvline(lambda1, color="gray", linestyle="dotted", linewidth=1.5,
                       label=f"lambda_1 = {lambda1:.6g}")
        if lambda_target is not None:
            ax.axvline(lambda_target, color="red", linestyle="dashed", linewidth=1.5,
                       label=f"lambda = {lambda_target:.6g}")
        ax.set_xlabel("lambda_{c,1}")
        ax.set_ylabel("c")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
