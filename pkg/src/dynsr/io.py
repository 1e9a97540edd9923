"""Plain-text serialization: CSV tables for sources and measurements, TOML configs.

Parameter-set CSV columns::

    amplitude_re, amplitude_im, y_1..y_d, v_1..v_d, tau

Measurement CSV has ``#key=value`` metadata lines (omega_max, sigma, seed,
scheme, spacing) followed by columns ``t, omega_1..omega_d, re, im``, one row
per frame and node.  Floats are written with 17 significant digits so a file
reads back to the same doubles.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DynsrError
from .model import FrequencyGrid, MeasurementSet, ParameterSet

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib


def fmt(x) -> str:
    """Deterministic text for a cell value."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return "" if x is None else str(x)


def parse_cell(text: str):
    """Inverse of :func:`fmt` for ints, floats and plain strings; '' is None."""
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _open_for_write(path):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise DynsrError(f"cannot write {path}: {exc.strerror}") from exc


def _open_for_read(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DynsrError(f"cannot read {path}: {exc.strerror}") from exc


def parameter_rows(ps: ParameterSet) -> tuple[list[str], list[list[str]]]:
    d = ps.dim
    header = ["amplitude_re", "amplitude_im"] + [f"y_{i + 1}" for i in range(d)] + [f"v_{i + 1}" for i in range(d)] + ["tau"]
    rows = []
    for a, y, v in zip(ps.amplitudes, ps.locations, ps.velocities):
        rows.append([fmt(a.real), fmt(a.imag)] + [fmt(c) for c in y] + [fmt(c) for c in v] + [fmt(ps.tau)])
    return header, rows


def write_parameter_set(ps: ParameterSet, path) -> None:
    header, rows = parameter_rows(ps)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_parameter_set(path) -> ParameterSet:
    with _open_for_read(path) as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DynsrError(f"{path}: no parameter rows")
    header = rows[0]
    d = sum(1 for h in header if h.startswith("y_"))
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise DynsrError(f"{path}: non-numeric entry ({exc})") from exc
    if data.shape[1] != 3 + 2 * d:
        raise DynsrError(f"{path}: expected {3 + 2 * d} columns")
    taus = np.unique(data[:, -1])
    if len(taus) != 1:
        raise DynsrError(f"{path}: rows disagree on tau")
    amps = data[:, 0] + 1j * data[:, 1]
    return ParameterSet(amps, data[:, 2 : 2 + d], data[:, 2 + d : 2 + 2 * d], tau=float(taus[0]))


def format_measurement_set(meas: MeasurementSet) -> str:
    d = meas.dim
    g = meas.grid
    buf = io.StringIO()
    meta = {
        "omega_max": g.omega_max,
        "sigma": meas.sigma,
        "seed": meas.seed,
        "scheme": g.scheme,
        "spacing": g.spacing,
        "covering_radius": g.covering_radius,
    }
    for k, v in meta.items():
        buf.write(f"#{k}={fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"omega_{i + 1}" for i in range(d)] + ["re", "im"])
    for t in range(meas.T + 1):
        for node, val in zip(g.nodes, meas.frames[t]):
            w.writerow([t] + [fmt(c) for c in node] + [fmt(val.real), fmt(val.imag)])
    return buf.getvalue()


def write_measurement_set(meas: MeasurementSet, path) -> None:
    text = format_measurement_set(meas)
    with _open_for_write(path) as fh:
        fh.write(text)


def read_measurement_set(path) -> MeasurementSet:
    meta: dict[str, object] = {}
    lines = []
    with _open_for_read(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = parse_cell(val)
            elif line.strip():
                lines.append(line)
    rows = list(csv.reader(lines))
    if len(rows) < 2:
        raise DynsrError(f"{path}: no measurement rows")
    d = len(rows[0]) - 3
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise DynsrError(f"{path}: non-numeric entry ({exc})") from exc
    t = data[:, 0].astype(int)
    T = int(t.max())
    count = np.bincount(t)
    if np.any(count != count[0]):
        raise DynsrError(f"{path}: frames have different node counts")
    M = int(count[0])
    nodes = data[t == 0, 1 : 1 + d]
    frames = np.empty((T + 1, M), dtype=complex)
    for k in range(T + 1):
        sel = data[t == k]
        if not np.array_equal(sel[:, 1 : 1 + d], nodes):
            raise DynsrError(f"{path}: frame {k} uses different nodes")
        frames[k] = sel[:, 1 + d] + 1j * sel[:, 2 + d]
    omega_max = meta.get("omega_max")
    if omega_max is None:
        omega_max = float(np.max(np.linalg.norm(nodes, axis=1)))
    grid = FrequencyGrid(
        float(omega_max),
        nodes,
        str(meta.get("scheme") or "cartesian"),
        _opt_float(meta.get("spacing")),
        _opt_float(meta.get("covering_radius")),
    )
    sigma = _opt_float(meta.get("sigma"))
    seed = meta.get("seed")
    return MeasurementSet(grid, frames, sigma, int(seed) if seed is not None else None)


def _opt_float(v):
    return None if v is None else float(v)


def load_config(path) -> dict:
    """Read a TOML experiment definition into a plain dict."""
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
