"""CSV and flat-binary output writers.

All CSV values are printed with repr-faithful precision so identical runs
produce bitwise-identical files.  The snapshot format is a documented flat
binary: an int64 header (magic, version, element count, n1, n2, n3, order),
then node coordinates and per-node state as little-endian float64 blocks.
"""
from __future__ import annotations

import hashlib
import os
from typing import Iterable

import numpy as np

SNAPSHOT_MAGIC = 0x50485741  # "PHWA"
SNAPSHOT_VERSION = 1


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: str, header: Iterable[str], rows: Iterable) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_probe_csv(path: str, series: dict) -> None:
    rows = zip(series["t"], series["p"], series["u"], series["v"],
               series["w"])
    write_csv(path, ["t", "p", "u", "v", "w"], rows)


def write_entropy_csv(path: str, report) -> None:
    rows = zip(report.times, report.entropy, report.dissipation,
               report.residual)
    write_csv(path, ["t", "entropy", "dissipation", "residual"], rows)


def write_coefficient_csv(path: str, labelled_reports: list) -> None:
    header = ["label", "t_num", "r_num", "t_exact", "r_exact",
              "e_mod_t", "e_mod_r", "e_num_t", "e_num_r"]
    rows = []
    for label, r in labelled_reports:
        rows.append([label, r.t_num, r.r_num, r.t_exact, r.r_exact,
                     r.e_mod_t, r.e_mod_r,
                     "" if r.e_num_t is None else r.e_num_t,
                     "" if r.e_num_r is None else r.e_num_r])
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v)
                              for v in row) + "\n")


def write_angle_csv(path: str, times, angles) -> None:
    write_csv(path, ["t", "theta_t"], zip(times, angles))


def write_spreading_csv(path: str, report) -> None:
    rows = [("upper", r, p) for r, p in
            zip(report.radii_upper, report.peaks_upper)]
    rows += [("lower", r, p) for r, p in
             zip(report.radii_lower, report.peaks_lower)]
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write("side,radius,max_abs_p\n")
        for side, r, p in rows:
            fh.write(f"{side},{_fmt(r)},{_fmt(p)}\n")


def write_step_log(path: str, records) -> None:
    rows = [(r.step, r.t, r.dt, r.max_abs_p, r.max_abs_u) for r in records]
    write_csv(path, ["step", "t", "dt", "max_abs_p", "max_abs_u"], rows)


def write_snapshot(path: str, mesh, q: np.ndarray) -> None:
    """Flat binary field dump; layout documented in the README."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    n1, n2, n3 = mesh.node_shape
    header = np.array([SNAPSHOT_MAGIC, SNAPSHOT_VERSION, mesh.n_elements,
                       n1, n2, n3, max(mesh.orders)], dtype="<i8")
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(mesh.x, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(q, dtype="<f8").tobytes())


def read_snapshot(path: str):
    """Inverse of write_snapshot; returns (header dict, coords, state)."""
    with open(path, "rb") as fh:
        head = np.frombuffer(fh.read(7 * 8), dtype="<i8")
        if head[0] != SNAPSHOT_MAGIC:
            raise ValueError(f"not a snapshot file: {path}")
        k, n1, n2, n3 = int(head[2]), int(head[3]), int(head[4]), int(head[5])
        coords = np.frombuffer(fh.read(k * 3 * n1 * n2 * n3 * 8),
                               dtype="<f8").reshape(k, 3, n1, n2, n3)
        state = np.frombuffer(fh.read(k * 5 * n1 * n2 * n3 * 8),
                              dtype="<f8").reshape(k, 5, n1, n2, n3)
    meta = {"elements": k, "node_shape": (n1, n2, n3), "order": int(head[6]),
            "version": int(head[1])}
    return meta, coords, state


def write_manifest(path: str, config_text: str, wall_time: float,
                   n_steps: int) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    digest = hashlib.sha256(config_text.encode()).hexdigest()
    with open(path, "w") as fh:
        fh.write(f"config_sha256: {digest}\n")
        fh.write(f"wall_time_s: {wall_time:.3f}\n")
        fh.write(f"steps: {n_steps}\n")
