"""File formats: trajectories, samples, reports. All writes are atomic."""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile

import numpy as np

from .errors import SwarmfoldError


class FormatError(SwarmfoldError):
    pass


def atomic_write_text(path, text: str) -> None:
    """Write to a temp file in the target directory, then rename over path."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        # mkstemp creates 0600; give the result the usual umask-based mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(obj):
    """Convert numpy/complex data into plain JSON types.

    Complex numbers become [re, im] pairs; floats keep Python's shortest
    round-trip repr through the json module.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1))
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=1, allow_nan=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write_text(path, dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# trajectories


def _components(snap):
    """Flatten one snapshot into (N, C) real components."""
    s = np.asarray(snap)
    N = s.shape[0]
    flat = s.reshape(N, -1)
    if np.iscomplexobj(flat):
        out = np.empty((N, flat.shape[1] * 2))
        out[:, 0::2] = flat.real
        out[:, 1::2] = flat.imag
        return out
    return flat.astype(float)


def trajectory_metadata(traj) -> dict:
    from .dynamics import model_kind

    shape = list(np.asarray(traj.snapshots).shape[1:])
    return {
        "kind": model_kind(traj.model),
        "seed": int(traj.rng_seed),
        "dt": float(traj.step_size),
        "method": traj.method,
        "state_shape": shape,
        "complex": bool(np.iscomplexobj(traj.snapshots)),
    }


def trajectory_csv_text(traj) -> str:
    buf = _io.StringIO()
    buf.write("t,particle_id,component_index,value\n")
    for t, snap in zip(traj.times, traj.snapshots):
        comps = _components(snap)
        ts = fmt17(t)
        for p in range(comps.shape[0]):
            for c in range(comps.shape[1]):
                buf.write(f"{ts},{p},{c},{fmt17(comps[p, c])}\n")
    return buf.getvalue()


def write_trajectory_csv(path, traj) -> None:
    """CSV rows plus a sidecar ``<path>.meta.json`` holding seed, dt and method."""
    atomic_write_text(path, trajectory_csv_text(traj))
    write_json(os.fspath(path) + ".meta.json", trajectory_metadata(traj))


def read_trajectory_csv(path):
    """Return (times, values) with values shaped (T, N, C) in real components."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "particle_id", "component_index", "value"]:
            raise FormatError(f"unexpected trajectory header {header}")
        for r in reader:
            rows.append((float(r[0]), int(r[1]), int(r[2]), float(r[3])))
    if not rows:
        return np.empty(0), np.empty((0, 0, 0))
    arr = np.array(rows)
    times = np.unique(arr[:, 0])
    N = int(arr[:, 1].max()) + 1
    C = int(arr[:, 2].max()) + 1
    vals = arr[:, 3].reshape(len(times), N, C)
    return times, vals


def trajectory_json_obj(traj) -> dict:
    meta = trajectory_metadata(traj)
    return {"metadata": meta, "times": traj.times, "snapshots": traj.snapshots}


def write_trajectory_json(path, traj) -> None:
    write_json(path, trajectory_json_obj(traj))


def read_trajectory_json(path):
    """Return (metadata, times, snapshots) with complex data restored."""
    obj = read_json(path)
    meta = obj["metadata"]
    times = np.array(obj["times"], dtype=float)
    snaps = np.array(obj["snapshots"], dtype=float)
    if meta.get("complex"):
        snaps = snaps[..., 0] + 1j * snaps[..., 1]
    return meta, times, snaps


# ---------------------------------------------------------------------------
# samples


def samples_csv_text(points) -> str:
    pts = np.asarray(points)
    if pts.ndim == 1:
        pts = pts[:, None]
    comps = _components(pts)
    buf = _io.StringIO()
    buf.write("point_id,component_index,value\n")
    for i in range(comps.shape[0]):
        for c in range(comps.shape[1]):
            buf.write(f"{i},{c},{fmt17(comps[i, c])}\n")
    return buf.getvalue()


def write_samples_csv(path, points) -> None:
    atomic_write_text(path, samples_csv_text(points))


def read_samples_csv(path) -> np.ndarray:
    """Return samples as an (n, C) float array (a circle sample has C = 1)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["point_id", "component_index", "value"]:
            raise FormatError(f"unexpected samples header {header}")
        rows = [(int(r[0]), int(r[1]), float(r[2])) for r in reader]
    if not rows:
        raise FormatError("no samples in file")
    n = max(r[0] for r in rows) + 1
    C = max(r[1] for r in rows) + 1
    out = np.full((n, C), np.nan)
    for i, c, v in rows:
        out[i, c] = v
    if np.isnan(out).any():
        raise FormatError("samples file has missing entries")
    return out
