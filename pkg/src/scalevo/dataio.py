"""File formats: trajectory text files, correspondence/scale CSVs, config files.

Trajectories are plain text, one frame per line, 12 floats forming the
row-major 3x4 camera-to-world matrix [R | t]. Writers are deterministic
(fixed float formatting) so written files can be compared byte for byte.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .correction import TriggerEvent
from .errors import ConfigError, InvalidInputError, TrajectoryParseError
from .geometry import Correspondences, Pose

_FLOAT_FMT = "%.9g"

CORR_HEADER = ["frame", "x1", "y1", "x2", "y2", "roi"]
SCALES_HEADER = ["frame", "scale", "status"]
SWEEP_HEADER = ["sigma", "speed", "method", "mean_rel_err", "std_rel_err", "trials", "failures"]
TRIGGER_HEADER = ["frame_id", "lambda", "action"]


def _fmt(x: float) -> str:
    return _FLOAT_FMT % x


# ---------------------------------------------------------------------------
# trajectories


def parse_trajectory(source) -> list[Pose]:
    """Read camera-to-world poses from a path or an iterable of lines."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return parse_trajectory(fh)
    poses = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 12:
            raise TrajectoryParseError(
                lineno, f"expected 12 values per line, got {len(fields)}"
            )
        try:
            vals = np.array([float(f) for f in fields]).reshape(3, 4)
        except ValueError as exc:
            raise TrajectoryParseError(lineno, f"bad float: {exc}") from exc
        if not np.all(np.isfinite(vals)):
            raise TrajectoryParseError(lineno, "non-finite value in pose")
        try:
            poses.append(Pose(vals[:, :3], vals[:, 3]))
        except InvalidInputError as exc:
            raise TrajectoryParseError(lineno, str(exc)) from exc
    return poses


def write_trajectory(poses: Iterable[Pose], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pose in poses:
            mat = np.hstack([pose.R, pose.t.reshape(3, 1)])
            fh.write(" ".join(_fmt(v) for v in mat.ravel()) + "\n")


# ---------------------------------------------------------------------------
# correspondence CSV: frame,x1,y1,x2,y2,roi


def write_correspondences(frames: dict, path) -> None:
    """`frames` maps frame id -> (corrs_all, corrs_roi); rows of corrs_roi are
    flagged roi=1, remaining corrs_all rows roi=0.

    When corrs_roi is the tail of corrs_all (the usual layout) those rows are
    written once, flagged 1, so reading the file back reproduces corrs_all."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CORR_HEADER)
        for frame_id in sorted(frames):
            corrs_all, corrs_roi = frames[frame_id]
            plain = corrs_all
            if corrs_all is not None and corrs_roi is not None:
                n = len(corrs_roi.x1)
                if (
                    len(corrs_all.x1) >= n
                    and np.array_equal(corrs_all.x1[-n:], corrs_roi.x1)
                    and np.array_equal(corrs_all.x2[-n:], corrs_roi.x2)
                ):
                    plain = Correspondences(corrs_all.x1[:-n], corrs_all.x2[:-n])
            for corrs, flag in ((plain, 0), (corrs_roi, 1)):
                if corrs is None or len(corrs.x1) == 0:
                    continue
                for (u1, v1), (u2, v2) in zip(corrs.x1, corrs.x2):
                    writer.writerow(
                        [frame_id, _fmt(u1), _fmt(v1), _fmt(u2), _fmt(v2), flag]
                    )


def read_correspondences(path) -> dict:
    """Returns frame id -> (corrs_all, corrs_roi). corrs_all holds every row of
    the frame; corrs_roi only the rows flagged roi=1 (None when absent)."""
    rows: dict[int, list] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CORR_HEADER:
            raise InvalidInputError(f"expected header {','.join(CORR_HEADER)}")
        for record in reader:
            if not record:
                continue
            if len(record) != 6:
                raise InvalidInputError(f"expected 6 columns, got {len(record)}")
            frame = int(record[0])
            x1, y1, x2, y2 = (float(v) for v in record[1:5])
            roi = int(record[5])
            if roi not in (0, 1):
                raise InvalidInputError("roi flag must be 0 or 1")
            rows.setdefault(frame, []).append((x1, y1, x2, y2, roi))
    out = {}
    for frame, recs in rows.items():
        arr = np.asarray(recs, dtype=float)
        corrs_all = Correspondences(arr[:, 0:2], arr[:, 2:4])
        roi_mask = arr[:, 4] == 1
        corrs_roi = (
            Correspondences(arr[roi_mask, 0:2], arr[roi_mask, 2:4])
            if np.any(roi_mask)
            else None
        )
        out[frame] = (corrs_all, corrs_roi)
    return out


# ---------------------------------------------------------------------------
# scale CSV: frame,scale,status


class ScaleRecord(NamedTuple):
    frame: int
    scale: float  # nan when the frame produced no usable estimate
    status: str  # "ok" or a short failure tag


def write_scales(records: Iterable[ScaleRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCALES_HEADER)
        for rec in records:
            scale = _fmt(rec.scale) if math.isfinite(rec.scale) else "nan"
            writer.writerow([rec.frame, scale, rec.status])


def read_scales(path) -> list[ScaleRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCALES_HEADER:
            raise InvalidInputError(f"expected header {','.join(SCALES_HEADER)}")
        for record in reader:
            if not record:
                continue
            if len(record) != 3:
                raise InvalidInputError(f"expected 3 columns, got {len(record)}")
            records.append(ScaleRecord(int(record[0]), float(record[1]), record[2]))
    return records


# ---------------------------------------------------------------------------
# sweep CSV: sigma,speed,method,mean_rel_err,std_rel_err,trials,failures


def write_sweep(cells, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for c in cells:
            speed = c.speed if isinstance(c.speed, str) else _fmt(c.speed)
            writer.writerow(
                [
                    _fmt(c.sigma),
                    speed,
                    c.method,
                    _fmt(c.mean_rel_err) if math.isfinite(c.mean_rel_err) else "nan",
                    _fmt(c.std_rel_err) if math.isfinite(c.std_rel_err) else "nan",
                    c.trials,
                    c.failures,
                ]
            )


# ---------------------------------------------------------------------------
# trigger log: frame_id,lambda,action


def write_trigger_log(events: Iterable[TriggerEvent], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIGGER_HEADER)
        for ev in events:
            writer.writerow([ev.frame_id, _fmt(ev.ratio), ev.action])


def read_trigger_log(path) -> list[TriggerEvent]:
    events = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRIGGER_HEADER:
            raise InvalidInputError(f"expected header {','.join(TRIGGER_HEADER)}")
        for record in reader:
            if not record:
                continue
            events.append(TriggerEvent(int(record[0]), float(record[1]), record[2]))
    return events


# ---------------------------------------------------------------------------
# config files: key=value lines, '#' comments


def parse_config(source) -> dict:
    """Parse key=value lines into a string dict; no interpretation here."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return parse_config(fh)
    out: dict[str, str] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def config_float(cfg: dict, key: str, default: float) -> float:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {cfg[key]!r}") from exc


def config_int(cfg: dict, key: str, default: int) -> int:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {cfg[key]!r}") from exc


def config_vec3(cfg: dict, key: str, default) -> np.ndarray:
    if key not in cfg:
        return np.asarray(default, dtype=float)
    parts = cfg[key].split(",")
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected three comma-separated numbers")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected numbers, got {cfg[key]!r}") from exc


def check_known_keys(cfg: dict, allowed: Iterable[str]) -> None:
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
