"""Frame file I/O and a seeded synthetic scene generator.

File formats
------------
JSONL
    One frame per line::

        {"frame_id": 0, "points": [[x, y, z], ...],
         "keypoints": [[x, y, z], ...], "action_label": 3}

    ``keypoints`` and ``action_label`` are optional.
CSV
    ``frame_id,point_index,x,y,z`` with one row per point. Keypoints live in a
    sibling ``<name>.keypoints.csv`` with the same header, action labels in
    ``<name>.labels.csv`` (``frame_id,action_label``). Siblings are written only
    when there is something to put in them.

Floats are written with ``repr`` so reading back gives the identical double.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import DEFAULT_FRAME_SIZE, Frame

HUMAN, CLUTTER, PADDING = 0, 1, 2

# Rough standing-pose offsets from the body centroid (meters), 18 joints.
_SKELETON = np.array(
    [
        [0.00, 0.00, 0.80],  # head
        [0.00, 0.00, 0.60],  # neck
        [-0.20, 0.00, 0.55],
        [0.20, 0.00, 0.55],  # shoulders
        [-0.28, 0.02, 0.28],
        [0.28, 0.02, 0.28],  # elbows
        [-0.30, 0.05, 0.02],
        [0.30, 0.05, 0.02],  # wrists
        [0.00, 0.00, 0.30],  # chest
        [0.00, 0.00, 0.05],  # pelvis
        [-0.12, 0.00, 0.00],
        [0.12, 0.00, 0.00],  # hips
        [-0.12, 0.03, -0.42],
        [0.12, 0.03, -0.42],  # knees
        [-0.12, 0.00, -0.85],
        [0.12, 0.00, -0.85],  # ankles
        [-0.06, 0.04, 0.78],
        [0.06, 0.04, 0.78],  # eyes
    ]
)


class FrameFormatError(ValueError):
    """Raised for unreadable or inconsistent frame files."""


@dataclass
class FrameSet:
    frames: list[Frame] = field(default_factory=list)
    frame_size: int = DEFAULT_FRAME_SIZE
    num_keypoints: int = 0
    source: str = ""

    def __post_init__(self):
        for f in self.frames:
            if f.frame_size != self.frame_size:
                raise FrameFormatError(
                    f"frame {f.frame_id}: expected {self.frame_size} points, got {f.frame_size}"
                )

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __eq__(self, other):
        if not isinstance(other, FrameSet):
            return NotImplemented
        return (
            self.frame_size == other.frame_size
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )

    def by_id(self, frame_id: int) -> Frame:
        for f in self.frames:
            if f.frame_id == frame_id:
                return f
        raise KeyError(frame_id)


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        fmt = fmt.lower()
    elif path.suffix.lower() == ".csv":
        fmt = "csv"
    else:
        fmt = "jsonl"
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unsupported frame format {fmt!r}")
    return fmt


def _sibling(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}.{tag}{path.suffix}")


def _make_frameset(frames: list[Frame], frame_size: Optional[int], source: str) -> FrameSet:
    if frame_size is None:
        frame_size = frames[0].frame_size if frames else DEFAULT_FRAME_SIZE
    for f in frames:
        if f.frame_size != frame_size:
            raise FrameFormatError(f"frame {f.frame_id}: expected {frame_size} points, got {f.frame_size}")
    nk = max((len(f.keypoints) for f in frames if f.keypoints is not None), default=0)
    return FrameSet(frames, frame_size=frame_size, num_keypoints=nk, source=source)


def _parse_xyz_list(value, lineno: int, name: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FrameFormatError(f"line {lineno}: field {name!r} is not a numeric list") from exc
    if arr.size == 0:
        return arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise FrameFormatError(f"line {lineno}: field {name!r} must be a list of [x, y, z]")
    if not np.all(np.isfinite(arr)):
        raise FrameFormatError(f"line {lineno}: field {name!r} has non-finite values")
    return arr


def _load_jsonl(path: Path) -> list[Frame]:
    frames = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FrameFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise FrameFormatError(f"line {lineno}: record must be an object")
            for key in ("frame_id", "points"):
                if key not in rec:
                    raise FrameFormatError(f"line {lineno}: missing field {key!r}")
            fid = rec["frame_id"]
            if not isinstance(fid, int) or isinstance(fid, bool) or fid < 0:
                raise FrameFormatError(f"line {lineno}: field 'frame_id' must be a non-negative integer")
            points = _parse_xyz_list(rec["points"], lineno, "points")
            kps = None
            if rec.get("keypoints") is not None:
                kps = _parse_xyz_list(rec["keypoints"], lineno, "keypoints")
                if len(kps) == 0:
                    kps = None
            label = rec.get("action_label")
            if label is not None and (not isinstance(label, int) or isinstance(label, bool)):
                raise FrameFormatError(f"line {lineno}: field 'action_label' must be an integer")
            try:
                frames.append(Frame(fid, points, kps, label))
            except ValueError as exc:
                raise FrameFormatError(f"line {lineno}: {exc}") from exc
    return frames


def _read_point_csv(path: Path) -> dict[int, list]:
    rows: dict[int, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return rows
        if [h.strip() for h in header] != ["frame_id", "point_index", "x", "y", "z"]:
            raise FrameFormatError(f"{path.name} line 1: unexpected header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise FrameFormatError(f"{path.name} line {lineno}: expected 5 fields, got {len(row)}")
            names = ("frame_id", "point_index", "x", "y", "z")
            vals = []
            for name, raw in zip(names, row):
                try:
                    vals.append(int(raw) if name in ("frame_id", "point_index") else float(raw))
                except ValueError as exc:
                    raise FrameFormatError(f"{path.name} line {lineno}: bad value for field {name!r}") from exc
            if not all(math.isfinite(v) for v in vals[2:]):
                raise FrameFormatError(f"{path.name} line {lineno}: non-finite coordinate")
            fid, pidx = vals[0], vals[1]
            pts = rows.setdefault(fid, [])
            if pidx != len(pts):
                raise FrameFormatError(
                    f"{path.name} line {lineno}: field 'point_index' is {pidx}, expected {len(pts)}"
                )
            pts.append(vals[2:])
    return rows


def _load_csv(path: Path) -> list[Frame]:
    points = _read_point_csv(path)
    kp_path = _sibling(path, "keypoints")
    keypoints = _read_point_csv(kp_path) if kp_path.exists() else {}
    labels: dict[int, int] = {}
    lb_path = _sibling(path, "labels")
    if lb_path.exists():
        with open(lb_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for lineno, row in enumerate(reader, start=2):
                try:
                    labels[int(row["frame_id"])] = int(row["action_label"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise FrameFormatError(f"{lb_path.name} line {lineno}: bad label row") from exc
    return [
        Frame(fid, np.array(pts, dtype=np.float64).reshape(-1, 3),
              np.array(keypoints[fid]) if fid in keypoints else None, labels.get(fid))
        for fid, pts in points.items()
    ]


def load_frames(path, format: Optional[str] = None, frame_size: Optional[int] = None) -> FrameSet:
    """Read a frame file written in JSONL or CSV.

    When ``frame_size`` is None it is taken from the first frame; every frame
    must then have that many points.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    frames = _load_jsonl(path) if fmt == "jsonl" else _load_csv(path)
    return _make_frameset(frames, frame_size, source=str(path))


def _fmt(v: float) -> str:
    return repr(float(v))


def _xyz_json(arr: np.ndarray) -> str:
    return "[" + ",".join(f"[{_fmt(a)},{_fmt(b)},{_fmt(c)}]" for a, b, c in arr) + "]"


def write_frames(frames: FrameSet, path, format: Optional[str] = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for f in frames:
                parts = [f'"frame_id":{f.frame_id}', f'"points":{_xyz_json(f.points)}']
                if f.keypoints is not None:
                    parts.append(f'"keypoints":{_xyz_json(f.keypoints)}')
                if f.action_label is not None:
                    parts.append(f'"action_label":{int(f.action_label)}')
                fh.write("{" + ",".join(parts) + "}\n")
        return

    def dump(target: Path, attr: str) -> None:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame_id", "point_index", "x", "y", "z"])
            for f in frames:
                pts = getattr(f, attr)
                if pts is None:
                    continue
                for i, (x, y, z) in enumerate(pts):
                    w.writerow([f.frame_id, i, _fmt(x), _fmt(y), _fmt(z)])

    dump(path, "points")
    if any(f.keypoints is not None for f in frames):
        dump(_sibling(path, "keypoints"), "keypoints")
    if any(f.action_label is not None for f in frames):
        with open(_sibling(path, "labels"), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame_id", "action_label"])
            for f in frames:
                if f.action_label is not None:
                    w.writerow([f.frame_id, f.action_label])


# --------------------------------------------------------------------------
# synthetic scenes


@dataclass(frozen=True)
class SceneConfig:
    """Parameters of a single-person synthetic radar scene.

    Each frame is an independent sample: the body starts at a seeded random
    spot in front of the sensor and moves for ``frame_duration`` seconds.
    Points are laid out in temporal slots, so contiguous segments of the
    frame see the body at successive positions.

    ``reflectors`` adds that many static clutter objects (furniture, walls)
    of ``reflector_points`` returns each; these are clutter that DBSCAN will
    pick up as clusters, unlike the uniform ``clutter_points``.
    """

    num_frames: int = 10
    frame_size: int = DEFAULT_FRAME_SIZE
    human_points: tuple[int, int] = (60, 300)
    clutter_points: int = 40
    padding_fraction: Optional[float] = None
    trajectory: str = "linear"
    speed: float = 0.5
    noise_sigma: float = 0.12
    vertical_sigma: Optional[float] = None
    reflectors: int = 0
    reflector_points: int = 40
    reflector_sigma: float = 0.08
    frame_duration: float = 1.0
    num_keypoints: int = 18
    action_label: Optional[int] = None
    seed: int = 0
    # (low, high) corners of the regions used for placement
    body_region: tuple = ((-1.5, 1.5, 0.9), (1.5, 4.0, 0.9))
    clutter_box: tuple = ((-4.0, 0.5, 0.0), (4.0, 6.0, 2.5))

    def human_range(self) -> tuple[int, int]:
        if self.padding_fraction is not None:
            if not 0.0 <= self.padding_fraction <= 1.0:
                raise ValueError("padding_fraction must lie in [0, 1]")
            n = round(self.frame_size * (1.0 - self.padding_fraction)) - self.clutter_total
            return n, n
        lo, hi = self.human_points
        return int(lo), int(hi)

    @property
    def clutter_total(self) -> int:
        return self.clutter_points + self.reflectors * self.reflector_points

    def validate(self) -> "SceneConfig":
        lo, hi = self.human_range()
        if self.num_frames < 1 or self.frame_size < 1:
            raise ValueError("num_frames and frame_size must be positive")
        if lo < 0 or hi < lo:
            raise ValueError(f"bad human point range ({lo}, {hi})")
        if self.clutter_points < 0 or self.reflectors < 0 or self.reflector_points < 0:
            raise ValueError("clutter counts must be non-negative")
        if hi + self.clutter_total > self.frame_size:
            raise ValueError(
                f"infeasible scene: {hi} human + {self.clutter_total} clutter points exceed "
                f"frame_size {self.frame_size}"
            )
        if self.trajectory not in ("linear", "sinusoidal", "stationary"):
            raise ValueError(f"unknown trajectory {self.trajectory!r}")
        if self.noise_sigma < 0 or (self.vertical_sigma is not None and self.vertical_sigma < 0):
            raise ValueError("noise_sigma must be non-negative")
        if self.num_keypoints < 0 or self.num_keypoints > len(_SKELETON):
            raise ValueError(f"num_keypoints must be in [0, {len(_SKELETON)}]")
        return self


@dataclass
class GroundTruth:
    """Per-frame oracle: body centroid at mid-frame and per-point origin labels
    (0 human, 1 clutter, 2 padding)."""

    frame_ids: list[int]
    body_centroids: np.ndarray
    origin_labels: np.ndarray
    # per frame, per point: 0-based reflector id or -1
    reflector_ids: Optional[np.ndarray] = None

    def __eq__(self, other):
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return (
            self.frame_ids == other.frame_ids
            and np.array_equal(self.body_centroids, other.body_centroids)
            and np.array_equal(self.origin_labels, other.origin_labels)
        )


def _body_path(cfg: SceneConfig, start: np.ndarray, heading: float, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)[:, None]
    direction = np.array([math.cos(heading), math.sin(heading), 0.0])
    if cfg.trajectory == "stationary":
        return np.repeat(start[None, :], len(t), axis=0)
    pos = start + direction * cfg.speed * t
    if cfg.trajectory == "sinusoidal":
        lateral = np.array([-direction[1], direction[0], 0.0])
        pos = pos + lateral * 0.25 * np.sin(2.0 * math.pi * t / cfg.frame_duration)
    return pos


def synthesize_scene(config: SceneConfig) -> tuple[FrameSet, GroundTruth]:
    cfg = config.validate()
    rng = np.random.default_rng(cfg.seed)
    lo_h, hi_h = cfg.human_range()
    body_lo, body_hi = (np.asarray(c, dtype=np.float64) for c in cfg.body_region)
    box_lo, box_hi = (np.asarray(c, dtype=np.float64) for c in cfg.clutter_box)
    vsig = cfg.noise_sigma if cfg.vertical_sigma is None else cfg.vertical_sigma
    sigma = np.array([cfg.noise_sigma, cfg.noise_sigma, vsig])

    frames, centroids, labels, refl_ids = [], [], [], []
    slot_t = (np.arange(cfg.frame_size) + 0.5) / cfg.frame_size * cfg.frame_duration
    for fid in range(cfg.num_frames):
        start = rng.uniform(body_lo, body_hi)
        heading = rng.uniform(0.0, 2.0 * math.pi)
        n_h = int(rng.integers(lo_h, hi_h + 1))

        # static reflectors kept away from the body path in xy
        path_ends = _body_path(cfg, start, heading, np.array([0.0, cfg.frame_duration]))
        centers = []
        while len(centers) < cfg.reflectors:
            c = rng.uniform(box_lo, box_hi)
            c[2] = rng.uniform(0.3, 1.5)
            if all(np.hypot(*(c[:2] - e[:2])) >= 1.5 for e in path_ends) and all(
                np.hypot(*(c[:2] - o[:2])) >= 1.0 for o in centers
            ):
                centers.append(c)

        order = rng.permutation(cfg.frame_size)
        human_slots = np.sort(order[:n_h])
        n_u = cfg.clutter_points
        clutter_slots = np.sort(order[n_h:n_h + n_u])
        n_r = cfg.reflectors * cfg.reflector_points
        refl_slots = order[n_h + n_u:n_h + n_u + n_r]

        pts = np.zeros((cfg.frame_size, 3))
        lab = np.full(cfg.frame_size, PADDING, dtype=np.int8)
        rid = np.full(cfg.frame_size, -1, dtype=np.int16)

        body = _body_path(cfg, start, heading, slot_t[human_slots])
        pts[human_slots] = body + rng.normal(size=(n_h, 3)) * sigma
        lab[human_slots] = HUMAN

        pts[clutter_slots] = rng.uniform(box_lo, box_hi, size=(n_u, 3))
        lab[clutter_slots] = CLUTTER

        if n_r:
            owner = np.repeat(np.arange(cfg.reflectors), cfg.reflector_points)
            spread = rng.normal(size=(n_r, 3)) * cfg.reflector_sigma
            pts[refl_slots] = np.asarray(centers)[owner] + spread
            lab[refl_slots] = CLUTTER
            rid[refl_slots] = owner

        mid = _body_path(cfg, start, heading, np.array([0.5 * cfg.frame_duration]))[0]
        kps = None
        if cfg.num_keypoints:
            kps = mid + _SKELETON[: cfg.num_keypoints] + rng.normal(size=(cfg.num_keypoints, 3)) * 0.02
        frames.append(Frame(fid, pts, kps, cfg.action_label))
        centroids.append(mid)
        labels.append(lab)
        refl_ids.append(rid)

    fs = FrameSet(frames, frame_size=cfg.frame_size, num_keypoints=cfg.num_keypoints, source="synthetic")
    truth = GroundTruth(
        list(range(cfg.num_frames)), np.asarray(centroids), np.asarray(labels), np.asarray(refl_ids)
    )
    return fs, truth


def write_ground_truth(truth: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for fid, c, lab in zip(truth.frame_ids, truth.body_centroids, truth.origin_labels):
            body = ",".join(_fmt(v) for v in c)
            fh.write(
                f'{{"frame_id":{fid},"body_centroid":[{body}],'
                f'"origin_labels":[{",".join(str(int(v)) for v in lab)}]}}\n'
            )


def load_ground_truth(path) -> GroundTruth:
    ids, cents, labs = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ids.append(int(rec["frame_id"]))
                cents.append([float(v) for v in rec["body_centroid"]])
                labs.append([int(v) for v in rec["origin_labels"]])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FrameFormatError(f"line {lineno}: bad ground-truth record") from exc
    return GroundTruth(ids, np.asarray(cents).reshape(-1, 3), np.asarray(labs, dtype=np.int8))
