"""Dataset curation: class filtering, crop extraction, box verdicts,
train/test splitting, and assembly of detector-ready image + label trees.

The pipeline keeps only sequences that contain the target class, pairs
each annotated 10 ms window with its representation images and a YOLO
label file, verifies every box (built-in density heuristic or an
external verdict file), drops frames with no accepted box, and splits by
sequence so near-duplicate frames never straddle train and test. Given
the same inputs and seed the output is byte-identical.
"""
from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateBoxError, ParseError, UnknownReferenceError
from .events import EventStream, SensorGeometry, normalize_stream, validate_stream
from .formats import (
    AnnotationRecord,
    clip_box_to_plane,
    export_image,
    read_annotations_csv,
    read_events_csv,
    read_events_evt1,
    write_yolo_labels,
)
from .representations import (
    DEFAULT_FUSION_ORDER,
    REP_FUSION,
    SINGLE_CHANNEL_KINDS,
    event_frame,
    fuse,
    quantize_signed,
    render_plane,
)
from .windowing import PixelStateMap, WindowConfig, window_index, window_map

log = logging.getLogger(__name__)

VERDICT_ACCEPTED = "accepted"
VERDICT_REJECTED = "rejected"
VERDICT_UNVERIFIED = "unverified"

REP_EXTERNAL = "external-reconstruction"
KNOWN_REPS = SINGLE_CHANNEL_KINDS + (REP_FUSION,)
MANIFEST_NAME = "manifest.jsonl"
MANIFEST_FORMAT = "evrep-manifest-v1"
VERDICTS_CSV_HEADER = "sequence,window,box_index,verdict"

SPLIT_TRAIN = "train"
SPLIT_TEST = "test"


@dataclass
class FrameRecord:
    """One emitted frame: a (sequence, window, representation) triple with
    its image path, shared label path, boxes, and per-box verdicts."""

    sequence: str
    window: int
    rep: str
    image: str
    label: str
    boxes: list[AnnotationRecord] = field(default_factory=list)
    verdicts: list[str] = field(default_factory=list)
    split: str | None = None

    def __post_init__(self) -> None:
        if self.window < 0:
            raise ValueError("window ordinal must be non-negative")
        if len(self.boxes) != len(self.verdicts):
            raise ValueError("one verdict per box required")

    def accepted_boxes(self) -> list[AnnotationRecord]:
        return [b for b, v in zip(self.boxes, self.verdicts) if v == VERDICT_ACCEPTED]

    def to_json(self) -> str:
        payload = {
            "sequence": self.sequence,
            "window": self.window,
            "rep": self.rep,
            "image": self.image,
            "label": self.label,
            "boxes": [[b.t, b.x, b.y, b.w, b.h, b.class_id, b.track_id, b.confidence]
                      for b in self.boxes],
            "verdicts": self.verdicts,
            "split": self.split,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "FrameRecord":
        d = json.loads(text)
        boxes = [AnnotationRecord(*row) for row in d["boxes"]]
        return cls(sequence=d["sequence"], window=d["window"], rep=d["rep"],
                   image=d["image"], label=d["label"], boxes=boxes,
                   verdicts=list(d["verdicts"]), split=d["split"])


@dataclass
class DatasetManifest:
    """Everything the pipeline emitted: frame records plus the parameters
    that produced them."""

    geometry: SensorGeometry
    tau_us: int
    params: dict
    records: list[FrameRecord] = field(default_factory=list)

    def sequences(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.sequence, None)
        return list(seen)


def write_manifest(manifest: DatasetManifest, dest) -> None:
    """Line-delimited JSON: one header line, then one line per record."""
    header = {
        "format": MANIFEST_FORMAT,
        "geometry": [manifest.geometry.width, manifest.geometry.height],
        "tau_us": manifest.tau_us,
        "params": manifest.params,
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines.extend(r.to_json() for r in manifest.records)
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text, encoding="ascii")


def read_manifest(source) -> DatasetManifest:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="ascii")
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ParseError("empty manifest", line=1)
    header = json.loads(lines[0])
    if header.get("format") != MANIFEST_FORMAT:
        raise ParseError(f"unknown manifest format {header.get('format')!r}", line=1)
    geometry = SensorGeometry(*header["geometry"])
    records = [FrameRecord.from_json(ln) for ln in lines[1:]]
    return DatasetManifest(geometry, header["tau_us"], header["params"], records)


# ---------------------------------------------------------------------------
# Filtering, crops, verdicts, split
# ---------------------------------------------------------------------------

def filter_sequences_by_class(
    annotations_by_sequence: Mapping[str, Sequence[AnnotationRecord]],
    class_id: int,
) -> list[str]:
    """Ids of sequences containing at least one box of ``class_id``, in order."""
    kept = [sid for sid, anns in annotations_by_sequence.items()
            if any(a.class_id == class_id for a in anns)]
    if not kept:
        log.warning("no sequence contains class %d; dataset will be empty", class_id)
    return kept


def extract_crops(plane, boxes: Iterable[AnnotationRecord],
                  geometry: SensorGeometry, side: int = 64) -> list[np.ndarray]:
    """Nearest-neighbor resample each box region to a ``side`` x ``side`` crop.

    Output pixel (i, j) copies source pixel (y0 + i*bh//side, x0 + j*bw//side)
    of the clipped box, so an exactly side-sized box is copied verbatim and a
    double-sized box is sampled at even coordinates.
    """
    arr = np.asarray(plane)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected (H, W) or (C, H, W) plane, got shape {arr.shape}")
    crops = []
    idx = np.arange(side)
    for box in boxes:
        x0, y0, x1, y1 = clip_box_to_plane(box, geometry)
        rows = y0 + (idx * (y1 - y0)) // side
        cols = x0 + (idx * (x1 - x0)) // side
        crops.append(arr[..., rows[:, None], cols[None, :]].copy())
    return crops


@dataclass(frozen=True)
class DensityVerdict:
    """Outcome of the event-density check on one box."""

    accepted: bool
    score: float
    events_in_box: int


def density_verdict(m: PixelStateMap, box: AnnotationRecord, *,
                    score_threshold: float = 1.5, min_events: int = 20,
                    eps: float = 1e-9) -> DensityVerdict:
    """Accept a box whose event density clearly exceeds the frame average.

    The score is events-per-pixel inside the box divided by events-per-pixel
    over the whole frame (plus ``eps``); a box passes when the score reaches
    ``score_threshold`` and it holds at least ``min_events`` events. A stand-in
    for an external appearance classifier: boxes over dead regions score 0
    and uniform activity scores about 1.
    """
    x0, y0, x1, y1 = clip_box_to_plane(box, m.geometry)
    inside = int(m.count[y0:y1, x0:x1].sum())
    box_area = (y1 - y0) * (x1 - x0)
    frame_density = m.total_count / m.geometry.num_pixels
    score = (inside / box_area) / (frame_density + eps)
    return DensityVerdict(score >= score_threshold and inside >= min_events,
                          score, inside)


def read_verdicts_csv(source) -> list[tuple[str, int, int, int]]:
    """Parse ``sequence,window,box_index,verdict`` rows, verdict in {0, 1}."""
    rows: list[tuple[str, int, int, int]] = []
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines or lines[0].strip() != VERDICTS_CSV_HEADER:
        raise ParseError(f"expected header {VERDICTS_CSV_HEADER!r}", line=1)
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", line=lineno)
        try:
            window, box_index, verdict = int(parts[1]), int(parts[2]), int(parts[3])
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", line=lineno) from None
        if verdict not in (0, 1):
            raise ParseError(f"verdict must be 0 or 1, got {verdict}", line=lineno)
        rows.append((parts[0], window, box_index, verdict))
    return rows


def apply_verdicts(manifest: DatasetManifest,
                   verdicts: Iterable[tuple[str, int, int, int]]) -> DatasetManifest:
    """Mark boxes accepted/rejected and drop frames left with no accepted box.

    Verdict keys are (sequence, window, box index); a key that matches no
    manifest entry raises :class:`UnknownReferenceError`. Boxes not named by
    any row keep their current verdict. Never adds boxes.
    """
    by_frame: dict[tuple[str, int], list[int]] = {}
    new_verdicts: dict[int, list[str]] = {}
    for i, rec in enumerate(manifest.records):
        by_frame.setdefault((rec.sequence, rec.window), []).append(i)
        new_verdicts[i] = list(rec.verdicts)

    for sequence, window, box_index, verdict in verdicts:
        key = (sequence, window)
        if key not in by_frame:
            raise UnknownReferenceError(
                f"no manifest frame for sequence {sequence!r} window {window}")
        for i in by_frame[key]:
            if not (0 <= box_index < len(manifest.records[i].boxes)):
                raise UnknownReferenceError(
                    f"box index {box_index} out of range for sequence "
                    f"{sequence!r} window {window}")
            new_verdicts[i][box_index] = VERDICT_ACCEPTED if verdict else VERDICT_REJECTED

    records = []
    for i, rec in enumerate(manifest.records):
        updated = replace(rec, boxes=list(rec.boxes), verdicts=new_verdicts[i])
        if updated.accepted_boxes():
            records.append(updated)
    return DatasetManifest(manifest.geometry, manifest.tau_us,
                           dict(manifest.params), records)


def split_dataset(manifest: DatasetManifest, test_fraction: float = 0.25,
                  seed: int = 0) -> DatasetManifest:
    """Assign train/test by sequence, deterministically for a given seed.

    All frames of a sequence share one split; the number of test sequences
    is ``round(n * test_fraction)``, so the achieved fraction converges on
    the target as the sequence count grows.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test fraction must be in (0, 1), got {test_fraction}")
    ids = sorted({r.sequence for r in manifest.records})
    rng = random.Random(seed)
    shuffled = list(ids)
    rng.shuffle(shuffled)
    n_test = round(len(ids) * test_fraction)
    test_ids = set(shuffled[:n_test])
    records = [replace(r, boxes=list(r.boxes), verdicts=list(r.verdicts),
                       split=SPLIT_TEST if r.sequence in test_ids else SPLIT_TRAIN)
               for r in manifest.records]
    return DatasetManifest(manifest.geometry, manifest.tau_us,
                           dict(manifest.params), records)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

@dataclass
class DatasetConfig:
    """Parameters of one dataset build."""

    events_dir: Path
    annotations_dir: Path
    out_dir: Path
    geometry: SensorGeometry = SensorGeometry(1280, 720)
    tau_us: int = 10_000
    origin_us: int = 0
    class_id: int = 0
    reps: tuple[str, ...] = (REP_FUSION,)
    fusion_order: tuple[str, str, str] = DEFAULT_FUSION_ORDER
    test_fraction: float = 0.25
    seed: int = 0
    verdicts_path: Path | None = None
    score_threshold: float = 1.5
    min_events: int = 20
    export_crops: bool = False
    crop_side: int = 64
    image_format: str = "pnm"
    zero_polarity_negative: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.reps:
            raise ValueError("at least one representation is required")
        for rep in self.reps:
            if rep not in KNOWN_REPS:
                raise ValueError(f"unknown representation {rep!r}")
        if self.image_format not in ("pnm", "png"):
            raise ValueError(f"image format must be pnm or png, got {self.image_format!r}")
        if not (0.0 < self.test_fraction < 1.0):
            raise ValueError(f"test fraction must be in (0, 1), got {self.test_fraction}")


_CONFIG_KEYS = {
    "events_dir", "annotations_dir", "out_dir", "width", "height", "tau_us",
    "origin_us", "class_id", "reps", "fusion_order", "test_fraction", "seed",
    "verdicts", "score_threshold", "min_events", "export_crops", "crop_side",
    "image_format", "zero_polarity_negative", "jobs",
}


def load_dataset_config(path) -> DatasetConfig:
    """Read a ``key=value`` config file (# starts a comment)."""
    path = Path(path)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ParseError(f"unknown config key {key!r}", line=lineno)
        raw[key] = value
    for required in ("events_dir", "annotations_dir", "out_dir"):
        if required not in raw:
            raise ParseError(f"missing required config key {required!r}")

    base = path.parent

    def _path(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    geometry = SensorGeometry(int(raw.get("width", 1280)), int(raw.get("height", 720)))
    return DatasetConfig(
        events_dir=_path(raw["events_dir"]),
        annotations_dir=_path(raw["annotations_dir"]),
        out_dir=_path(raw["out_dir"]),
        geometry=geometry,
        tau_us=int(raw.get("tau_us", 10_000)),
        origin_us=int(raw.get("origin_us", 0)),
        class_id=int(raw.get("class_id", 0)),
        reps=tuple(raw.get("reps", REP_FUSION).split(",")),
        fusion_order=tuple(raw.get("fusion_order", ",".join(DEFAULT_FUSION_ORDER)).split(",")),
        test_fraction=float(raw.get("test_fraction", 0.25)),
        seed=int(raw.get("seed", 0)),
        verdicts_path=_path(raw["verdicts"]) if "verdicts" in raw else None,
        score_threshold=float(raw.get("score_threshold", 1.5)),
        min_events=int(raw.get("min_events", 20)),
        export_crops=raw.get("export_crops", "0") in ("1", "true", "yes"),
        crop_side=int(raw.get("crop_side", 64)),
        image_format=raw.get("image_format", "pnm"),
        zero_polarity_negative=raw.get("zero_polarity_negative", "0") in ("1", "true", "yes"),
        jobs=int(raw.get("jobs", 1)),
    )


def discover_sequences(events_dir: Path, annotations_dir: Path
                       ) -> list[tuple[str, Path, Path]]:
    """Pair event files (.csv or .evt1) with same-stem annotation CSVs."""
    events_dir = Path(events_dir)
    annotations_dir = Path(annotations_dir)
    out = []
    for p in sorted(events_dir.iterdir()):
        if p.suffix not in (".csv", ".evt1"):
            continue
        ann = annotations_dir / f"{p.stem}.csv"
        if not ann.is_file():
            raise FileNotFoundError(f"no annotation file for sequence {p.stem!r}: {ann}")
        out.append((p.stem, p, ann))
    return out


def load_events(path, geometry: SensorGeometry, *,
                zero_polarity_negative: bool = False) -> EventStream:
    """Read a .evt1 or .csv event file as a validated, normalized stream."""
    path = Path(path)
    if path.suffix == ".evt1":
        stream = read_events_evt1(path)
    else:
        stream = read_events_csv(path, geometry,
                                 zero_polarity_negative=zero_polarity_negative)
    stream, _ = normalize_stream(validate_stream(stream))
    return stream


def _image_ext(rep: str, image_format: str) -> str:
    if image_format == "png":
        return ".png"
    return ".ppm" if rep == REP_FUSION else ".pgm"


def _rep_planes(m: PixelStateMap, rep: str, fusion_order) -> np.ndarray:
    if rep == REP_FUSION:
        return fuse(m, fusion_order).planes
    return render_plane(m, rep)


def _write_window_outputs(m: PixelStateMap, rec_group: list[FrameRecord],
                          accepted: list[AnnotationRecord],
                          cfg: DatasetConfig) -> None:
    out = Path(cfg.out_dir)
    for rec in rec_group:
        img_path = out / rec.image
        img_path.parent.mkdir(parents=True, exist_ok=True)
        export_image(_rep_planes(m, rec.rep, cfg.fusion_order), img_path)
    label_path = out / rec_group[0].label
    label_path.parent.mkdir(parents=True, exist_ok=True)
    write_yolo_labels(accepted, m.geometry, label_path)
    if cfg.export_crops:
        plane = quantize_signed(event_frame(m))
        crops = extract_crops(plane, accepted, m.geometry, side=cfg.crop_side)
        rec = rec_group[0]
        crop_dir = out / "crops" / rec.sequence
        crop_dir.mkdir(parents=True, exist_ok=True)
        for i, crop in enumerate(crops):
            export_image(crop, crop_dir / f"{rec.window}_b{i}.pgm")


def _group_boxes_by_window(annotations: Sequence[AnnotationRecord], class_id: int,
                           wcfg: WindowConfig) -> dict[int, list[AnnotationRecord]]:
    grouped: dict[int, list[AnnotationRecord]] = {}
    for a in annotations:
        if a.class_id != class_id:
            continue
        grouped.setdefault(window_index(a.t, wcfg), []).append(a)
    return {k: grouped[k] for k in sorted(grouped)}


def _candidate_records(sequence: str, boxes_by_window, cfg: DatasetConfig
                       ) -> list[FrameRecord]:
    records = []
    for k, boxes in boxes_by_window.items():
        label = f"labels/{sequence}/{k}.txt"
        for rep in cfg.reps:
            image = f"images/{sequence}/{k}_{rep}{_image_ext(rep, cfg.image_format)}"
            records.append(FrameRecord(sequence, k, rep, image, label,
                                       boxes=list(boxes),
                                       verdicts=[VERDICT_UNVERIFIED] * len(boxes)))
    return records


def _process_sequence_heuristic(item: tuple[str, Path, list[AnnotationRecord]],
                                cfg: DatasetConfig, wcfg: WindowConfig
                                ) -> list[FrameRecord]:
    sequence, events_path, annotations = item
    stream = load_events(events_path, cfg.geometry,
                         zero_polarity_negative=cfg.zero_polarity_negative)
    out_records: list[FrameRecord] = []
    for k, boxes in _group_boxes_by_window(annotations, cfg.class_id, wcfg).items():
        m = window_map(stream, wcfg, k)
        flags = []
        for b in boxes:
            try:
                v = density_verdict(m, b, score_threshold=cfg.score_threshold,
                                    min_events=cfg.min_events)
                flags.append(VERDICT_ACCEPTED if v.accepted else VERDICT_REJECTED)
            except DegenerateBoxError:
                flags.append(VERDICT_REJECTED)
        accepted = [b for b, f in zip(boxes, flags) if f == VERDICT_ACCEPTED]
        if not accepted:
            continue
        group = _candidate_records(sequence, {k: boxes}, cfg)
        for rec in group:
            rec.verdicts = list(flags)
        _write_window_outputs(m, group, accepted, cfg)
        out_records.extend(group)
    return out_records


def _render_survivors(manifest: DatasetManifest, items, cfg: DatasetConfig,
                      wcfg: WindowConfig) -> None:
    by_sequence: dict[str, dict[int, list[FrameRecord]]] = {}
    for rec in manifest.records:
        by_sequence.setdefault(rec.sequence, {}).setdefault(rec.window, []).append(rec)
    paths = {sid: events_path for sid, events_path, _ in items}
    for sequence, windows in by_sequence.items():
        stream = load_events(paths[sequence], cfg.geometry,
                             zero_polarity_negative=cfg.zero_polarity_negative)
        for k, group in sorted(windows.items()):
            m = window_map(stream, wcfg, k)
            _write_window_outputs(m, group, group[0].accepted_boxes(), cfg)


def build_dataset(cfg: DatasetConfig) -> DatasetManifest:
    """Run the full curation pipeline and write images, labels, and manifest.

    With no verdict file the built-in density heuristic verifies boxes as
    each window is rendered; with one, candidate frames are built first,
    the external verdicts applied, and only surviving frames rendered.
    """
    wcfg = WindowConfig(cfg.tau_us, cfg.origin_us)
    sequences = discover_sequences(cfg.events_dir, cfg.annotations_dir)
    annotations = {sid: read_annotations_csv(ann) for sid, _, ann in sequences}
    kept_ids = set(filter_sequences_by_class(annotations, cfg.class_id))
    items = [(sid, events_path, annotations[sid])
             for sid, events_path, _ in sequences if sid in kept_ids]
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    params = {
        "class_id": cfg.class_id,
        "reps": list(cfg.reps),
        "fusion_order": list(cfg.fusion_order),
        "test_fraction": cfg.test_fraction,
        "seed": cfg.seed,
        "score_threshold": cfg.score_threshold,
        "min_events": cfg.min_events,
        "external_verdicts": cfg.verdicts_path is not None,
        "image_format": cfg.image_format,
        "origin_us": cfg.origin_us,
    }

    heuristic = cfg.verdicts_path is None
    records: list[FrameRecord] = []
    if heuristic:
        if cfg.jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                for recs in pool.map(
                        lambda it: _process_sequence_heuristic(it, cfg, wcfg), items):
                    records.extend(recs)
        else:
            for item in items:
                records.extend(_process_sequence_heuristic(item, cfg, wcfg))
        manifest = DatasetManifest(cfg.geometry, cfg.tau_us, params, records)
    else:
        for sequence, _, anns in items:
            grouped = _group_boxes_by_window(anns, cfg.class_id, wcfg)
            records.extend(_candidate_records(sequence, grouped, cfg))
        manifest = DatasetManifest(cfg.geometry, cfg.tau_us, params, records)
        manifest = apply_verdicts(manifest, read_verdicts_csv(cfg.verdicts_path))
        _render_survivors(manifest, items, cfg, wcfg)

    manifest = split_dataset(manifest, cfg.test_fraction, cfg.seed)
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    return manifest
