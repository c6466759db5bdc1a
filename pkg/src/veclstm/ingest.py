"""GeoLife-format ingestion: PLT parsing, label joining, dataset assembly.

Directory layout expected under a GeoLife root:

    Data/<user>/Trajectory/*.plt   -- 6 header lines, then CSV rows
                                      lat,lon,0,alt_feet,days_float,yyyy-MM-dd,HH:mm:ss
    Data/<user>/labels.txt         -- tab-separated header row, then
                                      start<TAB>end<TAB>mode with
                                      yyyy/MM/dd HH:mm:ss timestamps

The assembled dataset has the seven columns time, lat, lon, alt, label,
user, metadata, ordered by (user, timestamp).
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import EmptyDataset, InvertedSpan, MalformedLine, TruncatedHeader
from .vectorizer import (
    MISSING,
    NormalizationStats,
    VectorizationConfig,
    fit_stats,
    is_missing,
    normalize_columns,
    vectorize_metadata,
)

FEET_TO_METERS = 0.3048
ALT_INVALID_SENTINEL = -777.0
PLT_HEADER_LINES = 6

# The seven transportation modes kept for classification, in code order.
# GeoLife contains more (boat, run, airplane, motorcycle, composites);
# anything not listed here is rejected at mapping time.
DEFAULT_MODES = ("walk", "bike", "bus", "car", "taxi", "subway", "train")

DATASET_COLUMNS = ("time", "lat", "lon", "alt", "label", "user", "metadata")

METADATA_FEATURES = ("cell_density", "normalized_alt", "normalized_speed")


@dataclass(frozen=True)
class TrajectoryPoint:
    timestamp: int      # UTC seconds since epoch
    lat: float
    lon: float
    alt: float          # meters, or MISSING (nan)
    user_id: str = ""


@dataclass(frozen=True)
class LabelSpan:
    start: int  # UTC seconds, inclusive
    end: int    # UTC seconds, inclusive
    mode: str


@dataclass(frozen=True)
class LabeledSample:
    time: int
    lat: float
    lon: float
    alt: float          # meters or MISSING
    label: int          # 0..6
    user: str
    metadata: float     # scalar feature in [0, 1]


@dataclass
class Dataset:
    samples: list[LabeledSample]
    stats: NormalizationStats
    mode_names: tuple[str, ...] = DEFAULT_MODES

    def __len__(self) -> int:
        return len(self.samples)

    def to_arrays(self) -> dict[str, np.ndarray]:
        """Column arrays; alt keeps nan for missing values."""
        return {
            "time": np.array([s.time for s in self.samples], dtype=np.int64),
            "lat": np.array([s.lat for s in self.samples], dtype=np.float64),
            "lon": np.array([s.lon for s in self.samples], dtype=np.float64),
            "alt": np.array([s.alt for s in self.samples], dtype=np.float64),
            "label": np.array([s.label for s in self.samples], dtype=np.int64),
            "user": np.array([s.user for s in self.samples], dtype=object),
            "metadata": np.array([s.metadata for s in self.samples], dtype=np.float64),
        }


def _as_text(data: bytes | str) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8", errors="replace")
    return data


def _parse_utc(text: str, fmt: str) -> int:
    dt = datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def parse_plt(data: bytes | str, user_id: str = "") -> list[TrajectoryPoint]:
    """Parse one PLT file. The first six lines are header and skipped.

    Altitude arrives in feet and is converted to meters; the sentinel
    -777 becomes MISSING. Raises TruncatedHeader on short files and
    MalformedLine(line_no) on bad rows (wrong field count, non-numeric
    fields, out-of-range coordinates, or a timestamp going backwards).
    """
    lines = _as_text(data).splitlines()
    if len(lines) < PLT_HEADER_LINES:
        raise TruncatedHeader(
            f"PLT file has {len(lines)} lines, expected at least {PLT_HEADER_LINES}"
        )
    points: list[TrajectoryPoint] = []
    prev_ts: int | None = None
    for line_no, line in enumerate(lines[PLT_HEADER_LINES:], PLT_HEADER_LINES + 1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 7:
            raise MalformedLine(line_no, f"expected 7 fields, got {len(fields)}")
        try:
            lat = float(fields[0])
            lon = float(fields[1])
            alt_feet = float(fields[3])
            float(fields[4])  # days serial, unused but must be numeric
        except ValueError as exc:
            raise MalformedLine(line_no, f"non-numeric field: {exc}") from None
        try:
            ts = _parse_utc(f"{fields[5]} {fields[6]}", "%Y-%m-%d %H:%M:%S")
        except ValueError:
            raise MalformedLine(line_no, f"bad date/time {fields[5]},{fields[6]}") from None
        if not (-90.0 <= lat <= 90.0):
            raise MalformedLine(line_no, f"latitude {lat} out of range")
        if not (-180.0 <= lon <= 180.0):
            raise MalformedLine(line_no, f"longitude {lon} out of range")
        if prev_ts is not None and ts < prev_ts:
            raise MalformedLine(line_no, "timestamp decreases within file")
        prev_ts = ts
        alt = MISSING if alt_feet == ALT_INVALID_SENTINEL else alt_feet * FEET_TO_METERS
        points.append(TrajectoryPoint(timestamp=ts, lat=lat, lon=lon, alt=alt,
                                      user_id=user_id))
    return points


def parse_labels(data: bytes | str) -> list[LabelSpan]:
    """Parse a labels.txt file: header row, then start/end/mode rows."""
    lines = _as_text(data).splitlines()
    if not lines:
        raise TruncatedHeader("labels file is empty")
    spans: list[LabelSpan] = []
    for line_no, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise MalformedLine(line_no, f"expected 3 tab-separated fields, got {len(fields)}")
        try:
            start = _parse_utc(fields[0].strip(), "%Y/%m/%d %H:%M:%S")
            end = _parse_utc(fields[1].strip(), "%Y/%m/%d %H:%M:%S")
        except ValueError:
            raise MalformedLine(line_no, "bad timestamp") from None
        if start > end:
            raise InvertedSpan(f"line {line_no}: span ends before it starts")
        spans.append(LabelSpan(start=start, end=end, mode=fields[2].strip()))
    return spans


def assign_labels(
    points: Iterable[TrajectoryPoint], spans: list[LabelSpan]
) -> list[tuple[TrajectoryPoint, str]]:
    """Pair each point with the mode of the span containing its timestamp.

    Both span ends are inclusive. Points covered by no span are dropped.
    When spans overlap, the span with the latest start wins; among equal
    starts the one later in file order wins.
    """
    if not spans:
        return []
    order = sorted(range(len(spans)), key=lambda idx: (spans[idx].start, idx))
    starts = [spans[idx].start for idx in order]
    out: list[tuple[TrajectoryPoint, str]] = []
    for point in points:
        pos = bisect.bisect_right(starts, point.timestamp) - 1
        # Walk left from the latest-starting candidate to the first span
        # that actually contains the timestamp.
        while pos >= 0:
            span = spans[order[pos]]
            if span.end >= point.timestamp:
                out.append((point, span.mode))
                break
            pos -= 1
    return out


def map_mode(mode: str, modes: tuple[str, ...] = DEFAULT_MODES) -> int | None:
    """Case-insensitive lookup into the canonical mode set; None = rejected."""
    needle = mode.strip().lower()
    for code, name in enumerate(modes):
        if name == needle:
            return code
    return None


def _haversine_m(lat1, lon1, lat2, lon2):
    r = 6371000.0
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))


def _metadata_scalars(
    rows: list[tuple[TrajectoryPoint, int]],
    stats: NormalizationStats,
    config: VectorizationConfig,
    feature: str,
) -> list[float]:
    coords = [(p.lat, p.lon, p.alt) for p, _ in rows]
    if feature == "cell_density":
        return vectorize_metadata(coords, config)
    arr = np.asarray(coords, dtype=np.float64)
    if feature == "normalized_alt":
        _, _, norm_alt = normalize_columns(arr[:, 0], arr[:, 1], arr[:, 2], stats, config)
        return norm_alt.tolist()
    if feature == "normalized_speed":
        speeds = [0.0] * len(rows)
        for i in range(1, len(rows)):
            prev, cur = rows[i - 1][0], rows[i][0]
            if cur.user_id != prev.user_id or cur.timestamp <= prev.timestamp:
                continue
            dist = _haversine_m(prev.lat, prev.lon, cur.lat, cur.lon)
            speeds[i] = dist / (cur.timestamp - prev.timestamp)
        top = max(speeds)
        return [s / top for s in speeds] if top > 0 else speeds
    raise ValueError(f"unknown metadata feature {feature!r}")


def build_dataset(
    labeled: list[tuple[TrajectoryPoint, int]],
    config: VectorizationConfig = VectorizationConfig(),
    metadata_feature: str = "cell_density",
    mode_names: tuple[str, ...] = DEFAULT_MODES,
) -> Dataset:
    """Assemble the 7-column dataset from labeled points.

    Rows are ordered by (user, timestamp); the metadata scalar is
    derived from the full dataset (cell-density ratio by default).
    """
    if not labeled:
        raise EmptyDataset("no labeled points to assemble")
    rows = sorted(labeled, key=lambda it: (it[0].user_id, it[0].timestamp))
    stats = fit_stats([(p.lat, p.lon, p.alt) for p, _ in rows])
    scalars = _metadata_scalars(rows, stats, config, metadata_feature)
    samples = [
        LabeledSample(
            time=p.timestamp, lat=p.lat, lon=p.lon, alt=p.alt,
            label=code, user=p.user_id, metadata=scalar,
        )
        for (p, code), scalar in zip(rows, scalars)
    ]
    return Dataset(samples=samples, stats=stats, mode_names=mode_names)


# --- directory walking -------------------------------------------------

@dataclass
class IngestWarning:
    path: str
    error: Exception


@dataclass
class IngestResult:
    dataset: Dataset | None
    n_points: int
    n_labeled: int
    warnings: list[IngestWarning] = field(default_factory=list)


def iter_geolife_users(root: Path) -> Iterator[tuple[str, list[Path], Path | None]]:
    """Yield (user_id, plt files, labels path or None) per user directory."""
    data_dir = root / "Data"
    if not data_dir.is_dir():
        raise FileNotFoundError(f"no Data/ directory under {root}")
    for user_dir in sorted(data_dir.iterdir()):
        if not user_dir.is_dir():
            continue
        traj_dir = user_dir / "Trajectory"
        plt_files = sorted(traj_dir.glob("*.plt")) if traj_dir.is_dir() else []
        labels = user_dir / "labels.txt"
        yield user_dir.name, plt_files, labels if labels.is_file() else None


def ingest_geolife(
    root: Path,
    config: VectorizationConfig = VectorizationConfig(),
    strict: bool = False,
    metadata_feature: str = "cell_density",
    mode_names: tuple[str, ...] = DEFAULT_MODES,
) -> IngestResult:
    """Walk a GeoLife tree, join labels, and build the dataset.

    Per-file parse failures are collected as warnings and the file is
    skipped, unless strict is set, in which case the first failure
    raises.
    """
    warnings: list[IngestWarning] = []
    labeled: list[tuple[TrajectoryPoint, int]] = []
    n_points = 0
    for user_id, plt_files, labels_path in iter_geolife_users(root):
        if labels_path is None:
            continue
        try:
            spans = parse_labels(labels_path.read_bytes())
        except Exception as exc:
            if strict:
                raise
            warnings.append(IngestWarning(str(labels_path), exc))
            continue
        points: list[TrajectoryPoint] = []
        for plt_path in plt_files:
            try:
                points.extend(parse_plt(plt_path.read_bytes(), user_id=user_id))
            except Exception as exc:
                if strict:
                    raise
                warnings.append(IngestWarning(str(plt_path), exc))
        n_points += len(points)
        for point, mode in assign_labels(points, spans):
            code = map_mode(mode, mode_names)
            if code is not None:
                labeled.append((point, code))
    dataset = None
    if labeled:
        dataset = build_dataset(labeled, config, metadata_feature, mode_names)
    return IngestResult(
        dataset=dataset, n_points=n_points, n_labeled=len(labeled),
        warnings=warnings,
    )


# --- CSV round trip ----------------------------------------------------

def write_dataset_csv(dataset: Dataset, path: Path) -> None:
    """RFC-4180 CSV with the 7-column header; missing alt is an empty field."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_COLUMNS)
        for s in dataset.samples:
            writer.writerow([
                s.time,
                repr(s.lat),
                repr(s.lon),
                "" if is_missing(s.alt) else repr(s.alt),
                s.label,
                s.user,
                repr(s.metadata),
            ])


def read_dataset_csv(path: Path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != DATASET_COLUMNS:
            raise MalformedLine(1, f"expected header {','.join(DATASET_COLUMNS)}")
        samples = []
        for line_no, row in enumerate(reader, 2):
            if len(row) != 7:
                raise MalformedLine(line_no, f"expected 7 columns, got {len(row)}")
            try:
                samples.append(LabeledSample(
                    time=int(row[0]),
                    lat=float(row[1]),
                    lon=float(row[2]),
                    alt=MISSING if row[3] == "" else float(row[3]),
                    label=int(row[4]),
                    user=row[5],
                    metadata=float(row[6]),
                ))
            except ValueError as exc:
                raise MalformedLine(line_no, str(exc)) from None
    if not samples:
        raise EmptyDataset(f"{path} contains a header but no rows")
    stats = fit_stats([(s.lat, s.lon, s.alt) for s in samples])
    return Dataset(samples=samples, stats=stats)
