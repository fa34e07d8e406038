"""AIS track cleaning and portcall derivation, plus the synthetic generator.

Raw AIS position reports go through drift removal, gap filling, zone dwell
extraction and finally portcall derivation. The synthetic generator produces
datasets with the same shape (skewed berth demand, Poisson arrivals,
lognormal service times) for desk-scale experiments.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import DataFormatError, ParameterError
from .model import Berth, Portcall, Schedule, baseline_schedule

logger = logging.getLogger(__name__)

EARTH_RADIUS_NM = 3440.065
DEFAULT_MAX_SPEED_KNOTS = 50.0
DEFAULT_MAX_GAP_MIN = 360
DEFAULT_CADENCE_MIN = 10
DEFAULT_MIN_DWELL_MIN = 30
ANCHORAGE_LINK_WINDOW_MIN = 48 * 60

AIS_HEADER = ["vessel_id", "timestamp_utc_min", "lat", "lon"]


@dataclass(frozen=True)
class AisRecord:
    vessel_id: str
    timestamp: int
    lat: float
    lon: float


@dataclass(frozen=True)
class Zone:
    """A named polygon; kind is 'anchorage' or 'berth'.

    meta carries optional berth attributes (terminal_id, compat_group,
    is_buffer) passed through from the zones file.
    """

    zone_id: str
    kind: str
    polygon: tuple[tuple[float, float], ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("anchorage", "berth"):
            raise DataFormatError(f"zone {self.zone_id}: kind must be anchorage or berth")
        ring = list(self.polygon)
        if len(ring) >= 2 and ring[0] == ring[-1]:
            ring = ring[:-1]
        if len(ring) < 3:
            raise DataFormatError(f"zone {self.zone_id}: polygon needs >= 3 vertices")
        if _ring_self_intersects(ring):
            raise DataFormatError(f"zone {self.zone_id}: polygon ring self-intersects")
        object.__setattr__(self, "polygon", tuple(ring))


@dataclass(frozen=True)
class StayEvent:
    vessel_id: str
    zone_id: str
    kind: str
    start: int
    end: int

    def __post_init__(self):
        if self.end <= self.start:
            raise ParameterError(f"stay at {self.zone_id}: end must exceed start")


@dataclass(frozen=True)
class RejectedRow:
    line_no: int
    reason: str


@dataclass
class CleaningReport:
    rows_rejected: int = 0
    drift_flags: int = 0
    gaps_filled: int = 0
    gaps_open: int = 0

    def to_json(self) -> str:
        return json.dumps({"rows_rejected": self.rows_rejected,
                           "drift_flags": self.drift_flags,
                           "gaps_filled": self.gaps_filled,
                           "gaps_open": self.gaps_open},
                          indent=2, sort_keys=True) + "\n"


def haversine_nm(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in nautical miles."""
    p1, l1, p2, l2 = map(math.radians, (lat1, lon1, lat2, lon2))
    a = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin((l2 - l1) / 2) ** 2
    return 2 * EARTH_RADIUS_NM * math.asin(min(1.0, math.sqrt(a)))


def parse_ais(text: str) -> tuple[dict[str, list[AisRecord]], list[RejectedRow]]:
    """Parse AIS CSV into per-vessel, time-sorted tracks.

    Malformed rows are collected as rejects with their line numbers, never
    silently dropped. An unreadable header is a format error.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != AIS_HEADER:
        raise DataFormatError(f"AIS CSV must start with header {','.join(AIS_HEADER)}")
    tracks: dict[str, list[AisRecord]] = {}
    rejects: list[RejectedRow] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            rejects.append(RejectedRow(line_no, "expected 4 fields"))
            continue
        try:
            vessel = row[0].strip()
            ts = int(row[1])
            lat = float(row[2])
            lon = float(row[3])
        except ValueError as exc:
            rejects.append(RejectedRow(line_no, str(exc)))
            continue
        if not vessel:
            rejects.append(RejectedRow(line_no, "empty vessel_id"))
            continue
        if not (-90.0 <= lat <= 90.0):
            rejects.append(RejectedRow(line_no, f"latitude {lat} out of range"))
            continue
        if not (-180.0 <= lon <= 180.0):
            rejects.append(RejectedRow(line_no, f"longitude {lon} out of range"))
            continue
        tracks.setdefault(vessel, []).append(AisRecord(vessel, ts, lat, lon))
    for vessel in tracks:
        tracks[vessel].sort(key=lambda r: r.timestamp)
    return tracks, rejects


def detect_drift(track: Sequence[AisRecord],
                 max_speed_knots: float = DEFAULT_MAX_SPEED_KNOTS) -> list[bool]:
    """Flag records whose implied speed from the last accepted record is absurd.

    Flagged records drop out of the accepted chain so an isolated spike does
    not poison the points after it. The first record is never flagged.
    """
    flags = [False] * len(track)
    if not track:
        return flags
    prev = track[0]
    for i in range(1, len(track)):
        rec = track[i]
        dist = haversine_nm(prev.lat, prev.lon, rec.lat, rec.lon)
        dt = rec.timestamp - prev.timestamp
        if dt <= 0:
            speed = math.inf if dist > 1e-9 else 0.0
        else:
            speed = dist / (dt / 60.0)
        if speed > max_speed_knots:
            flags[i] = True
        else:
            prev = rec
    return flags


def fill_gaps(track: Sequence[AisRecord], zones: Sequence[Zone],
              max_gap_min: int = DEFAULT_MAX_GAP_MIN,
              cadence_min: int = DEFAULT_CADENCE_MIN) -> tuple[list[AisRecord], int, int]:
    """Interpolate reporting gaps whose endpoints sit inside the same zone.

    Gaps longer than max_gap_min, or whose endpoints are in different zones
    (or outside every zone), are left open. Returns (track, filled, open).
    """
    if not track:
        return [], 0, 0
    out: list[AisRecord] = [track[0]]
    filled = 0
    left_open = 0
    for prev, rec in zip(track, track[1:]):
        gap = rec.timestamp - prev.timestamp
        if gap > cadence_min:
            z0 = zone_of(prev.lat, prev.lon, zones)
            z1 = zone_of(rec.lat, rec.lon, zones)
            if gap <= max_gap_min and z0 is not None and z1 is not None \
                    and z0.zone_id == z1.zone_id:
                t = prev.timestamp + cadence_min
                while t < rec.timestamp:
                    frac = (t - prev.timestamp) / gap
                    out.append(AisRecord(
                        prev.vessel_id, t,
                        prev.lat + frac * (rec.lat - prev.lat),
                        prev.lon + frac * (rec.lon - prev.lon)))
                    t += cadence_min
                filled += 1
            else:
                left_open += 1
        out.append(rec)
    return out, filled, left_open


def point_in_polygon(lat: float, lon: float,
                     polygon: Sequence[tuple[float, float]]) -> bool:
    """Even-odd containment test; boundary points count as inside."""
    n = len(polygon)
    for i in range(n):
        a = polygon[i]
        b = polygon[(i + 1) % n]
        if _on_segment(lat, lon, a, b):
            return True
    inside = False
    j = n - 1
    for i in range(n):
        yi, xi = polygon[i]
        yj, xj = polygon[j]
        if (yi > lat) != (yj > lat):
            x_cross = xj + (lat - yj) * (xi - xj) / (yi - yj)
            if lon < x_cross:
                inside = not inside
        j = i
    return inside


def _on_segment(lat, lon, a, b, eps=1e-12):
    (y1, x1), (y2, x2) = a, b
    cross = (x2 - x1) * (lat - y1) - (y2 - y1) * (lon - x1)
    if abs(cross) > eps:
        return False
    return (min(y1, y2) - eps <= lat <= max(y1, y2) + eps
            and min(x1, x2) - eps <= lon <= max(x1, x2) + eps)


def _segments_cross(p1, p2, p3, p4) -> bool:
    """Proper intersection between segments p1p2 and p3p4 (shared endpoints excluded)."""

    def orient(a, b, c):
        v = (b[1] - a[1]) * (c[0] - a[0]) - (b[0] - a[0]) * (c[1] - a[1])
        if abs(v) < 1e-15:
            return 0
        return 1 if v > 0 else -1

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _ring_self_intersects(ring: Sequence[tuple[float, float]]) -> bool:
    n = len(ring)
    for i in range(n):
        a1, a2 = ring[i], ring[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(a1, a2, ring[j], ring[(j + 1) % n]):
                return True
    return False


def zone_of(lat: float, lon: float, zones: Sequence[Zone]) -> Optional[Zone]:
    """Zone containing the point; overlap resolves to the lowest zone_id."""
    hits = [z for z in zones if point_in_polygon(lat, lon, z.polygon)]
    if not hits:
        return None
    if len(hits) > 1:
        hits.sort(key=lambda z: z.zone_id)
        logger.warning("point (%.5f, %.5f) falls in overlapping zones %s; using %s",
                       lat, lon, [z.zone_id for z in hits], hits[0].zone_id)
        return hits[0]
    return hits[0]


def extract_stays(track: Sequence[AisRecord], zones: Sequence[Zone],
                  min_dwell_min: int = DEFAULT_MIN_DWELL_MIN) -> list[StayEvent]:
    """Maximal in-zone runs of at least min_dwell_min become stay events."""
    stays: list[StayEvent] = []
    run_zone: Optional[Zone] = None
    run_start = run_end = 0
    for rec in track:
        z = zone_of(rec.lat, rec.lon, zones)
        if z is not None and run_zone is not None and z.zone_id == run_zone.zone_id:
            run_end = rec.timestamp
            continue
        if run_zone is not None and run_end - run_start >= min_dwell_min:
            stays.append(StayEvent(rec.vessel_id, run_zone.zone_id, run_zone.kind,
                                   run_start, run_end))
        run_zone = z
        run_start = run_end = rec.timestamp
    if track and run_zone is not None and run_end - run_start >= min_dwell_min:
        stays.append(StayEvent(track[-1].vessel_id, run_zone.zone_id, run_zone.kind,
                               run_start, run_end))
    return stays


def _portcall_records(stays: Sequence[StayEvent]) -> list[tuple[Portcall, int]]:
    """(portcall, observed berth start) pairs derived from stay events."""
    by_vessel: dict[str, list[StayEvent]] = {}
    for stay in stays:
        by_vessel.setdefault(stay.vessel_id, []).append(stay)
    out: list[tuple[Portcall, int]] = []
    for vessel in sorted(by_vessel):
        events = sorted(by_vessel[vessel], key=lambda s: s.start)
        seq = 0
        for i, stay in enumerate(events):
            if stay.kind != "berth":
                continue
            arrival = stay.start
            if i > 0:
                prior = events[i - 1]
                if prior.kind == "anchorage" and prior.end <= stay.start \
                        and stay.start - prior.end <= ANCHORAGE_LINK_WINDOW_MIN:
                    arrival = prior.start
            out.append((Portcall(portcall_id=f"{vessel}-{seq:03d}",
                                 vessel_id=vessel,
                                 arrival_time=arrival,
                                 requested_berth=stay.zone_id,
                                 service_duration=stay.end - stay.start),
                        stay.start))
            seq += 1
    return out


def derive_portcalls(stays: Sequence[StayEvent]) -> list[Portcall]:
    """One portcall per berth stay; arrival comes from the linked anchorage stay.

    A berth stay links to the latest anchorage stay of the same vessel ending
    within 48 h before berthing; without one, arrival falls back to the berth
    start (zero observed wait).
    """
    return [pc for pc, _ in _portcall_records(stays)]


def observed_starts(stays: Sequence[StayEvent]) -> dict[str, int]:
    """Observed berth-start times keyed by derived portcall_id."""
    return {pc.portcall_id: start for pc, start in _portcall_records(stays)}


# ---------------------------------------------------------------------------
# Zones JSON.

def read_zones_json(text: str) -> list[Zone]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"zones JSON unreadable: {exc}") from exc
    if not isinstance(payload, list):
        raise DataFormatError("zones JSON must be an array of zone objects")
    out = []
    for i, item in enumerate(payload):
        try:
            polygon = tuple((float(p[0]), float(p[1])) for p in item["polygon"])
            meta = {k: v for k, v in item.items()
                    if k not in ("zone_id", "kind", "polygon")}
            out.append(Zone(zone_id=str(item["zone_id"]), kind=str(item["kind"]),
                            polygon=polygon, meta=meta))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DataFormatError(f"zones JSON entry {i}: {exc}") from exc
    ids = [z.zone_id for z in out]
    if len(set(ids)) != len(ids):
        raise DataFormatError("zones JSON contains duplicate zone_id values")
    return out


def write_zones_json(zones: Iterable[Zone]) -> str:
    payload = []
    for z in zones:
        item = {"zone_id": z.zone_id, "kind": z.kind,
                "polygon": [[lat, lon] for lat, lon in z.polygon]}
        item.update(z.meta)
        payload.append(item)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _centroid(polygon: Sequence[tuple[float, float]]) -> tuple[float, float]:
    lat = sum(p[0] for p in polygon) / len(polygon)
    lon = sum(p[1] for p in polygon) / len(polygon)
    return lat, lon


def berths_from_zones(zones: Sequence[Zone]) -> list[Berth]:
    """Berth records for berth-kind zones; metadata keys pass through."""
    out = []
    for z in zones:
        if z.kind != "berth":
            continue
        lat, lon = _centroid(z.polygon)
        out.append(Berth(berth_id=z.zone_id,
                         terminal_id=str(z.meta.get("terminal_id", z.zone_id)),
                         compat_group=str(z.meta.get("compat_group", "default")),
                         is_buffer=bool(z.meta.get("is_buffer", False)),
                         lat=lat, lon=lon))
    return out


@dataclass
class CleaningResult:
    portcalls: list[Portcall]
    berths: list[Berth]
    baseline: Optional[Schedule]
    stays: list[StayEvent]
    report: CleaningReport


def run_cleaning(ais_text: str, zones: Sequence[Zone],
                 max_speed_knots: float = DEFAULT_MAX_SPEED_KNOTS,
                 max_gap_min: int = DEFAULT_MAX_GAP_MIN,
                 cadence_min: int = DEFAULT_CADENCE_MIN,
                 min_dwell_min: int = DEFAULT_MIN_DWELL_MIN) -> CleaningResult:
    """Full pipeline: parse, de-drift, fill gaps, extract stays, derive portcalls."""
    tracks, rejects = parse_ais(ais_text)
    report = CleaningReport(rows_rejected=len(rejects))
    stays: list[StayEvent] = []
    for vessel in sorted(tracks):
        track = tracks[vessel]
        flags = detect_drift(track, max_speed_knots)
        report.drift_flags += sum(flags)
        cleaned = [r for r, flagged in zip(track, flags) if not flagged]
        filled_track, filled, left_open = fill_gaps(cleaned, zones, max_gap_min, cadence_min)
        report.gaps_filled += filled
        report.gaps_open += left_open
        stays.extend(extract_stays(filled_track, zones, min_dwell_min))
    portcalls = derive_portcalls(stays)
    berths = berths_from_zones(zones)
    baseline = None
    if portcalls:
        baseline = baseline_schedule(portcalls, berths, observed_starts(stays))
    return CleaningResult(portcalls, berths, baseline, stays, report)


# ---------------------------------------------------------------------------
# Synthetic dataset generator.

@dataclass(frozen=True)
class SyntheticParams:
    """Generator shape: arrival density and service scale are the congestion knobs."""

    n_vessels: int
    n_berths: int
    n_anchorages: int = 4
    n_buffer_berths: int = 0
    horizon_days: int = 14
    portcalls_per_vessel: float = 2.08
    mean_interarrival_min: Optional[float] = None
    service_mu: float = 7.0
    service_sigma: float = 0.45

    def __post_init__(self):
        if min(self.n_vessels, self.n_berths, self.n_anchorages, self.horizon_days) < 1:
            raise ParameterError("vessel, berth, anchorage and horizon counts must be >= 1")
        if not 0 <= self.n_buffer_berths < self.n_berths:
            raise ParameterError("n_buffer_berths must be < n_berths")
        if self.portcalls_per_vessel <= 0:
            raise ParameterError("portcalls_per_vessel must be positive")
        if self.mean_interarrival_min is not None and self.mean_interarrival_min <= 0:
            raise ParameterError("mean_interarrival_min must be positive")


def generate_synthetic(params: SyntheticParams,
                       seed: int) -> tuple[list[Berth], list[Portcall], Schedule]:
    """Seed-deterministic synthetic dataset with FCFS baseline.

    Berth demand is Zipf-skewed (exponent 1.0) so high-rank berths congest and
    low-rank peers act as natural relief; buffer berths copy the compat group
    of the equally-ranked congested berth.
    """
    rng = random.Random(seed)
    horizon_min = params.horizon_days * 1440
    n_regular = params.n_berths - params.n_buffer_berths
    n_groups = params.n_buffer_berths if params.n_buffer_berths > 0 else min(4, n_regular)

    berths: list[Berth] = []
    for i in range(n_regular):
        berths.append(Berth(berth_id=f"B{i + 1:02d}", terminal_id=f"T{i + 1:02d}",
                            compat_group=f"G{i % n_groups}", is_buffer=False,
                            lat=1.20 + 0.002 * i, lon=103.70 + 0.003 * i))
    for k in range(params.n_buffer_berths):
        berths.append(Berth(berth_id=f"BUF{k + 1:02d}", terminal_id=f"TB{k + 1:02d}",
                            compat_group=f"G{k % n_groups}", is_buffer=True,
                            lat=1.30 + 0.002 * k, lon=103.90 + 0.003 * k))

    mean_ia = params.mean_interarrival_min
    if mean_ia is None:
        mean_ia = horizon_min / (params.n_vessels * params.portcalls_per_vessel)

    arrivals: list[int] = []
    t = 0.0
    while True:
        t += rng.expovariate(1.0 / mean_ia)
        if t >= horizon_min:
            break
        arrivals.append(int(t))
    if not arrivals:
        raise ParameterError("generator parameters produced zero portcalls")

    vessel_ids = [str(563000000 + i) for i in range(params.n_vessels)]
    rng.shuffle(vessel_ids)
    regular_ids = [b.berth_id for b in berths if not b.is_buffer]
    zipf_weights = [1.0 / (rank + 1) for rank in range(n_regular)]

    portcalls: list[Portcall] = []
    for i, arrival in enumerate(arrivals):
        requested = rng.choices(regular_ids, weights=zipf_weights)[0]
        service = max(1, round(rng.lognormvariate(params.service_mu, params.service_sigma)))
        portcalls.append(Portcall(portcall_id=f"PC{i:05d}",
                                  vessel_id=vessel_ids[i % params.n_vessels],
                                  arrival_time=arrival,
                                  requested_berth=requested,
                                  service_duration=service))
    baseline = baseline_schedule(portcalls, berths)
    return berths, portcalls, baseline
