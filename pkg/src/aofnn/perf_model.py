"""Analytic latency and throughput of the optical engine.

One frame costs a DMD update, a camera integration and the light's time
of flight through the 4f path. Throughput is counted as the multiply-
accumulates a sliding-window convolution would need for the same frame,
one MAC = one op.
"""
import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

C_LIGHT = 299_792_458.0
DEFAULT_PATH = 4 * 0.2
MAC_CONVENTION = "one multiply-accumulate counted as one operation"
TECH_CLASSES = ("carrier-doping", "phase-change", "MOEMS", "electro-mechanical", "LCOS")


@dataclass(frozen=True)
class DeviceTiming:
    dmd_refresh: float = 1031.0
    camera_rate: float = 1000.0
    path_length: float = DEFAULT_PATH
    bit_depth: int = 8

    def __post_init__(self):
        if not self.dmd_refresh > 0:
            raise ValueError("dmd_refresh: must be > 0")
        if not self.camera_rate > 0:
            raise ValueError("camera_rate: must be > 0")
        if not (self.path_length > 0 and math.isfinite(self.path_length)):
            raise ValueError("path_length: must be finite and > 0")


TIMING_PRESETS = {
    "8bit": DeviceTiming(1031.0, 1000.0, DEFAULT_PATH, 8),
    # 1-bit DMD mode paired with a reduced camera region of interest.
    "1bit": DeviceTiming(20000.0, 20000.0, DEFAULT_PATH, 1),
}


def latency_breakdown(t):
    """Seconds spent per frame in each component, plus the total."""
    out = {"dmd": 1.0 / t.dmd_refresh, "camera": 1.0 / t.camera_rate,
           "tof": t.path_length / C_LIGHT}
    out["total"] = out["dmd"] + out["camera"] + out["tof"]
    return out


def equivalent_throughput(rows, cols, frame_rate):
    """Sliding-window MACs per second: a full-resolution kernel over a
    full-resolution input costs ``(rows*cols)**2`` MACs per frame."""
    if rows <= 0 or cols <= 0 or frame_rate <= 0:
        raise ValueError("rows, cols and frame_rate must be positive")
    n = float(rows) * float(cols)
    return n * n * float(frame_rate)


@dataclass(frozen=True)
class TechnologyEntry:
    name: str
    pixel_count: float
    update_rate: float
    tech_class: str
    placeholder: bool = False

    def __post_init__(self):
        if not (self.pixel_count > 0 and self.update_rate > 0):
            raise ValueError(f"{self.name}: pixel_count and update_rate must be positive")
        if self.tech_class not in TECH_CLASSES:
            raise ValueError(f"{self.name}: tech_class must be one of {TECH_CLASSES}")


def size_speed_product(e):
    return float(e.pixel_count) * float(e.update_rate)


def iso_line(product):
    """Rounded exponent used to bucket entries onto iso-performance lines."""
    return round(math.log10(product), 6)


# Only the DMD rows use quoted device specs; the others are
# order-of-magnitude placeholders.
TECHNOLOGY_TABLE = (
    TechnologyEntry("DMD 1920x1080, 1-bit", 1920 * 1080, 20000.0, "MOEMS"),
    TechnologyEntry("DMD 1920x1080, 8-bit", 1920 * 1080, 1031.0, "MOEMS"),
    TechnologyEntry("LCOS SLM", 1920 * 1080, 60.0, "LCOS", placeholder=True),
    TechnologyEntry("MEMS mirror array", 1e4, 1e4, "electro-mechanical", placeholder=True),
    TechnologyEntry("Carrier-injection modulator bank", 1e2, 1e10, "carrier-doping", placeholder=True),
    TechnologyEntry("Phase-change pixel array", 1e4, 1e6, "phase-change", placeholder=True),
)


@dataclass(frozen=True)
class Baseline:
    """A reference curve drawn as a fixed latency ratio to the optical
    engine. ``source`` says where the ratio comes from."""
    name: str
    slowdown: float
    source: str = "published claim, not measured"


DEFAULT_BASELINES = (
    Baseline("GPU (P100 class)", 10.0),
    Baseline("SLM-based 4f", 100.0),
)


def latency_table(timing, resolutions, baselines=DEFAULT_BASELINES):
    """Rows ``(resolution_px, latency_s, component)``.

    The optical engine processes a whole frame in parallel, so its
    components do not depend on resolution; baselines scale the total.
    """
    br = latency_breakdown(timing)
    rows = []
    for res in resolutions:
        for comp in ("dmd", "camera", "tof", "total"):
            rows.append((int(res), br[comp], comp))
        for b in baselines:
            rows.append((int(res), br["total"] * b.slowdown, b.name))
    return rows


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["resolution_px", "latency_s", "component"])
    for r in rows:
        w.writerow([r[0], repr(float(r[1])), r[2]])
    return buf.getvalue()


def perf_report(timings=None, technologies=TECHNOLOGY_TABLE, baselines=DEFAULT_BASELINES,
                resolution=(1920, 1080)):
    timings = TIMING_PRESETS if timings is None else timings
    rows, cols = resolution
    return {
        "convention": MAC_CONVENTION,
        "timings": {
            name: {"device": asdict(t), "latency_s": latency_breakdown(t),
                   "frame_rate_hz": 1.0 / latency_breakdown(t)["total"],
                   "equivalent_ops_per_s": equivalent_throughput(rows, cols, t.dmd_refresh)}
            for name, t in timings.items()},
        "technologies": [dict(asdict(e), size_speed_product=size_speed_product(e))
                         for e in technologies],
        "baselines": [asdict(b) for b in baselines],
    }


def load_device_table(path):
    """JSON with optional ``timings`` (name -> DeviceTiming fields),
    ``technologies`` (list of TechnologyEntry fields) and ``baselines``."""
    data = json.loads(Path(path).read_text())
    unknown = set(data) - {"timings", "technologies", "baselines"}
    if unknown:
        raise ValueError(f"unknown device-table keys: {sorted(unknown)}")
    timings = {k: DeviceTiming(**v) for k, v in data.get("timings", {}).items()} or dict(TIMING_PRESETS)
    techs = tuple(TechnologyEntry(**e) for e in data.get("technologies", [])) or TECHNOLOGY_TABLE
    bases = tuple(Baseline(**b) for b in data.get("baselines", [])) or DEFAULT_BASELINES
    return timings, techs, bases
