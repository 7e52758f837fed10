"""
Where the time goes
===================

The mirror refresh and the camera integration set the frame rate. Light
crosses the 0.8 m optical path in under 3 ns, which barely registers.
"""
from aofnn.perf_model import (DEFAULT_BASELINES, TECHNOLOGY_TABLE, TIMING_PRESETS,
                              equivalent_throughput, iso_line, latency_breakdown,
                              size_speed_product)

for name, t in TIMING_PRESETS.items():
    b = latency_breakdown(t)
    print(f"{name}: dmd {b['dmd'] * 1e6:8.2f} us  camera {b['camera'] * 1e6:8.2f} us  "
          f"flight {b['tof'] * 1e9:5.2f} ns  total {b['total'] * 1e6:8.2f} us")

# A full-frame kernel over a full-frame input would cost (rows*cols)^2
# multiply-accumulates per frame on a sliding-window machine.
for rows, cols in ((1920, 1080), (3840, 2160)):
    print(f"{rows}x{cols} at 1031 Hz: {equivalent_throughput(rows, cols, 1031):.2e} MAC/s")

total = latency_breakdown(TIMING_PRESETS["8bit"])["total"]
for base in DEFAULT_BASELINES:
    print(f"{base.name}: {base.slowdown * total * 1e3:.1f} ms per frame ({base.source})")

print("\nsize-speed products")
for e in TECHNOLOGY_TABLE:
    p = size_speed_product(e)
    flag = " (placeholder)" if e.placeholder else ""
    print(f"  {e.name:36s} {p:9.2e}  iso-line 1e{iso_line(p):.1f}{flag}")
