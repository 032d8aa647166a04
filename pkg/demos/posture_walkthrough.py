"""Generate the diurnal scenario, build the posture series and look for its period.

Run with ``python demos/posture_walkthrough.py``.
"""

import numpy as np

from teleposture.flows import extract_d1, extract_d2
from teleposture.posture import aggregate_by_origin, build_series, detect_period
from teleposture.sweeptime import DEFAULT_TAUS, sweep_time_series
from teleposture.synth import generate, load_scenario

sc = generate(load_scenario("diurnal"))
d1 = extract_d1(sc.flows, window_seconds=sc.manifest["window_seconds"])
d2 = extract_d2(d1)
print(f"{len(sc.flows)} flows -> D1 {len(d1)} flows / {len(d1.sources())} sources, "
      f"D2 {len(d2)} flows / {len(d2.sources())} sources")

for tag, a in (("D1", d1), ("D2", d2)):
    p = build_series(a, "H")
    print(f"{tag}: mean attackers/hour {p.attackers.mean():.1f}, period {detect_period(p.attackers)} h")

agg = aggregate_by_origin(d1, sc.origin_map, "H")
print("origin shares:", {r.code: round(r.share, 3) for r in agg.shares.itertuples()})

minutes = build_series(d1, "m")
sweeps = sweep_time_series(minutes, DEFAULT_TAUS, stride=60)
for tau in DEFAULT_TAUS:
    d = sweeps[tau].defined_durations()
    print(f"tau={tau:.2f}: {len(d)} defined starts, median sweep-time {np.median(d):.0f} min")
