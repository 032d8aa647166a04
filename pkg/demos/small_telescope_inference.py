"""How well do b of B sub-blocks stand in for the whole telescope?

Run with ``python demos/small_telescope_inference.py``.
"""

from teleposture.flows import extract_d1
from teleposture.inference import TARGETS, cluster_sample, enumerate_combinations, partition_blocks, summary_frame
from teleposture.synth import generate, load_scenario

for name in ("uniform", "halves"):
    sc = generate(load_scenario(name))
    part = partition_blocks(extract_d1(sc.flows, window_seconds=sc.manifest["window_seconds"]), 16)
    rows = [enumerate_combinations(part, b, t) for t in TARGETS for b in (1, 2, 3, 4)]
    print(f"== {name}")
    print(summary_frame(rows).round(4).to_string(index=False))
    clustered = cluster_sample(part, 2, "attackers", samples=100, seed=0)
    split = sum((c[0] < 8) != (c[1] < 8) for c in clustered.combinations)
    print(f"DTW clusters {clustered.clusters.tolist()}; draws spanning both halves: {split}/100")
