# coding: utf-8

# # Same surface, different zones
#
# A smoothed random surface is averaged over four block partitions, the top
# quarter of zones is marked in each, and the four maps are compared on a
# coarse 10 x 10 reference grid.

import sys
from pathlib import Path

import numpy as np

from endobias import svg
from endobias.core import GridSpec, RasterGrid
from endobias.maup import make_block_partition, maup_audit
from endobias.synthgen import gen_random_surface

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/maup")
out.mkdir(parents=True, exist_ok=True)

r = gen_random_surface(side=100, smoothness=25, seed=42)
parts = [make_block_partition(r, side) for side in (5, 10, 20, 25)]
f = maup_audit(r, parts, q=0.25, ref_cell_side=10)

for p, thr, b in zip(parts, f.thresholds, f.binaries):
    print(f"{p.label:>12}: {p.zone_count:4d} zones  threshold {thr:.3f}  top share {b.values.mean():.2f}")
    (out / f"{p.label.split('@')[0]}.svg").write_bytes(svg.render_heatmap(b, zones=p, title=p.label))

# How many reference cells do all four groupings agree on?

for k, v in f.report.classes.items():
    print(f"{k:>16}: {v:.2%}")
print("severity:", f.severity)

agree = f.report.agreement.astype(float)
ref = RasterGrid(GridSpec(0, 0, 10, agree.shape[1], agree.shape[0]), agree)
(out / "agreement.svg").write_bytes(svg.render_heatmap(ref, title="agreement count"))
print("cells with full agreement:", int(np.sum(agree == 4)), "of", agree.size)
print("wrote", out)
