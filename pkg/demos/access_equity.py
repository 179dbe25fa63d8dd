# coding: utf-8

# # Who benefits from the accessibility average?
#
# A synthetic county: a lattice of demand sites with four population groups
# and a dozen facilities. Three-step floating catchment scores are computed
# once for the whole population and then summarized per group.

import sys
from pathlib import Path

from endobias import svg
from endobias.access import (DecaySpec, disparity_audit, group_names, group_specific_access,
                             normalized_difference_map, stratified_accessibility, three_sfca)
from endobias.core import GridSpec
from endobias.synthgen import gen_county

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/access")
out.mkdir(parents=True, exist_ok=True)

demand, facilities = gen_county(seed=42)
spec = DecaySpec(d0=12.0)
total = three_sfca(demand, facilities, spec)
supply = [f.supply for f in facilities]
print(f"{len(demand)} sites, {len(facilities)} facilities, conservation residual {total.conservation_residual(supply):.1e}")

strat = stratified_accessibility(total, demand)
finding = disparity_audit(strat, threshold_ratio=0.95)
print(f"overall mean {strat.overall_mean:.4e}")
for g in group_names(demand):
    flag = "  flagged" if g in finding.flagged else ""
    print(f"{g:>7}: {strat.group_means[g]:.4e}  ratio {finding.ratios[g]:.3f}{flag}")

# Each group's own catchment run, normalized next to the total run.

grid = GridSpec(0, 0, 2.0, 24, 24)
for g in finding.flagged:
    nt, ng, diff = normalized_difference_map(total, group_specific_access(demand, facilities, spec, g), grid)
    (out / f"diff_{g}.svg").write_bytes(svg.render_heatmap(diff, ramp="diverging", title=f"total - {g}"))
(out / "total.svg").write_bytes(svg.render_heatmap(nt, title="total (normalized)"))
print("wrote", out)
