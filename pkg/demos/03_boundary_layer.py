"""
Where the complementary part lives
==================================

Example 3 has an interior layer from the discontinuous inflow and an
exponential boundary layer at the outflow edge y = 1. The complementary
part u- is the correction that keeps u+ inside [0, 1]; it should only appear
where the linear solution would leave that range.

Run with ``python demos/03_boundary_layer.py [N]``.
"""
import sys

import numpy as np

from bpfem import build_structured_mesh, get_case, solve_case
from bpfem.analysis import cross_section, norm_s

N = int(sys.argv[1]) if len(sys.argv) > 1 else 65
case = get_case(3)
result = solve_case(case, build_structured_mesh("tri-alt", N), "p1")
print(f"N={N}: {result.report.itr_label} linear solves")
print(f"||u-||_s = {norm_s(result.disc.sigma, result.u_minus):.3e}")

# the vertical section x = 0.9 crosses the boundary layer near y = 1
sec = cross_section(result.dofmap, result.u_minus, "x=0.9", n=2000)
y = sec.points[:, 1]
mag = np.abs(sec.values)
for lo, hi in ((0.0, 0.5), (0.5, 0.9), (0.9, 1.0)):
    band = (y >= lo) & (y <= hi)
    print(f"max |u-| for y in [{lo}, {hi}]: {mag[band].max():.3e}")

# the active nodes: lower bound (u- < 0) and upper bound (u- > 0)
coords = result.dofmap.coords
low = coords[result.u_minus < 0]
high = coords[result.u_minus > 0]
print(f"{len(low)} nodes clipped at 0, {len(high)} clipped at 1")
if len(low):
    print(f"lower-active nodes span y in [{low[:, 1].min():.3f}, {low[:, 1].max():.3f}]")
