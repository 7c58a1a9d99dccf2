"""
The assessment landscape over a shear family
============================================

For a fixed alpha the assessment is tabulated over a regular lattice of
shear parameters (s, t) and printed as a coarse text heat map; the same
rows can be written as CSV with ``pvtrain landscape``.
"""

import numpy as np

from pvtrain import TrainingPair, desk_pair, full_shear_family, landscape

pair = TrainingPair(*desk_pair(size=16, sigma=0.1, seed=0))
family = full_shear_family(((-0.5, 0.5), (-0.5, 0.5)))
rows = landscape(pair, 0.1, family, grid_per_axis=5)

values = np.array([a for _, a in rows]).reshape(5, 5)  # rows s, columns t
ticks = np.linspace(-0.5, 0.5, 5)
print("      t=" + " ".join(f"{t:7.2f}" for t in ticks))
for s, line in zip(ticks, values):
    print(f"s={s:5.2f} " + " ".join(f"{v:7.4f}" for v in line))

(s, t), best = min(rows, key=lambda r: r[1])
print(f"minimum A={best:.5f} at s={s}, t={t}")
