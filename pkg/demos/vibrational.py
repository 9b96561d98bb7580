"""Entangle three degenerate N-H stretch modes of a small ring molecule with
three detector regions (60 keV, wide angles, point-charge model).

The molecule is a built-in surrogate; a file of ab-initio modes can be read
with ``eshaper.load_vibrational`` instead.

Run:  python demos/vibrational.py
"""

from __future__ import annotations

import numpy as np

from eshaper import (
    Entangle,
    TransferMatrixSampled,
    VibrationalBasis,
    beam_from_energy,
    build_inversion_system,
    forward_scatter,
    fraction_matrix,
    make_shaping_grids,
    solve_incident,
    surrogate_ring_molecule,
)

beam = beam_from_energy(60e3, 0.1, 0.1, n_pixels_i=1257, n_pixels_f=29)
grids = make_shaping_grids(beam)
mol = surrogate_ring_molecule()
basis = VibrationalBasis(mol.select(np.arange(3)), beam.hbar_v)
print(f"{mol.positions.shape[0]} atoms, modes at {np.round(basis.omega * 1e3, 2)} meV")

tm = TransferMatrixSampled.build(basis, grids.incident, grids.detector, grids.fine)
det = grids.detector
pix = {tuple(ij): f for f, ij in enumerate(det.index)}
targets = [(0, 2), (-2, -1), (2, -1)]
pairs = tuple((n, pix[t]) for n, t in enumerate(targets))
sol = solve_incident(build_inversion_system(tm, grids.incident, det, Entangle(pairs)))
final = forward_scatter(sol.alpha, tm, grids.fine)

# global normalisation: the nine entries add up to one
fm = fraction_matrix(final, det.centers[[f for _, f in pairs]], det.pitch,
                     normalization="global")
print(f"residual {sol.residual:.1e}\n")
print("            mode 1  mode 2  mode 3")
for j, row in enumerate(fm.values):
    print(f"  region {j + 1}  " + "  ".join(f"{v:6.3f}" for v in row))
print(f"sum = {fm.values.sum():.12f}")
