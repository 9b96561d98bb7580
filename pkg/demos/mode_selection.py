"""Shape a 100 keV beam so that only chosen plasmons of a silver triangle
show up inside a small collection aperture.

Run:  python demos/mode_selection.py
"""

from __future__ import annotations

import numpy as np

from eshaper import (
    SelectMode,
    TransferMatrixSampled,
    beam_from_energy,
    build_inversion_system,
    build_triangle_mesh,
    eels_spectrum,
    forward_scatter,
    make_shaping_grids,
    plasmon_basis,
    solve_incident,
)

# 100 keV electrons, 1.5 mrad illumination, 0.75 mrad collection
beam = beam_from_energy(100e3, 1.5e-3, 0.75e-3, n_pixels_i=1257, n_pixels_f=49)
grids = make_shaping_grids(beam)
print(f"hbar v = {beam.hbar_v:.2f} eV nm, k = {beam.k:.1f} nm^-1")
print(f"incident {grids.incident.n} px, detector {grids.detector.n} px, "
      f"fine {grids.fine.n} px, pitch {grids.pitch:.4g} nm^-1")

# 10 nm rounded triangle, 2 nm thick, Drude silver; five lowest bright modes
basis = plasmon_basis(build_triangle_mesh(10.0, 2.0, 1500, 0.5), beam.hbar_v, 5)
for k, (w, lab) in enumerate(zip(basis.omega, basis.labels)):
    print(f"  mode {k + 1}: {w:.3f} eV  {lab}")

tm = TransferMatrixSampled.build(basis, grids.incident, grids.detector, grids.fine)
fine = grids.fine
inside = np.linalg.norm(fine.centers, axis=1) <= fine.q_max
energies = np.linspace(2.4, 3.3, 181)

for name, modes in (("dipolar (1, 2)", (0, 1)), ("hexapolar (3)", (2,))):
    sol = solve_incident(build_inversion_system(tm, grids.incident, grids.detector,
                                                SelectMode(modes)))
    final = forward_scatter(sol.alpha, tm, fine)
    spec = eels_spectrum(final, energies, inside)
    i_dip = np.argmin(np.abs(energies - basis.omega[0]))
    i_hex = np.argmin(np.abs(energies - basis.omega[2]))
    print(f"\ntarget {name}: rank {sol.rank}, residual {sol.residual:.1e}")
    print(f"  in-aperture loss at dipole {spec[i_dip]:.3e} /eV, at hexapole {spec[i_hex]:.3e} /eV")
    pops = (np.abs(final.amplitudes[:, inside]) ** 2).sum(1) * fine.area
    print("  in-aperture probability per mode:", np.array2string(pops, precision=2))
