"""Uniform refinement of a smooth manufactured solution.

The observed slopes should settle at p + 1 in L2 for elevation and velocity,
at p in L2 for sigma and in H1, and at p for the energy estimate.
"""

import numpy as np

from spacetime_swe import (SpaceConfig, build_structured, error_norms, make_spaces,
                           manufactured_case, rate_fit, solve, uniform_refine)

spec = manufactured_case(T=0.5)
cfg = SpaceConfig(2)
mesh = build_structured(spec.x_range, spec.t_range, 1, 1)
rows = []
for level in range(5):
    if level:
        mesh = uniform_refine(mesh)
    spaces = make_spaces(mesh, cfg)
    res = solve(spec, spaces)
    e = error_norms(res.state, spec.exact, cfg.norm_quadrature_degree)
    rows.append((mesh.diameters.max(), e["L2_zeta"], e["H1_u"], res.representer.norm))
    print(f"level {level}: {mesh.n_triangles:5d} triangles, {spaces.n_trial:6d} dofs, "
          f"L2(zeta) {e['L2_zeta']:.3e}, H1(u) {e['H1_u']:.3e}, "
          f"estimate {res.representer.norm:.3e}, Newton {res.iterations}")

h, l2z, h1u, est = (np.array(c) for c in zip(*rows))
print(f"slopes on the finest three levels: L2(zeta) {rate_fit(h[-3:], l2z[-3:]):.2f}, "
      f"H1(u) {rate_fit(h[-3:], h1u[-3:]):.2f}, estimate {rate_fit(h[-3:], est[-3:]):.2f}")
