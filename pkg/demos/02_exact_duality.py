"""Exact value representation by occupation measures.

The discrete discounted system is solved three independent ways:

  1. Howard policy iteration (and Gauss-Seidel value iteration),
  2. the measure side: min <mu, L> over closed measures seeded at (z, k),
  3. the field side: max u_k(z) over subsolution fields.

Because the measure constraints are the literal transpose of the
solver's linearized operator, the three numbers agree to roundoff on
every instance and every (z, k).

Run:  python demos/02_exact_duality.py
"""

import numpy as np

import discountlab as dl

sys_ = dl.standard_system("quadratic-plc")
lam = 0.5
print(f"instance {sys_.label}: {sys_.m} modes x {sys_.num_states} states "
      f"x {sys_.num_controls(0)} controls, lambda = {lam}")

u_pi, policy, diag = dl.policy_iterate(sys_, lam, tol=1e-11)
u_vi, _ = dl.value_iterate(sys_, lam, None, tol=1e-11)
print(f"policy iteration: {diag.iterations} improvements, "
      f"residual {diag.final_residual:.1e}")
print(f"value iteration agrees to {np.max(np.abs(u_pi - u_vi)):.2e}")

print("\n(z, k)   solver        measure LP    subsolution LP")
for (z, k) in ((0, 0), (3, 0), (5, 1)):
    report = dl.duality_audit(sys_, lam, z, k, solver_value=float(u_pi[k, z]))
    print(f"({z}, {k})  {report.solver_value:.12f} "
          f"{report.measure_value:.12f} {report.subsolution_value:.12f}")

mu, value = dl.green_poisson(sys_, lam, 0, 0)
print(f"\nminimizing measure at (0, 0): value {value:.12f}, "
      f"discounted mass {mu.discount_mass(sys_):.12f} (= 1 identically)")

support = dl.support_audit(mu, sys_)
print(f"support box in xi: {support.xi_box} inside sampling box "
      f"{support.control_xi_box}: interior = {support.interior}")

occ = dl.occupation_from_policy(sys_, lam, policy, 0, 0)
print(f"occupation of the optimal policy pairs to "
      f"{occ.pair_cost(sys_):.12f} (same value)")
