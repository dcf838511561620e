"""Walk through the model zoo and its structural checkers.

Each built-in family is probed for the two properties everything else
rests on: order-preserving coupling and joint convexity in (p, u).  The
numeric Legendre transform then recovers the running costs, and the
coupling-cone audit confirms every finite entry has admissible signs.

Run:  python demos/01_structure_checks.py
"""

import numpy as np

import discountlab as dl

print("zoo families:", ", ".join(dl.model.ZOO_IDS))
print()

for zid in dl.model.ZOO_IDS:
    model = dl.make_model(zid)
    mono = dl.check_monotone(model, 1000, seed=0)
    conv = dl.check_convex(model, 1000, seed=0)
    print(f"{zid:22s} monotone: {mono.passed} "
          f"(worst {mono.worst_violation:.1e})   "
          f"convex: {conv.passed} (worst {conv.worst_violation:.1e})")

# A coupling matrix with a negative row sum breaks the order property;
# the checker exhibits a witness.
bad = dl.make_model("linear-B", B=[[1.0, -2.0], [-1.0, 1.0]])
rep = dl.check_monotone(bad, 1000, seed=0)
print(f"\nrow-sum-violating coupling: passed={rep.passed}, "
      f"worst violation {rep.worst_violation:.3f}")
print("witness:", {k: rep.witness[k] for k in ("u", "v", "k")})

# Numeric conjugate of the quadratic family: cost xi^2/2 + V(x) on the
# admissible coupling segment, infinite outside it.
model = dl.make_model("quadratic-plc")
table = dl.legendre_transform(
    model, 0, np.zeros((1, 1)), np.linspace(-2, 2, 9),
    np.array([[0.0, 0.0], [1.0, -1.0], [0.5, 0.5]]))
print("\nquadratic-plc costs at x=0 (rows xi, cols eta):")
print(np.round(table.values[0], 4))
audit = dl.check_coupling_domain(table)
print("coupling-domain audit:", audit.passed,
      f"({audit.samples_used} finite entries)")

fen = dl.fenchel_equality_check(model, table, 500, seed=0)
print(f"duality round trip: passed={fen.passed} "
      f"(worst {fen.worst_violation:.2e})")
