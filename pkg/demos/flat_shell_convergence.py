"""Convergence of the flat shell with a manufactured solution.

The plate lies in a tilted plane, so membrane and bending parts are both
active in global coordinates. For each degree the L2 errors of displacement,
effective normal force, moments and transverse shear are fitted against the
element size; the expected orders are p + 1, p, p - 1 and p - 2.
"""
from tdcshell import convergence_study

P = (2, 3, 4)
N = (4, 8, 16)

report = convergence_study("flat_shell", P, N)
print(f"{'p':>2} {'n':>3} {'err_u':>10} {'err_n':>10} {'err_m':>10} {'err_q':>10}")
for row in report.rows:
    print(f"{row['p']:2d} {row['n']:3d} " + " ".join(f"{row[k]:10.3e}" for k in ("err_u", "err_n", "err_m", "err_q")))
print()
for p in P:
    slopes = ", ".join(f"{k[4:]} {report.slope(p, k):.2f}" for k in ("err_u", "err_n", "err_m", "err_q"))
    print(f"p={p}: {slopes}")
