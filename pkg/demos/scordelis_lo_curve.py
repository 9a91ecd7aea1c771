"""Scordelis-Lo roof: normalized maximum vertical deflection under refinement.

The reference 0.3024 comes from the shell obstacle course; the converged
Kirchhoff-Love value of this discretization is about 0.6% lower.
"""
from tdcshell import convergence_study
from tdcshell.bench import SCORDELIS_REFERENCE

P = (2, 3, 4)
N = (2, 4, 8, 16)

report = convergence_study("scordelis_lo", P, N)
print("u_z,max / 0.3024")
print("p \\ n " + "".join(f"{n:>10d}" for n in N))
for p in P:
    _, values = report.series(p, "uz_max")
    print(f"{p:5d} " + "".join(f"{v / SCORDELIS_REFERENCE:10.5f}" for v in values))
