"""Pinched cylinder: one eighth of the shell with a quarter point load.

Prints the load-point displacement normalized by 1.82488e-5 and the number
of displacement unknowns. The point load makes moments singular, so only
the displacement itself is followed.
"""
from tdcshell import run_cell
from tdcshell.bench import PINCHED_REFERENCE

for p in (3, 4):
    for n in (4, 8, 16):
        row, _ = run_cell("pinched_cylinder", p, n)
        print(f"p={p} n={n:2d} dofs={row['dofs']:5d} u/u_ref={row['u_load'] / PINCHED_REFERENCE:.5f}")
