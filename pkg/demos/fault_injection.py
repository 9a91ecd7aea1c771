"""The verification suite catches a planted sign error in the Weingarten map.

Runs the property suite twice with a small fuzz sample, once as shipped and
once with the curvature sign flipped, and prints only the checks whose
status changes.
"""
from tdcshell.tdc import inject_fault
from tdcshell.verification import run_suite

clean = run_suite(n_fuzz=5)
with inject_fault("weingarten-sign"):
    faulty = run_suite(n_fuzz=5)

print(f"clean run: {sum(r.passed for r in clean)}/{len(clean)} checks pass")
print(f"with fault: {sum(r.passed for r in faulty)}/{len(faulty)} checks pass")
for a, b in zip(clean, faulty):
    if a.passed != b.passed:
        print(b.line())
