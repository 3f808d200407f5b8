"""Grid and time-step convergence of the Razavy fidelity and density shadowing.

Prints the bare final fidelity, the fast-forward final fidelity and the
largest density L1 error between the fast-forward state and the eigenstate
track for a few (dt, n_points) pairs.
"""

import argparse

from flowshortcuts.pipeline import preset, run_quantum

CASES = ((4e-5, 1024), (2e-5, 1024), (1e-5, 1024), (2e-5, 2048))


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.parse_args()
    print(f"{'dt':>8s} {'n':>6s} {'F_bare':>12s} {'F_ff':>14s} {'max L1':>10s}")
    for dt, n in CASES:
        cfg = preset("razavy", dt=dt, n_points=n)
        bare, ff = run_quantum(cfg, "none"), run_quantum(cfg, "ff")
        print(f"{dt:8.0e} {n:6d} {bare.record.fidelity[-1]:12.6f} {ff.record.fidelity[-1]:14.10f} "
              f"{ff.diagnostics['max_density_l1']:10.2e}")


if __name__ == "__main__":
    main()
