"""Final fidelity of the unassisted Razavy protocol as a function of duration.

Shows how fast the bare process leaves the instantaneous ground state as
the protocol time shrinks towards the default tau = 0.2.
"""

import argparse

from flowshortcuts.config import loads
from flowshortcuts.pipeline import RAZAVY, run_quantum


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--taus", type=float, nargs="+", default=[0.1, 0.2, 0.4, 0.8])
    args = p.parse_args()
    for tau in args.taus:
        cfg = loads(RAZAVY.replace("tau = 0.2", f"tau = {tau!r}").replace("snapshot_times = [0.05, 0.1, 0.2]", ""))
        res = run_quantum(cfg, "none")
        print(f"tau={tau:6.3f}  F_final={res.record.fidelity[-1]:.6f}")


if __name__ == "__main__":
    main()
