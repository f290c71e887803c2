"""Rate of the noisy |phi+> over p in [0, 1] for every family and d = 2..5."""

import sys

from sdc_qkd.cli import run

FAMILIES = ("depolarising", "dit-phase-flip", "amplitude-damping")

if __name__ == "__main__":
    for family in FAMILIES:
        code = run(["sweep", "--d", "2,3,4,5", "--noise", family, "--grid", "0:1:0.01",
                    "--out", f"results/fig1_{family}.csv"])
        if code:
            sys.exit(code)
