"""Average rate of rank-2 Bell mixtures under noise, d = 2..5."""

import sys

from sdc_qkd.cli import run

FAMILIES = ("depolarising", "dit-phase-flip", "amplitude-damping")

if __name__ == "__main__":
    trials = sys.argv[1] if len(sys.argv) > 1 else "1000"
    for family in FAMILIES:
        code = run(["montecarlo", "--d", "2,3,4,5", "--rank", "2", "--noise", family,
                    "--grid", "0:0.3:0.01", "--trials", trials, "--seed", "0",
                    "--out", f"results/fig3_{family}.csv"])
        if code:
            sys.exit(code)
