"""Critical noise strength of |phi+> for the two Weyl-covariant families."""

import sys

from sdc_qkd.cli import run

if __name__ == "__main__":
    for family in ("depolarising", "dit-phase-flip"):
        code = run(["critical", "--d", "2,3,4,5", "--noise", family, "--tol", "1e-6",
                    "--out", f"results/fig2_{family}.csv"])
        if code:
            sys.exit(code)
