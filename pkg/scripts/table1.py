"""Noiseless random-state averages (N = 10^4, seed 0) to results/table1.csv."""

import sys

from sdc_qkd.cli import run

if __name__ == "__main__":
    sys.exit(run(["montecarlo", "--d", "2,3,4,5", "--rank", "2,3,4", "--trials", "10000",
                  "--seed", "0", "--out", "results/table1_bell.csv"])
             or run(["montecarlo", "--state", "rank2", "--d", "2,3,4,5", "--trials", "10000",
                     "--seed", "0", "--out", "results/table1_rank2.csv"]))
