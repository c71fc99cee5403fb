"""Likelihood ratio, Wald and score tests for a nested pair of models.

We simulate data where the third individual-specific variable truly has
a small effect, then ask whether it can be dropped. With a large sample
the three classical statistics are close to one another; under a true
null they follow a chi-square law on K-1 degrees of freedom.

Run with ``python3 demos/testing_restrictions.py``.
"""
import dataclasses

import numpy as np
from scipy import stats

import blocklogit as bl


def nested_pair(spec):
    data, full_formula, _ = bl.make_problem(spec)
    restricted = dataclasses.replace(full_formula, individual_vars=full_formula.individual_vars[:-1])
    return data, full_formula, restricted


def three_tests(data, full_formula, restricted_formula):
    full = bl.fit(data, full_formula)
    rest = bl.fit(data, restricted_formula)
    design, _ = bl.build_design(data, full_formula)
    dropped = [n for n in full.names if n not in rest.names]
    return (bl.lrtest(full, rest),
            bl.waldtest(full, dropped),
            bl.scoretest(rest, design, bl.build_index(data, design.base)))


def main():
    spec = bl.ProblemSpec("X", K=4, p=3, N=20000, seed=3, true_scale=0.05)
    for report in three_tests(*nested_pair(spec)):
        print(report)

    # Under the null the LR statistic is approximately chi-square(2).
    lr = []
    for seed in range(100):
        null = bl.ProblemSpec("X", K=3, p=2, N=500, seed=seed, true_scale=0.0)
        lr.append(three_tests(*nested_pair(null))[0].statistic)
    print(f"\nnull LR median over {len(lr)} replicates: {np.median(lr):.3f} "
          f"(chi-square(2) median {stats.chi2.median(2):.3f})")


if __name__ == "__main__":
    main()
