"""Sweep the recipe constant on held-out seeds and print success rates per fixture.

The frozen value in ``jlmedoids.calibration`` is the smallest grid value whose
one-sided 95% Clopper-Pearson lower bound clears 2/3 (9/10 for the fixed
solution check, with a 3-sigma allowance) on every fixture.
"""

import argparse

import numpy as np
from scipy.stats import beta

from jlmedoids.calibration import desk_fixture, fixed_solution_fixture
from jlmedoids.clustering import opt
from jlmedoids.projection import DimensionRecipe, sample_map, target_dimension
from jlmedoids.verify import (
    check_contraction_all_centers_partitions,
    check_expansion,
    check_fixed_solution_expansion,
    check_relaxed_contraction,
)

FIXTURES = [(k, z) for k in (2, 4) for z in (1.0, 2.0)]


def lower_bound(successes, trials, level=0.95):
    return 0.0 if successes == 0 else float(beta.ppf(1 - level, successes, trials - successes + 1))


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=float, nargs="+", default=[0.1, 0.15, 0.2, 0.25, 0.3])
    ap.add_argument("--seeds", type=int, default=60)
    ap.add_argument("--base-seed", type=int, default=10_000)
    ap.add_argument("--fixed", action="store_true", help="sweep the fixed-solution constant instead")
    args = ap.parse_args(argv)
    if args.fixed:
        sweep_fixed(args.grid, range(args.base_seed, args.base_seed + max(args.seeds, 200)))
        return
    eps = 0.25
    seeds = range(args.base_seed, args.base_seed + args.seeds)
    for c in args.grid:
        worst = 1.0
        for k, z in FIXTURES:
            inst = desk_fixture(k, z)
            t_all = target_dimension(DimensionRecipe("forall-centers-partitions", eps, z, 2, k, n=256, c_const=c))
            t_rel = target_dimension(DimensionRecipe("relaxed", eps, z, 2, k, alpha=100, c_const=c))
            t_fix = target_dimension(DimensionRecipe("fixed-solution", eps, z, c_const=c))
            o = opt(inst)
            part = np.argmin(inst.cost_matrix()[:, list(o.solution.center_indices)], axis=1)
            counts = np.zeros(4, dtype=int)
            branches = np.zeros(2, dtype=int)
            for s in seeds:
                G = sample_map(inst.P.dim, t_all, s)
                counts[0] += check_expansion(inst, G, eps).passed
                counts[1] += check_contraction_all_centers_partitions(inst, G, eps).passed
                Gr = sample_map(inst.P.dim, t_rel, s)
                rep = check_relaxed_contraction(inst, Gr, eps, 100.0, opt_value=o.value)
                counts[2] += rep.passed
                branches += (rep.details["alpha_branch"], rep.details["eps_branch"])
                Gf = sample_map(inst.P.dim, t_fix, s)
                counts[3] += check_fixed_solution_expansion(inst, o.solution.center_indices, part, Gf, eps).passed
            n = len(seeds)
            lbs = [lower_bound(x, n) for x in counts[:3]]
            print(f"c={c:<6} k={k} z={z:g} t=({t_all},{t_rel},{t_fix}) rates={counts / n} lb={np.round(lbs, 3)} branches={branches}")
            worst = min(worst, *lbs)
        print(f"c={c}: worst lower bound {worst:.3f}\n", flush=True)


def sweep_fixed(grid, seeds, eps=0.25):
    for c in grid:
        for z in (1.0, 2.0):
            t = target_dimension(DimensionRecipe("fixed-solution", eps, z, c_const=c))
            ok = 0
            for s in seeds:
                inst, C, part = fixed_solution_fixture(s, z)
                ok += check_fixed_solution_expansion(inst, C, part, sample_map(inst.P.dim, t, s), eps).passed
            print(f"fixed-solution c={c} z={z:g} t={t} rate={ok / len(seeds):.3f}", flush=True)


if __name__ == "__main__":
    main()
