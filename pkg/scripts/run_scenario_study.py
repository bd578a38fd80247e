"""Run the three-scenario model comparison study.

For each scenario: simulate one dataset, fit EZ/AZ/EFA/EFA-C, and report
PPP values, cross-validated score differences, and the verdict.

Desk scale (default) finishes in minutes; pass --chains 4 --warmup 2000
--samples 2000 for a full-length run.
"""

import argparse
import json
import os
import time

from azsem import SamplerConfig, assess_models, generate, scenario_models
from azsem.dataio import write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=("continuous", "binary"), default="continuous")
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--scenarios", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--data-seed", type=int, default=1)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--chains", type=int, default=2)
    ap.add_argument("--warmup", type=int, default=500)
    ap.add_argument("--samples", type=int, default=500)
    ap.add_argument("--folds", type=int, default=3)
    ap.add_argument("--thin", type=int, default=8)
    ap.add_argument("--link", default="logit", choices=("logit", "probit"))
    ap.add_argument("--out", default="scenario-study")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    models = scenario_models(args.kind, link=args.link)
    cfg = SamplerConfig(chains=args.chains, warmup=args.warmup,
                        samples=args.samples, seed=args.seed)
    for scenario in args.scenarios:
        t0 = time.time()
        data, truth = generate(scenario, args.kind, args.n, args.data_seed,
                               link=args.link)
        report = assess_models(models, data, cfg, K=args.folds, thin=args.thin)
        d = report.to_dict()
        d["scenario"] = scenario
        d["data_seed"] = args.data_seed
        path = os.path.join(args.out, f"scenario{scenario}_{args.kind}.json")
        write_json(d, path)
        print(f"\nscenario {scenario} ({args.kind}, n={args.n}, "
              f"{time.time() - t0:.0f}s) -> {path}")
        print(f"{'model':<8}{'PPP':>7}{'score diff':>12}")
        for m in models:
            print(f"{m:<8}{d['ppp'][m]:>7.3f}{d['differences_from_best'][m]:>12.3f}")
        if d["verdict"] is not None:
            print(f"verdict: {d['verdict']['outcome']}")


if __name__ == "__main__":
    main()
