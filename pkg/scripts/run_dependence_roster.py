"""Compare the eight nicotine-dependence factor models on a 6-item CSV.

Expects columns FNFIRST, FNGIVEUP, FNFREQ, FNNODAY, FNFORBDN, FNSICK.
FNFIRST and FNNODAY may be coded 0-3; they are dichotomized at the
standard cut points. The remaining items must already be 0/1.

The roster: one-factor (1F, 1F-C), two-factor exact/approximate zero
(2F-EZ, 2F-AZ), the same with FNFIRST on both factors (-b), and the
exploratory benchmarks (2F-EFA, 2F-EFA-C). The verdict compares 2F-EZ
against 2F-AZ.
"""

import argparse
import os

import numpy as np

from azsem import Dataset, ItemSpec, SamplerConfig, assess_models, read_dataset
from azsem.dataio import write_dataset, write_json
from azsem.simulation import FNFIRST_MAP, FNNODAY_MAP, FTND_ITEM_NAMES, dichotomize, ftnd_models


def load_items(path) -> Dataset:
    items = [ItemSpec(name, "continuous") for name in FTND_ITEM_NAMES]
    raw = read_dataset(path, items=items)  # kinds re-derived below
    cols = []
    for j, name in enumerate(FTND_ITEM_NAMES):
        col = raw.values[:, j]
        if name == "FNFIRST":
            col = dichotomize(col, FNFIRST_MAP)
        elif name == "FNNODAY":
            col = dichotomize(col, FNNODAY_MAP)
        elif not set(np.unique(col)) <= {0.0, 1.0}:
            raise ValueError(f"{name} must be coded 0/1")
        cols.append(np.asarray(col, dtype=float))
    return Dataset(np.column_stack(cols), [ItemSpec(n, "binary") for n in FTND_ITEM_NAMES])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data", help="CSV with the six dependence items")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--chains", type=int, default=2)
    ap.add_argument("--warmup", type=int, default=1000)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--folds", type=int, default=3)
    ap.add_argument("--thin", type=int, default=8)
    ap.add_argument("--link", default="logit", choices=("logit", "probit"))
    ap.add_argument("--out", default="dependence-roster")
    args = ap.parse_args()

    data = load_items(args.data)
    os.makedirs(args.out, exist_ok=True)
    write_dataset(os.path.join(args.out, "items_binary.csv"), data)
    cfg = SamplerConfig(chains=args.chains, warmup=args.warmup,
                        samples=args.samples, seed=args.seed)
    report = assess_models(ftnd_models(link=args.link), data, cfg,
                           K=args.folds, thin=args.thin,
                           ez="2F-EZ", az="2F-AZ",
                           benchmarks=("2F-EFA", "2F-EFA-C"))
    d = report.to_dict()
    path = os.path.join(args.out, "roster.json")
    write_json(d, path)
    print(f"{'model':<10}{'PPP':>7}{'score diff':>12}")
    for m in d["ppp"]:
        print(f"{m:<10}{d['ppp'][m]:>7.3f}{d['differences_from_best'][m]:>12.3f}")
    if d["verdict"] is not None:
        print(f"verdict: {d['verdict']['outcome']}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
