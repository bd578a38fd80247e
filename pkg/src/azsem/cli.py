"""Command-line interface.

Subcommands: ``fit`` (one model, draws + diagnostics), ``assess`` (model
comparison report with PPP, CV scores, and verdict), ``simulate`` (scenario
datasets), ``recover`` (parameter-recovery study), ``sensitivity``
(residual-variance prior comparison).

Exit codes: 0 success, 1 input error, 2 convergence-diagnostic failure
(draws are still written). Every command derives all randomness from
``--seed`` and writes a manifest next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .assessment import assess_models
from .convergence import diagnostics as compute_diagnostics
from .dataio import (
    RunManifest,
    draws_to_csv,
    load_spec,
    read_dataset,
    write_dataset,
    write_json,
)
from .fit import SamplerConfig, hmc_run, sign_align
from .model import validate_spec
from .simulation import (
    DEFAULT_PSI_PRIORS,
    generate,
    recovery_experiment,
    scenario_truth,
    sensitivity_analysis,
)


def _sampler_config(args) -> SamplerConfig:
    return SamplerConfig(
        chains=args.chains, warmup=args.warmup, samples=args.samples, seed=args.seed
    )


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _manifest(args, inputs, outputs) -> None:
    path = os.path.join(args.out, "manifest.json")
    RunManifest.build(args.argv, args.seed, inputs, outputs).save(path)


# ----------------------------------------------------------------------- fit


def _diagnostics_dict(draws, diag) -> dict:
    d = {
        "chains": draws.n_chains,
        "samples": draws.n_samples,
        "divergences": int(draws.divergences.sum()),
        "divergence_rate": draws.divergence_rate(),
        "step_sizes": draws.step_sizes.tolist(),
    }
    if diag is None:
        d.update(rhat=None, ess=None, ok=None,
                 note="R-hat and ESS need at least 2 chains")
    else:
        d.update(
            rhat={k: v for k, v in zip(diag.names, diag.rhat.tolist())},
            ess={k: v for k, v in zip(diag.names, diag.ess.tolist())},
            max_rhat=diag.max_rhat(),
            min_ess=diag.min_ess(),
            undefined=list(diag.undefined),
            ok=diag.ok,
        )
    return d


def _render_diagnostics(d: dict) -> str:
    lines = [
        f"chains {d['chains']}, {d['samples']} draws each, "
        f"{d['divergences']} divergences ({d['divergence_rate']:.3f})"
    ]
    if d["rhat"] is None:
        lines.append(d["note"])
    else:
        lines.append(f"max R-hat {d['max_rhat']:.3f}, min ESS {d['min_ess']:.0f}")
        worst = sorted(d["rhat"].items(), key=lambda kv: -(kv[1] if kv[1] == kv[1] else 0))
        for name, val in worst[:5]:
            lines.append(f"  {name:<16} R-hat {val:.3f}  ESS {d['ess'][name]:.0f}")
        lines.append("diagnostics OK" if d["ok"] else "DIAGNOSTIC FAILURE")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    spec = load_spec(args.model)
    validate_spec(spec)
    data = read_dataset(args.data, items=list(spec.items))
    cfg = _sampler_config(args)
    draws = hmc_run(spec, data, cfg)
    if spec.variant in ("EZ", "AZ"):
        draws = sign_align(draws)
    diag = compute_diagnostics(draws) if draws.n_chains >= 2 else None
    out = _outdir(args)
    draws_path = os.path.join(out, "draws.csv")
    diag_path = os.path.join(out, "diagnostics.json")
    draws_to_csv(draws, draws_path, include_latent=args.include_latent)
    dd = _diagnostics_dict(draws, diag)
    dd["model"] = spec.name or os.path.basename(args.model)
    write_json(dd, diag_path)
    _manifest(args, [args.data, args.model], [draws_path, diag_path])
    print(_render_diagnostics(dd))
    return 0 if diag is None or diag.ok else 2


# --------------------------------------------------------------------- assess


def _render_report(d: dict) -> str:
    models = list(d["ppp"])
    w = max(len(m) for m in models) + 2
    lines = [f"{'model':<{w}}{'PPP':>8}{'score diff':>12}  folds ok"]
    for m in models:
        rec = d["scores"][m]
        lines.append(
            f"{m:<{w}}{d['ppp'][m]:>8.3f}{d['differences_from_best'][m]:>12.3f}  "
            + "".join("y" if ok else "n" for ok in rec["fold_diagnostics_ok"])
        )
    if d["verdict"] is None:
        lines.append("verdict: none (needs both an exact-zero and an approximate-zero model)")
    else:
        lines.append(f"verdict: {d['verdict']['outcome']}")
        for r in d["verdict"]["rationale"]:
            lines.append(f"  - {r}")
    return "\n".join(lines)


def cmd_assess(args) -> int:
    if len(args.models) < 2:
        raise ValueError("assess needs at least 2 model configs")
    specs = {}
    for path in args.models:
        spec = load_spec(path)
        validate_spec(spec)
        name = spec.name or os.path.splitext(os.path.basename(path))[0]
        if name in specs:
            raise ValueError(f"duplicate model name {name!r}")
        specs[name] = spec
    first = next(iter(specs.values()))
    sig = [(it.name, it.kind, it.categories) for it in first.items]
    for name, spec in specs.items():
        if [(it.name, it.kind, it.categories) for it in spec.items] != sig:
            raise ValueError(f"model {name!r} disagrees with the others on the item set")
    data = read_dataset(args.data, items=list(first.items))
    cfg = _sampler_config(args)
    report = assess_models(
        specs, data, cfg, K=args.folds, thin=args.thin,
        ppp_threshold=args.ppp_threshold, ez=args.ez, az=args.az,
    )
    out = _outdir(args)
    report_path = os.path.join(out, "report.json")
    write_json(report.to_dict(), report_path)
    _manifest(args, [args.data, *args.models], [report_path])
    with open(report_path, encoding="utf-8") as fh:
        print(_render_report(json.load(fh)))
    return 0


# ----------------------------------------------- simulate/recover/sensitivity


def cmd_simulate(args) -> int:
    data, truth = generate(args.scenario, args.kind, args.n, args.seed, link=args.link)
    out = _outdir(args)
    data_path = os.path.join(out, "data.csv")
    truth_path = os.path.join(out, "truth.json")
    write_dataset(data_path, data)
    write_json(
        {
            "scenario": truth.scenario,
            "kind": args.kind,
            "n": args.n,
            "Lambda": truth.Lambda,
            "Phi": truth.Phi,
            "error_cov": truth.error_cov,
            "alpha": truth.alpha,
        },
        truth_path,
    )
    _manifest(args, [], [data_path, truth_path])
    print(f"wrote {data_path} ({data.n} rows, {data.p} items)")
    return 0


def cmd_recover(args) -> int:
    cfg = _sampler_config(args)
    res = recovery_experiment(
        replications=args.reps, n=args.n, seed=args.seed, config=cfg, thin=args.thin
    )
    out = _outdir(args)
    json_path = os.path.join(out, "recovery.json")
    write_json(
        {
            "replications": res.n_reps,
            "completed": res.n_ok,
            "n": args.n,
            "names": list(res.names),
            "truth": res.truth,
            "coverage": res.coverage,
            "bias_mean": res.bias_mean,
            "bias_median": res.bias_median,
            "failures": [{"replication": r, "error": msg} for r, msg in res.failures],
        },
        json_path,
    )
    csv_path = os.path.join(out, "recovery.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("parameter,truth,coverage,bias_mean,bias_median\n")
        for i, name in enumerate(res.names):
            fh.write(
                f"{name},{res.truth[i]},{res.coverage[i]},"
                f"{res.bias_mean[i]},{res.bias_median[i]}\n"
            )
    _manifest(args, [], [json_path, csv_path])
    print(f"{'parameter':<14}{'truth':>7}{'cover':>7}{'bias(mean)':>12}{'bias(med)':>11}")
    for i, name in enumerate(res.names):
        print(
            f"{name:<14}{res.truth[i]:>7.2f}{res.coverage[i]:>7.2f}"
            f"{res.bias_mean[i]:>12.3f}{res.bias_median[i]:>11.3f}"
        )
    if res.failures:
        print(f"{len(res.failures)} replication(s) failed; see recovery.json")
    return 0


def cmd_sensitivity(args) -> int:
    unknown = [p for p in args.priors if p not in DEFAULT_PSI_PRIORS]
    if unknown:
        raise ValueError(
            f"unknown priors {unknown}; choose from {sorted(DEFAULT_PSI_PRIORS)}"
        )
    data = read_dataset(args.data) if args.data else None
    cfg = _sampler_config(args)
    res = sensitivity_analysis(
        n=args.n, seed=args.seed, config=cfg, thin=args.thin,
        psi_priors={p: DEFAULT_PSI_PRIORS[p] for p in args.priors}, data=data,
    )
    out = _outdir(args)
    json_path = os.path.join(out, "sensitivity.json")
    write_json(
        {
            "names": list(res.names),
            "means": res.means,
            "sds": res.sds,
            "max_pairwise_gap": res.max_pairwise_gap(),
        },
        json_path,
    )
    _manifest(args, [args.data] if args.data else [], [json_path])
    labels = list(res.means)
    print(f"{'parameter':<14}" + "".join(f"{lab:>22}" for lab in labels))
    for i, name in enumerate(res.names):
        cells = "".join(
            f"{res.means[lab][i]:>13.3f} ({res.sds[lab][i]:.3f})" for lab in labels
        )
        print(f"{name:<14}{cells}")
    print(f"max pairwise gap in posterior means: {res.max_pairwise_gap():.4f}")
    return 0


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="azsem",
        description="Bayesian SEM with approximate-zero priors: fit, check, compare.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sampler = argparse.ArgumentParser(add_help=False)
    sampler.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sampler.add_argument("--chains", type=int, default=2)
    sampler.add_argument("--warmup", type=int, default=None,
                         help="warm-up iterations (default 1000 continuous / 2000 categorical)")
    sampler.add_argument("--samples", type=int, default=1000)

    p_fit = sub.add_parser("fit", parents=[sampler], help="fit one model, write draws")
    p_fit.add_argument("data", help="dataset CSV")
    p_fit.add_argument("--model", required=True, help="model config JSON")
    p_fit.add_argument("--out", default="azsem-fit")
    p_fit.add_argument("--include-latent", action="store_true",
                       help="also write per-respondent latent columns")
    p_fit.set_defaults(func=cmd_fit)

    p_assess = sub.add_parser("assess", parents=[sampler],
                              help="compare models: PPP, CV scores, verdict")
    p_assess.add_argument("data")
    p_assess.add_argument("--models", nargs="+", required=True,
                          help="two or more model config JSONs")
    p_assess.add_argument("--folds", type=int, default=3)
    p_assess.add_argument("--ppp-threshold", type=float, default=0.1)
    p_assess.add_argument("--thin", type=int, default=8)
    p_assess.add_argument("--ez", default="EZ", help="model name playing the exact-zero role")
    p_assess.add_argument("--az", default="AZ", help="model name playing the approximate-zero role")
    p_assess.add_argument("--out", default="azsem-assess")
    p_assess.set_defaults(func=cmd_assess)

    p_sim = sub.add_parser("simulate", help="write a scenario dataset")
    p_sim.add_argument("scenario", type=int, choices=(1, 2, 3))
    p_sim.add_argument("kind", choices=("continuous", "binary"))
    p_sim.add_argument("n", type=int)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--link", default="logit", choices=("logit", "probit"))
    p_sim.add_argument("--out", default="azsem-sim")
    p_sim.set_defaults(func=cmd_simulate)

    p_rec = sub.add_parser("recover", parents=[sampler],
                           help="loading/correlation recovery study")
    p_rec.add_argument("--reps", type=int, default=20)
    p_rec.add_argument("--n", type=int, default=1000)
    p_rec.add_argument("--thin", type=int, default=1)
    p_rec.add_argument("--out", default="azsem-recover")
    p_rec.set_defaults(func=cmd_recover)

    p_sen = sub.add_parser("sensitivity", parents=[sampler],
                           help="compare residual-variance priors")
    p_sen.add_argument("data", nargs="?", default=None,
                       help="continuous 6-item CSV (default: simulate n=200)")
    p_sen.add_argument("--n", type=int, default=200)
    p_sen.add_argument("--priors", nargs="+", default=list(DEFAULT_PSI_PRIORS))
    p_sen.add_argument("--thin", type=int, default=1)
    p_sen.add_argument("--out", default="azsem-sensitivity")
    p_sen.set_defaults(func=cmd_sensitivity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = list(argv) if argv is not None else sys.argv[1:]
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
