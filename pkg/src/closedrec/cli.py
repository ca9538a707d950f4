"""Command-line front end.

Usage examples:
  closedrec synth --users 2000 --items 1500 --out-dir data/
  closedrec fit --train data/train.txt --model svd-ae --gamma 0.04 --out model.bin
  closedrec eval --train data/train.txt --test data/test.txt --model svd-ae \
      --gamma 0.04 --k 10,100 --out report.json
  closedrec sweep-gamma --train data/train.txt --val data/val.txt \
      --test data/test.txt --out sweep.json
  closedrec sweep-noise --train data/train.txt --test data/test.txt \
      --models svd-ae,ease --gamma 0.04 --lambda 100 --out noise.json

Exit code 0 on success; failures print one diagnostic line on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import data as datamod
from . import harness, store
from .models import SvdParams, select_rank
from .sparse import compute_degrees, normalize
from .svd import exact_svd, randomized_truncated_svd

__all__ = ["main"]


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _add_data_flags(parser, val: bool = False, test: bool = False):
    parser.add_argument("--train", required=True, help="training interactions file")
    parser.add_argument("--val", required=val, default=None, help="validation interactions file")
    parser.add_argument("--test", required=test, default=None, help="test interactions file")


def _add_model_flags(parser):
    parser.add_argument("--model", choices=("svd-ae", "ease"), default="svd-ae")
    parser.add_argument("--gamma", type=float, default=0.04,
                        help="rank fraction of min(|U|,|I|) (default 0.04)")
    parser.add_argument("--rank", type=int, default=None, help="explicit rank; overrides --gamma")
    parser.add_argument("--lambda", dest="lam", type=float, default=100.0,
                        help="ridge strength for the ease model")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--oversample", type=int, default=10)
    parser.add_argument("--power-iters", type=int, default=4)
    parser.add_argument("--exact", action="store_true",
                        help="use the exact dense factorization (small matrices only)")


def _add_eval_flags(parser):
    parser.add_argument("--k", type=_parse_int_list, default=[10, 100],
                        help="comma-separated metric depths (default 10,100)")
    parser.add_argument("--hr-mode", choices=("truncated", "recall"), default="truncated")


def _bundle(args) -> datamod.DatasetBundle:
    return datamod.load_bundle(args.train, args.val, args.test,
                               name=Path(args.train).stem)


def _model_spec(args) -> harness.ModelSpec:
    svd = SvdParams(oversample=args.oversample, power_iters=args.power_iters,
                    seed=args.seed, exact=args.exact)
    if args.model == "svd-ae":
        return harness.ModelSpec("svd-ae", gamma=None if args.rank else args.gamma,
                                 rank=args.rank, svd=svd)
    return harness.ModelSpec("ease", lam=args.lam, svd=svd)


def _print_metrics(report):
    for key in sorted(report.metrics):
        print(f"{key} {report.metrics[key]:.10g}")


def _cmd_synth(args) -> int:
    bundle = datamod.generate_synthetic(
        num_users=args.users, num_items=args.items, latent_rank=args.latent_rank,
        density=args.density, seed=args.seed, name="synthetic")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split_name, matrix in (("train", bundle.train), ("val", bundle.validation),
                               ("test", bundle.test)):
        datamod.write_pairs_file(out / f"{split_name}.txt", matrix)
    print(f"wrote {out}/train.txt ({bundle.train.nnz} pairs), "
          f"val.txt ({bundle.validation.nnz}), test.txt ({bundle.test.nnz})")
    return 0


def _cmd_fit(args) -> int:
    bundle = _bundle(args)
    spec = _model_spec(args)
    model, pre_s, fit_s = harness.timed_fit(spec, bundle.train)
    store.save_model(args.out, model)
    print(f"{spec.label}: pre-processing {pre_s:.3f}s, fit {fit_s:.3f}s -> {args.out}")
    return 0


def _check_model_dims(model, bundle):
    from .models import EaseModel, SvdAeModel
    if isinstance(model, SvdAeModel):
        ok = (model.num_users, model.num_items) == (bundle.num_users, bundle.num_items)
    elif isinstance(model, EaseModel):
        ok = model.num_items == bundle.num_items
    else:
        ok = False
    if not ok:
        raise ValueError(
            "saved model does not match this dataset's id universe; "
            "fit with the same --train/--val/--test files so the maps agree")


def _cmd_eval(args) -> int:
    bundle = _bundle(args)
    if args.load:
        model = store.load_model(args.load)
        _check_model_dims(model, bundle)
        label = f"loaded:{args.load}"
    else:
        spec = _model_spec(args)
        model, _, _ = harness.timed_fit(spec, bundle.train)
        label = spec.label
    report = harness.evaluate_model(model, bundle.train, bundle.test, args.k,
                                    hr_mode=args.hr_mode,
                                    metadata={"model": label, "seed": args.seed,
                                              "dataset": bundle.name})
    _print_metrics(report)
    if args.out:
        store.write_report(report, args.out)
    return 0


def _cmd_sweep_gamma(args) -> int:
    bundle = _bundle(args)
    result = harness.sweep_gamma(bundle.train, bundle.validation, bundle.test,
                                 gammas=args.gammas, ks=args.k, seed=args.seed,
                                 oversample=args.oversample, power_iters=args.power_iters,
                                 exact=args.exact, hr_mode=args.hr_mode)
    for i, gamma in enumerate(result.values):
        report = result.reports[i]
        val_hr = report.metadata.get("validation_hr10", 0.0)
        print(f"gamma={gamma:g} rank={report.metadata.get('rank')} "
              f"mse={result.mse[i]:.10g} val-HR@10={val_hr:.10g} "
              f"test-HR@{min(args.k)}={report.metrics[f'HR@{min(args.k)}']:.10g}")
    print(f"best gamma (validation HR@10): {result.values[result.best_index]:g}")
    if args.out:
        store.write_report(result, args.out)
    return 0


def _cmd_sweep_lambda(args) -> int:
    bundle = _bundle(args)
    result = harness.sweep_lambda_ease(bundle.train, bundle.validation, bundle.test,
                                       lambdas=args.lambdas, ks=args.k,
                                       hr_mode=args.hr_mode)
    for i, lam in enumerate(result.values):
        report = result.reports[i]
        print(f"lambda={lam:g} mse={result.mse[i]:.10g} "
              f"test-HR@{min(args.k)}={report.metrics[f'HR@{min(args.k)}']:.10g}")
    if args.out:
        store.write_report(result, args.out)
    return 0


def _cmd_sweep_noise(args) -> int:
    bundle = _bundle(args)
    svd = SvdParams(oversample=args.oversample, power_iters=args.power_iters,
                    seed=args.seed, exact=args.exact)
    specs = []
    for kind in args.models:
        if kind == "svd-ae":
            specs.append(harness.ModelSpec("svd-ae",
                                           gamma=None if args.rank else args.gamma,
                                           rank=args.rank, svd=svd))
        elif kind == "ease":
            specs.append(harness.ModelSpec("ease", lam=args.lam, svd=svd))
        else:
            raise ValueError(f"unknown model kind {kind!r} in --models")
    sweeps = harness.sweep_noise(bundle.train, bundle.test, specs,
                                 ratios=args.ratios, ks=args.k, seed=args.seed,
                                 hr_mode=args.hr_mode)
    for sweep in sweeps:
        for i, ratio in enumerate(sweep.values):
            metrics = sweep.reports[i].metrics
            line = " ".join(f"{k}={metrics[k]:.10g}" for k in sorted(metrics))
            print(f"{sweep.label} noise={ratio:g} {line}")
    if args.out:
        store.write_report(sweeps, args.out)
    return 0


def _cmd_spectrum(args) -> int:
    bundle = _bundle(args)
    train = bundle.train
    rank = args.rank or select_rank(train.num_users, train.num_items, args.gamma)
    normalized = normalize(train, compute_degrees(train))
    if args.exact:
        factors = exact_svd(normalized.to_dense())
    else:
        factors = randomized_truncated_svd(normalized, rank, oversample=args.oversample,
                                           power_iters=args.power_iters, seed=args.seed)
    values = harness.export_spectrum(factors)
    head = ", ".join(f"{v:.6g}" for v in values[:10])
    print(f"{values.size} singular values, leading: {head}")
    if args.out:
        store.write_report({"type": "spectrum", "rank": int(values.size),
                            "values": values, "seed": args.seed,
                            "exact": bool(args.exact)}, args.out)
    return 0


def _cmd_stats(args) -> int:
    bundle = _bundle(args)
    spec = _model_spec(args)
    model, _, _ = harness.timed_fit(spec, bundle.train)
    raw, recon = harness.sample_reconstruction_block(model, bundle.train,
                                                     sample_size=args.block,
                                                     seed=args.seed)
    raw_hist = harness.reconstruction_stats(raw, bins=args.bins)
    recon_hist = harness.reconstruction_stats(recon, bins=args.bins)
    print(f"sampled block {raw.shape[0]}x{raw.shape[1]}; reconstructed values in "
          f"[{recon_hist.value_min:.6g}, {recon_hist.value_max:.6g}]")
    if args.out:
        store.write_report({"type": "reconstruction-stats", "model": spec.label,
                            "block": list(raw.shape),
                            "raw": raw_hist.as_dict(),
                            "reconstructed": recon_hist.as_dict()}, args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="closedrec",
                                     description="Closed-form collaborative filtering toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset triple")
    p.add_argument("--users", type=int, default=2000)
    p.add_argument("--items", type=int, default=1500)
    p.add_argument("--latent-rank", type=int, default=8)
    p.add_argument("--density", type=float, default=0.025)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="fit a model and save it")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("eval", help="fit (or load) a model and score the test split")
    _add_data_flags(p, test=True)
    _add_model_flags(p)
    _add_eval_flags(p)
    p.add_argument("--load", default=None, help="evaluate a previously saved model")
    p.add_argument("--out", default=None, help="report output path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep-gamma", help="sweep the rank fraction grid")
    _add_data_flags(p, val=True, test=True)
    _add_model_flags(p)
    _add_eval_flags(p)
    p.add_argument("--gammas", type=_parse_float_list,
                   default=list(harness.DEFAULT_GAMMA_GRID))
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep_gamma)

    p = sub.add_parser("sweep-lambda", help="sweep the ease regularization grid")
    _add_data_flags(p, test=True)
    _add_model_flags(p)
    _add_eval_flags(p)
    p.add_argument("--lambdas", type=_parse_float_list,
                   default=list(harness.DEFAULT_LAMBDA_GRID))
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep_lambda)

    p = sub.add_parser("sweep-noise", help="sweep training-noise ratios")
    _add_data_flags(p, test=True)
    _add_model_flags(p)
    _add_eval_flags(p)
    p.add_argument("--ratios", type=_parse_float_list,
                   default=list(harness.DEFAULT_NOISE_GRID))
    p.add_argument("--models", type=lambda s: [x.strip() for x in s.split(",") if x.strip()],
                   default=["svd-ae"], help="comma-separated kinds, e.g. svd-ae,ease")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep_noise)

    p = sub.add_parser("spectrum", help="export singular values of the normalized matrix")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("stats", help="reconstruction value histograms on a sampled block")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--block", type=int, default=300, help="sample block side length")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, store.PersistenceError, TypeError,
            IndexError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
