"""Command-line front end: gen-model, sample, estimate, search, experiment, plot.

Every subcommand is a thin shell over library operations. Data goes to
files or standard output; informational output goes to standard error.
Exit codes: 0 success, 2 usage or malformed input, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .estimate import grouped_known_estimate, independent_bits_estimate, joint_dirichlet_estimate
from .experiment import ExpensiveSearchError, spec_from_jsonable
from .pipeline import run_experiment
from .prob import (
    CapacityError,
    TallyVector,
    joint_from_grouping,
    joint_from_independent_bits,
    kl_divergence,
)
from .report import read_curves_csv, render_svg, write_svg
from .rng import RngState
from .search import (
    SearchConfig,
    estimate_from_candidate,
    search,
    search_result_jsonable,
    write_search_result,
)
from .simulate import (
    BitsConfig,
    BitVectorTruth,
    ConfigError,
    DatasetParseError,
    UrnConfig,
    UrnTruth,
    build_bitvector_truth,
    build_urn_truth,
    dataset_digest,
    draw_bitvector,
    draw_urn_sample,
    read_bits_dataset,
    read_model,
    read_urn_dataset,
    write_bits_dataset,
    write_model,
    write_urn_dataset,
)

URN_CASES = ("raw", "ours")
BIT_CASES = ("c0", "c0p", "c13", "c123", "c1", "c12")


class UsageError(ValueError):
    pass


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _load_json(path: str, what: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise UsageError(f"{what} file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} file {path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise UsageError(f"{what} file {path}: expected a JSON object")
    return payload


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_gen_model(args: argparse.Namespace) -> int:
    config_payload = _load_json(args.config, "config") if args.config else {}
    from .experiment import _build_config  # same key handling as spec files

    if args.kind == "urns":
        truth = build_urn_truth(_build_config(UrnConfig, config_payload, "config"), args.seed)
    else:
        truth = build_bitvector_truth(
            _build_config(BitsConfig, config_payload, "config"), args.seed
        )
    write_model(args.out, truth)
    _info(f"wrote {args.kind} model to {args.out}")
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    truth = read_model(args.model)
    rng = RngState(args.seed)
    if isinstance(truth, UrnTruth):
        samples = []
        for _ in range(args.n):
            sample, rng = draw_urn_sample(truth, rng)
            samples.append(sample)
        write_urn_dataset(args.out, samples)
    else:
        patterns = []
        for _ in range(args.n):
            pattern, rng = draw_bitvector(truth, rng)
            patterns.append(pattern)
        write_bits_dataset(args.out, patterns, truth.v)
    _info(f"wrote {args.n} samples to {args.out}")
    return 0


def _estimate_urns(args: argparse.Namespace, truth: UrnTruth | None) -> dict:
    samples = read_urn_dataset(args.data)
    n_urns = truth.n_urns if truth else 4
    n_colors = truth.n_colors if truth else 8
    counts = np.zeros((n_urns, n_colors))
    for s in samples:
        if not (0 <= s.urn_id < n_urns and 0 <= s.color < n_colors):
            raise UsageError(f"data: sample ({s.urn_id + 1}, {s.color + 1}) outside model range")
        counts[s.urn_id, s.color] += 1.0
    tallies = [TallyVector(counts[i]) for i in range(n_urns)]
    from .estimate import EstimatorConfig, em_two_type, per_unit_mixture, raw_tally_estimate

    cfg = EstimatorConfig()
    if args.case == "raw":
        dists = raw_tally_estimate(tallies, cfg)
    else:
        dists = per_unit_mixture(em_two_type(tallies, cfg, args.seed))
    if truth is not None:
        kls = [kl_divergence(truth.urn_dist(i), dists[i]) for i in range(n_urns)]
        for i, kl in enumerate(kls):
            _info(f"KL urn {i + 1}: {kl:.6f}")
        _info(f"KL total: {sum(kls):.6f}")
    return {"case": args.case, "estimates": [d.to_list() for d in dists]}


def _estimate_bits(args: argparse.Namespace, truth: BitVectorTruth | None) -> dict:
    from .estimate import EstimatorConfig

    patterns, v = read_bits_dataset(args.data)
    if truth is not None and truth.v != v:
        raise UsageError(f"data: bit width {v} does not match the model's {truth.v}")
    cfg = EstimatorConfig()
    payload: dict = {"case": args.case, "v": v}
    if args.case == "c0":
        arr = np.asarray(patterns, dtype=np.int64)
        ones = [(float(((arr >> (v - 1 - var)) & 1).sum()), float(len(patterns))) for var in range(v)]
        probs = independent_bits_estimate(ones, cfg)
        est = joint_from_independent_bits(probs)
        payload["bit_probs"] = [float(p) for p in probs]
    elif args.case == "c0p":
        est = joint_dirichlet_estimate(
            TallyVector(np.bincount(np.asarray(patterns, np.int64), minlength=1 << v)), cfg
        )
    elif args.case in ("c13", "c123"):
        if truth is None:
            raise UsageError(f"case {args.case} requires --model (it supplies the grouping)")
        dists, _ = grouped_known_estimate(
            truth.hidden_grouping,
            patterns,
            cfg,
            share_types=args.case == "c123",
            seed=args.seed,
        )
        est = joint_from_grouping(truth.hidden_grouping, dists)
        payload["grouping"] = [[var + 1 for var in grp] for grp in truth.hidden_grouping.slots]
    else:  # c1 / c12
        if args.g is None or args.s is None:
            if truth is None:
                raise UsageError(f"case {args.case} requires --g and --s (or --model)")
            g, s = truth.hidden_grouping.g, truth.hidden_grouping.s
        else:
            g, s = args.g, args.s
        cfg_search = SearchConfig(
            v=v,
            g=g,
            s=s,
            num_types=2 if args.case == "c12" else 1,
            mode="case12" if args.case == "c12" else "case1",
            workers=args.workers,
            top_k=1,
        )
        best = search(patterns, cfg_search)[0]
        est = estimate_from_candidate(patterns, best.candidate, cfg, seed=args.seed)
        payload["grouping"] = [[var + 1 for var in grp] for grp in best.candidate.grouping.slots]
        if best.candidate.assignment:
            payload["assignment"] = list(best.candidate.assignment)
    if truth is not None:
        from .simulate import true_joint

        _info(f"KL joint: {kl_divergence(true_joint(truth), est):.6f}")
    payload["joint"] = est.to_list()
    return payload


def _cmd_estimate(args: argparse.Namespace) -> int:
    truth = read_model(args.model) if args.model else None
    if args.case in URN_CASES:
        if truth is not None and not isinstance(truth, UrnTruth):
            raise UsageError(f"case {args.case}: --model must be an urns model")
        payload = _estimate_urns(args, truth)
    elif args.case in BIT_CASES:
        if truth is not None and not isinstance(truth, BitVectorTruth):
            raise UsageError(f"case {args.case}: --model must be a bits model")
        payload = _estimate_bits(args, truth)
    else:
        raise UsageError(f"case: unknown id {args.case!r} (valid: {URN_CASES + BIT_CASES})")
    _emit(payload, args.out)
    return 0


def _cmd_search(args: argparse.Namespace) -> int:
    patterns, v = read_bits_dataset(args.data)
    if args.v != v:
        raise UsageError(f"--v {args.v} does not match the dataset's bit width {v}")
    cfg = SearchConfig(
        v=args.v,
        g=args.g,
        s=args.s,
        num_types=args.types,
        mode=args.mode,
        scorer="paper_plugin" if args.scorer == "paper" else "dirichlet_marginal",
        workers=args.workers,
        top_k=args.top_k,
    )
    from .search import candidate_count

    started = time.perf_counter()
    results = search(patterns, cfg)
    elapsed = time.perf_counter() - started
    _info(
        f"searched {candidate_count(cfg):,} candidates over {len(patterns)} samples "
        f"in {elapsed:.2f}s"
    )
    digest = dataset_digest(patterns, v)
    if args.out:
        write_search_result(args.out, cfg, digest, results)
    else:
        sys.stdout.write(
            json.dumps(search_result_jsonable(cfg, digest, results), sort_keys=True, indent=2)
            + "\n"
        )
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    spec = spec_from_jsonable(_load_json(args.spec, "spec"))
    manifest = run_experiment(spec, args.out_dir, allow_expensive=args.allow_expensive)
    _info(f"experiment outputs in {args.out_dir}: {', '.join(manifest['outputs'])}")
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    entries = read_curves_csv(args.csv)
    curves = [
        (case if run == "avg" else f"{case} (run {run})", curve) for case, run, curve in entries
    ]
    write_svg(args.out, render_svg(curves, log_y=args.log_y))
    _info(f"wrote {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsl",
        description="Latent-structure laboratory: simulate, estimate, search, plot.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    default_workers = int(os.environ.get("LSL_WORKERS", "1"))

    p = sub.add_parser("gen-model", help="generate a ground-truth model file")
    p.add_argument("--kind", choices=("urns", "bits"), required=True)
    p.add_argument("--config", help="JSON config file (defaults per kind)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_gen_model)

    p = sub.add_parser("sample", help="draw samples from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("estimate", help="run one estimator case over a dataset")
    p.add_argument("--case", required=True, help=f"one of {URN_CASES + BIT_CASES}")
    p.add_argument("--data", required=True)
    p.add_argument("--model", help="model file; enables KL reporting")
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.add_argument("--g", type=int, help="groups (c1/c12 without --model)")
    p.add_argument("--s", type=int, help="slots per group (c1/c12 without --model)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=default_workers)
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("search", help="exhaustive structure search over a bits dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--g", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--types", type=int, default=2)
    p.add_argument("--mode", choices=("case1", "case12"), default="case12")
    p.add_argument("--scorer", choices=("paper", "marginal"), default="paper")
    p.add_argument("--workers", type=int, default=default_workers)
    p.add_argument("--top-k", type=int, default=10, dest="top_k")
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.set_defaults(handler=_cmd_search)

    p = sub.add_parser("experiment", help="run an experiment spec end to end")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--allow-expensive", action="store_true", dest="allow_expensive")
    p.set_defaults(handler=_cmd_experiment)

    p = sub.add_parser("plot", help="render a curves CSV as an SVG line chart")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log-y", action="store_true", dest="log_y")
    p.set_defaults(handler=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
    )
    try:
        return args.handler(args)
    except (UsageError, ConfigError, DatasetParseError, CapacityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExpensiveSearchError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
