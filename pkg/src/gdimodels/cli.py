"""Command-line interface: ``gdi design|fit|select|study``.

Machine-readable output goes to ``--out`` files (or stdout for ``design``);
diagnostics go to stderr. Exit codes: 0 on success, 1 on data or model
errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

from . import __version__
from .config import config_digest, load_study_file
from .design import (
    design_to_csv_text,
    equiproportional_design,
    load_dataset_csv,
    save_design_csv,
)
from .exceptions import GdiError, NoReplicationError
from .fitting import ols
from .interactions import (
    FUNCTIONAL_GROUP,
    THETA_FAMILIES,
    InteractionSpec,
    design_matrix,
)
from .profile import DEFAULT_BOUNDS, estimate_theta
from .selection import default_candidates, lack_of_fit, select
from .simulate import STUDIES, builtin_design
from .validation import parse_grouping

_REFERENCE_ALIASES = {"avg": "average_pairwise", "full": "full_pairwise"}


def _json_ready(value):
    """Replace non-finite floats so the emitted JSON is strictly valid."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    return value


def _write_json(payload: dict, path: str | None) -> None:
    payload = dict(payload)
    payload["gdimodels_version"] = __version__
    text = json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _bounds(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("bounds must be 'low,high'")
    return float(parts[0]), float(parts[1])


def cmd_design(args) -> int:
    if args.builtin:
        design = builtin_design(args.builtin)
        seed_note = ""
    else:
        if not (args.species and args.levels and args.counts):
            raise GdiError("--equiproportional needs --species, --levels and --counts")
        levels = [int(v) for v in args.levels.split(",")]
        counts = [int(v) for v in args.counts.split(",")]
        design = equiproportional_design(args.species, levels, counts,
                                         replicates=args.reps, seed=args.seed)
        seed_note = f"# seed: {args.seed}\n" if args.seed is not None else ""
    text = f"# gdimodels {__version__}\n{seed_note}" + design_to_csv_text(design)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
        print(f"wrote {design.n_rows} rows ({len(design.communities)} communities) "
              f"to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def _coefficient_table(fit) -> str:
    width = max((len(name) for name in fit.coefficients), default=8)
    lines = [f"{'term'.ljust(width)}  estimate"]
    for name, value in fit.coefficients.items():
        lines.append(f"{name.ljust(width)}  {value: .6f}")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    design, y = load_dataset_csv(args.data)
    spec = InteractionSpec(args.family, grouping=parse_grouping(args.grouping),
                           reparameterized=args.reparam)
    estimate = None
    if args.theta == "estimate" and spec.has_theta:
        estimate = estimate_theta(design, y, spec, bounds=args.bounds,
                                  alpha=args.alpha)
        fit = estimate.fit
    else:
        theta = 1.0 if args.theta == "estimate" else float(args.theta)
        fit = ols(design_matrix(design, spec, theta), y)

    print(f"family: {spec.family}   n={fit.n}  p={fit.p}")
    if spec.has_theta:
        if estimate is not None:
            lo = estimate.ci_lower
            hi = estimate.ci_upper
            ci = (f"({lo:.4f}, {hi:.4f})" if estimate.ci_converged
                  else f"({'NC' if lo is None else f'{lo:.4f}'}, "
                       f"{'NC' if hi is None else f'{hi:.4f}'})")
            print(f"theta: {estimate.theta_hat:.6f} (estimated)  "
                  f"{100 * (1 - estimate.alpha):.0f}% CI {ci}")
            print(f"LR test vs theta=1: statistic={estimate.lr_vs_one.statistic:.4f} "
                  f"p={estimate.lr_vs_one.p_value:.4g}")
        else:
            print(f"theta: {fit.theta_used} (fixed)")
    print(f"rss: {fit.rss:.6g}   loglik: {fit.loglik:.6g}")
    if fit.dropped_columns:
        print(f"dropped collinear columns: {', '.join(fit.dropped_columns)}",
              file=sys.stderr)
    print(_coefficient_table(fit))

    if args.out:
        payload = {"fit": fit.to_dict()}
        if estimate is not None:
            payload["theta_estimate"] = estimate.to_dict()
        _write_json(payload, args.out)
    return 0


def cmd_select(args) -> int:
    design, y = load_dataset_csv(args.data)
    grouping = parse_grouping(args.grouping)
    candidates = default_candidates(grouping=grouping,
                                    reparameterized=args.reparam,
                                    include_identity=args.include_identity,
                                    include_null=args.include_null)
    kwargs = dict(procedure=args.procedure, criterion=args.criterion,
                  alpha=args.alpha)
    if args.procedure == "b":
        reference = _REFERENCE_ALIASES.get(args.reference, args.reference)
        if reference not in THETA_FAMILIES:
            raise GdiError(f"--reference must name an interaction family, "
                           f"got {args.reference!r}")
        kwargs["reference"] = InteractionSpec(
            reference,
            grouping=grouping if reference == FUNCTIONAL_GROUP else None,
            reparameterized=args.reparam)
    result = select(design, y, candidates, **kwargs)

    print(f"procedure {result.procedure} ({result.criterion}): "
          f"chose {result.chosen.family} at theta={result.theta_final:.6f}")
    for cand in result.per_candidate:
        marker = "*" if cand.spec is result.chosen else " "
        print(f" {marker} {cand.spec.family:<20} {result.criterion}="
              f"{cand.criterion_value:.3f}  theta={cand.fit.theta_used:.4f}")
    payload = {"selection": result.to_dict()}

    try:
        lof = lack_of_fit(design, y, result.chosen, theta=result.theta_final)
        payload["lack_of_fit"] = lof.to_dict()
        print(f"lack-of-fit vs community factor: F={lof.f:.4f} "
              f"df=({lof.df1}, {lof.df2}) p={lof.p_value:.4g}")
    except NoReplicationError:
        print("lack-of-fit: skipped (no replicated communities)", file=sys.stderr)

    if args.out:
        _write_json(payload, args.out)
    if args.csv_out:
        header, values = result.csv_row()
        with open(args.csv_out, "w", encoding="utf-8") as handle:
            handle.write(",".join(header) + "\n")
            handle.write(",".join(values) + "\n")
    return 0


def cmd_study(args) -> int:
    study_file = load_study_file(args.config, replicates=args.replicates,
                                 seed=args.seed)
    config = study_file.config
    threads = args.threads
    os.makedirs(args.out_dir, exist_ok=True)
    stamp = (f"# gdimodels {__version__}\n"
             f"# config_hash: {study_file.config_hash}\n"
             f"# master_seed: {config.master_seed}\n")
    written = []
    for study in study_file.studies:
        summary = STUDIES[study](config, threads=threads)
        out_csv = os.path.join(args.out_dir, f"{args.prefix}_{study}_summary.csv")
        with open(out_csv, "w", encoding="utf-8") as handle:
            handle.write(stamp)
            handle.write(summary.to_csv_text())
        written.append(out_csv)
        if study == "selection":
            timing_csv = os.path.join(args.out_dir,
                                      f"{args.prefix}_{study}_timings.csv")
            with open(timing_csv, "w", encoding="utf-8") as handle:
                handle.write(stamp)
                handle.write("theta_true,sigma,replicate,procedure,elapsed_seconds\n")
                for (theta, sigma, rep, proc, _family, _theta, elapsed) \
                        in summary.details["selections"]:
                    handle.write(f"{theta!r},{sigma!r},{rep},{proc},{elapsed!r}\n")
            print(f"wrote {timing_csv} (wall-clock; not seed-deterministic)",
                  file=sys.stderr)
    metadata = {
        "config_hash": study_file.config_hash,
        "master_seed": config.master_seed,
        "replicates": config.replicates,
        "thetas": list(config.thetas),
        "sigmas": list(config.sigmas),
        "studies": list(study_file.studies),
        "procedures": list(config.procedures),
        "criterion": config.criterion,
        "species_count": config.design.species_count,
        "n_rows": config.design.n_rows,
    }
    meta_path = os.path.join(args.out_dir, f"{args.prefix}_metadata.json")
    _write_json(metadata, meta_path)
    written.append(meta_path)
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdi",
        description="Generalized Diversity-Interactions modelling tools")
    parser.add_argument("--version", action="version",
                        version=f"gdimodels {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="generate a simplex design CSV")
    group = p_design.add_mutually_exclusive_group(required=True)
    group.add_argument("--builtin", choices=("four", "nine"),
                       help="one of the built-in designs")
    group.add_argument("--equiproportional", action="store_true",
                       help="generic equi-proportional design generator")
    p_design.add_argument("--species", type=int, help="species count (generator)")
    p_design.add_argument("--levels", help="comma-separated richness levels")
    p_design.add_argument("--counts", help="communities per richness level")
    p_design.add_argument("--reps", type=int, default=1,
                          help="replicates per community (default 1)")
    p_design.add_argument("--seed", type=int, help="seed for subset sampling")
    p_design.add_argument("--out", help="output CSV path (default stdout)")
    p_design.set_defaults(func=cmd_design)

    p_fit = sub.add_parser("fit", help="fit one interaction structure to a dataset")
    p_fit.add_argument("--data", required=True, help="dataset CSV (p1..ps[,struct:*],y)")
    p_fit.add_argument("--family", required=True,
                       choices=("null", "identity", "average_pairwise",
                                "functional_group", "additive_species",
                                "full_pairwise", "community_factor"))
    p_fit.add_argument("--grouping", help="group label per species, e.g. 1,1,2,2")
    p_fit.add_argument("--theta", default="estimate",
                       help="'estimate' (default) or a fixed positive value")
    p_fit.add_argument("--reparam", action="store_true",
                       help="use the centroid-invariant scaling")
    p_fit.add_argument("--bounds", type=_bounds, default=DEFAULT_BOUNDS,
                       help="theta search interval, e.g. 0.01,2.5")
    p_fit.add_argument("--alpha", type=float, default=0.05)
    p_fit.add_argument("--out", help="write the fit report as JSON")
    p_fit.set_defaults(func=cmd_fit)

    p_select = sub.add_parser("select", help="select the interaction structure")
    p_select.add_argument("--data", required=True)
    p_select.add_argument("--procedure", choices=("a", "b", "c"), default="b")
    p_select.add_argument("--criterion", choices=("aic", "bic"), default="aic")
    p_select.add_argument("--reference", default="avg",
                          help="reference structure for procedure b "
                               "(avg or full; default avg)")
    p_select.add_argument("--grouping", help="group label per species")
    p_select.add_argument("--include-identity", action="store_true")
    p_select.add_argument("--include-null", action="store_true")
    p_select.add_argument("--reparam", action="store_true")
    p_select.add_argument("--alpha", type=float, default=0.05)
    p_select.add_argument("--out", help="write the selection report as JSON")
    p_select.add_argument("--csv-out", help="write a one-row CSV summary")
    p_select.set_defaults(func=cmd_select)

    p_study = sub.add_parser("study", help="run a configured simulation study")
    p_study.add_argument("--config", required=True, help="study TOML file")
    p_study.add_argument("--replicates", type=int,
                         help="override the config's replicate count")
    p_study.add_argument("--seed", type=int, help="override the master seed")
    p_study.add_argument("--threads", type=int,
                         default=int(os.environ.get("GDI_THREADS", "1")),
                         help="worker threads (default $GDI_THREADS or 1)")
    p_study.add_argument("--out-dir", default=".", help="output directory")
    p_study.add_argument("--prefix", default="study", help="output file prefix")
    p_study.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GdiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
