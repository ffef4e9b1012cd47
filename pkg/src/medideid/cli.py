"""Command line entry point: ``medideid run|inspect|profiles|dice|score-text``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .deid_rules import ConfigError, builtin_profile, builtin_profile_names, load_profile_file

EXIT_OK, EXIT_FAILURES, EXIT_CONFIG = 0, 1, 2


def _cmd_run(args) -> int:
    from .pipeline import JobConfig, load_config, run_pipeline

    overrides = {
        "inputs": args.input,
        "output": args.output,
        "profile": args.profile,
        "workers": args.workers,
        "stages": args.stages.split(",") if args.stages else None,
    }
    if args.config:
        config = load_config(args.config, overrides)
    else:
        config = JobConfig.from_mapping({k: v for k, v in overrides.items() if v is not None}, Path.cwd())
    manifest = run_pipeline(config)
    counts = ", ".join(f"{k.lower()}={v}" for k, v in manifest.counts.items()) or "no files"
    print(f"{len(manifest.records)} files: {counts}; manifest at {Path(config.output) / 'manifest.jsonl'}")
    return manifest.exit_code


def _cmd_inspect(args) -> int:
    from .pipeline import inspect_file

    profile = load_profile_file(args.profile) if args.profile else None
    for line in inspect_file(args.file, profile):
        print(line)
    return EXIT_OK


def _cmd_profiles(args) -> int:
    for name in builtin_profile_names():
        p = builtin_profile(name)
        print(f"{name}\t{len(p.entries)} rules\tprivate={p.private_tag_policy.value}")
    return EXIT_OK


def _load_mask(path):
    import numpy as np

    from . import nifti_io

    _, vol = nifti_io.load(path)
    return np.asarray(vol.data) != 0


def _cmd_dice(args) -> int:
    from .volume_ops import dice_score

    print(f"{dice_score(_load_mask(args.mask_a), _load_mask(args.mask_b)):.6f}")
    return EXIT_OK


def _cmd_score_text(args) -> int:
    """Each ``*.json`` holds ``{"ground_truth": [box...], "residual": [box...]}``."""
    from .text_redact import BoundingBox, TextResult, text_removal_score

    results = []
    for p in sorted(Path(args.results_dir).glob("*.json")):
        d = json.loads(p.read_text())
        results.append(TextResult([BoundingBox.from_dict(b) for b in d.get("ground_truth", [])],
                                  [BoundingBox.from_dict(b) for b in d.get("residual", [])]))
    if not results:
        print(f"no result files in {args.results_dir}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{text_removal_score(results):.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="medideid", description="De-identify medical imaging data.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="process a batch of files")
    run.add_argument("--config", help="YAML job config")
    run.add_argument("--input", action="append", help="input root (repeatable)")
    run.add_argument("--output", help="output root")
    run.add_argument("--profile", help="built-in profile name or profile file")
    run.add_argument("--workers", type=int)
    run.add_argument("--stages", help="comma-separated stages applied where allowed")
    run.set_defaults(fn=_cmd_run)

    ins = sub.add_parser("inspect", help="show a file's kind and masked header summary")
    ins.add_argument("file")
    ins.add_argument("--profile")
    ins.set_defaults(fn=_cmd_inspect)

    prof = sub.add_parser("profiles", help="de-identification profiles")
    prof_sub = prof.add_subparsers(dest="profiles_command", required=True)
    prof_sub.add_parser("list").set_defaults(fn=_cmd_profiles)

    dice = sub.add_parser("dice", help="DICE overlap of two NIfTI masks (nonzero = inside)")
    dice.add_argument("mask_a")
    dice.add_argument("mask_b")
    dice.set_defaults(fn=_cmd_dice)

    score = sub.add_parser("score-text", help="text removal score over a results directory")
    score.add_argument("results_dir")
    score.set_defaults(fn=_cmd_score_text)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURES


if __name__ == "__main__":
    sys.exit(main())
