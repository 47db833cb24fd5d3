"""Command-line entry point: ``tumorkit <subcommand> ...``.

Exit codes: 0 success, 1 verification failure, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .checks import run_checks
from .errors import TumorKitError
from .inpaint import (
    SsimConfig,
    SurrogateConfig,
    gen_surrogate_mask,
    masked_mse,
    masked_ssim,
    merge_and_dilate_roi,
    psnr_from_mse,
)
from .io import load_stack, load_volume, save_volume
from .regions import DecodeConfig, PostprocessConfig, fuse_ensemble, postprocess_enhancing, regions_to_labels
from .segmetrics import REPORT_REGIONS, LesionWiseConfig, legacy_case_metrics, lesionwise_case_metrics
from .stats import CaseScores, rank_sum
from .volume import BinaryMask, LabelVolume

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VERIFY, EXIT_INPUT = 0, 1, 2

SEG_CSV_HEADER = ["case_id", "mode", "region", "dsc", "hd95"]
INPAINT_CSV_HEADER = ["model_id", "case_id", "mse", "psnr", "ssim"]


# JSON Schema (draft 2020-12) for the reports written by each subcommand.
_NUM = {"type": "number"}
_NUM_OR_INF = {"anyOf": [_NUM, {"enum": ["inf", "-inf"]}]}
_SCORE = {
    "type": "object",
    "required": ["dsc", "hd95"],
    "properties": {"dsc": _NUM, "hd95": _NUM},
}
_REGIONS = {
    "type": "object",
    "required": list(REPORT_REGIONS),
    "properties": {r: _SCORE for r in REPORT_REGIONS},
}
_FAILED = {
    "type": "array",
    "items": {"type": "object", "required": ["case_id", "error"]},
}

SEG_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "command", "config", "cases", "mean", "failed"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"const": "eval-seg"},
        "config": {"type": "object", "required": ["mode"]},
        "cases": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["case_id", "mode", "regions", "avg"],
                "properties": {
                    "case_id": {"type": "string"},
                    "mode": {"enum": ["legacy", "lesion_wise"]},
                    "regions": _REGIONS,
                    "avg": _SCORE,
                },
            },
        },
        "mean": {
            "anyOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["n_cases", "regions", "avg"],
                    "properties": {"n_cases": {"type": "integer"}, "regions": _REGIONS, "avg": _SCORE},
                },
            ]
        },
        "failed": _FAILED,
    },
}

INPAINT_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "command", "config", "scores", "aggregates", "ranking", "failed"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"const": "eval-inpaint"},
        "config": {"type": "object", "required": ["peak", "window"]},
        "scores": {
            "type": "array",
            "items": {
                "type": "object",
                "required": INPAINT_CSV_HEADER,
                "properties": {
                    "model_id": {"type": "string"},
                    "case_id": {"type": "string"},
                    "mse": _NUM,
                    "psnr": _NUM_OR_INF,
                    "ssim": _NUM,
                },
            },
        },
        "aggregates": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["n_cases", "mse_mean", "psnr_mean", "psnr_pooled", "ssim_mean"],
                "properties": {
                    "n_cases": {"type": "integer"},
                    "mse_mean": _NUM,
                    "psnr_mean": _NUM_OR_INF,
                    "psnr_pooled": _NUM_OR_INF,
                    "ssim_mean": _NUM,
                },
            },
        },
        "ranking": {
            "anyOf": [
                {"type": "null"},
                {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["model_id", "rank_sum", "final_rank", "tied"],
                        "properties": {
                            "model_id": {"type": "string"},
                            "rank_sum": _NUM,
                            "final_rank": {"type": "integer", "minimum": 1},
                            "tied": {"type": "boolean"},
                        },
                    },
                },
            ]
        },
        "failed": _FAILED,
    },
}

CHECKS_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "suite", "pass", "failing", "reports"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "suite": {"enum": ["kernels", "metrics", "all"]},
        "pass": {"type": "boolean"},
        "failing": {"type": "array", "items": {"type": "string"}},
        "reports": {
            "type": "array",
            "items": {"type": "object", "required": ["suite", "pass", "failing"]},
        },
    },
}


class InputError(Exception):
    """Bad command-line input; maps to exit code 2."""


def _jsonable(obj):
    """Replace infinite floats with the strings "inf"/"-inf"."""
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _dump_json(obj, path: Optional[str]) -> None:
    text = json.dumps(_jsonable(obj), indent=2, allow_nan=False)
    _write_text(text + "\n", path)


def _write_text(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["inf" if isinstance(v, float) and math.isinf(v) else v for v in row])
    return buf.getvalue()


def load_manifest(path: str, need_mask: bool = False) -> list[dict]:
    """Read a JSON manifest: ``{"cases": [...]}`` or a bare list.

    Relative paths resolve against the manifest's directory.
    """
    mpath = Path(path)
    try:
        raw = json.loads(mpath.read_text())
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest {path} is not valid JSON: {exc}") from exc
    cases = raw.get("cases") if isinstance(raw, dict) else raw
    if not isinstance(cases, list) or not cases:
        raise InputError("manifest must hold a non-empty list of cases")

    base = mpath.parent
    seen = set()
    out = []
    for i, entry in enumerate(cases):
        if not isinstance(entry, dict):
            raise InputError(f"manifest entry {i} is not an object")
        missing = [k for k in ("case_id", "pred_path", "gt_path") if k not in entry]
        if need_mask and "mask_path" not in entry:
            missing.append("mask_path")
        if missing:
            raise InputError(f"manifest entry {i} lacks {missing}")
        key = (entry.get("model_id", ""), str(entry["case_id"]))
        if key in seen:
            raise InputError(f"duplicate case_id {entry['case_id']!r}")
        seen.add(key)
        case = dict(entry, case_id=str(entry["case_id"]))
        for k in ("pred_path", "gt_path", "mask_path"):
            if k in case:
                case[k] = str(base / case[k])
        out.append(case)
    return out


def _run_cases(fn: Callable[[dict], dict], cases: list[dict], jobs: int) -> list[dict]:
    """Run ``fn`` per case (concurrently up to ``jobs``), keeping manifest order."""

    def safe(case):
        try:
            return {"ok": True, "case": case, "result": fn(case)}
        except (TumorKitError, OSError, ValueError) as exc:
            return {"ok": False, "case": case, "error": f"{type(exc).__name__}: {exc}"}

    if jobs <= 1:
        return [safe(c) for c in cases]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(safe, cases))


# -- eval-seg ------------------------------------------------------------------

def _seg_config(args) -> LesionWiseConfig:
    return LesionWiseConfig(
        dilation_radius=args.dilation,
        min_lesion_volume=args.min_lesion,
        penalty_hd95=args.penalty_hd,
        connectivity=args.connectivity,
        unit_voxels=args.unit_voxels,
    )


def run_eval_seg(args) -> int:
    cfg = _seg_config(args)
    cases = load_manifest(args.manifest)

    def evaluate(case):
        pred = load_volume(case["pred_path"], labels=True)
        gt = load_volume(case["gt_path"], labels=True)
        if args.mode == "legacy":
            return legacy_case_metrics(pred, gt, cfg, case["case_id"])
        return lesionwise_case_metrics(pred, gt, cfg, case["case_id"])

    results = _run_cases(evaluate, cases, args.jobs)
    reports = [r["result"] for r in results if r["ok"]]
    failed = [{"case_id": r["case"]["case_id"], "error": r["error"]} for r in results if not r["ok"]]
    for f in failed:
        print(f"error: case {f['case_id']}: {f['error']}", file=sys.stderr)

    rows = [rep.to_dict(args.percent) for rep in reports]
    mean = None
    if rows:
        mean = {
            "n_cases": len(rows),
            "regions": {
                r: {k: float(np.mean([row["regions"][r][k] for row in rows])) for k in ("dsc", "hd95")}
                for r in REPORT_REGIONS
            },
            "avg": {k: float(np.mean([row["avg"][k] for row in rows])) for k in ("dsc", "hd95")},
        }

    if args.format == "csv":
        body = []
        for rep in reports:
            body.extend(rep.csv_rows(args.percent))
        if mean:
            for r in REPORT_REGIONS:
                body.append(["mean", args.mode, r, mean["regions"][r]["dsc"], mean["regions"][r]["hd95"]])
            body.append(["mean", args.mode, "Avg", mean["avg"]["dsc"], mean["avg"]["hd95"]])
        _write_text(_csv_text(SEG_CSV_HEADER, body), args.out)
    else:
        config = {"mode": args.mode, "percent": args.percent, **asdict(cfg)}
        _dump_json(
            {
                "schema_version": SCHEMA_VERSION,
                "command": "eval-seg",
                "config": config,
                "cases": rows,
                "mean": mean,
                "failed": failed,
            },
            args.out,
        )
    return EXIT_INPUT if failed else EXIT_OK


# -- eval-inpaint --------------------------------------------------------------

def run_eval_inpaint(args) -> int:
    ssim_cfg = SsimConfig(window=args.ssim_window, data_range=args.peak)
    cases = load_manifest(args.manifest, need_mask=True)

    def evaluate(case):
        pred = load_volume(case["pred_path"])
        ref = load_volume(case["gt_path"])
        mask_vol = load_volume(case["mask_path"])
        mask = BinaryMask(mask_vol.data > 0, mask_vol.spacing)
        mse = masked_mse(pred, ref, mask)
        return CaseScores(
            case["case_id"],
            str(case.get("model_id", "model")),
            mse,
            psnr_from_mse(mse, args.peak),
            masked_ssim(pred, ref, mask, ssim_cfg),
        )

    results = _run_cases(evaluate, cases, args.jobs)
    scores = [r["result"] for r in results if r["ok"]]
    failed = [
        {"case_id": r["case"]["case_id"], "model_id": str(r["case"].get("model_id", "model")), "error": r["error"]}
        for r in results
        if not r["ok"]
    ]
    for f in failed:
        print(f"error: case {f['case_id']} ({f['model_id']}): {f['error']}", file=sys.stderr)

    aggregates = {}
    for model in sorted({s.model_id for s in scores}):
        mine = [s for s in scores if s.model_id == model]
        mean_mse = float(np.mean([s.mse for s in mine]))
        aggregates[model] = {
            "n_cases": len(mine),
            "mse_mean": mean_mse,
            "psnr_mean": float(np.mean([s.psnr for s in mine])),
            "psnr_pooled": psnr_from_mse(mean_mse, args.peak),
            "ssim_mean": float(np.mean([s.ssim for s in mine])),
        }

    ranking = None
    models = {s.model_id for s in scores}
    if len(models) > 1:
        by_case: dict[str, set] = {}
        for s in scores:
            by_case.setdefault(s.case_id, set()).add(s.model_id)
        complete = {c for c, ms in by_case.items() if ms == models}
        ranking = [e.to_dict() for e in rank_sum(s for s in scores if s.case_id in complete)]

    config = {"peak": args.peak, **asdict(ssim_cfg)}
    score_rows = [[s.model_id, s.case_id, s.mse, s.psnr, s.ssim] for s in scores]
    if args.format == "csv":
        _write_text(_csv_text(INPAINT_CSV_HEADER, score_rows), args.out)
        if ranking is not None:
            target = None if args.out in (None, "-") else str(args.out) + ".ranking.json"
            _dump_json(ranking, target)
    else:
        _dump_json(
            {
                "schema_version": SCHEMA_VERSION,
                "command": "eval-inpaint",
                "config": config,
                "scores": [dict(zip(INPAINT_CSV_HEADER, row)) for row in score_rows],
                "aggregates": aggregates,
                "ranking": ranking,
                "failed": failed,
            },
            args.out,
        )
    return EXIT_INPUT if failed else EXIT_OK


# -- fuse ----------------------------------------------------------------------

def run_fuse_postprocess(args) -> int:
    stacks = [load_stack(triple.split(",")) for triple in args.stack]
    decode = DecodeConfig(args.tau_wt, args.tau_tc, args.tau_et)
    post = PostprocessConfig(args.et_total_min, args.et_component_min, args.relabel_target, args.connectivity)
    fused = fuse_ensemble(stacks, args.weights)
    decoded = regions_to_labels(fused, decode)
    labels = postprocess_enhancing(decoded, post) if not args.no_postprocess else decoded
    save_volume(labels, args.out)
    counts = {str(k): int(np.count_nonzero(labels.data == k)) for k in range(4)}
    _dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "fuse",
            "stacks": args.stack,
            "weights": args.weights,
            "decode": asdict(decode),
            "postprocess": None if args.no_postprocess else asdict(post),
            "et_voxels_before_postprocess": int(np.count_nonzero(decoded.data == 3)),
            "label_counts": counts,
            "output": str(args.out),
        },
        str(args.out) + ".provenance.json",
    )
    return EXIT_OK


# -- gen-masks -----------------------------------------------------------------

def run_gen_masks(args) -> int:
    labels = load_volume(args.labels, labels=True)
    assert isinstance(labels, LabelVolume)
    roi = merge_and_dilate_roi(labels, args.roi_radius)
    if args.brain:
        brain_vol = load_volume(args.brain)
        brain = BinaryMask(brain_vol.data > 0, brain_vol.spacing)
    else:
        brain = BinaryMask(np.ones(labels.dims, dtype=bool), labels.spacing)
    cfg = SurrogateConfig(args.count, (args.radius_min, args.radius_max))
    mask = gen_surrogate_mask(brain, roi, args.seed, cfg)
    save_volume(mask, args.out)
    if args.roi_out:
        save_volume(roi, args.roi_out)
    _dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "gen-masks",
            "seed": args.seed,
            "roi_radius": args.roi_radius,
            "surrogate": asdict(cfg),
            "roi_voxels": roi.count,
            "mask_voxels": mask.count,
        },
        str(args.out) + ".provenance.json",
    )
    return EXIT_OK


# -- checks --------------------------------------------------------------------

def run_checks_cmd(args) -> int:
    report = run_checks(args.suite, seed=args.seed, inject_fault=args.inject_fault, pairs=args.pairs)
    _dump_json(report, args.out)
    if not report["pass"]:
        print(f"verification failed: {', '.join(report['failing'])}", file=sys.stderr)
    return EXIT_OK if report["pass"] else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tumorkit",
        description="Brain-tumor segmentation and inpainting evaluation.",
        epilog="exit codes: 0 success, 1 verification failure, 2 input or usage error",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--jobs", type=int, default=1, help="cases evaluated concurrently")

    s = sub.add_parser("eval-seg", help="legacy or lesion-wise Dice/HD95 over a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--mode", choices=("legacy", "lesion_wise"), default="lesion_wise")
    s.add_argument("--dilation", type=int, default=3, help="GT lesion dilation radius (voxels)")
    s.add_argument("--min-lesion", type=int, default=50, help="minimum lesion volume (voxels)")
    s.add_argument("--penalty-hd", type=float, default=374.0, help="HD95 assigned to missed/spurious lesions")
    s.add_argument("--connectivity", type=int, choices=(6, 18, 26), default=26)
    s.add_argument("--unit-voxels", action="store_true", help="measure HD95 in voxels instead of mm")
    s.add_argument("--percent", action="store_true", help="report DSC x100")
    common(s)
    s.set_defaults(func=run_eval_seg)

    s = sub.add_parser("eval-inpaint", help="masked MSE/PSNR/SSIM and rank-sum over a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--peak", type=float, default=1.0, help="dynamic range for PSNR and SSIM")
    s.add_argument("--ssim-window", type=int, default=7)
    common(s)
    s.set_defaults(func=run_eval_inpaint)

    s = sub.add_parser("fuse", help="fuse probability stacks, decode and post-process")
    s.add_argument("--stack", action="append", required=True, metavar="WT,TC,ET",
                   help="three comma-separated channel files; repeat per model")
    s.add_argument("--weights", type=float, nargs="+", default=None)
    s.add_argument("--tau-wt", type=float, default=0.5)
    s.add_argument("--tau-tc", type=float, default=0.5)
    s.add_argument("--tau-et", type=float, default=0.5)
    s.add_argument("--et-total-min", type=int, default=200)
    s.add_argument("--et-component-min", type=int, default=10)
    s.add_argument("--relabel-target", type=int, choices=(0, 1, 2), default=1)
    s.add_argument("--connectivity", type=int, choices=(6, 18, 26), default=26)
    s.add_argument("--no-postprocess", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=run_fuse_postprocess)

    s = sub.add_parser("gen-masks", help="tumor ROI and surrogate inpainting masks")
    s.add_argument("--labels", required=True)
    s.add_argument("--brain", default=None, help="brain image or mask; nonzero voxels count as brain")
    s.add_argument("--roi-radius", type=int, default=3)
    s.add_argument("--count", type=int, default=3)
    s.add_argument("--radius-min", type=int, default=3)
    s.add_argument("--radius-max", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--roi-out", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=run_gen_masks)

    s = sub.add_parser("checks", help="run the built-in verification suites")
    s.add_argument("--suite", choices=("kernels", "metrics", "all"), default="all")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pairs", type=int, default=200, help="random mask pairs for the metrics suite")
    s.add_argument("--inject-fault", action="store_true", help="add a deliberately wrong gradient")
    s.add_argument("--out", default=None)
    s.set_defaults(func=run_checks_cmd)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, TumorKitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
