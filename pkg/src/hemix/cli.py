"""Command-line entry point.

Subcommands: geom-check, grad-check, analyze-alpha, train-toy, decouple,
ground, eval, and pipeline (decouple -> ground -> eval over JSONL files).

Every run echoes its resolved configuration as one JSON line on stderr.
Exit codes: 0 success, 1 completed with failures (failed checks or skipped
samples), 2 configuration or IO error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import contrastive, decouple, grounding, jsonl, lorentz, metrics, mixture, similarity, trainer


def _echo_config(args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    print(json.dumps(cfg, sort_keys=True, default=str), file=sys.stderr)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# geom-check / grad-check
# ---------------------------------------------------------------------------

def cmd_geom_check(args) -> int:
    results = lorentz.run_property_suite(seed=args.seed, cases=args.cases)
    ok = True
    for r in results:
        status = "ok  " if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.detail}")
        ok = ok and r.passed
    return 0 if ok else 1


def _random_batch(rng: np.random.Generator, dim: int) -> contrastive.GroundingBatch:
    n_images = int(rng.integers(1, 5))
    images = []
    for _ in range(n_images):
        n_anchors = int(rng.integers(1, 5))
        images.append(
            contrastive.ImageRecord(
                anchors=[rng.standard_normal(dim) for _ in range(n_anchors)],
                text=rng.standard_normal(dim),
            )
        )
    return contrastive.GroundingBatch(images=images)


def cmd_grad_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    dims = [4, 8, 16]
    worst = 0.0
    for i in range(args.batches):
        dim = dims[i % len(dims)]
        bundle = similarity.ProjectionBundle.initialize(
            dim, alpha=float(rng.uniform(0.1, 0.9)), tau=float(rng.uniform(0.05, 1.0)),
            kappa=float(rng.uniform(0.25, 4.0)), seed=int(rng.integers(1 << 31)),
        )
        batch = _random_batch(rng, dim)
        intra = bool(rng.integers(2))
        err = contrastive.gradient_check(batch, bundle, epsilon=args.epsilon, intra_negatives=intra)
        worst = max(worst, err)
    passed = worst < args.tolerance
    print(f"{'ok  ' if passed else 'FAIL'} gradient-check: max rel error {worst:.3e} "
          f"over {args.batches} batches (tolerance {args.tolerance:g})")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# analyze-alpha
# ---------------------------------------------------------------------------

def cmd_analyze_alpha(args) -> int:
    model = mixture.MixtureErrorModel(
        b_e=args.b_e, b_h=args.b_h, sigma_e=args.sigma_e, sigma_h=args.sigma_h, rho=args.rho
    )
    a, b, c = mixture.quadratic_coeffs(model)
    alpha_star = mixture.optimal_alpha(model)
    out = {
        "coeffs": {"a": a, "b": b, "c": c},
        "alpha_star": alpha_star,
        "degenerate": alpha_star is None,
        "alpha_star_in_unit_interval": (alpha_star is not None and 0.0 < alpha_star < 1.0),
        "mse_curve": [
            {"alpha": round(x, 1), "mse": mixture.mse_of_mix(round(x, 1), model)}
            for x in np.linspace(0.0, 1.0, 11)
        ],
    }
    if alpha_star is not None:
        out["mse_at_alpha_star"] = mixture.mse_of_mix(alpha_star, model)
    if args.mc_n:
        probe = alpha_star if alpha_star is not None else 0.5
        estimate, stderr = mixture.monte_carlo_mse(probe, model, n=args.mc_n, seed=args.seed)
        closed = mixture.mse_of_mix(probe, model)
        out["monte_carlo"] = {
            "alpha": probe,
            "n": args.mc_n,
            "estimate": estimate,
            "stderr": stderr,
            "closed_form": closed,
            "within_3_stderr": abs(estimate - closed) <= max(3.0 * stderr, 1e-12),
        }
    print(_dump(out))
    return 0


# ---------------------------------------------------------------------------
# train-toy
# ---------------------------------------------------------------------------

def cmd_train_toy(args) -> int:
    hierarchy = trainer.default_hierarchy(
        n_parents=args.parents,
        children_per_parent=args.children_per_parent,
        feature_dim=args.dim,
        noise_scale=args.noise,
        seed=args.seed,
    )
    data = trainer.generate_dataset(
        hierarchy, args.samples,
        negatives_per_image=args.negatives, batch_images=args.batch_images,
    )
    cfg = trainer.TrainConfig(
        steps=args.steps, lr=args.lr, batch_images=args.batch_images,
        negatives_per_image=args.negatives, alpha=args.alpha, tau=args.tau,
        kappa=args.kappa, optimizer=args.optimizer, seed=args.seed,
        intra_negatives=args.intra_negatives,
    )
    bundle, trace = trainer.train(data, cfg)

    out = Path(args.out)
    similarity.save_bundle(bundle, out)
    trace_path = Path(args.trace_out) if args.trace_out else out.parent / "loss_trace.csv"
    with trace_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        writer.writerows((i, f"{loss:.10g}") for i, loss in enumerate(trace))
    report = trainer.apex_report(bundle, hierarchy)
    apex_path = Path(args.apex_out) if args.apex_out else out.parent / "apex_report.json"
    apex_path.write_text(_dump(report) + "\n")

    eval_data = trainer.generate_dataset(
        hierarchy, 200, negatives_per_image=args.negatives,
        batch_images=args.batch_images, seed=args.seed + 9999,
    )
    head = float(np.mean(trace[:10]))
    tail = float(np.mean(trace[-10:]))
    summary = {
        "initial_loss": head,
        "final_loss": tail,
        "selection_accuracy": trainer.selection_accuracy(eval_data, bundle),
        "parent_child_ratio": report["parent_child_ratio"],
        "weights": str(out),
        "loss_trace": str(trace_path),
        "apex_report": str(apex_path),
    }
    print(_dump(summary))
    return 0


# ---------------------------------------------------------------------------
# decouple
# ---------------------------------------------------------------------------

def cmd_decouple(args) -> int:
    if args.offline:
        result = decouple.rule_based_decompose(args.expr)
    else:
        cfg = decouple.VlmConfig.from_env(timeout_s=args.vlm_timeout_s, retries=args.retries)
        image_b64 = None
        if args.image:
            import base64

            image_b64 = base64.b64encode(Path(args.image).read_bytes()).decode("ascii")
        result = decouple.decouple_via_service(
            args.expr, image_b64, cfg, include_examples=not args.no_examples
        )
    print(_dump(result.to_dict()))
    return 0


# ---------------------------------------------------------------------------
# ground / eval / pipeline
# ---------------------------------------------------------------------------

def _load_anchor_map(path) -> dict:
    anchor_map = {}
    for rec in jsonl.read_jsonl(path):
        anchor_map[rec["image_id"]] = [
            grounding.AnchorRecord(feature=a["feature"], confidence=a["confidence"], box=a["box"])
            for a in rec["anchors"]
        ]
    return anchor_map


def cmd_ground(args) -> int:
    bundle = similarity.load_bundle(args.weights)
    anchor_map = _load_anchor_map(args.anchors)
    outputs = []
    for rec in jsonl.read_jsonl(args.texts):
        result = grounding.ground(
            sample_id=rec["sample_id"],
            anchors=anchor_map[rec["image_id"]],
            phrases=rec["phrases"],
            text_features=rec["features"],
            bundle=bundle,
            top_fraction=args.top_frac,
            distinct_anchors=args.distinct_anchors,
        )
        outputs.append({"sample_id": result.sample_id, "boxes": [list(b) for b in result.boxes]})
    jsonl.write_jsonl(args.out, outputs)
    print(f"wrote {len(outputs)} predictions to {args.out}")
    return 0


def _eval_samples(gt_records: list, pred_map: dict) -> list:
    return [
        metrics.EvalSample(
            sample_id=rec["sample_id"],
            gt_boxes=tuple(tuple(b) for b in rec["boxes"]),
            pred_boxes=tuple(tuple(b) for b in pred_map.get(rec["sample_id"], [])),
        )
        for rec in gt_records
    ]


def _grec_report(samples: list, iou_thresh: float, per_sample: bool) -> dict:
    report = {
        "n_samples": len(samples),
        "iou_threshold": iou_thresh,
        "precision_at_f1": metrics.precision_at_f1(samples, iou_thresh),
    }
    try:
        report["n_acc"] = metrics.n_acc(samples)
    except ValueError:
        report["n_acc"] = None
    if per_sample:
        rows = []
        for s in samples:
            m = metrics.match_sample(s, iou_thresh)
            rows.append({"sample_id": s.sample_id, "tp": m.tp, "fp": m.fp, "fn": m.fn, "f1": m.f1})
        report["per_sample"] = rows
    return report


def cmd_eval(args) -> int:
    gt_records = jsonl.read_jsonl(args.gt)
    pred_map = {rec["sample_id"]: rec["boxes"] for rec in jsonl.read_jsonl(args.pred)}
    samples = _eval_samples(gt_records, pred_map)
    if args.metric == "wrec":
        report = {"n_samples": len(samples), "iou_threshold": args.iou,
                  "iou_at_thresh": metrics.iou_at_05(samples, args.iou)}
    else:
        report = _grec_report(samples, args.iou, args.per_sample)
    print(_dump(report))
    return 0


def _decouple_record(rec: dict, offline: bool, vlm_cfg) -> decouple.DecoupleResult:
    if "phrases" in rec and "expression" not in rec:
        return decouple.DecoupleResult(
            count=len(rec["phrases"]), phrases=tuple(rec["phrases"]), raw=""
        )
    if offline:
        if "decouple_response" in rec:
            return decouple.parse_response(rec["decouple_response"])
        return decouple.rule_based_decompose(rec["expression"])
    return decouple.decouple_via_service(rec["expression"], rec.get("image_b64"), vlm_cfg)


def cmd_pipeline(args) -> int:
    bundle = similarity.load_bundle(args.weights)
    anchor_map = _load_anchor_map(args.anchors)
    text_records = jsonl.read_jsonl(args.texts)
    gt_records = jsonl.read_jsonl(args.gt)

    vlm_cfg = None
    if not args.offline:
        vlm_cfg = decouple.VlmConfig.from_env(timeout_s=args.vlm_timeout_s, retries=args.retries)

    predictions = []
    failures = []
    for rec in text_records:
        sample_id = rec.get("sample_id", "<missing sample_id>")
        try:
            result = _decouple_record(rec, args.offline, vlm_cfg)
            if result.count == 0:
                boxes = ()
            else:
                features = rec.get("features", [])
                if len(features) != result.count:
                    raise ValueError(
                        f"decoupled {result.count} phrases but {len(features)} text features supplied"
                    )
                output = grounding.ground(
                    sample_id=sample_id,
                    anchors=anchor_map[rec["image_id"]],
                    phrases=list(result.phrases),
                    text_features=features,
                    bundle=bundle,
                    top_fraction=args.top_frac,
                    distinct_anchors=args.distinct_anchors,
                )
                boxes = output.boxes
            predictions.append({"sample_id": sample_id, "boxes": [list(b) for b in boxes]})
        except (ValueError, KeyError, decouple.DecoupleError) as exc:
            failures.append({"sample_id": sample_id, "error": str(exc)})

    if args.out:
        jsonl.write_jsonl(args.out, predictions)

    pred_map = {p["sample_id"]: p["boxes"] for p in predictions}
    evaluated_ids = set(pred_map)
    eval_gt = [rec for rec in gt_records if rec["sample_id"] in evaluated_ids]
    samples = _eval_samples(eval_gt, pred_map)
    report = _grec_report(samples, args.iou, per_sample=True) if samples else {
        "n_samples": 0, "iou_threshold": args.iou, "precision_at_f1": None, "n_acc": None,
    }
    report["n_failures"] = len(failures)
    report["failures"] = failures
    text = _dump(report) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="seed for anything randomized")
    common.add_argument("--log-level", default="WARNING", help="python logging level name")

    parser = argparse.ArgumentParser(prog="hemix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geom-check", parents=[common], help="run the geometry property suite")
    p.add_argument("--cases", type=int, default=1000)
    p.set_defaults(func=cmd_geom_check)

    p = sub.add_parser("grad-check", parents=[common], help="analytic vs finite-difference gradients")
    p.add_argument("--batches", type=int, default=50)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("analyze-alpha", parents=[common], help="closed-form mixing-weight analysis")
    p.add_argument("--b-e", type=float, required=True)
    p.add_argument("--b-h", type=float, required=True)
    p.add_argument("--sigma-e", type=float, required=True)
    p.add_argument("--sigma-h", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--mc-n", type=int, default=0, help="Monte-Carlo draws (0 disables the oracle)")
    p.set_defaults(func=cmd_analyze_alpha)

    p = sub.add_parser("train-toy", parents=[common], help="train on the synthetic hierarchy")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=0.07)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--negatives", type=int, default=2)
    p.add_argument("--intra-negatives", action="store_true")
    p.add_argument("--optimizer", choices=["sgd", "adam_variant"], default="adam_variant")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--batch-images", type=int, default=2)
    p.add_argument("--parents", type=int, default=3)
    p.add_argument("--children-per-parent", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--trace-out", help="loss trace CSV (default: loss_trace.csv next to --out)")
    p.add_argument("--apex-out", help="apex report JSON (default: apex_report.json next to --out)")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("decouple", parents=[common], help="split an expression into target phrases")
    p.add_argument("--expr", required=True)
    p.add_argument("--image", help="image file sent to the service as base64")
    p.add_argument("--offline", action="store_true", help="use the rule-based decomposer")
    p.add_argument("--no-examples", action="store_true", help="drop the in-context examples part")
    p.add_argument("--vlm-timeout-s", type=float, default=30.0)
    p.add_argument("--retries", type=int, default=2)
    p.set_defaults(func=cmd_decouple)

    p = sub.add_parser("ground", parents=[common], help="select boxes for decoupled phrases")
    p.add_argument("--anchors", required=True)
    p.add_argument("--texts", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--top-frac", type=float, default=0.10)
    p.add_argument("--distinct-anchors", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("eval", parents=[common], help="score predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--metric", choices=["grec", "wrec"], default="grec")
    p.add_argument("--per-sample", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", parents=[common], help="decouple, ground, and evaluate")
    p.add_argument("--anchors", required=True)
    p.add_argument("--texts", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--top-frac", type=float, default=0.10)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--offline", action="store_true")
    p.add_argument("--distinct-anchors", action="store_true")
    p.add_argument("--vlm-timeout-s", type=float, default=30.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--out", help="predictions JSONL path")
    p.add_argument("--report", help="report JSON path (default: stdout)")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING))
    _echo_config(args)
    try:
        return args.func(args)
    except (OSError, jsonl.SchemaError, decouple.DecoupleError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
