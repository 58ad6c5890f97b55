"""Operator-facing command surface for batch runs.

Subcommands: simulate, parse, classify, eval-seg, eval-cls, loss-check.
Exit codes: 0 success, 1 data error, 2 transport error, 3 parse error.
All artifacts land under the directory given with --out; oracle and baseline
modes are fully deterministic given (inputs, seed).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import dataio
from .core import ActionSegment, ActionSequence, ClassroomWindow, EngagementLabel, TimeSpan
from .engagement import (
    BaselineParams,
    ClassifierEndpoint,
    InputRepresentation,
    PromptVariant,
    build_prompt,
    classify_baseline,
    classify_remote,
)
from .errors import (
    ConfigError,
    ContextUnavailableError,
    DataError,
    ParseError,
    SchemaError,
    TransportError,
)
from .fewshot import gradient_check, loss_terms
from .metrics import (
    DEFAULT_TAUS,
    classification_report,
    edit_score,
    f1_counts,
    f1_from_counts,
    mof,
)
from .recognizers import RemoteRecognizer
from .temporal import (
    OracleRecognizer,
    WindowingConfig,
    aggregate_context,
    clips_for_spans,
    merge_verdicts,
    recognize_segments,
    split_windows,
)


@dataclass(frozen=True)
class RunConfig:
    session: Path
    out_dir: Path
    windowing: WindowingConfig = WindowingConfig()
    recognizer_mode: str = "oracle"
    classifier_mode: str = "baseline"
    variant: PromptVariant = PromptVariant.CONTEXT_BASED
    representation: InputRepresentation = InputRepresentation.SEQUENCE
    endpoint_url: str | None = None
    model: str | None = None
    seed: int = 0
    concurrency: int = 4

    def __post_init__(self):
        if self.recognizer_mode == "remote" and not self.endpoint_url:
            raise ConfigError("--recognizer remote requires --endpoint-url")
        if self.classifier_mode == "remote" and not (self.endpoint_url and self.model):
            raise ConfigError("--classifier remote requires --endpoint-url and --model")


def _ensure_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window_slices(session: dataio.SessionData):
    """Yield (window, student_id, ground-truth window sequence) triples."""
    for win in session.windows:
        ws = win.start_frame
        we = min(ws + session.window_frames, session.n_frames)
        for sid in session.students:
            yield win, sid, dataio.slice_window(session.students[sid], ws, we, session.fps, sid)


def cmd_simulate(args) -> int:
    out = _ensure_out(args.out)
    builder = dataio.SCENARIOS.get(args.scenario)
    if builder is None:
        raise ConfigError(f"unknown scenario {args.scenario!r}; pick from {sorted(dataio.SCENARIOS)}")
    session = dataio.generate_scenario(builder(args.seed))
    path = out / "session.json"
    dataio.save_session(session, path)
    print(f"wrote {path} ({len(session.students)} students, {len(session.windows)} windows)")
    return 0


def cmd_parse(args) -> int:
    cfg = RunConfig(
        session=Path(args.session),
        out_dir=_ensure_out(args.out),
        windowing=WindowingConfig(args.segment_seconds, args.frames_per_clip),
        recognizer_mode=args.recognizer,
        endpoint_url=args.endpoint_url,
        seed=args.seed,
        concurrency=args.concurrency,
    )
    session = dataio.load_session(cfg.session)
    if cfg.recognizer_mode == "remote":
        recognizer = RemoteRecognizer(cfg.endpoint_url)
        workers = cfg.concurrency
    else:
        recognizer = OracleRecognizer()
        workers = 1
    records = []
    for win, sid, gt_seq in _window_slices(session):
        stream = gt_seq.to_frames()
        spans = split_windows(stream, cfg.windowing)
        clips = clips_for_spans(
            stream, spans, session.dictionary, cfg.windowing,
            clip_prefix=f"{win.window_id}:{sid}:",
        )
        verdicts = recognize_segments(clips, recognizer, max_workers=workers)
        pred = merge_verdicts(spans, verdicts, sid)
        records.append(
            {
                "window_id": win.window_id,
                "student_id": sid,
                "segments": [
                    [seg.label, seg.span.start_frame, seg.span.end_frame]
                    for seg in pred.segments
                ],
            }
        )
    doc = {
        "schema_version": 1,
        "fps": session.fps,
        "segment_seconds": cfg.windowing.segment_seconds,
        "recognizer": cfg.recognizer_mode,
        "windows": records,
    }
    path = cfg.out_dir / "predictions.json"
    path.write_text(dataio.canonical_json(doc), encoding="utf-8")
    print(f"wrote {path} ({len(records)} window-student sequences)")
    return 0


def _load_predictions(path: Path, fps: float) -> dict[tuple[str, str], ActionSequence]:
    doc = dataio.read_json_file(path)
    try:
        out = {}
        for rec in doc["windows"]:
            segments = [
                ActionSegment(int(lab), TimeSpan(int(s), int(e), fps))
                for lab, s, e in rec["segments"]
            ]
            out[(rec["window_id"], rec["student_id"])] = ActionSequence.fuse(
                segments, rec["student_id"]
            )
        return out
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed predictions file: {exc}") from exc


def _sequences_for_classification(session, predictions_path: str | None):
    """Per-window target sequences, from a parse run when given, else ground
    truth. Peers always come from the same source as the target."""
    by_key: dict[tuple[str, str], ActionSequence] = {}
    for win, sid, gt_seq in _window_slices(session):
        by_key[(win.window_id, sid)] = gt_seq
    if predictions_path is not None:
        preds = _load_predictions(Path(predictions_path), session.fps)
        missing = set(by_key) - set(preds)
        if missing:
            raise DataError(f"predictions file lacks {len(missing)} window-student pairs")
        by_key = preds
    return by_key


def cmd_classify(args) -> int:
    cfg = RunConfig(
        session=Path(args.session),
        out_dir=_ensure_out(args.out),
        windowing=WindowingConfig(args.segment_seconds, 32),
        classifier_mode=args.classifier,
        variant=PromptVariant(args.variant),
        representation=InputRepresentation(args.representation),
        endpoint_url=args.endpoint_url,
        model=args.model,
        seed=args.seed,
        concurrency=args.concurrency,
    )
    session = dataio.load_session(cfg.session)
    sequences = _sequences_for_classification(session, args.predictions)

    tasks = []
    for win in session.windows:
        for sid in session.students:
            target = sequences[(win.window_id, sid)]
            context = None
            if cfg.variant is PromptVariant.CONTEXT_BASED:
                peers = tuple(
                    sequences[(win.window_id, other)]
                    for other in session.students
                    if other != sid
                )
                probe = ClassroomWindow(
                    window_id=f"{win.window_id}:{sid}", target=target, peers=peers
                )
                try:
                    context = aggregate_context(probe, bin_seconds=args.segment_seconds)
                except ContextUnavailableError:
                    context = None  # single-student session: fall back to context-free
            tasks.append((win, sid, target, context))

    if cfg.classifier_mode == "remote":
        endpoint = ClassifierEndpoint(url=cfg.endpoint_url, model=cfg.model)

        def run_one(task):
            win, sid, target, context = task
            variant = cfg.variant if context is not None else PromptVariant.CONTEXT_FREE
            bundle = build_prompt(
                target, context, session.dictionary, variant, cfg.representation
            )
            return classify_remote(bundle, endpoint)

        with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
            verdicts = list(pool.map(run_one, tasks))
    else:
        verdicts = [
            classify_baseline(
                target, context, session.dictionary,
                BaselineParams(), cfg.representation,
            )
            for _, _, target, context in tasks
        ]

    records = []
    pairs = []
    for (win, sid, _, _), verdict in zip(tasks, verdicts):
        gt = win.engagement.get(sid)
        records.append(
            {
                "window_id": win.window_id,
                "student_id": sid,
                "label": verdict.label.value,
                "parse_confidence": verdict.parse_confidence.value,
                "raw_response": verdict.raw_response,
                "ground_truth": gt.value if gt is not None else None,
            }
        )
        if gt is not None:
            pairs.append((verdict.label, gt))
    doc = {
        "schema_version": 1,
        "classifier": cfg.classifier_mode,
        "variant": cfg.variant.value,
        "representation": cfg.representation.value,
        "verdicts": records,
    }
    path = cfg.out_dir / "verdicts.json"
    path.write_text(dataio.canonical_json(doc), encoding="utf-8")
    print(f"wrote {path} ({len(records)} verdicts)")

    if pairs:
        report = classification_report([p for p, _ in pairs], [g for _, g in pairs])
        _write_cls_report(cfg.out_dir / "cls_report.jsonl", records, report)
        _print_cls_table(report)
    return 0


def _write_cls_report(path: Path, records, report) -> None:
    lines = [dict(kind="verdict", **rec) for rec in records]
    lines.append({"kind": "aggregate", "report": report.as_dict()})
    dataio.write_jsonl(path, lines)
    print(f"wrote {path}")


def _print_cls_table(report) -> None:
    print(f"{'class':<14}{'recall':>8}{'precision':>11}{'f1':>8}{'support':>9}")
    rows = list(report.per_class.items()) + [("weighted avg", report.weighted)]
    for name, m in rows:
        print(f"{name:<14}{m.recall:>8.2f}{m.precision:>11.2f}{m.f1:>8.2f}{m.support:>9d}")


def cmd_eval_seg(args) -> int:
    out = _ensure_out(args.out)
    session = dataio.load_session(args.session)
    preds = _load_predictions(Path(args.predictions), session.fps)
    lines = []
    pooled = {t: [0, 0, 0] for t in DEFAULT_TAUS}
    mof_hits = mof_total = 0
    mofs, edits, f1s = [], [], {t: [] for t in DEFAULT_TAUS}
    for win, sid, gt_seq in _window_slices(session):
        key = (win.window_id, sid)
        if key not in preds:
            raise DataError(f"predictions file lacks window {key}")
        pred = preds[key]
        gt_frames = gt_seq.to_frames().labels
        pred_frames = pred.to_frames().labels
        window_mof = mof(pred_frames, gt_frames)
        window_edit = edit_score(pred, gt_seq)
        window_f1 = {}
        for tau in DEFAULT_TAUS:
            tp, fp, fn = f1_counts(pred, gt_seq, tau)
            pooled[tau][0] += tp
            pooled[tau][1] += fp
            pooled[tau][2] += fn
            window_f1[tau] = f1_from_counts(tp, fp, fn)
            f1s[tau].append(window_f1[tau])
        mof_hits += sum(1 for a, b in zip(pred_frames, gt_frames) if a == b)
        mof_total += len(gt_frames)
        mofs.append(window_mof)
        edits.append(window_edit)
        lines.append(
            {
                "kind": "window",
                "window_id": win.window_id,
                "student_id": sid,
                "mof": window_mof,
                "edit": window_edit,
                "f1": {str(t): window_f1[t] for t in DEFAULT_TAUS},
            }
        )
    aggregate = {
        "kind": "aggregate",
        "windows": len(lines),
        "mof_pooled": 100.0 * mof_hits / mof_total,
        "mof_mean": sum(mofs) / len(mofs),
        "edit_mean": sum(edits) / len(edits),
        "f1_pooled": {str(t): f1_from_counts(*pooled[t]) for t in DEFAULT_TAUS},
        "f1_mean": {str(t): sum(f1s[t]) / len(f1s[t]) for t in DEFAULT_TAUS},
    }
    lines.append(aggregate)
    path = out / "seg_report.jsonl"
    dataio.write_jsonl(path, lines)
    print(f"wrote {path}")
    print(f"{'':<20}{'F1@10':>8}{'F1@25':>8}{'F1@50':>8}{'Edit':>8}{'MoF':>8}")
    print(
        f"{'pooled':<20}"
        + "".join(f"{aggregate['f1_pooled'][str(t)]:>8.1f}" for t in DEFAULT_TAUS)
        + f"{aggregate['edit_mean']:>8.1f}{aggregate['mof_pooled']:>8.1f}"
    )
    print(
        f"{'mean of windows':<20}"
        + "".join(f"{aggregate['f1_mean'][str(t)]:>8.1f}" for t in DEFAULT_TAUS)
        + f"{aggregate['edit_mean']:>8.1f}{aggregate['mof_mean']:>8.1f}"
    )
    return 0


def cmd_eval_cls(args) -> int:
    out = _ensure_out(args.out)
    session = dataio.load_session(args.session)
    doc = dataio.read_json_file(Path(args.verdicts))
    try:
        verdict_records = list(doc["verdicts"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{args.verdicts}: malformed verdicts file: {exc}") from exc
    gt_by_key = {
        (win.window_id, sid): lab
        for win in session.windows
        for sid, lab in win.engagement.items()
        if lab is not None
    }
    preds, gts, records = [], [], []
    for rec in verdict_records:
        key = (rec["window_id"], rec["student_id"])
        gt = gt_by_key.get(key)
        if gt is None:
            continue
        preds.append(EngagementLabel(rec["label"]))
        gts.append(gt)
        records.append(rec)
    if not preds:
        raise DataError("no verdicts align with labeled windows in the session")
    report = classification_report(preds, gts)
    _write_cls_report(out / "cls_report.jsonl", records, report)
    _print_cls_table(report)
    return 0


def cmd_loss_check(args) -> int:
    batch = dataio.load_embedding_batch(args.batch)
    ce, entropy = loss_terms(batch)
    print(f"cross entropy : {ce:.9f}")
    print(f"entropy term  : {entropy:.9f}")
    print(f"total loss    : {ce + entropy:.9f}")
    if args.skip_grad_check:
        return 0
    result = gradient_check(batch, step=args.step, rtol=args.rtol)
    status = "PASS" if result.passed else "FAIL"
    print(
        f"gradient check: {status} "
        f"(max relative error {result.max_rel_error:.3e}, tolerance {result.rtol:.1e})"
    )
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="engagekit",
        description="Classroom action-sequence parsing and engagement measurement",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="generate a synthetic session file")
    p.add_argument("--scenario", default="lecture", help=f"one of {sorted(dataio.SCENARIOS)}")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("parse", help="split, recognize, and merge action sequences")
    p.add_argument("--session", required=True)
    p.add_argument("--segment-seconds", type=float, default=5.0)
    p.add_argument("--frames-per-clip", type=int, default=32)
    p.add_argument("--recognizer", choices=["oracle", "remote"], default="oracle")
    p.add_argument("--endpoint-url")
    p.add_argument("--concurrency", type=int, default=4)
    common(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("classify", help="classify engagement per window")
    p.add_argument("--session", required=True)
    p.add_argument("--predictions", help="use parsed sequences instead of ground truth")
    p.add_argument("--segment-seconds", type=float, default=5.0,
                   help="context aggregation bin, matches the parsing grid")
    p.add_argument("--classifier", choices=["baseline", "remote"], default="baseline")
    p.add_argument("--variant", choices=[v.value for v in PromptVariant], default="context")
    p.add_argument("--representation", choices=[r.value for r in InputRepresentation],
                   default="sequence")
    p.add_argument("--endpoint-url")
    p.add_argument("--model")
    p.add_argument("--concurrency", type=int, default=4)
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval-seg", help="segmentation metrics for a parse run")
    p.add_argument("--session", required=True)
    p.add_argument("--predictions", required=True)
    common(p)
    p.set_defaults(func=cmd_eval_seg)

    p = sub.add_parser("eval-cls", help="classification metrics for a classify run")
    p.add_argument("--session", required=True)
    p.add_argument("--verdicts", required=True)
    common(p)
    p.set_defaults(func=cmd_eval_cls)

    p = sub.add_parser("loss-check", help="evaluate the embedding objective on a batch file")
    p.add_argument("--batch", required=True)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--rtol", type=float, default=1e-4)
    p.add_argument("--skip-grad-check", action="store_true")
    p.set_defaults(func=cmd_loss_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
