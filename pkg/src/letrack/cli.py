"""Command line interface.

Subcommands::

    letrack track        associate detections into tracks
    letrack eval         score predicted tracks against ground truth
    letrack synth        generate a seeded synthetic gt/detections/bank triple
    letrack validate     check a file against its schema
    letrack import-burst convert an annotated-frames dump to the tracks schema

Exit codes: 0 success; 1 invalid input (schema, config, usage); 2 file
system failures; 3 internal invariant violations or unexpected errors.

Human-facing chatter (warnings, progress, validation verdicts) goes to
stderr; stdout carries only the eval score table.  Output files are
rendered in full before anything is opened, and a failed write removes
whatever this invocation managed to create, so a nonzero exit never leaves
an output file behind.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from typing import Any, Callable

from .association import Tracker, TrackerConfig
from .classification import track_label, vote_fraction
from .core import InternalInvariantError, SequenceMeta
from .io import (
    ConfigError,
    SchemaError,
    SequenceTracks,
    TrackObservation,
    TrackRecord,
    bank_to_jsonable,
    detections_to_jsonable,
    dumps_canonical,
    load_bank,
    load_detections,
    load_flat_config,
    load_tracks,
    tracks_to_jsonable,
)
from .maskops import RleMask, mask_to_box, validate_rle
from .metrics import DEFAULT_ALPHAS, EvalConfig, evaluate
from .parallel import map_ordered
from .synth import SynthConfig, generate

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; this tool reserves 2 for I/O.
    def error(self, message: str) -> "Any":
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _warn(messages: list[str]) -> None:
    for msg in messages:
        print(f"warning: {msg}", file=sys.stderr)


def _write_files(pairs: list[tuple[str, Any]]) -> None:
    """Render every payload, then write; on failure remove everything."""
    rendered = [(path, dumps_canonical(obj) + "\n") for path, obj in pairs]
    written: list[str] = []
    try:
        for path, text in rendered:
            written.append(path)
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
    except BaseException:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise


# ---------------------------------------------------------------------------
# subcommands


def _cmd_track(args: argparse.Namespace) -> int:
    sequences, warnings = load_detections(args.detections, lax=args.lax)
    _warn(warnings)
    bank = None
    if args.bank:
        bank, bank_warnings = load_bank(args.bank, lax=args.lax)
        _warn(bank_warnings)
    cfg = TrackerConfig()
    if args.config:
        cfg = TrackerConfig.from_mapping(load_flat_config(args.config))

    def task(seq) -> tuple[SequenceTracks, dict[str, int]]:
        tracker = Tracker(cfg, bank)
        frame_map = {fr.index: fr.detections for fr in seq.frames}
        for idx in range(seq.meta.num_frames):
            tracker.step(idx, frame_map.get(idx, ()))
        tracks = []
        for st in tracker.tracks:
            obs = [
                TrackObservation(frame=f, box=d.box, mask=d.mask)
                for f, d in st.observations
            ]
            category_id = score = None
            if bank is not None and st.category_votes:
                category_id = track_label(st)
                score = vote_fraction(st)
            tracks.append(
                TrackRecord(
                    track_id=st.track_id,
                    observations=obs,
                    category_id=category_id,
                    score=score,
                )
            )
        return SequenceTracks(meta=seq.meta, tracks=tracks), tracker.diagnostics.as_dict()

    results = map_ordered(task, sequences)
    out_sequences = [seq for seq, _ in results]
    totals: dict[str, int] = {}
    for _, diag in results:
        for key, value in diag.items():
            totals[key] = totals.get(key, 0) + value
    for key, value in sorted(totals.items()):
        if value:
            print(f"diagnostic: {key} = {value}", file=sys.stderr)

    _write_files([(args.out, tracks_to_jsonable(out_sequences))])
    n_tracks = sum(len(s.tracks) for s in out_sequences)
    print(
        f"tracked {len(out_sequences)} sequence(s), {n_tracks} track(s) -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _parse_alphas(raw: str) -> tuple[float, ...]:
    values = []
    for token in raw.split(","):
        token = token.strip()
        try:
            values.append(float(token))
        except ValueError:
            raise ConfigError(f"invalid alpha value {token!r} in --alphas") from None
    return tuple(values)


def _cmd_eval(args: argparse.Namespace) -> int:
    gt, gw = load_tracks(args.gt, lax=args.lax)
    _warn(gw)
    pred, pw = load_tracks(args.pred, lax=args.lax)
    _warn(pw)
    bank, bw = load_bank(args.bank, lax=args.lax)
    _warn(bw)
    alphas = DEFAULT_ALPHAS if args.alphas is None else _parse_alphas(args.alphas)
    cfg = EvalConfig(alphas=alphas, mode=args.mode, geometry=args.geometry)
    report = evaluate(gt, pred, bank, cfg)
    _warn(report.warnings)
    row_label = os.path.splitext(os.path.basename(args.pred))[0] or "pred"
    print(report.format_table(row_label=row_label))
    if args.report:
        _write_files([(args.report, report.to_jsonable())])
        print(f"report -> {args.report}", file=sys.stderr)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig()
    if args.config:
        cfg = SynthConfig.from_mapping(load_flat_config(args.config))
    result = generate(cfg)
    _write_files(
        [
            (args.out_gt, tracks_to_jsonable(result.gt)),
            (args.out_dets, detections_to_jsonable(result.detections)),
            (args.out_bank, bank_to_jsonable(result.bank)),
        ]
    )
    print(
        f"synthesized seed {cfg.seed}: {cfg.num_tracks} track(s) x "
        f"{cfg.num_frames} frame(s) -> {args.out_gt}, {args.out_dets}, {args.out_bank}",
        file=sys.stderr,
    )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    loaders: dict[str, Callable[[str, bool], tuple[Any, list[str]]]] = {
        "detections": load_detections,
        "tracks": load_tracks,
        "bank": load_bank,
    }
    _, warnings = loaders[args.kind](args.file, args.lax)
    _warn(warnings)
    print(f"OK: {args.file} is a valid {args.kind} file", file=sys.stderr)
    return 0


def _cmd_import_burst(args: argparse.Namespace) -> int:
    import json

    try:
        with open(args.input, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError([f"{args.input}: invalid JSON: {e}"]) from None
    if not isinstance(raw, dict) or not isinstance(raw.get("sequences"), list):
        raise SchemaError([f"{args.input}: expected an object with a 'sequences' array"])

    warnings: list[str] = []
    out_sequences: list[SequenceTracks] = []
    for si, seq in enumerate(raw["sequences"]):
        where = f"sequences[{si}]"
        if not isinstance(seq, dict):
            warnings.append(f"{where}: not an object, skipped")
            continue
        name = seq.get("seq_name") or seq.get("name")
        height, width = seq.get("height"), seq.get("width")
        segmentations = seq.get("segmentations")
        if not isinstance(name, str) or not name:
            warnings.append(f"{where}: missing sequence name, skipped")
            continue
        if not isinstance(height, int) or not isinstance(width, int) or height < 1 or width < 1:
            warnings.append(f"{where} ({name}): missing or invalid height/width, skipped")
            continue
        if not isinstance(segmentations, list) or not segmentations:
            warnings.append(f"{where} ({name}): missing 'segmentations' frames, skipped")
            continue
        categories = seq.get("track_category_ids")
        categories = categories if isinstance(categories, dict) else {}

        per_track: dict[int, list[TrackObservation]] = {}
        for frame, frame_obj in enumerate(segmentations):
            if not isinstance(frame_obj, dict):
                warnings.append(f"{where} ({name}): segmentations[{frame}] not an object, skipped")
                continue
            for tid_str, payload in frame_obj.items():
                try:
                    tid = int(tid_str)
                except ValueError:
                    warnings.append(
                        f"{where} ({name}): non-numeric track id {tid_str!r}, skipped"
                    )
                    continue
                if tid < 1:
                    warnings.append(f"{where} ({name}): track id {tid} < 1, skipped")
                    continue
                mask = _burst_mask(payload, height, width)
                if mask is None:
                    warnings.append(
                        f"{where} ({name}): track {tid} frame {frame}: unsupported "
                        "mask encoding (integer run counts required), skipped"
                    )
                    continue
                per_track.setdefault(tid, []).append(
                    TrackObservation(frame=frame, box=mask_to_box(mask), mask=mask)
                )

        tracks = []
        for tid in sorted(per_track):
            cat = categories.get(str(tid), categories.get(tid))
            if not isinstance(cat, int) or isinstance(cat, bool):
                warnings.append(
                    f"{where} ({name}): track {tid} has no category id; left unlabeled"
                )
                cat = None
            tracks.append(
                TrackRecord(track_id=tid, observations=per_track[tid], category_id=cat)
            )
        if not tracks:
            warnings.append(f"{where} ({name}): no usable tracks, sequence skipped")
            continue
        out_sequences.append(
            SequenceTracks(
                meta=SequenceMeta(
                    name=name, height=height, width=width, num_frames=len(segmentations)
                ),
                tracks=tracks,
            )
        )

    _warn(warnings)
    if not out_sequences:
        raise SchemaError([f"{args.input}: no convertible sequences"])
    _write_files([(args.out, tracks_to_jsonable(out_sequences))])
    print(
        f"imported {len(out_sequences)} sequence(s) -> {args.out}"
        + (f" ({len(warnings)} warning(s))" if warnings else ""),
        file=sys.stderr,
    )
    return 0


def _burst_mask(payload: Any, height: int, width: int) -> RleMask | None:
    """Integer-run-counts mask out of the few shapes such dumps use."""
    if not isinstance(payload, dict):
        return None
    inner = payload.get("rle", payload)
    if not isinstance(inner, dict):
        return None  # compressed string form: not supported
    counts = inner.get("counts")
    if not isinstance(counts, list) or not all(
        isinstance(c, int) and not isinstance(c, bool) for c in counts
    ):
        return None
    size = inner.get("size", [height, width])
    if (
        not isinstance(size, list)
        or len(size) != 2
        or not all(isinstance(s, int) and not isinstance(s, bool) for s in size)
        or tuple(size) != (height, width)
    ):
        return None
    mask = RleMask(size=(height, width), counts=tuple(counts))
    return mask if not validate_rle(mask) else None


# ---------------------------------------------------------------------------
# wiring


def _build_parser() -> _Parser:
    parser = _Parser(prog="letrack", description="long-tail video instance tracking toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("track", help="associate detections into tracks")
    p.add_argument("--detections", required=True, help="input detections JSON")
    p.add_argument("--out", required=True, help="output tracks JSON")
    p.add_argument("--config", help="flat key=value tracker config file")
    p.add_argument("--bank", help="category bank JSON; enables track labeling")
    p.add_argument("--lax", action="store_true", help="downgrade unknown fields to warnings")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="score predicted tracks against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth tracks JSON")
    p.add_argument("--pred", required=True, help="predicted tracks JSON")
    p.add_argument("--bank", required=True, help="category bank JSON (defines the splits)")
    p.add_argument("--mode", choices=("closed", "open"), default="closed")
    p.add_argument("--geometry", choices=("mask", "box"), default="mask")
    p.add_argument("--alphas", help="comma-separated overlap thresholds in (0, 1)")
    p.add_argument("--report", help="also write the full report JSON here")
    p.add_argument("--lax", action="store_true", help="downgrade unknown fields to warnings")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate seeded synthetic data")
    p.add_argument("--config", help="flat key=value synth config file")
    p.add_argument("--out-gt", required=True, help="output ground-truth tracks JSON")
    p.add_argument("--out-dets", required=True, help="output detections JSON")
    p.add_argument("--out-bank", required=True, help="output category bank JSON")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check a file against its schema")
    p.add_argument("--file", required=True, help="file to check")
    p.add_argument("--kind", required=True, choices=("detections", "tracks", "bank"))
    p.add_argument("--lax", action="store_true", help="downgrade unknown fields to warnings")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("import-burst", help="convert an annotated-frames dump to tracks JSON")
    p.add_argument("--input", required=True, help="source annotation JSON")
    p.add_argument("--out", required=True, help="output tracks JSON")
    p.set_defaults(func=_cmd_import_burst)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except SchemaError as e:
        for issue in e.issues:
            print(f"error: {issue}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2
    except InternalInvariantError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
