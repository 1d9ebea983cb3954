"""Command-line orchestration of the pipeline stages.

Each stage reads the previous stage's on-disk artifacts, writes its own plus
a manifest of content hashes, and is individually re-runnable. Outputs are a
pure function of (config, inputs): no timestamps or randomness leak in.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, ingest, motif, report, saak, states, synth, validate
from .config import PipelineConfig, load_config
from .daytypes import DAY_TYPES
from .errors import StageError, UrbanRhythmError

log = logging.getLogger("urbanrhythm")

STAGES = ("synth", "ingest", "features", "cluster", "motifs", "validate", "report")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: Path, stage: str, params: dict, inputs, outputs) -> None:
    doc = {
        "stage": stage,
        "version": __version__,
        "parameters": params,
        "inputs": {p.name: _sha256(p) for p in inputs},
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    with open(out / f"manifest_{stage}.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(out: Path, stage: str, *names) -> list:
    paths = [out / n for n in names]
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise StageError(stage, f"missing inputs: {', '.join(missing)}")
    return paths


def stage_synth(cfg: PipelineConfig, out: Path) -> None:
    result = synth.generate(cfg.synth)
    synth.write_events_csv(result.events, out / "events.csv")
    synth.write_usage_csv(result.usage, out / "usage.csv")
    synth.write_truth_csv(result.truth, out / "truth.csv")
    log.info("synth: %d events, %d usage records", len(result.events), len(result.usage))
    _write_manifest(
        out,
        "synth",
        {"seed": cfg.synth.seed, "agents": cfg.synth.agents, "days": cfg.synth.days},
        [],
        [out / n for n in ("events.csv", "usage.csv", "truth.csv")],
    )


def stage_ingest(cfg: PipelineConfig, out: Path) -> None:
    (events_path,) = _require(out, "ingest", "events.csv")
    with open(events_path, newline="") as fh:
        parsed = ingest.parse_events(fh)
    if parsed.skipped:
        log.warning(
            "ingest: skipped %d malformed rows (first lines: %s)",
            parsed.skipped,
            parsed.bad_lines,
        )
    spec = cfg.synth.grid_spec()
    presence = ingest.build_presence(parsed.events, spec)
    series = ingest.rasterize(presence, spec)
    ingest.write_images_csv(series, out / "images.csv", out / "gridspec.json")
    _write_manifest(
        out,
        "ingest",
        {"grid": spec.to_dict(), "skipped_rows": parsed.skipped},
        [events_path],
        [out / "images.csv", out / "gridspec.json"],
    )


def _write_feature_csv(path: Path, header_prefix, matrix) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot"] + [f"{header_prefix}{i}" for i in range(matrix.shape[1])])
        for slot, row in enumerate(matrix):
            w.writerow([slot] + [repr(float(v)) for v in row])


def _read_feature_csv(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return np.array([[float(v) for v in row[1:]] for row in reader])


def stage_features(cfg: PipelineConfig, out: Path) -> None:
    _require(out, "features", "images.csv", "gridspec.json")
    series = ingest.read_images_csv(out / "images.csv", out / "gridspec.json")
    model, raw = saak.fit_saak(
        series, min_ratio=cfg.saak.variance_threshold, log_scale=cfg.saak.log_scale
    )
    reduced = saak.reduce(raw, target_dim=cfg.saak.reduce_dim)
    with open(out / "model.json", "w") as fh:
        fh.write(model.to_json())
        fh.write("\n")
    _write_feature_csv(out / "features.csv", "f", reduced.matrix)
    _write_feature_csv(out / "features2d.csv", "c", reduced.coords2d)
    log.info(
        "features: raw dim %d, reduced dim %d", model.feature_dim, reduced.matrix.shape[1]
    )
    _write_manifest(
        out,
        "features",
        {
            "variance_threshold": cfg.saak.variance_threshold,
            "reduce_dim": cfg.saak.reduce_dim,
            "log_scale": cfg.saak.log_scale,
        },
        [out / "images.csv", out / "gridspec.json"],
        [out / n for n in ("model.json", "features.csv", "features2d.csv")],
    )


def stage_cluster(cfg: PipelineConfig, out: Path, k_list=None) -> None:
    _require(out, "cluster", "features.csv", "gridspec.json")
    k_list = tuple(k_list) if k_list else cfg.cluster_k
    features = _read_feature_csv(out / "features.csv")
    spec = cfg.synth.grid_spec()
    dendro = states.ward_cluster(features)
    with open(out / "dendrogram.json", "w") as fh:
        fh.write(dendro.to_json())
        fh.write("\n")
    slot_times = [spec.slot_start(s) for s in range(len(features))]
    series = states.cut(dendro, k_list[-1], slot_times)
    states.write_states_csv(series, out / "states.csv")
    with open(out / "hierarchy.json", "w") as fh:
        json.dump(states.hierarchy_export(dendro, k_list), fh, indent=2, sort_keys=True)
        fh.write("\n")
    images = ingest.read_images_csv(out / "images.csv", out / "gridspec.json")
    profile = states.profile_states(series, images, cfg.calendar())
    with open(out / "profiles.json", "w") as fh:
        json.dump(profile.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(
        out,
        "cluster",
        {"k_list": list(k_list)},
        [out / "features.csv"],
        [out / n for n in ("dendrogram.json", "states.csv", "hierarchy.json", "profiles.json")],
    )


def stage_motifs(cfg: PipelineConfig, out: Path, within_day=None) -> None:
    _require(out, "motifs", "states.csv")
    params = cfg.motif
    if within_day is not None and within_day != params.within_day:
        params = motif.MotifParams(
            **{**params.__dict__, "within_day": within_day}
        )
    series = states.read_states_csv(out / "states.csv")
    by_length = motif.discover_motifs(series.labels, params)
    classes = motif.cluster_classes(by_length, params)
    graph = motif.build_graph(classes)
    with open(out / "motifs.json", "w") as fh:
        fh.write(motif.classes_to_json(classes))
        fh.write("\n")
    with open(out / "motif_graph.dot", "w") as fh:
        fh.write(motif.graph_to_dot(graph))
    log.info("motifs: %d classes, %d edges", len(classes), len(graph.edges))
    _write_manifest(
        out,
        "motifs",
        {k: (list(v) if isinstance(v, tuple) else v) for k, v in params.__dict__.items()},
        [out / "states.csv"],
        [out / "motifs.json", out / "motif_graph.dot"],
    )


def stage_validate(cfg: PipelineConfig, out: Path) -> None:
    _require(out, "validate", "usage.csv", "states.csv")
    series = states.read_states_csv(out / "states.csv")
    spec = cfg.synth.grid_spec()
    usage_events = []
    with open(out / "usage.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            usage_events.append((int(row["timestamp"]), row["app_category"]))
    matrix = validate.aggregate_usage(
        usage_events,
        state_of_slot=lambda s: int(series.labels[s]),
        slot_of_timestamp=spec.slot_of,
    )
    result = validate.tfidf(matrix)
    validate.write_tfidf_csv(result, out / "tfidf.csv")
    with open(out / "tfidf.md", "w") as fh:
        fh.write(validate.tfidf_markdown(result))
    _write_manifest(
        out,
        "validate",
        {},
        [out / "usage.csv", out / "states.csv"],
        [out / "tfidf.csv", out / "tfidf.md"],
    )


def stage_report(cfg: PipelineConfig, out: Path) -> None:
    _require(out, "report", "states.csv", "features2d.csv")
    series = states.read_states_csv(out / "states.csv")
    coords = _read_feature_csv(out / "features2d.csv")
    cal = cfg.calendar()
    n_days = -(-series.n_slots // cal.slots_per_day)
    present = {cal.day_type_of_day(d) for d in range(n_days)}
    groups = [t for t in DAY_TYPES if t in present]
    with open(out / "strip.svg", "w") as fh:
        fh.write(report.render_strip(series, cal))
    with open(out / "rings.svg", "w") as fh:
        fh.write(report.render_rings(series, cal, groups))
    with open(out / "scatter.svg", "w") as fh:
        fh.write(report.render_scatter(coords, series.labels))
    report.render_strip_png(series, cal, out / "strip.png")
    report.render_scatter_png(coords, series.labels, out / "scatter.png")
    _write_manifest(
        out,
        "report",
        {"groups": groups},
        [out / "states.csv", out / "features2d.csv"],
        [out / n for n in ("strip.svg", "rings.svg", "scatter.svg", "strip.png", "scatter.png")],
    )


def run_pipeline(cfg: PipelineConfig, out: Path, k_list=None) -> None:
    stage_synth(cfg, out)
    stage_ingest(cfg, out)
    stage_features(cfg, out)
    stage_cluster(cfg, out, k_list)
    stage_motifs(cfg, out)
    stage_validate(cfg, out)
    stage_report(cfg, out)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urbanrhythm",
        description="Mobility logs -> city states -> motif hierarchy",
    )
    parser.add_argument("--config", help="INI config file (defaults built in)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap (results are identical at any value)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("pipeline",):
        p = sub.add_parser(name)
        p.add_argument("--out", default="out", help="artifact directory")
        if name == "synth":
            p.add_argument("--seed", type=int, help="override the generator seed")
        if name in ("cluster", "pipeline"):
            p.add_argument("--k", help="comma-separated cluster counts")
        if name == "motifs":
            p.add_argument("--no-within-day", action="store_true",
                           help="allow motifs to cross day boundaries")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("URBANRHYTHM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg = PipelineConfig(
                synth=synth.SynthConfig(**{**cfg.synth.__dict__, "seed": args.seed}),
                saak=cfg.saak,
                cluster_k=cfg.cluster_k,
                motif=cfg.motif,
            )
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        k_list = None
        if getattr(args, "k", None):
            k_list = sorted(int(x) for x in args.k.split(","))
        if args.command == "pipeline":
            run_pipeline(cfg, out, k_list)
        elif args.command == "synth":
            stage_synth(cfg, out)
        elif args.command == "ingest":
            stage_ingest(cfg, out)
        elif args.command == "features":
            stage_features(cfg, out)
        elif args.command == "cluster":
            stage_cluster(cfg, out, k_list)
        elif args.command == "motifs":
            stage_motifs(cfg, out, within_day=False if args.no_within_day else None)
        elif args.command == "validate":
            stage_validate(cfg, out)
        elif args.command == "report":
            stage_report(cfg, out)
    except UrbanRhythmError as exc:
        json.dump(
            {
                "error": type(exc).__name__,
                "message": str(exc),
                "stage": getattr(exc, "stage", args.command),
            },
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
