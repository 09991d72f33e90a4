"""``echosim`` command line: ingest, simulate, report, embed.

Exit codes: 0 success, 1 partial failure (some seed failed), 2 invalid
input or configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .config import ConfigError, RunManifest, load_manifest
from .embedding import DimError, TooFewPoints, analyse, read_embeddings
from .engines import EngineKind, make_engine
from .ingest import (FormatError, TooSmall, build_network, load_graph, load_records,
                     read_edges_file, save_graph, write_rejects)
from .llm import LlmClient, ResponseCache, HttpTransport
from .metrics import compute_metrics, ground_truth_of
from .report import AlignmentError, aggregate, write_report, write_series
from .simulation import run

log = logging.getLogger("echosim")


class InputError(Exception):
    """Bad input or configuration; maps to exit code 2."""


def _dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _manifest(args) -> RunManifest:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = str(args.seed)
    try:
        return load_manifest(args.config, overrides)
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {exc.filename}") from None
    except ConfigError as exc:
        raise InputError(f"invalid config: {exc}") from None


def cmd_ingest(args) -> int:
    manifest = _manifest(args)
    src = Path(args.input)
    if not src.is_file():
        raise InputError(f"input file not found: {src}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        records, rejects = load_records(src)
        follows = read_edges_file(args.edges) if args.edges else ()
        graph = build_network(records, manifest.ingest, follows)
    except (FormatError, TooSmall, OSError, ValueError) as exc:
        raise InputError(f"{src}: {exc}") from None
    save_graph(graph, out / "graph.json")
    write_rejects(rejects, out / "rejects.jsonl")
    _dump_json({"command": "ingest", "input": str(src), "edges": args.edges,
                "ingest": manifest.to_dict()["ingest"], "records": len(records),
                "rejects": len(rejects), "users": graph.n, "edges_count": graph.num_edges},
               out / "ingest_manifest.json")
    print(f"ingested {len(records)} records ({len(rejects)} rejected): "
          f"{graph.n} users, {graph.num_edges} edges -> {out / 'graph.json'}")
    return 0


def _engine_for(manifest: RunManifest, seed: int):
    sim = manifest.sim
    kind = EngineKind(sim.engine)
    if kind is not EngineKind.LLM:
        return make_engine(kind, sim.equation_params, sim.history_window)
    url = manifest.llm_url or os.environ.get("ECHOSIM_LLM_URL")
    if not url:
        raise RuntimeError("no LLM endpoint: set ECHOSIM_LLM_URL or llm_url")
    client = LlmClient(HttpTransport(url, os.environ.get("ECHOSIM_LLM_KEY")),
                       ResponseCache(manifest.cache_path), max_retries=manifest.llm_max_retries,
                       backoff=manifest.llm_backoff)
    return make_engine(kind, sim.equation_params, sim.history_window, client=client,
                       model=manifest.llm_model, seed_slot=seed)


def simulate_seed(graph, manifest: RunManifest, seed: int, out_dir: Path) -> dict:
    """Run one seed, streaming events and checkpoint metrics to ``out_dir``."""
    from dataclasses import replace

    out_dir.mkdir(parents=True, exist_ok=True)
    config = replace(manifest.sim, seed=seed)
    labels = ground_truth_of(graph)
    rows = []
    every = manifest.checkpoint_every
    with open(out_dir / "events.jsonl", "w", encoding="utf-8") as ev_fh:
        def on_event(ev, state):
            ev_fh.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")
            if ev.step % every == 0:
                rows.append(compute_metrics(state.graph, ev.step, seed, labels))

        try:
            engine = _engine_for(manifest, seed)
        except Exception as exc:
            result = None
            error = str(exc)
        else:
            result = run(graph, config, engine, on_event)
            error = result.error
    if result is not None:
        last = result.events[-1].step if result.events else 0
        # the final state is reported once: skip it if it was just checkpointed
        if not rows or rows[-1].step != last:
            rows.append(compute_metrics(result.final_graph, last, seed, labels))
    write_series(rows, out_dir / "metrics.csv")
    summary = {"seed": seed, "ok": error is None, "error": error,
               "stopped_reason": result.stopped_reason.value if result else "aborted",
               "steps": len(result.events) if result else 0,
               "fallback_count": result.fallback_count if result else 0,
               "initial_edges": graph.num_edges,
               "final_edges": result.final_graph.num_edges if result else None}
    if result is not None and hasattr(engine, "stats"):
        st = engine.stats
        summary["parse"] = {"calls": st.calls, "clean": st.clean, "recovered": st.recovered,
                            "failed": st.failed, "failed_fraction": st.failed_fraction}
    _dump_json(summary, out_dir / "result.json")
    return summary


def cmd_simulate(args) -> int:
    manifest = _manifest(args)
    try:
        graph = load_graph(args.graph)
    except FileNotFoundError:
        raise InputError(f"graph file not found: {args.graph}") from None
    except (ValueError, KeyError) as exc:
        raise InputError(f"{args.graph}: invalid graph file ({exc})") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json({"command": "simulate", "graph": str(args.graph), **manifest.to_dict()},
               out / "manifest.json")
    failed = 0
    for seed in manifest.seeds:
        summary = simulate_seed(graph, manifest, seed, out / f"seed_{seed}")
        status = "ok" if summary["ok"] else f"FAILED ({summary['error']})"
        print(f"seed {seed}: {summary['steps']} steps, {summary['stopped_reason']}, {status}")
        failed += not summary["ok"]
    return 1 if failed else 0


def cmd_report(args) -> int:
    paths = [Path(p) for p in args.series]
    for p in paths:
        if not p.is_file():
            raise InputError(f"series file not found: {p}")
    extras = {"fallback_counts": {}, "config": None}
    for p in paths:
        res = p.parent / "result.json"
        if res.is_file():
            extras["fallback_counts"][str(p)] = json.loads(res.read_text())["fallback_count"]
        man = p.parent.parent / "manifest.json"
        if extras["config"] is None and man.is_file():
            extras["config"] = json.loads(man.read_text())
    try:
        report = aggregate(paths, extras)
    except AlignmentError as exc:
        raise InputError(f"AlignmentError: {exc}") from None
    jpath, cpath = write_report(report, args.out)
    print(f"aggregated {len(paths)} series -> {jpath}, {cpath}")
    return 0


def cmd_embed(args) -> int:
    seed = args.seed if args.seed is not None else 0
    k = args.k if args.k is not None else _manifest(args).k_clusters
    try:
        real = read_embeddings(args.real)
        sim = read_embeddings(args.simulated)
    except FileNotFoundError as exc:
        raise InputError(f"embedding file not found: {exc.filename}") from None
    except (ValueError, KeyError) as exc:
        raise InputError(f"invalid embedding file: {exc}") from None
    if real.dim != sim.dim:
        raise InputError(f"DimError: {args.real} has dim {real.dim}, "
                         f"{args.simulated} has dim {sim.dim}")
    try:
        results = {"real": analyse(real, k, seed), "simulated": analyse(sim, k, seed)}
    except (TooFewPoints, DimError) as exc:
        raise InputError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "embedding_clusters.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["set", "id", "cluster"] + [f"v{i}" for i in range(real.dim)])
        for name, emb in (("real", real), ("simulated", sim)):
            for pid, lab, vec in zip(emb.ids, results[name]["labels"], emb.vectors):
                w.writerow([name, pid, int(lab)] + [repr(float(v)) for v in vec])
    report = {"k": k, "seed": seed, "real_file": str(args.real), "simulated_file": str(args.simulated)}
    for name, res in results.items():
        report[name] = {key: val for key, val in res.items() if key != "labels"}
    _dump_json(report, out / "embedding_report.json")
    for name in ("real", "simulated"):
        r = report[name]
        print(f"{name:9s} silhouette={r['silhouette']:.4f} intra={r['intra']:.4f} "
              f"inter={r['inter']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="key = value file with SimConfig / IngestConfig / manifest fields")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    p = argparse.ArgumentParser(prog="echosim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="build the initial graph from JSON Lines")
    s.add_argument("input")
    s.add_argument("--edges", help="optional 'follower,followee' side-file")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("simulate", parents=[common], help="run every seed of the manifest")
    s.add_argument("graph")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("report", parents=[common], help="aggregate metric series across seeds")
    s.add_argument("series", nargs="+")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("embed", parents=[common], help="cluster real vs simulated embeddings")
    s.add_argument("real")
    s.add_argument("simulated")
    s.add_argument("--k", type=int, default=None)
    s.set_defaults(func=cmd_embed)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"echosim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
