"""The `arena` command line: render, validate, serve, evaluate, report."""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import date
from pathlib import Path

from arena import data_paths
from arena.core.registry import load_registry
from arena.core.render import render_observation
from arena.core.world import load_scene
from arena.missions import SceneIndex, load_catalog


def _registry_arg(parser):
    parser.add_argument("--registry", type=Path,
                        default=data_paths.default_registry_path(),
                        help="class registry JSON")


def _scenes_arg(parser):
    parser.add_argument("--scenes", type=Path,
                        default=data_paths.default_scene_dir(),
                        help="directory of *.scene.json files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arena", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a scene to PGM (+ PNG legend)")
    p.add_argument("scene", type=Path)
    _registry_arg(p)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--height", type=int, default=54)
    p.add_argument("-o", "--out", type=Path, default=Path("observation.pgm"))
    p.add_argument("--legend", type=Path, help="write a PNG legend here")
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("missions", help="mission catalog tools")
    msub = p.add_subparsers(dest="mission_command", required=True)
    v = msub.add_parser("validate", help="validate a mission directory")
    v.add_argument("directory", type=Path)
    _registry_arg(v)
    _scenes_arg(v)
    v.set_defaults(fn=cmd_missions_validate)

    p = sub.add_parser("serve", help="run the session orchestrator HTTP API")
    p.add_argument("--config", type=Path, help="JSON config file")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("infer-serve", help="run the baseline inference service")
    p.add_argument("--port", type=int, default=8781)
    p.add_argument("--host", default="127.0.0.1")
    _registry_arg(p)
    _scenes_arg(p)
    p.add_argument("--scene", default="lab", help="scene id for the deployment map")
    p.set_defaults(fn=cmd_infer_serve)

    p = sub.add_parser("edh", help="offline evaluation tools")
    esub = p.add_subparsers(dest="edh_command", required=True)

    e = esub.add_parser("extract", help="extract instances from session logs")
    e.add_argument("log_dir", type=Path)
    e.add_argument("-o", "--out", type=Path, required=True)
    _registry_arg(e)
    _scenes_arg(e)
    e.add_argument("--missions", type=Path, default=data_paths.default_mission_dir())
    e.set_defaults(fn=cmd_edh_extract)

    e = esub.add_parser("run", help="run a model over a suite")
    e.add_argument("suite", type=Path)
    group = e.add_mutually_exclusive_group(required=True)
    group.add_argument("--endpoint", help="remote inference service URL")
    group.add_argument("--builtin", choices=["oracle", "stop", "baseline"])
    e.add_argument("-o", "--out", type=Path, required=True)
    e.add_argument("--workers", type=int, default=1)
    _registry_arg(e)
    _scenes_arg(e)
    e.add_argument("--scene", default="lab")
    e.set_defaults(fn=cmd_edh_run)

    e = esub.add_parser("report", help="print a results file as text")
    e.add_argument("results", type=Path)
    e.set_defaults(fn=cmd_edh_report)

    p = sub.add_parser("leaderboard", help="emit the anonymized daily leaderboard")
    p.add_argument("--at", type=date.fromisoformat, required=True)
    p.add_argument("--from", dest="records", type=Path, required=True)
    p.add_argument("--roster", required=True, help="comma-separated team ids")
    p.add_argument("--salt", default="")
    p.add_argument("-o", "--out", type=Path, help="also write the JSON report here")
    p.set_defaults(fn=cmd_leaderboard)

    p = sub.add_parser("metrics", help="metric calculations over a record file")
    msub = p.add_subparsers(dest="metrics_command", required=True)
    m = msub.add_parser("msr", help="mission success rate")
    m.add_argument("--from", dest="records", type=Path, required=True)
    m.add_argument("--team")
    m.set_defaults(fn=cmd_metrics_msr)
    m = msub.add_parser("correlation", help="Pearson correlation of CSAT vs MSR")
    m.add_argument("--from", dest="records", type=Path, required=True)
    m.add_argument("--roster", required=True)
    m.set_defaults(fn=cmd_metrics_correlation)

    return parser


# -- commands -----------------------------------------------------------------

def cmd_render(args) -> int:
    registry = load_registry(args.registry)
    state = load_scene(args.scene, registry)
    obs = render_observation(state, args.width, args.height)
    _write_pgm(args.out, obs)
    print(f"wrote {args.out} ({obs.width}x{obs.height}, {len(obs.ids)} instances)")
    for idx, seen in enumerate(obs.visible):
        print(f"  {idx + 1:3d}  {seen.instance_id:<20} {seen.class_name:<14} "
              f"depth {seen.depth:.2f}  cells {seen.cells}")
    if args.legend:
        _write_legend(args.legend, obs)
        print(f"wrote {args.legend}")
    return 0


def _write_pgm(path: Path, obs) -> None:
    # P2 with one gray level per visible instance; 0 is empty space
    lines = ["P2", f"{obs.width} {obs.height}", str(max(len(obs.ids), 1))]
    raster = obs.raster
    for y in range(obs.height):
        lines.append(" ".join(str(int(raster[y, x]) + 1) for x in range(obs.width)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _instance_color(index: int) -> tuple[int, int, int]:
    # spread hues deterministically
    h = (index * 0.6180339887) % 1.0
    i = int(h * 6)
    f = h * 6 - i
    q, t = int(255 * (1 - f)), int(255 * f)
    return [(255, t, 0), (q, 255, 0), (0, 255, t),
            (0, q, 255), (t, 0, 255), (255, 0, q)][i % 6]


def _write_legend(path: Path, obs) -> None:
    try:
        from PIL import Image, ImageDraw
    except ImportError as exc:  # pragma: no cover
        raise SystemExit(
            "PNG legend needs Pillow (pip install 'arena-stack[render]')"
        ) from exc
    row_h, width = 18, 320
    img = Image.new("RGB", (width, max(row_h * max(len(obs.visible), 1), row_h)),
                    (255, 255, 255))
    draw = ImageDraw.Draw(img)
    for idx, seen in enumerate(obs.visible):
        y = idx * row_h
        draw.rectangle([2, y + 2, 30, y + row_h - 2], fill=_instance_color(idx))
        draw.text((36, y + 4), f"{seen.instance_id} ({seen.class_name})",
                  fill=(0, 0, 0))
    img.save(path)


def cmd_missions_validate(args) -> int:
    registry = load_registry(args.registry)
    scenes = SceneIndex(args.scenes)
    catalog = load_catalog(args.directory, registry, scenes)
    seen = sum(1 for m in catalog if m.seen)
    print(f"{len(catalog)} missions valid ({seen} seen, {len(catalog) - seen} unseen)")
    for spec in catalog:
        tags = ",".join(spec.tags)
        print(f"  {spec.mission_id:<20} [{tags}] {spec.title}")
    return 0


def _load_config(path: Path | None) -> dict:
    config: dict = {}
    if path is not None:
        config = json.loads(path.read_text(encoding="utf-8"))
    env = os.environ
    config.setdefault("port", int(env.get("ARENA_PORT", 8780)))
    config.setdefault("host", env.get("ARENA_HOST", "127.0.0.1"))
    config.setdefault("registry", env.get("ARENA_REGISTRY",
                                          str(data_paths.default_registry_path())))
    config.setdefault("scenes", env.get("ARENA_SCENES",
                                        str(data_paths.default_scene_dir())))
    config.setdefault("missions", env.get("ARENA_MISSIONS",
                                          str(data_paths.default_mission_dir())))
    config.setdefault("store", env.get("ARENA_STORE", "arena-sessions.sqlite"))
    config.setdefault("metrics", env.get("ARENA_METRICS", "arena-records.ndjson"))
    config.setdefault("team_id", env.get("ARENA_TEAM_ID", "baseline"))
    inference = config.setdefault("inference", {})
    if "ARENA_INFERENCE_ENDPOINT" in env:
        inference["endpoint"] = env["ARENA_INFERENCE_ENDPOINT"]
    inference.setdefault("endpoint", "builtin:baseline")
    return config


def build_service(config: dict):
    """Wire a SessionService from a config mapping (shared with tests)."""
    from arena.baseline import BaselineAgent
    from arena.client import HttpInferenceClient
    from arena.metrics import RecordStore
    from arena.orchestrator import (
        LocalInferenceClient,
        SessionService,
        SessionStore,
        TurnLimits,
    )

    registry = load_registry(config["registry"])
    scenes = SceneIndex(config["scenes"])
    catalog = load_catalog(config["missions"], registry, scenes)
    endpoint = config["inference"]["endpoint"]
    if endpoint == "builtin:baseline":
        scene_ids = sorted({m.scene_id for m in catalog})
        graph = scenes.load(scene_ids[0], registry).scene
        agent = BaselineAgent(graph, registry)
        client = LocalInferenceClient(agent.infer)
    else:
        client = HttpInferenceClient(endpoint)
    limits = TurnLimits(**config.get("limits", {}))
    raster = tuple(config.get("raster", [96, 54]))
    return SessionService(
        catalog=catalog,
        registry=registry,
        scenes=scenes,
        inference=client,
        store=SessionStore(config["store"]),
        metrics=RecordStore(config["metrics"]),
        team_id=config["team_id"],
        limits=limits,
        raster=raster,
    )


def cmd_serve(args) -> int:
    import threading

    from arena.server import orchestrator_server

    config = _load_config(args.config)
    service = build_service(config)
    static_dir = config.get("static_dir")
    server = orchestrator_server(
        service, host=config["host"], port=config["port"],
        static_dir=Path(static_dir) if static_dir else None,
    )

    def sweeper():  # idle sessions become abandoned and count against MSR
        import time
        while True:
            time.sleep(60)
            try:
                service.sweep_abandoned()
            except Exception:
                pass

    threading.Thread(target=sweeper, daemon=True).start()
    print(f"orchestrator listening on {server.url} "
          f"({len(service.catalog)} missions, team {service.team_id!r})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_infer_serve(args) -> int:
    from arena.baseline import BaselineAgent
    from arena.server import inference_server

    registry = load_registry(args.registry)
    scenes = SceneIndex(args.scenes)
    graph = scenes.load(args.scene, registry).scene
    agent = BaselineAgent(graph, registry)
    server = inference_server(agent.infer, host=args.host, port=args.port)
    print(f"baseline inference service on {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_edh_extract(args) -> int:
    from arena.edh import SessionLog, extract_edh_instances, suite_to_doc

    registry = load_registry(args.registry)
    scenes = SceneIndex(args.scenes)
    catalog = None
    if args.missions and Path(args.missions).is_dir():
        catalog = {m.mission_id: m
                   for m in load_catalog(args.missions, registry, scenes)}
    pairs = []
    total = 0
    for path in sorted(Path(args.log_dir).glob("*.log.json")):
        log = SessionLog.from_doc(json.loads(path.read_text(encoding="utf-8")))
        instances = extract_edh_instances(log, registry, scenes, catalog)
        pairs.append((log, instances))
        total += len(instances)
        print(f"  {path.name}: {len(instances)} instance(s)")
    args.out.write_text(json.dumps(suite_to_doc(pairs), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    print(f"wrote {args.out} with {total} instance(s)")
    return 0


def cmd_edh_run(args) -> int:
    from arena.edh import OracleAdapter, StopAdapter, evaluate_suite, suite_from_doc

    registry = load_registry(args.registry)
    scenes = SceneIndex(args.scenes)
    instances = suite_from_doc(
        json.loads(args.suite.read_text(encoding="utf-8")), registry, scenes
    )
    if args.endpoint:
        from arena.client import remote_edh_adapter
        model = remote_edh_adapter(args.endpoint)
    elif args.builtin == "oracle":
        model = OracleAdapter()
    elif args.builtin == "stop":
        model = StopAdapter()
    else:
        from arena.baseline import BaselineAgent
        from arena.client import InferenceEDHAdapter
        graph = scenes.load(args.scene, registry).scene
        agent = BaselineAgent(graph, registry)
        model = InferenceEDHAdapter(agent.infer, name="baseline")
    report = evaluate_suite(instances, model, workers=args.workers)
    args.out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    print(f"{report['model']}: success_rate={report['success_rate']:.3f} "
          f"mean_gcr={report['mean_goal_condition_rate']:.3f} "
          f"over {report['n_instances']} instance(s)")
    return 0


def cmd_edh_report(args) -> int:
    report = json.loads(args.results.read_text(encoding="utf-8"))
    print(f"model: {report['model']}")
    print(f"instances: {report['n_instances']}")
    print(f"success_rate: {report['success_rate']:.3f}")
    print(f"mean_goal_condition_rate: {report['mean_goal_condition_rate']:.3f}")
    print("termination histogram:")
    for reason, count in report["termination_histogram"].items():
        print(f"  {reason:<16} {count}")
    for result in report["results"]:
        mark = "ok " if result["success"] else "MISS"
        print(f"  [{mark}] {result['instance_id']} rate={result['goal_condition_rate']:.2f} "
              f"executed={result['executed']} failures={result['failures']} "
              f"({result['termination']})")
    return 0


def cmd_leaderboard(args) -> int:
    from arena.metrics import RecordStore, emit_leaderboard, render_leaderboard_table

    records = RecordStore(args.records).load()
    roster = [t.strip() for t in args.roster.split(",") if t.strip()]
    rows, report = emit_leaderboard(records, args.at, roster, args.salt)
    print(render_leaderboard_table(rows))
    for note in report["notes"]:
        print(f"note: {note}")
    if args.out:
        args.out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    return 0


def cmd_metrics_msr(args) -> int:
    from arena.metrics import RecordStore, format_percent, msr, seen_unseen_split, format_split

    records = RecordStore(args.records).load()
    if args.team:
        records = [r for r in records if r.team_id == args.team]
    rate = msr(records)
    print(f"missions: {len(records)}")
    print(f"msr: {format_percent(rate)}"
          + (f" ({rate:.4f})" if rate is not None else ""))
    split = format_split(seen_unseen_split(records))
    print(f"seen: {split['seen']}  unseen: {split['unseen']}  "
          f"variance: {split['variance']}")
    return 0


def cmd_metrics_correlation(args) -> int:
    from arena.metrics import RecordStore, pearson, team_series

    records = RecordStore(args.records).load()
    roster = [t.strip() for t in args.roster.split(",") if t.strip()]
    xs, ys = team_series(records, roster)
    value = pearson(xs, ys)
    print(f"teams: {len(xs)}")
    print(f"pearson(csat, msr): {value:.4f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
