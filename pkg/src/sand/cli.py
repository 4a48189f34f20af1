"""Command line: ``sand analyze|simulate|generate``.

Exit codes: analyze 0 (no snares, range ok) / 2 (a condition fails);
simulate 0 (all variants pass) / 3 (a property failed) / 4 (no
quiescence); 1 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema

from . import adversary as adv
from .deception import LOCAL, PERFECT, check_range_condition, deception_circle, find_snares, retinue_options
from .detectors import DetectorConfigError, make_detector
from .geometry import LayoutError, LayoutSpec, Point, RadioParams, as_point
from .layouts import grid_layout, label, layout_from_dict, layout_to_json, load_layout, random_layout
from .protocol import Message, announce
from .sim import VARIANTS, SchedulerError, World, check_problem, make_policy, run_until_quiescent, verdict_passes, write_trace

EXIT_OK, EXIT_USAGE, EXIT_CONDITION, EXIT_PROPERTY, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

_point = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_ref = {"oneOf": [{"type": "string", "pattern": "^u[0-9]+$"}, _point]}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["layout"],
    "properties": {
        "layout": {
            "type": "object",
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "inline": {"type": "object"},
                "file": {"type": "string"},
                "grid": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["rows", "cols"],
                    "properties": {
                        "rows": {"type": "integer", "minimum": 0},
                        "cols": {"type": "integer", "minimum": 0},
                        "s": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "random": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["n", "area"],
                    "properties": {
                        "n": {"type": "integer", "minimum": 0},
                        "area": {"type": "number", "exclusiveMinimum": 0},
                        "seed": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "radio": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in ("c", "t_r", "r_min", "d_n", "r_t", "r_min_sep")},
        },
        "faulty": {"type": "array", "items": _ref},
        "adversaries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["silent", "fabricate", "spurious_conflict", "snare", "discredit", "flood", "scripted"]}
                },
            },
        },
        "detector": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["oracle", "quiescence", "trusted", "topology"]},
                "window": {"type": "integer", "minimum": 1},
                "trusted": {},
                "count": {"type": "integer", "minimum": 1},
                "family": {"enum": ["grid", "plan"]},
                "s": {"type": "number", "exclusiveMinimum": 0},
                "origin": _point,
            },
        },
        "scheduler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "policy": {"enum": ["round_robin", "seeded_random", "adversarial_delay"]},
                "seed": {"type": "integer", "minimum": 0},
                "fairness": {"type": "integer", "minimum": 1},
            },
        },
        "max_epochs": {"type": "integer", "minimum": 1},
        "variants": {"type": "array", "items": {"enum": list(VARIANTS)}, "minItems": 1},
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resolution": {"type": "number", "exclusiveMinimum": 0},
                "foci": {"type": "array", "items": _ref},
                "max_participants": {"type": "integer", "minimum": 1},
                "local": {"type": "boolean"},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "string"} for k in ("report", "trace", "svg", "layout")},
        },
    },
}


class ConfigError(ValueError):
    pass


def validate_config(cfg: dict) -> dict:
    errors = sorted(jsonschema.Draft202012Validator(RUN_CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        lines = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    return cfg


def radio_from(d: dict | None) -> RadioParams:
    d = dict(d or {})
    if "r_t" in d:
        if "t_r" in d:
            raise ConfigError("give either r_t or t_r, not both")
        r_t = d.pop("r_t")
        c, r_min = d.get("c", 1.0), d.get("r_min", 1.0)
        d["t_r"] = r_min * r_t * r_t / c
    return RadioParams(**d)


def resolve(layout: LayoutSpec, ref) -> Point:
    if isinstance(ref, str):
        i = int(ref[1:]) - 1
        if not 0 <= i < len(layout.nodes):
            raise ConfigError(f"no node {ref}")
        return layout.nodes[i].pos
    return as_point(ref)


def build_layout(cfg: dict, base: Path, seed: int | None = None) -> LayoutSpec:
    spec = cfg["layout"]
    params = radio_from(cfg.get("radio"))
    if "grid" in spec:
        g = spec["grid"]
        layout = grid_layout(g["rows"], g["cols"], g.get("s", 1.0), params)
    elif "random" in spec:
        r = spec["random"]
        layout = random_layout(r["n"], r["area"], r.get("seed", seed or 0), params)
    elif "inline" in spec:
        layout = layout_from_dict(spec["inline"], params if "radio" in cfg else None)
    else:
        layout = load_layout(base / spec["file"], params if "radio" in cfg else None)
    if cfg.get("faulty"):
        layout = layout.with_roles([resolve(layout, f) for f in cfg["faulty"]])
    return layout


def _message(layout, d) -> Message:
    if "announce" in d:
        return announce(resolve(layout, d["announce"]), d.get("payload", ""))
    return Message.from_dict(d)


def build_strategies(layout: LayoutSpec, specs: list[dict], resolution: float) -> list[adv.Strategy]:
    p = layout.params
    out: list[adv.Strategy] = []
    for s in specs:
        kind = s["kind"]
        at = int(s.get("at_epoch", 0))
        if kind == "silent":
            out.append(adv.Silent())
        elif kind == "fabricate":
            sched = adv.fabricate_universe(
                layout, resolve(layout, s["leader"]), [as_point(k) for k in s["fictitious"]], resolve(layout, s["target"]), at
            )
            out.append(adv.Scripted(sched))
        elif kind == "spurious_conflict":
            claimed = s.get("claimed")
            st = adv.spurious_conflict(
                resolve(layout, s["leader"]),
                _message(layout, s["about"]),
                resolve(layout, s["target"]),
                p,
                None if claimed is None else resolve(layout, claimed),
                at,
            )
            out.append(adv.Scripted([st]))
        elif kind == "snare":
            focus = resolve(layout, s["focus"])
            reps = find_snares(layout, focus, s.get("resolution", resolution))
            reps = [r for r in reps if r.kind == PERFECT] or reps
            if not reps:
                raise ConfigError(f"no snare for focus {s['focus']}")
            rep = reps[int(s.get("index", 0)) % len(reps)]
            out.append(adv.Scripted(adv.snare_broadcast(layout, rep, announce(rep.snare_point), at)))
        elif kind == "discredit":
            out.append(
                adv.discredit_schedule(
                    layout,
                    resolve(layout, s["leader"]),
                    resolve(layout, s["victim"]),
                    resolve(layout, s["observer"]),
                    resolve(layout, s["reference"]),
                )
            )
        elif kind == "flood":
            out.append(adv.Flood(resolve(layout, s["leader"]), as_point(s["claimed"]), float(s.get("tss", p.t_r)), int(s.get("period", 1))))
        elif kind == "scripted":
            out.append(adv.Scripted([adv.ScriptedTransmission.from_dict(d) for d in s["schedule"]]))
    return out


# -- documents -------------------------------------------------------------

def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def analyze(layout: LayoutSpec, resolution: float, foci=None, max_participants: int = 4, local: bool = False) -> dict:
    """Snare report for each focus.

    The verdict uses the retinue model. With ``local`` each focus also gets
    the number of perfect snare points of the local model, for information.
    """
    foci = layout.correct if foci is None else foci
    per_focus = []
    for u in foci:
        reps = find_snares(layout, u, resolution, max_participants)
        entry = {
            "focus": u.to_list(),
            "label": label(layout, u),
            "perfect": sum(r.kind == PERFECT for r in reps),
            "simple": sum(r.kind != PERFECT for r in reps),
            "snares": [r.to_dict() for r in reps],
        }
        if local:
            loc = find_snares(layout, u, resolution, max_participants, model=LOCAL)
            entry["local_perfect"] = sum(r.kind == PERFECT for r in loc)
        per_focus.append(entry)
    range_ok = check_range_condition(layout.params)
    snare_free = all(not f["snares"] for f in per_focus)
    return {
        "parameters": {"radio": layout.params.to_dict(), "r_t": layout.params.r_t, "resolution": resolution},
        "layout": layout.to_dict(),
        "foci": per_focus,
        "snare_free": snare_free,
        "range_condition_ok": range_ok,
        "ok": snare_free and range_ok,
    }


def render_svg(layout: LayoutSpec, report: dict | None = None, size: int = 480) -> str:
    """Layout, two-member deception circles of each faulty node, and snare points."""
    pts = layout.positions or [Point(0.0, 0.0)]
    pad = layout.params.d_n
    x0, x1 = min(p.x for p in pts) - pad, max(p.x for p in pts) + pad
    y0, y1 = min(p.y for p in pts) - pad, max(p.y for p in pts) + pad
    scale = size / max(x1 - x0, y1 - y0)

    def tx(p):
        return (p[0] - x0) * scale, (y1 - p[1]) * scale

    w, h = (x1 - x0) * scale, (y1 - y0) * scale
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}" viewBox="0 0 {w:.1f} {h:.1f}">']
    out.append(f'<rect width="{w:.1f}" height="{h:.1f}" fill="white"/>')
    for f in layout.faulty:
        for ret in retinue_options(layout, f, layout.params.r_t):
            if len(ret.members) != 2:
                continue
            c = deception_circle(ret.members[0], ret.members[1], f)
            if c.degenerate:
                continue
            cx, cy = tx(c.center)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{c.radius * scale:.2f}" fill="none" stroke="#d08020" stroke-dasharray="4 3"/>')
    if report:
        for f in report["foci"]:
            for s in f["snares"]:
                cx, cy = tx(s["snare_point"])
                color = "#c00000" if s["kind"] == PERFECT else "#e0a0a0"
                out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="1.2" fill="{color}"/>')
    for i, n in enumerate(layout.nodes):
        cx, cy = tx(n.pos)
        fill = "#c03030" if n.faulty else "#3050c0"
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="5" fill="{fill}"/>')
        out.append(f'<text x="{cx + 7:.2f}" y="{cy - 7:.2f}" font-size="11" font-family="sans-serif">u{i + 1}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- commands --------------------------------------------------------------

def _load_config(path: str) -> tuple[dict, Path]:
    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return validate_config(cfg), p.parent


def cmd_analyze(args) -> int:
    cfg, base = _load_config(args.config)
    layout = build_layout(cfg, base, args.seed)
    an = cfg.get("analysis", {})
    resolution = args.resolution or an.get("resolution", 0.01)
    foci = [resolve(layout, f) for f in an["foci"]] if "foci" in an else None
    report = analyze(layout, resolution, foci, an.get("max_participants", 4), an.get("local", False))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = cfg.get("outputs", {})
    (out / names.get("report", "report.json")).write_text(dump_json(report))
    if args.svg:
        (out / names.get("svg", "layout.svg")).write_text(render_svg(layout, report))
    n = sum(len(f["snares"]) for f in report["foci"])
    print(f"snares: {n}  range condition: {'ok' if report['range_condition_ok'] else 'violated'}")
    return EXIT_OK if report["ok"] else EXIT_CONDITION


def cmd_simulate(args) -> int:
    cfg, base = _load_config(args.config)
    layout = build_layout(cfg, base, args.seed)
    sch = cfg.get("scheduler", {})
    seed = args.seed if args.seed is not None else sch.get("seed", 0)
    fairness = sch.get("fairness", 4 * max(len(layout.nodes), 1))
    resolution = args.resolution or cfg.get("analysis", {}).get("resolution", 0.01)
    strategies = build_strategies(layout, cfg.get("adversaries", []), resolution)
    det = make_detector(cfg.get("detector", {"kind": "oracle"}), layout, fairness)
    world = World(layout, det, strategies, make_policy(sch.get("policy", "round_robin"), seed), fairness)
    max_epochs = args.max_epochs or cfg.get("max_epochs", 100_000)
    world, quiesced = run_until_quiescent(world, max_epochs)
    verdicts = [check_problem(world.trace, layout, v) for v in cfg.get("variants", ["SNDP"])]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = cfg.get("outputs", {})
    write_trace(world.trace, out / names.get("trace", "trace.jsonl"))
    labels = {p: label(layout, p) for p in layout.positions}
    doc = {
        "quiesced": quiesced,
        "epochs": world.epoch,
        "outputs": {labels[p]: None if o is None else sorted(p.to_list() for p in o) for p, o in world.outputs().items()},
        "conflicts": {labels[p]: len(st.conflicts) for p, st in world.nodes.items()},
        "verdicts": [
            {**v, "nodes": {labels[p]: n for p, n in v["nodes"].items()}} for v in verdicts
        ],
    }
    (out / names.get("report", "result.json")).write_text(dump_json(doc))
    if args.svg:
        (out / names.get("svg", "layout.svg")).write_text(render_svg(layout))
    results = [verdict_passes(v) for v in verdicts]
    for v, r in zip(verdicts, results):
        failing = [labels[p] for p, n in v["nodes"].items() if not n["safety"] or n["liveness"] is False]
        print(f"{v['variant']}: {'pass' if r else 'inconclusive' if r is None else 'FAIL ' + ','.join(failing)}")
    if any(r is False for r in results):
        return EXIT_PROPERTY
    if not quiesced:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_generate(args) -> int:
    params = RadioParams.with_range(args.r_t, args.d_n) if args.r_t else RadioParams(d_n=args.d_n)
    if args.config:
        cfg, base = _load_config(args.config)
        layout = build_layout(cfg, base, args.seed)
    elif args.kind == "grid":
        layout = grid_layout(args.rows, args.cols, args.spacing, params)
    elif args.kind == "random":
        layout = random_layout(args.n, args.area, args.seed or 0, params)
    else:
        raise ConfigError("generate needs a kind (grid|random) or --config")
    if args.faulty:
        layout = layout.with_roles([resolve(layout, f) for f in args.faulty.split(",")])
    text = layout_to_json(layout)
    out = Path(args.out)
    if out.suffix != ".json":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "layout.json"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(f"{len(layout.nodes)} nodes -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sand", description="Neighbor discovery under Byzantine faults")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out")
        p.add_argument("--svg", action="store_true")
        p.add_argument("--resolution", type=float, default=None)
        p.add_argument("--max-epochs", type=int, default=None)

    common(sub.add_parser("analyze", help="snare search and range condition"))
    common(sub.add_parser("simulate", help="run the protocol and check the problem variants"))
    g = sub.add_parser("generate", help="write a layout file")
    common(g, config_required=False)
    g.add_argument("kind", nargs="?", choices=["grid", "random"])
    g.add_argument("--rows", type=int, default=3)
    g.add_argument("--cols", type=int, default=3)
    g.add_argument("--spacing", type=float, default=1.0)
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--area", type=float, default=10.0)
    g.add_argument("--d-n", type=float, default=1.0)
    g.add_argument("--r-t", type=float, default=None)
    g.add_argument("--faulty", default="")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    cmds = {"analyze": cmd_analyze, "simulate": cmd_simulate, "generate": cmd_generate}
    try:
        return cmds[args.command](args)
    except (ConfigError, LayoutError, DetectorConfigError, adv.StrategyError, SchedulerError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
