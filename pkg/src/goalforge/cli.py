"""Command-line entry point: ``goalforge {gen,plan,simulate,encode,eval,overlay}``.

Errors are reported as one JSON object on stderr carrying a stable ``error``
code. Exit status is 0 on success, 1 for input or config problems and 2 when
the request is physically infeasible.
"""

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import datagen, evaluation, plotting
from .control import overlay, read_tensor, write_tensor
from .datagen import DomainCfg, SplitSpec
from .errors import ConfigError, GoalForgeError, NoValidTrials
from .physics import ForceSpec, SimConfig, chain_outcome, from_normalized, simulate
from .planner import GoalForceSpec, sample_plans
from .render import render_frames
from .scenes import demo_scene, load_scene

log = logging.getLogger("goalforge")

SEED_ENV = "GOALFORGE_SEED"
GEN_FAMILIES = ("all", "dominos", "balls", "balls-collide", "balls-miss", "sway")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, code="bad-arguments")


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def _coerce(value, current, key):
    """Convert an override to the type of the field it replaces."""
    try:
        if isinstance(current, bool):
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes"):
                    return True
                if value.lower() in ("0", "false", "no"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(current, tuple):
            items = value.split(",") if isinstance(value, str) else list(value)
            if len(items) != len(current):
                raise ValueError(f"expected {len(current)} values")
            return tuple(_coerce(v, c, key) for v, c in zip(items, current))
        if isinstance(current, int):
            f = float(value)
            if f != int(f):
                raise ValueError("expected an integer")
            return int(f)
        if isinstance(current, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value {value!r} for {key}: {exc}") from exc


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _apply(obj, key, value, full_key):
    names = {f.name for f in dataclasses.fields(obj)}
    head, _, rest = key.partition(".")
    if head not in names:
        raise ConfigError(f"unknown config key {full_key!r}", code="unknown-key")
    current = getattr(obj, head)
    if rest:
        if not dataclasses.is_dataclass(current):
            raise ConfigError(f"unknown config key {full_key!r}", code="unknown-key")
        return dataclasses.replace(obj, **{head: _apply(current, rest, value, full_key)})
    if dataclasses.is_dataclass(current):
        raise ConfigError(f"{full_key!r} is a section, not a value", code="unknown-key")
    return dataclasses.replace(obj, **{head: _coerce(value, current, full_key)})


def resolve_config(config_path=None, overrides=(), seed=None):
    """Merge built-in defaults, a JSON config file and ``key=value`` overrides.

    Keys address :class:`DomainCfg` fields (``frames``, ``encoding.sigma_frac``,
    ``policy.p_goal``), :class:`SimConfig` fields under ``sim.`` and ``seed``.
    Precedence is flag over file over default; unknown keys are rejected.
    """
    pairs = []
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        pairs += list(_flatten(data).items())
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        pairs.append((key.strip(), value.strip()))

    domain, sim, file_seed = DomainCfg(), SimConfig(), None
    for key, value in pairs:
        k = key[len("domain."):] if key.startswith("domain.") else key
        if k == "seed":
            file_seed = _coerce(value, 0, key)
        elif k.startswith("sim."):
            sim = _apply(sim, k[4:], value, key)
        else:
            try:
                domain = _apply(domain, k, value, key)
            except ValueError as exc:
                raise ConfigError(f"invalid value for {key}: {exc}") from exc

    if seed is None:
        seed = file_seed
    if seed is None and os.environ.get(SEED_ENV):
        seed = _coerce(os.environ[SEED_ENV], 0, SEED_ENV)
    seed = 0 if seed is None else int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return {"seed": seed, "domain": domain, "sim": sim}


def _config_dict(cfg, **extra):
    return {"seed": cfg["seed"], "domain": cfg["domain"].to_dict(),
            "sim": dataclasses.asdict(cfg["sim"]), **extra}


def _echo_config(directory, cfg, **extra):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "run_config.json").write_text(json.dumps(_config_dict(cfg, **extra), sort_keys=True, indent=1),
                                               encoding="utf-8")


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _emit(args, payload, table=None):
    if args.format == "table" and table is not None:
        print(table)
    else:
        print(json.dumps(payload, sort_keys=True, indent=1))


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")


def _load_scene(args, cfg):
    if bool(args.scene) == bool(args.demo):
        raise ConfigError("give exactly one of --scene or --demo", code="bad-arguments")
    if args.demo:
        return demo_scene(args.demo, cfg["seed"], cfg["domain"].resolution)
    return load_scene(args.scene)


def _goal_from_args(args, goal):
    if args.target is None and goal is None:
        raise ConfigError("no goal: pass --target (and --direction/--magnitude) or a scene file with a goal",
                          code="missing-goal")
    target = args.target if args.target is not None else goal.target_id
    direction = math.radians(args.direction) if args.direction is not None else (goal.direction if goal else 0.0)
    magnitude = args.magnitude if args.magnitude is not None else (goal.magnitude if goal else 0.5)
    window = tuple(args.window) if args.window else (goal.time_window if goal else None)
    try:
        return GoalForceSpec(target, direction, magnitude, window)
    except ValueError as exc:
        raise ConfigError(str(exc), code="bad-goal") from exc


def _parse_bias(items):
    if not items:
        return None
    bias = {}
    for item in items:
        key, sep, value = item.partition("=")
        try:
            bias[key] = float(value) if sep else 1.0
        except ValueError as exc:
            raise ConfigError(f"bad bias weight {item!r}", code="bad-arguments") from exc
    return bias


def _force_from_args(args, scene):
    if args.force:
        try:
            return ForceSpec.from_dict(json.loads(Path(args.force).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"cannot read force file {args.force}: {exc}", code="bad-input") from exc
    if args.initiator is None:
        return None
    if not scene.has(args.initiator):
        raise ConfigError(f"unknown initiator {args.initiator!r}", code="invalid-target")
    obj = scene.get(args.initiator)
    point = tuple(args.point) if args.point else getattr(obj, "position", None) or \
        getattr(obj, "base_center", None) or getattr(obj, "anchor")
    magnitude = 0.5 if args.magnitude is None else args.magnitude
    direction = math.radians(args.direction or 0.0)
    return ForceSpec(args.initiator, tuple(point), direction, magnitude,
                     from_normalized(magnitude, scene.force_range))


def _sim_summary(sim, target=None):
    out = {
        "n_frames": sim.n_frames,
        "fps": sim.fps,
        "events": [e.to_dict() for e in sim.events],
        "topple_times": dict(sorted(sim.topple_times.items())),
        "final_positions": {k: v[-1].tolist() for k, v in sorted(sim.positions.items())},
    }
    if target is not None:
        outcome = chain_outcome(sim, target)
        out["outcome"] = None if outcome is None else {**outcome.to_dict(), "target": target}
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gen(args, cfg):
    family = args.family
    if family not in GEN_FAMILIES:
        raise ConfigError(f"unknown family {family!r}; choose from {', '.join(GEN_FAMILIES)}", code="bad-family")
    if args.out is None:
        raise ConfigError("gen needs --out", code="bad-arguments")
    default = SplitSpec()
    counts = {"dominos": 0, "balls_collide": 0, "balls_miss": 0, "sway": 0}
    if family in ("all", "dominos"):
        counts["dominos"] = default.dominos
    if family in ("all", "balls", "balls-collide"):
        counts["balls_collide"] = default.balls_collide
    if family in ("all", "balls", "balls-miss"):
        counts["balls_miss"] = default.balls_miss
    if family in ("all", "sway"):
        counts["sway"] = default.sway
    if args.count is not None:
        if family in ("all", "balls"):
            raise ConfigError("--count needs a single family; use --dominos/--collide/--miss/--sway",
                              code="bad-arguments")
        key = {"dominos": "dominos", "balls-collide": "balls_collide", "balls-miss": "balls_miss",
               "sway": "sway"}[family]
        counts[key] = args.count
    for flag, key in (("dominos", "dominos"), ("collide", "balls_collide"), ("miss", "balls_miss"),
                      ("sway", "sway")):
        value = getattr(args, flag)
        if value is not None:
            counts[key] = value
    try:
        split = SplitSpec(**counts, straight_ratio=args.straight_ratio)
    except ValueError as exc:
        raise ConfigError(str(exc), code="bad-split") from exc

    manifest = datagen.generate_dataset(args.out, split, cfg["seed"], args.workers, cfg["domain"])
    _echo_config(args.out, cfg, subcommand="gen", split=dataclasses.asdict(split))
    payload = {"manifest": str(Path(args.out) / "manifest.json"), "counts": manifest["counts"],
               "total": len(manifest["samples"])}
    table = "\n".join([f"manifest: {payload['manifest']}"] +
                      [f"{k:<16}{v:>8d}" for k, v in manifest["counts"].items()] +
                      [f"{'total':<16}{payload['total']:>8d}"])
    _emit(args, payload, table)
    return 0


def cmd_plan(args, cfg):
    scene, file_goal = _load_scene(args, cfg)
    goal = _goal_from_args(args, file_goal)
    domain = cfg["domain"]
    if args.n < 1:
        raise ConfigError("--n must be at least 1", code="bad-arguments")
    try:
        plans = sample_plans(scene, goal, args.n, cfg["seed"], _parse_bias(args.bias), domain.duration,
                             domain.fps, cfg["sim"])
    except ValueError as exc:
        raise ConfigError(str(exc), code="bad-bias") from exc
    support = plans[0].support
    counts = evaluation.tally([p.initiator for p in plans], support)
    payload = {"goal": goal.to_dict(), "n": args.n, "support": support, "counts": counts,
               "rejected_candidates": plans[0].to_dict()["rejected_candidates"]}
    if args.n <= args.max_listed:
        payload["plans"] = [p.to_dict() for p in plans]
    else:
        payload["plans"] = [plans[0].to_dict()]
        payload["plans_truncated"] = True

    if args.simulate:
        first = plans[0]
        sim = simulate(scene, first.force, domain.duration, domain.fps, cfg["sim"])
        payload["simulation"] = _sim_summary(sim, goal.target_id)
        if args.out:
            out = Path(args.out)
            enc = datagen.encoding_for(scene, domain, sim.n_frames)
            h, w = scene.camera.image_size
            tensor, masking, _ = datagen.encode_sample(scene, first.force, sim, goal.target_id, enc, (h, w), None)
            out.mkdir(parents=True, exist_ok=True)
            write_tensor(tensor, out / "tensor.gfct")
            _write_json(out / "simulation.json", sim.to_dict())
            datagen.write_frames(render_frames(sim), out / "frames")
            payload["tensor"] = {"path": str(out / "tensor.gfct"), "shape": list(tensor.shape), "channels": masking}
    if args.out:
        _write_json(Path(args.out) / "plan.json", payload)
        _echo_config(args.out, cfg, subcommand="plan", goal=goal.to_dict())

    table = "\n".join([f"{'initiator':<16}{'count':>8}"] + [f"{s:<16}{c:>8d}" for s, c in zip(support, counts)])
    _emit(args, payload, table)
    return 0


def cmd_simulate(args, cfg):
    scene, _ = _load_scene(args, cfg)
    force = _force_from_args(args, scene)
    domain = cfg["domain"]
    sim = simulate(scene, force, domain.duration, domain.fps, cfg["sim"])
    payload = {"force": None if force is None else force.to_dict(), **_sim_summary(sim, args.target)}
    if args.out:
        out = Path(args.out)
        _write_json(out / "simulation.json", sim.to_dict())
        if args.frames:
            datagen.write_frames(render_frames(sim), out / "frames")
        _echo_config(out, cfg, subcommand="simulate")
    table = "\n".join([f"{'time':>8}  {'kind':<14}{'a':<14}{'b':<14}"] +
                      [f"{e.time:>8.4f}  {e.kind:<14}{e.a:<14}{e.b:<14}" for e in sim.events])
    _emit(args, payload, table)
    return 0


def cmd_encode(args, cfg):
    scene, file_goal = _load_scene(args, cfg)
    force = _force_from_args(args, scene)
    if force is None:
        raise ConfigError("encode needs --force or --initiator", code="bad-arguments")
    if args.out is None:
        raise ConfigError("encode needs --out", code="bad-arguments")
    domain = cfg["domain"]
    target = args.target or (file_goal.target_id if file_goal else None)
    sim = simulate(scene, force, domain.duration, domain.fps, cfg["sim"])
    enc = datagen.encoding_for(scene, domain, sim.n_frames)
    policy = None if args.no_mask else domain.policy
    h, w = scene.camera.image_size
    tensor, masking, outcome = datagen.encode_sample(scene, force, sim, target, enc, (h, w), policy,
                                                     datagen.stable_seed(cfg["seed"], "mask"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(tensor, out / "tensor.gfct")
    if args.frames:
        datagen.write_frames(render_frames(sim), out / "frames")
    payload = {"tensor": str(out / "tensor.gfct"), "shape": list(tensor.shape), "masking": masking,
               "force": force.to_dict(), "outcome": None if outcome is None else outcome.to_dict()}
    _write_json(out / "meta.json", payload)
    _echo_config(out, cfg, subcommand="encode")
    _emit(args, payload)
    return 0


def _read_input(path):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}", code="bad-input") from exc
    text = text.strip()
    if not text:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        return [json.loads(ln) for ln in lines]
    except json.JSONDecodeError:
        pass
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"{path}: not JSON, JSON lines or a list of numbers", code="bad-input") from exc


def _records(data, key):
    if data is None:
        return []
    if isinstance(data, dict):
        data = data.get(key)
    if not isinstance(data, list):
        raise ConfigError(f"expected a list of {key}", code="bad-input")
    return data


def _diversity_from(data):
    if data is None:
        raise ConfigError("empty counts input", code="empty-counts")
    if isinstance(data, list):
        return evaluation.diversity_report(data)
    if isinstance(data, dict) and "counts" in data:
        return evaluation.diversity_report(data["counts"], data.get("support"))
    if isinstance(data, dict) and "plans" in data and "support" in data:
        return evaluation.diversity_report(
            evaluation.tally([p["initiator"] for p in data["plans"]], data["support"]), data["support"])
    raise ConfigError("diversity input needs a counts list or an object with 'counts'", code="bad-input")


def _speed_trials(data, fps_default):
    trials = []
    for row in _records(data, "trials"):
        if not isinstance(row, dict) or "m_p" not in row or "m_t" not in row:
            raise ConfigError("speed rows need m_p and m_t", code="bad-input")
        if "speed" in row:
            trials.append(evaluation.SpeedTrial(float(row["m_p"]), float(row["m_t"]), float(row["speed"]),
                                                int(row.get("collision_frame", -1))))
        else:
            speed, frame = evaluation.detect_collision_and_speed(
                row["projectile"], row["target"], float(row.get("fps", fps_default)), row.get("mode", "world"))
            trials.append(evaluation.SpeedTrial(float(row["m_p"]), float(row["m_t"]), speed, frame))
    return trials


def cmd_eval(args, cfg):
    data = _read_input(args.input)
    try:
        if args.metric == "diversity":
            report = _diversity_from(data)
        elif args.metric == "accuracy":
            rows = _records(data, "trials")
            if not rows:
                raise NoValidTrials("the trial log is empty")
            report = evaluation.accuracy_report([evaluation.TrialLog.from_dict(r) for r in rows])
        else:
            report = evaluation.speed_ordering_check(_speed_trials(data, cfg["domain"].fps))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed {args.metric} input: {exc}", code="bad-input") from exc

    figure_dir = args.figures
    if args.out:
        out = Path(args.out)
        _write_json(out, report)
        figure_dir = figure_dir or out.parent
    if figure_dir:
        stem = Path(args.out).stem if args.out else args.metric
        report_fig = plotting.save_report_figure(report, figure_dir, stem)
        log.info("figure written to %s", report_fig)
    _emit(args, report, evaluation.format_table(report))
    return 0


def cmd_overlay(args, cfg):
    sample = Path(args.sample_dir)
    tensor_path = sample / "tensor.gfct"
    if not tensor_path.is_file():
        raise ConfigError(f"{tensor_path} does not exist", code="missing-tensor")
    frames_dir = sample / "frames"
    if not frames_dir.is_dir() or not any(frames_dir.glob("*.png")):
        raise ConfigError(f"{frames_dir} holds no frames", code="missing-frames")
    tensor = read_tensor(tensor_path)
    frames = datagen.read_frames(frames_dir)
    try:
        blended = overlay(frames, tensor, args.alpha)
    except ValueError as exc:
        raise ConfigError(str(exc), code="bad-arguments") from exc
    out = Path(args.out) if args.out else sample / "overlay"
    datagen.write_frames(blended, out)
    payload = {"frames": int(len(blended)), "alpha": args.alpha, "out": str(out)}
    _emit(args, payload)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help=f"base seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--out", default=None, help="output directory (file for eval)")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="config override, e.g. resolution=120,208 or policy.p_goal=0.3")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--quiet", action="store_true", help="suppress the resolved-config log line")
    return p


def _scene_args(p):
    p.add_argument("--scene", default=None, help="scene JSON file")
    p.add_argument("--demo", default=None, help="dominos6, pool-blocker or mass-grid-<mp>-<mt>")


def _force_args(p):
    p.add_argument("--force", default=None, help="ForceSpec JSON file")
    p.add_argument("--initiator", default=None)
    p.add_argument("--point", type=float, nargs=2, default=None)
    p.add_argument("--direction", type=float, default=None, help="degrees, counterclockwise from +x")
    p.add_argument("--magnitude", type=float, default=None, help="normalized magnitude in [0, 1]")
    p.add_argument("--target", default=None, help="object whose received force is reported")


def build_parser():
    common = _common()
    parser = _Parser(prog="goalforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--family", default="all", help=", ".join(GEN_FAMILIES))
    p.add_argument("--count", type=int, default=None, help="sample count for a single family")
    p.add_argument("--dominos", type=int, default=None)
    p.add_argument("--collide", type=int, default=None)
    p.add_argument("--miss", type=int, default=None)
    p.add_argument("--sway", type=int, default=None)
    p.add_argument("--straight-ratio", type=float, default=0.5)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", parents=[common], help="plan direct forces that cause a goal force")
    _scene_args(p)
    p.add_argument("--target", default=None)
    p.add_argument("--direction", type=float, default=None, help="goal direction in degrees")
    p.add_argument("--magnitude", type=float, default=None, help="normalized goal magnitude")
    p.add_argument("--window", type=float, nargs=2, default=None, metavar=("T0", "T1"))
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--bias", action="append", default=[], metavar="ID=WEIGHT")
    p.add_argument("--max-listed", type=int, default=100, help="list individual plans up to this n")
    p.add_argument("--simulate", action="store_true")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", parents=[common], help="simulate a scene under a direct force")
    _scene_args(p)
    _force_args(p)
    p.add_argument("--frames", action="store_true", help="also render frames into --out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("encode", parents=[common], help="simulate and write the control tensor")
    _scene_args(p)
    _force_args(p)
    p.add_argument("--no-mask", action="store_true", help="keep every channel")
    p.add_argument("--frames", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eval", parents=[common], help="score diversity, accuracy or speed orderings")
    p.add_argument("--metric", choices=("diversity", "accuracy", "speed"), required=True)
    p.add_argument("--input", default="-", help="input file, '-' for stdin")
    p.add_argument("--figures", default=None, help="directory for figures (default: next to --out)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("overlay", parents=[common], help="blend a sample's control tensor over its frames")
    p.add_argument("sample_dir")
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=cmd_overlay)
    return parser


def _fail(exc: GoalForgeError) -> int:
    print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
    return exc.exit_code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="goalforge: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("missing subcommand", code="bad-arguments")
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1", code="bad-arguments")
        cfg = resolve_config(args.config, args.overrides, args.seed)
        if not args.quiet:
            log.info("resolved config %s", json.dumps(_config_dict(cfg, subcommand=args.command), sort_keys=True))
        return args.func(args, cfg)
    except GoalForgeError as exc:
        return _fail(exc)
    except ValueError as exc:
        return _fail(ConfigError(str(exc), code="invalid-argument"))


if __name__ == "__main__":
    sys.exit(main())
