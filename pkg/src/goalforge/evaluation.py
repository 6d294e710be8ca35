"""Plan diversity, planning accuracy and mass/speed ordering metrics.

Reports come out as plain dicts matching the JSON report schemas, plus a
``format_table`` helper that renders the same numbers for humans.
"""

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyCounts, InsufficientGroups, NoCollisionDetected, NoValidTrials, SupportMismatch


def _as_pmf(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("a PMF needs a 1-D support of size >= 1")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("PMF entries must be non-negative and sum to 1")
    return p


def kl_divergence(p, q, base: float = 2.0) -> float:
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])) / math.log(base))


def jsd(p, q, base: float = 2.0) -> float:
    """Jensen-Shannon divergence with ``0 log 0 = 0``; base 2 keeps it in [0, 1]."""
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise SupportMismatch(f"support sizes differ: {p.shape} vs {q.shape}")
    p, q = _as_pmf(p), _as_pmf(q)
    m = 0.5 * (p + q)
    return min(1.0, max(0.0, 0.5 * kl_divergence(p, m, base) + 0.5 * kl_divergence(q, m, base)))


def diversity_score(counts) -> float:
    """``1 - JSD(p_hat || Unif)`` for per-item tallies over the full support."""
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise EmptyCounts("counts must be a non-empty 1-D sequence")
    if (c < 0).any():
        raise ValueError("counts must be non-negative")
    total = c.sum()
    if total < 1:
        raise EmptyCounts("total count must be at least 1")
    return 1.0 - jsd(c / total, np.full(c.size, 1.0 / c.size))


def tally(observed: Iterable[str], support: Sequence[str]) -> List[int]:
    index = {s: i for i, s in enumerate(support)}
    counts = [0] * len(support)
    for o in observed:
        if o not in index:
            raise SupportMismatch(f"{o!r} is outside the support {list(support)}")
        counts[index[o]] += 1
    return counts


def diversity_report(counts, support: Optional[Sequence[str]] = None) -> dict:
    counts = [int(c) for c in counts]
    return {
        "metric": "diversity",
        "support": list(support) if support is not None else list(range(len(counts))),
        "counts": counts,
        "score": diversity_score(counts),
    }


@dataclass(frozen=True)
class TrialLog:
    scene_id: str
    truth: str
    observed: Optional[str]
    valid: bool = True

    def __post_init__(self):
        if self.observed is not None and not self.valid:
            raise ValueError("invalid trials carry no observed initiator")

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["scene"]), str(d["truth"]), d.get("observed"), bool(d.get("valid", True)))


def planning_accuracy(logs: Sequence[TrialLog]) -> Tuple[int, int, float]:
    """(valid trials, successes, accuracy in percent); invalid trials are excluded."""
    valid = [t for t in logs if t.valid]
    if not valid:
        raise NoValidTrials("no valid trials to score")
    success = sum(1 for t in valid if t.observed == t.truth)
    return len(valid), success, 100.0 * success / len(valid)


def accuracy_report(logs: Sequence[TrialLog]) -> dict:
    by_scene = defaultdict(list)
    for t in logs:
        by_scene[t.scene_id].append(t)
    rows = []
    for scene_id in sorted(by_scene):
        trials = by_scene[scene_id]
        if not any(t.valid for t in trials):
            continue
        v, s, a = planning_accuracy(trials)
        rows.append({"scene": scene_id, "valid": v, "success": s, "accuracy": a})
    v, s, a = planning_accuracy(logs)
    return {"metric": "accuracy", "rows": rows, "total": {"scene": "all", "valid": v, "success": s, "accuracy": a}}


@dataclass(frozen=True)
class SpeedTrial:
    m_p: float
    m_t: float
    speed: float
    collision_frame: int

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")


def detect_collision_and_speed(projectile, target, fps: float, mode: str = "world",
                               eps: Optional[float] = None) -> Tuple[float, int]:
    """Collision frame and pre-collision projectile speed from two trajectories.

    The collision frame is the first frame at which the target has moved by more
    than ``eps`` (speed units: m/s in world mode, px/frame in pixel mode). The
    projectile speed is the mean displacement per frame times ``fps`` over the
    frame pairs that end before that frame.
    """
    p = np.asarray(projectile, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 2 or len(p) < 3:
        raise ValueError("trajectories must share shape (n >= 3, 2)")
    if mode not in ("world", "pixel"):
        raise ValueError("mode must be 'world' or 'pixel'")
    step_t = np.hypot(*np.diff(t, axis=0).T)
    if mode == "world":
        eps = 1e-3 if eps is None else eps
        moving = step_t * fps > eps
    else:
        eps = 0.5 if eps is None else eps
        moving = step_t > eps
    hits = np.flatnonzero(moving)
    if len(hits) == 0:
        raise NoCollisionDetected("target never moves")
    frame = int(hits[0]) + 1
    if frame < 2:
        raise NoCollisionDetected("target moves from the first frame; no pre-collision window")
    step_p = np.hypot(*np.diff(p[:frame], axis=0).T)
    return float(step_p.mean() * fps), frame


def group_speeds(trials: Sequence[SpeedTrial]) -> Dict[Tuple[float, float], float]:
    groups = defaultdict(list)
    for t in trials:
        groups[(t.m_p, t.m_t)].append(t.speed)
    return {k: float(np.mean(v)) for k, v in sorted(groups.items())}


def speed_ordering_check(trials: Sequence[SpeedTrial]) -> dict:
    """Check the two mass principles on every pair of groups sharing one mass.

    Same projectile mass: the heavier target needs the faster projectile.
    Same target mass: the heavier projectile can move slower. Inequalities are strict.
    """
    means = group_speeds(trials)
    keys = list(means)
    relationships = []
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            (pa, ta), (pb, tb) = keys[i], keys[j]
            if pa == pb and ta != tb:
                lo, hi = (keys[i], keys[j]) if ta < tb else (keys[j], keys[i])
                kind = "fixed projectile mass"
            elif ta == tb and pa != pb:
                # heavier projectile should be slower
                lo, hi = (keys[i], keys[j]) if pa > pb else (keys[j], keys[i])
                kind = "fixed target mass"
            else:
                continue
            relationships.append({
                "lhs": _label(lo), "rhs": _label(hi), "kind": kind,
                "lhs_speed": means[lo], "rhs_speed": means[hi],
                "satisfied": bool(means[lo] < means[hi]),
            })
    if not relationships:
        raise InsufficientGroups("need at least two mass configurations sharing one mass")
    return {
        "metric": "speed",
        "groups": [{"group": _label(k), "m_p": k[0], "m_t": k[1], "mean_speed": v,
                    "trials": sum(1 for t in trials if (t.m_p, t.m_t) == k)} for k, v in means.items()],
        "relationships": relationships,
        "all_satisfied": all(r["satisfied"] for r in relationships),
    }


def _label(key) -> str:
    return f"m_p={key[0]:g},m_t={key[1]:g}"


def format_table(report: Mapping) -> str:
    metric = report.get("metric")
    lines = []
    if metric == "diversity":
        lines.append(f"{'item':<16}{'count':>8}")
        for s, c in zip(report["support"], report["counts"]):
            lines.append(f"{str(s):<16}{c:>8d}")
        lines.append(f"diversity score: {report['score']:.4f}")
    elif metric == "accuracy":
        lines.append(f"{'scene':<24}{'valid':>8}{'success':>9}{'accuracy':>10}")
        for r in report["rows"] + [report["total"]]:
            lines.append(f"{r['scene']:<24}{r['valid']:>8d}{r['success']:>9d}{r['accuracy']:>10.2f}")
    elif metric == "speed":
        lines.append(f"{'group':<20}{'mean speed':>12}")
        for g in report["groups"]:
            lines.append(f"{g['group']:<20}{g['mean_speed']:>12.4f}")
        for r in report["relationships"]:
            mark = "ok" if r["satisfied"] else "VIOLATED"
            lines.append(f"{r['lhs']} < {r['rhs']}: {mark}")
    else:
        raise ValueError(f"unknown report metric {metric!r}")
    return "\n".join(lines)
