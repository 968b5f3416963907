"""Top-down SVG plots of a mission: scene, trajectory, reach events.

Hand-rolled SVG keeps the output byte-deterministic and dependency-free.
"""
from __future__ import annotations

from pathlib import Path

from .mission import MissionLog
from .sim import Scene

_MARGIN = 20.0
_SCALE = 120.0  # px per meter


def _rect(x0, y0, x1, y1, fill, stroke="none", opacity=1.0) -> str:
    return (f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{x1 - x0:.1f}" '
            f'height="{y1 - y0:.1f}" fill="{fill}" stroke="{stroke}" '
            f'fill-opacity="{opacity}"/>')


def emit_plot(log: MissionLog, scene: Scene, out_path: str | Path) -> Path:
    """Write a top-down orthographic SVG of the run."""
    out_path = Path(out_path)
    lo, hi = scene.bounds.lo, scene.bounds.hi

    def sx(x: float) -> float:
        return _MARGIN + (x - lo[0]) * _SCALE

    def sy(y: float) -> float:
        # svg y grows downward; flip so +y is up
        return _MARGIN + (hi[1] - y) * _SCALE

    w = _MARGIN * 2 + (hi[0] - lo[0]) * _SCALE
    h = _MARGIN * 2 + (hi[1] - lo[1]) * _SCALE
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" '
             f'viewBox="0 0 {w:.0f} {h:.0f}">',
             _rect(sx(lo[0]), sy(hi[1]), sx(hi[0]), sy(lo[1]), "#f8f8f8", stroke="#333")]
    for b in scene.obstacles:
        parts.append(_rect(sx(b.lo[0]), sy(b.hi[1]), sx(b.hi[0]), sy(b.lo[1]), "#9aa0a6"))
    for obj in scene.objects:
        b = obj.box
        color = "#d93025" if obj.is_target else "#1a73e8"
        parts.append(_rect(sx(b.lo[0]), sy(b.hi[1]), sx(b.hi[0]), sy(b.lo[1]),
                           color, opacity=0.75))
        parts.append(f'<text x="{sx(b.lo[0]):.1f}" y="{sy(b.hi[1]) - 2:.1f}" '
                     f'font-size="9" fill="{color}">{obj.category}</text>')
    if log.poses:
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for _, x, y, _, _ in log.poses)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#188038" '
                     f'stroke-width="1.5"/>')
        t0 = log.poses[0]
        t1 = log.poses[-1]
        parts.append(f'<circle cx="{sx(t0[1]):.1f}" cy="{sy(t0[2]):.1f}" r="4" '
                     f'fill="#188038"/>')
        parts.append(f'<circle cx="{sx(t1[1]):.1f}" cy="{sy(t1[2]):.1f}" r="4" '
                     f'fill="none" stroke="#188038" stroke-width="2"/>')
    pose_at = {round(t, 6): (x, y) for t, x, y, _, _ in log.poses}
    for ev in log.reach_events:
        xy = pose_at.get(round(ev.t, 6))
        if xy is None:
            continue
        parts.append(f'<circle cx="{sx(xy[0]):.1f}" cy="{sy(xy[1]):.1f}" r="5" '
                     f'fill="none" stroke="#d93025" stroke-width="2"/>')
    parts.append(f'<text x="{_MARGIN:.0f}" y="{h - 4:.0f}" font-size="10" fill="#333">'
                 f'{log.scenario} / {log.mode} / seed {log.seed}</text>')
    parts.append("</svg>")
    out_path.write_text("\n".join(parts) + "\n")
    return out_path
