"""SVG rendering of one episode: grid, obstacles, dynamic traces and the agent path."""
from __future__ import annotations

from .gridworld import GridSpec, GridWorld

CELL = 20
MARGIN = 10


def _fmt(v: float) -> str:
    return f"{v:.1f}"


def _centre(cell, g: int) -> tuple[float, float]:
    x, y = cell
    # y grows upwards in the grid and downwards in SVG
    return MARGIN + (x + 0.5) * CELL, MARGIN + (g - 1 - y + 0.5) * CELL


def _points(cells, g: int) -> str:
    return " ".join(f"{_fmt(cx)},{_fmt(cy)}" for cx, cy in (_centre(c, g) for c in cells))


def render_svg(spec: GridSpec, static_cells, path, dynamic_traces=()) -> str:
    """``dynamic_traces`` holds one cell sequence per dynamic obstacle."""
    g = spec.size
    side = 2 * MARGIN + g * CELL
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" '
           f'viewBox="0 0 {side} {side}">',
           f'<rect x="0" y="0" width="{side}" height="{side}" fill="white"/>']
    for y in range(g):
        for x in range(g):
            px, py = MARGIN + x * CELL, MARGIN + (g - 1 - y) * CELL
            out.append(f'<rect class="cell" x="{px}" y="{py}" width="{CELL}" height="{CELL}" '
                       'fill="none" stroke="#cccccc" stroke-width="0.5"/>')
    for x, y in sorted(static_cells):
        px, py = MARGIN + x * CELL, MARGIN + (g - 1 - y) * CELL
        out.append(f'<rect class="static" x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="#333333"/>')
    for trace in dynamic_traces:
        cells = [c for k, c in enumerate(trace) if k == 0 or c != trace[k - 1]]
        if len(cells) > 1:
            out.append(f'<polyline class="dynamic" points="{_points(cells, g)}" fill="none" '
                       'stroke="#d62728" stroke-width="2" stroke-dasharray="4,3"/>')
        cx, cy = _centre(cells[-1], g)
        out.append(f'<circle class="dynamic-end" cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{CELL * 0.3:.1f}" '
                   'fill="#d62728"/>')
    for cls, cell, colour in (("start", spec.start, "#2ca02c"), ("goal", spec.goal, "#1f77b4")):
        cx, cy = _centre(cell, g)
        out.append(f'<circle class="{cls}" cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{CELL * 0.4:.1f}" '
                   f'fill="{colour}"/>')
    if path:
        out.append(f'<polyline class="agent" points="{_points(path, g)}" fill="none" '
                   'stroke="#ff7f0e" stroke-width="2.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def replay(spec: GridSpec, seed: int, actions):
    """Re-run an action sequence; returns (static cells, visited cells, per-obstacle dynamic traces)."""
    env = GridWorld(spec)
    env.reset(seed)
    statics = env.static_cells
    cells = [env.cell]
    steps = [env.dynamic_cells]
    for a in actions:
        env.step(a)
        cells.append(env.cell)
        steps.append(env.dynamic_cells)
    traces = [[s[k] for s in steps] for k in range(len(steps[0]))]
    return statics, cells, traces
