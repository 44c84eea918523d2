"""Trace rendering: per-iteration grid frames and an optional GIF.

Layout per frame: left panel shows defects and forward signals, right
panel shows stacks and anti-signals (one marker per site, priority order
1-stacks, 2-stacks, 1-anti, 2-anti) with the maximum stack value over the
four directions printed on the site.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg", force=False)

import matplotlib.pyplot as plt
import numpy as np

from .io import read_trace

_DIRS = ("N", "E", "S", "W")
_ARROW = {"N": (0.0, 0.3), "E": (0.3, 0.0), "S": (0.0, -0.3), "W": (-0.3, 0.0)}


def _grid_axes(ax, d, title):
    ax.set_xlim(-0.7, d - 0.3)
    ax.set_ylim(-0.7, d - 0.3)
    ax.set_xticks(range(d))
    ax.set_yticks(range(d))
    ax.set_aspect("equal")
    ax.invert_yaxis()  # row 0 on top
    ax.grid(True, linestyle=":", alpha=0.3)
    ax.set_title(title, fontsize=9)
    ax.tick_params(labelsize=6)


def _channel_sites(frame, key):
    for dd in _DIRS:
        for r, c in frame[key][dd]:
            yield dd, r, c


def frame_is_blank(frame) -> bool:
    if frame["defects"] or frame["stack1"] or frame["stack2"] or frame["corrections"]:
        return False
    return all(not frame[key][dd] for key in ("fwd1", "fwd2", "anti1", "anti2") for dd in _DIRS)


def render_frame(frame, d, out=None):
    """One trace record as a two-panel figure."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 4))
    step = f" [{frame['step']}]" if "step" in frame else ""
    _grid_axes(ax1, d, f"t={frame['t']}{step}: defects + forward signals")
    _grid_axes(ax2, d, "stacks + anti-signals")

    for r, c in frame["defects"]:
        ax1.plot(c, r, "ko", markersize=11)
    for key, color in (("fwd1", "tab:blue"), ("fwd2", "tab:cyan")):
        for dd, r, c in _channel_sites(frame, key):
            ax1.annotate(
                "", xy=(c + _ARROW[dd][0], r - _ARROW[dd][1]), xytext=(c, r),
                arrowprops=dict(arrowstyle="->", color=color, lw=1.6),
            )
    for r, c, orient in frame["corrections"]:
        dx, dy = (0.5, 0.0) if orient == "H" else (0.0, 0.5)
        ax1.plot([c, c + dx * 2], [r, r + dy * 2], color="tab:red", lw=3, alpha=0.6)

    occupied = set()
    stack_peak = {}
    for key in ("stack1", "stack2"):
        for r, c, dd, value in frame[key]:
            stack_peak[(r, c)] = max(stack_peak.get((r, c), 0), value)
    for key, color in (("stack1", "tab:purple"), ("stack2", "tab:pink")):
        for r, c, dd, value in frame[key]:
            if (r, c) not in occupied:
                ax2.plot(c, r, "s", color=color, markersize=12)
                occupied.add((r, c))
    for key, color in (("anti1", "tab:orange"), ("anti2", "tab:olive")):
        for dd, r, c in _channel_sites(frame, key):
            if (r, c) not in occupied:
                ax2.plot(c, r, "D", color=color, markersize=9)
                occupied.add((r, c))
    for (r, c), value in stack_peak.items():
        ax2.text(c, r, str(value), color="white", ha="center", va="center", fontsize=7)

    if out:
        fig.savefig(out, bbox_inches="tight", dpi=120)
    return fig


def render_trace(trace_path, out_dir=None, gif=None, d=None):
    """Render every frame of a trace; returns the frame file paths.

    ``d`` is inferred from the largest coordinate when not given.
    """
    frames = read_trace(trace_path)
    if d is None:
        top = 0
        for frame in frames:
            for r, c in frame["defects"]:
                top = max(top, r, c)
            for key in ("fwd1", "fwd2", "anti1", "anti2"):
                for dd in _DIRS:
                    for r, c in frame[key][dd]:
                        top = max(top, r, c)
        d = max(top + 1, 3)
    paths = []
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    figures = []
    for i, frame in enumerate(frames):
        out = out_dir / f"frame_{i:04d}.png" if out_dir is not None else None
        fig = render_frame(frame, d, out=out)
        if out is not None:
            paths.append(out)
        figures.append(fig)
    if gif is not None and figures:
        from matplotlib.animation import FuncAnimation, PillowWriter

        base = plt.figure(figsize=(8, 4))

        def draw(i):
            base.clf()
            img_fig = figures[i]
            img_fig.canvas.draw()
            buf = np.asarray(img_fig.canvas.buffer_rgba())
            ax = base.add_axes([0, 0, 1, 1])
            ax.imshow(buf)
            ax.axis("off")

        anim = FuncAnimation(base, draw, frames=len(figures), interval=400)
        anim.save(gif, writer=PillowWriter(fps=2))
        plt.close(base)
    for fig in figures:
        plt.close(fig)
    return paths
