"""
SVG phase portraits.

Trajectories are drawn as one path per constant-control piece. In the
emitted file each trajectory is a ``<g class="trajectory">`` group whose
paths carry ``class="bang"`` or ``class="coast"``.
"""

from __future__ import annotations

import io
import xml.etree.ElementTree as ET

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SVG_NS = "http://www.w3.org/2000/svg"
ET.register_namespace("", SVG_NS)
ET.register_namespace("xlink", "http://www.w3.org/1999/xlink")

COLORS = {"bang": "#1f4fd1", "coast": "#d12f1f"}


def dense_pieces(sys, x_start, control, max_step=0.05):
    """States sampled inside each constant piece, forward from ``x_start``.

    Returns a list of ``(kind, points)`` with kind "bang" or "coast".
    """
    x = np.asarray(x_start, dtype=float)
    out = []
    for j, h in enumerate(control.durations):
        u = control.values[j]
        steps = max(1, int(np.ceil(h / max_step)))
        Phi, Gam = sys.step_maps(h / steps)
        pts = [x]
        for _ in range(steps):
            x = Phi @ x + Gam @ u
            pts.append(x)
        kind = "bang" if np.linalg.norm(u) > 0.5 else "coast"
        if out and out[-1][0] == kind:
            out[-1] = (kind, np.vstack([out[-1][1], np.array(pts[1:])]))
        else:
            out.append((kind, np.array(pts)))
    return out


def _configure():
    matplotlib.rcParams["svg.hashsalt"] = "fuelopt"
    matplotlib.rcParams["svg.fonttype"] = "none"
    matplotlib.rcParams["path.simplify"] = False


def render_svg(path, trajectories=(), curves=(), points=(), title=None, limits=None):
    """Write an SVG portrait.

    Parameters
    ----------
    trajectories : list of list of (kind, (k, 2) array)
        Output of :func:`dense_pieces` per trajectory.
    curves : list of (label, (k, 2) array)
        Drawn in black as reference curves.
    points : list of (label, (2,) array)
    """
    _configure()
    fig, ax = plt.subplots(figsize=(6, 6))
    for label, pts in curves:
        pts = np.asarray(pts)
        ax.plot(pts[:, 0], pts[:, 1], color="black", lw=0.8, gid=f"curve:{label}")
    for i, pieces in enumerate(trajectories):
        for j, (kind, pts) in enumerate(pieces):
            ax.plot(pts[:, 0], pts[:, 1], color=COLORS[kind], lw=1.0,
                    gid=f"traj:{i}:{j}:{kind}")
    for label, p in points:
        ax.plot([p[0]], [p[1]], "o", color="black", ms=3, gid=f"point:{label}")
    ax.set_aspect("equal", adjustable="datalim")
    if limits is not None:
        ax.set_xlim(limits[0])
        ax.set_ylim(limits[1])
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if title:
        ax.set_title(title)
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    text = _group_trajectories(buf.getvalue())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _group_trajectories(svg_text):
    root = ET.fromstring(svg_text)
    parent_of = {c: p for p in root.iter() for c in p}
    groups = {}
    for g in list(root.iter(f"{{{SVG_NS}}}g")):
        gid = g.get("id", "")
        if gid.startswith("traj:"):
            _, i, j, kind = gid.split(":")
            g.set("id", f"trajectory-{i}-piece-{j}")
            g.set("class", kind)
            for p in g.iter(f"{{{SVG_NS}}}path"):
                p.set("class", kind)
            groups.setdefault(int(i), []).append(g)
        elif gid.startswith("curve:"):
            g.set("class", "curve")
            g.set("id", "curve-" + gid.split(":", 1)[1])
        elif gid.startswith("point:"):
            g.set("class", "point")
            g.set("id", "point-" + gid.split(":", 1)[1])
    for i in sorted(groups):
        members = groups[i]
        parent = parent_of[members[0]]
        wrapper = ET.Element(f"{{{SVG_NS}}}g", {"class": "trajectory", "id": f"trajectory-{i}"})
        idx = list(parent).index(members[0])
        for g in members:
            parent_of[g].remove(g)
            wrapper.append(g)
        parent.insert(idx, wrapper)
    return ET.tostring(root, encoding="unicode", xml_declaration=True)
