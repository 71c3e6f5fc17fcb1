"""Hierarchical floorplans: construction, flattening, rule checks, SVG
rendering, and wire-pipelining estimates.

Geometry is kept in integral nanometers internally so overlap and spacing
predicates are exact; the API speaks micrometers.  A node's transform is
``q -> O . q + offset`` about its local origin, so nested offsets add and
orientations compose through the standard eight-element dihedral group.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .errors import FloorplanError

# Orientation matrices, column-vector convention, counterclockwise
# rotations.  MX mirrors across the x axis (y negates), MY across the y
# axis; MX90/MY90 are the mirror followed by R90.
_MAT = {
    "R0": (1, 0, 0, 1),
    "R90": (0, -1, 1, 0),
    "R180": (-1, 0, 0, -1),
    "R270": (0, 1, -1, 0),
    "MX": (1, 0, 0, -1),
    "MY": (-1, 0, 0, 1),
    "MX90": (0, 1, 1, 0),
    "MY90": (0, -1, -1, 0),
}
_NAME = {m: n for n, m in _MAT.items()}
ORIENTATIONS = tuple(_MAT)


def compose_orientations(outer: str, inner: str) -> str:
    """Name of the orientation equivalent to applying inner, then outer."""
    a, b = _MAT[outer], _MAT[inner]
    return _NAME[(a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
                  a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3])]


def _nm(um) -> int:
    return round(um * 1000)


def _apply(mat, t, x, y):
    return (mat[0] * x + mat[1] * y + t[0], mat[2] * x + mat[3] * y + t[1])


def _rect_apply(mat, t, rect):
    x0, y0 = _apply(mat, t, rect[0], rect[1])
    x1, y1 = _apply(mat, t, rect[2], rect[3])
    return (min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))


@dataclass
class FpNode:
    """One level of a floorplan tree.

    Macros carry their own width/height (micrometers, usually out of a tech
    table); hierarchy nodes derive their extent from their children, or from
    an explicit `bound` rectangle.  `children` holds (node, x_um, y_um)
    placements in this node's frame.
    """
    name: str
    kind: str = "macro"
    width: float = 0.0
    height: float = 0.0
    orientation: str = "R0"
    children: list = field(default_factory=list)
    bound: tuple = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise FloorplanError("node name must be a nonempty string")
        if "/" in self.name:
            raise FloorplanError(f"node name {self.name!r} contains '/'")
        if self.kind not in ("hierarchy", "macro"):
            raise FloorplanError(f"{self.name}: kind must be hierarchy or macro")
        if self.orientation not in _MAT:
            raise FloorplanError(
                f"{self.name}: orientation {self.orientation!r} not one of "
                f"{'/'.join(ORIENTATIONS)}")
        if self.kind == "macro":
            if self.children:
                raise FloorplanError(f"{self.name}: macro nodes have no children")
            if self.width <= 0 or self.height <= 0:
                raise FloorplanError(f"{self.name}: macro needs positive width and height")
        if self.bound is not None:
            b = tuple(self.bound)
            if len(b) != 4 or not (b[0] < b[2] and b[1] < b[3]):
                raise FloorplanError(f"{self.name}: bound must be (x0, y0, x1, y1) with x0<x1, y0<y1")
            self.bound = b


@dataclass(frozen=True)
class PlacedRect:
    """A flattened macro: full hierarchical path, absolute rectangle in
    micrometers, and the composed orientation."""
    path: str
    x0: float
    y0: float
    x1: float
    y1: float
    orientation: str


@dataclass(frozen=True)
class Violation:
    kind: str       # overlap | spacing | duplicate_name | bounds
    a: str
    b: str
    detail: str

    def __str__(self):
        if self.b:
            return f"{self.kind}: {self.a} vs {self.b} ({self.detail})"
        return f"{self.kind}: {self.a} ({self.detail})"


def array(proto: FpNode, rows: int, cols: int, pitch_x, pitch_y,
          name_pattern: str, name: str = "array") -> FpNode:
    """Grid of copies of `proto`, names from the pattern's {r}/{c} fields.

    A pitch smaller than the proto extent is allowed here; check() reports
    the resulting overlaps.
    """
    if rows < 1 or cols < 1:
        raise FloorplanError("array needs rows >= 1 and cols >= 1")
    children, seen = [], set()
    for r in range(rows):
        for c in range(cols):
            inst = name_pattern.format(r=r, c=c)
            if inst in seen:
                raise FloorplanError(
                    f"array pattern {name_pattern!r} collides at {inst!r}")
            seen.add(inst)
            children.append((replace(proto, name=inst,
                                     children=list(proto.children)),
                             c * pitch_x, r * pitch_y))
    return FpNode(name=name, kind="hierarchy", children=children)


def _local_bbox(node: FpNode, cache: dict):
    """Extent of the node's own frame in nm, before its orientation."""
    got = cache.get(id(node))
    if got is not None:
        return got
    if node.kind == "macro":
        box = (0, 0, _nm(node.width), _nm(node.height))
    elif node.bound is not None:
        box = tuple(_nm(v) for v in node.bound)
    else:
        if not node.children:
            raise FloorplanError(
                f"{node.name}: hierarchy node needs children or a bound")
        boxes = [_rect_apply(_MAT[c.orientation], (_nm(x), _nm(y)),
                             _local_bbox(c, cache))
                 for c, x, y in node.children]
        box = (min(b[0] for b in boxes), min(b[1] for b in boxes),
               max(b[2] for b in boxes), max(b[3] for b in boxes))
    cache[id(node)] = box
    return box


def _walk(root: FpNode):
    """Yield (node, path, depth, world matrix, world translation nm)."""
    stack = [(root, root.name, 0, _MAT[root.orientation], (0, 0))]
    while stack:
        node, path, depth, mat, t = stack.pop(0)
        yield node, path, depth, mat, t
        for child, x, y in node.children:
            cm = _MAT[child.orientation]
            comp = (mat[0] * cm[0] + mat[1] * cm[2], mat[0] * cm[1] + mat[1] * cm[3],
                    mat[2] * cm[0] + mat[3] * cm[2], mat[2] * cm[1] + mat[3] * cm[3])
            ct = _apply(mat, t, _nm(x), _nm(y))
            stack.append((child, f"{path}/{child.name}", depth + 1, comp, ct))


def _flatten_nm(root: FpNode):
    """All nodes as (path, rect nm, orientation name, depth, kind)."""
    cache = {}
    out = []
    for node, path, depth, mat, t in _walk(root):
        rect = _rect_apply(mat, t, _local_bbox(node, cache))
        out.append((path, rect, _NAME[mat], depth, node.kind))
    return out


def flatten(root: FpNode) -> list:
    """Absolute macro rectangles with composed orientations."""
    return [PlacedRect(path, r[0] / 1000, r[1] / 1000, r[2] / 1000, r[3] / 1000, o)
            for path, r, o, _, kind in _flatten_nm(root) if kind == "macro"]


def _gap2(a, b):
    """Squared center-to-edge clearance between two disjoint rects, nm^2."""
    dx = max(a[0] - b[2], b[0] - a[2], 0)
    dy = max(a[1] - b[3], b[1] - a[3], 0)
    return dx * dx + dy * dy


def check(root: FpNode, min_spacing_um=0.0) -> list:
    """Overlap, spacing, duplicate-name, and bound-escape violations.

    Violations are returned as data, sorted by (kind, paths); an empty list
    means the floorplan is clean.  Overlap and spacing apply to flattened
    macro leaves only; a pair is either overlapping or (if disjoint and too
    close) a spacing violation, never both.
    """
    nodes = _flatten_nm(root)
    out = []

    macros = [(p, r) for p, r, _, _, kind in nodes if kind == "macro"]
    min_nm = _nm(min_spacing_um)
    for i in range(len(macros)):
        pa, ra = macros[i]
        for j in range(i + 1, len(macros)):
            pb, rb = macros[j]
            a, b = sorted((pa, pb))
            if (ra[0] < rb[2] and rb[0] < ra[2] and
                    ra[1] < rb[3] and rb[1] < ra[3]):
                out.append(Violation("overlap", a, b, "macro rects intersect"))
            elif min_nm > 0 and _gap2(ra, rb) < min_nm * min_nm:
                gap = math.sqrt(_gap2(ra, rb)) / 1000
                out.append(Violation("spacing", a, b,
                                     f"gap {gap:g} um < {min_spacing_um:g} um"))

    seen = {}
    for path, _, _, _, _ in nodes:
        seen[path] = seen.get(path, 0) + 1
    for path, n in seen.items():
        if n > 1:
            out.append(Violation("duplicate_name", path, "", f"{n} instances"))

    cache = {}
    for node, path, _, mat, t in _walk(root):
        if node.kind != "hierarchy" or node.bound is None:
            continue
        wb = _rect_apply(mat, t, tuple(_nm(v) for v in node.bound))
        for child, x, y in node.children:
            cm = _MAT[child.orientation]
            comp = (mat[0] * cm[0] + mat[1] * cm[2], mat[0] * cm[1] + mat[1] * cm[3],
                    mat[2] * cm[0] + mat[3] * cm[2], mat[2] * cm[1] + mat[3] * cm[3])
            cr = _rect_apply(comp, _apply(mat, t, _nm(x), _nm(y)),
                             _local_bbox(child, cache))
            if not (cr[0] >= wb[0] and cr[1] >= wb[1] and
                    cr[2] <= wb[2] and cr[3] <= wb[3]):
                out.append(Violation("bounds", f"{path}/{child.name}", path,
                                     "child escapes declared bound"))

    out.sort(key=lambda v: (v.kind, v.a, v.b))
    return out


def pipe_stages(a, b, reach_um_per_cycle) -> int:
    """Pipeline registers needed to cross the manhattan distance a->b."""
    if reach_um_per_cycle <= 0:
        raise FloorplanError("reach must be > 0")
    d = abs(_nm(a[0]) - _nm(b[0])) + abs(_nm(a[1]) - _nm(b[1]))
    return -(-d // _nm(reach_um_per_cycle))


def buffer_tree_depth(source, sinks, reach_um_per_cycle, max_fanout) -> int:
    """Depth estimate for a buffered broadcast: the farthest sink's stage
    count or the fanout level count, whichever dominates.  An estimate, not
    a router."""
    if not sinks:
        raise FloorplanError("buffer tree needs at least one sink")
    if max_fanout < 2:
        raise FloorplanError("max_fanout must be >= 2")
    far = max(pipe_stages(source, s, reach_um_per_cycle) for s in sinks)
    levels, cap = 0, 1
    while cap < len(sinks):
        cap *= max_fanout
        levels += 1
    return max(far, levels)


_DEPTH_FILL = ("#4c78a8", "#f58518", "#54a24b", "#eeca3b",
               "#b279a2", "#72b7b2", "#e45756", "#9d755d")


def render_svg(root: FpNode, violations=()) -> str:
    """Depth-colored rectangle plot of the tree, macro names in tooltips.

    Pass check() results to outline the offending instances in red.
    """
    nodes = _flatten_nm(root)
    x0 = min(r[0] for _, r, _, _, _ in nodes)
    y0 = min(r[1] for _, r, _, _, _ in nodes)
    x1 = max(r[2] for _, r, _, _, _ in nodes)
    y1 = max(r[3] for _, r, _, _, _ in nodes)
    span_x, span_y = max(x1 - x0, 1), max(y1 - y0, 1)
    W = 800
    scale = (W - 20) / span_x
    H = int(span_y * scale) + 20

    bad = {v.a for v in violations} | {v.b for v in violations}

    def px(v):
        return (v - x0) * scale + 10

    def py(v):
        return H - 10 - (v - y0) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="monospace" font-size="10">\n',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>\n']
    for path, r, orient, depth, kind in nodes:
        rx, ry = px(r[0]), py(r[3])
        rw, rh = (r[2] - r[0]) * scale, (r[3] - r[1]) * scale
        fill = _DEPTH_FILL[depth % len(_DEPTH_FILL)]
        op = "0.85" if kind == "macro" else "0.25"
        stroke = "red" if path in bad else "black"
        sw = "2.5" if path in bad else "0.8"
        out.append(f'<rect x="{rx:.2f}" y="{ry:.2f}" width="{rw:.2f}" '
                   f'height="{rh:.2f}" fill="{fill}" fill-opacity="{op}" '
                   f'stroke="{stroke}" stroke-width="{sw}">'
                   f'<title>{path} [{orient}]</title></rect>\n')
        if kind == "macro" and rw > 40 and rh > 12:
            name = path.rsplit("/", 1)[-1]
            out.append(f'<text x="{rx + 3:.2f}" y="{ry + 11:.2f}">{name}</text>\n')
    out.append("</svg>\n")
    return "".join(out)


def fp_from_json(obj, tech=None) -> FpNode:
    """Tree from its JSON form.  Macro dims come from the node itself or
    from the tech table (keyed by `cell`, falling back to the name); an
    `array` kind expands to a grid via array()."""
    tech = tech or {}
    kind = obj.get("kind", "macro")
    if kind == "array":
        proto = fp_from_json(obj["proto"], tech)
        return array(proto, obj["rows"], obj["cols"],
                     obj["pitch_x"], obj["pitch_y"], obj["name_pattern"],
                     name=obj.get("name", "array"))
    name = obj.get("name", "")
    width, height = obj.get("width", 0.0), obj.get("height", 0.0)
    if kind == "macro" and not (width and height):
        cell = obj.get("cell", name)
        if cell not in tech:
            raise FloorplanError(
                f"{name or '?'}: no dims given and {cell!r} not in the tech table")
        width, height = tech[cell]
    children = [(fp_from_json(c["node"], tech), c["x"], c["y"])
                for c in obj.get("children", [])]
    return FpNode(name=name, kind=kind, width=width, height=height,
                  orientation=obj.get("orientation", "R0"),
                  children=children,
                  bound=tuple(obj["bound"]) if obj.get("bound") else None)


def load_floorplan(path, tech_path=None) -> FpNode:
    tech = None
    if tech_path is not None:
        with open(tech_path) as fh:
            tech = json.load(fh)
    with open(path) as fh:
        return fp_from_json(json.load(fh), tech)
