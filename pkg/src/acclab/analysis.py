"""Report builders: roofline charts, utilization timelines, design-space
tables.

Every chart is emitted twice: a CSV that carries the data (authoritative)
and an SVG rendered from the parsed CSV, so the two can never disagree.
The SVG markup is hand-emitted; byte-identical output for identical input
is part of the contract.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .config import AccelConfig
from .errors import AnalysisError
from .workload import ConvLayer

# Ops are counted as 2 per MAC (multiply + add); with that convention the
# bandwidth roof evaluated at Ops/Byte = 8 equals the bus width in
# bits/cycle.
OPS_PER_MAC = 2


@dataclass(frozen=True)
class RooflinePoint:
    ops_per_byte: float
    ops_per_cycle: float
    label: str


def _layer_of(layer_or_stream):
    if isinstance(layer_or_stream, ConvLayer):
        return layer_or_stream
    return ConvLayer(**layer_or_stream.meta["layer"])


def roofline_point(report, layer_or_stream, cfg: AccelConfig) -> RooflinePoint:
    """Operational intensity and achieved throughput of one completed run."""
    layer = _layer_of(layer_or_stream)
    ops = OPS_PER_MAC * layer.mac_count()
    nbytes = report.dram_total_bytes
    cycles = report.total_cycles
    if nbytes <= 0:
        raise AnalysisError(f"degenerate run: {nbytes} DRAM bytes")
    if cycles <= 0:
        raise AnalysisError(f"degenerate run: {cycles} cycles")
    name = layer.name or layer.kind
    return RooflinePoint(ops_per_byte=ops / nbytes, ops_per_cycle=ops / cycles,
                         label=name)


def compute_roof(cfg: AccelConfig) -> float:
    return float(cfg.peak_ops_per_cycle)


def bandwidth_roof(cfg: AccelConfig, ops_per_byte: float) -> float:
    """Attainable ops/cycle at the given intensity under the bus limit; the
    slope is bus bytes/cycle, so the value at Ops/Byte = 8 is the bus width
    in bits/cycle."""
    return cfg.axi_data_bytes * ops_per_byte


def attainable(cfg: AccelConfig, ops_per_byte: float) -> float:
    return min(compute_roof(cfg), bandwidth_roof(cfg, ops_per_byte))


def roofline_csv(points, cfgs) -> str:
    """Rows: kind=point (label, x, y); kind=compute_roof (y only);
    kind=bandwidth_roof (slope in bytes/cycle)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "label", "ops_per_byte", "ops_per_cycle",
                "bytes_per_cycle"])
    for p in points:
        w.writerow(["point", p.label, repr(p.ops_per_byte),
                    repr(p.ops_per_cycle), ""])
    for peak in sorted({cfg.peak_ops_per_cycle for cfg in cfgs}):
        w.writerow(["compute_roof", f"{peak} ops/cycle", "", repr(float(peak)), ""])
    for bpc in sorted({cfg.axi_data_bytes for cfg in cfgs}):
        w.writerow(["bandwidth_roof", f"{bpc * 8}-bit bus", "", "", repr(float(bpc))])
    return buf.getvalue()


def _parse_roofline_csv(text):
    points, peaks, slopes = [], [], []
    rows = list(csv.reader(io.StringIO(text)))
    for row in rows[1:]:
        kind, label = row[0], row[1]
        if kind == "point":
            points.append((label, float(row[2]), float(row[3])))
        elif kind == "compute_roof":
            peaks.append(float(row[3]))
        elif kind == "bandwidth_roof":
            slopes.append(float(row[4]))
    return points, peaks, slopes


_SVG_HEAD = ('<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
             'viewBox="0 0 %d %d" font-family="monospace" font-size="11">\n')


def roofline_chart(points, cfgs) -> tuple:
    """(svg, csv) log-log roofline: horizontal compute roofs, diagonal
    bandwidth roofs, labeled points.  The SVG is rendered from the CSV."""
    if not points:
        raise AnalysisError("roofline chart needs at least one point")
    text = roofline_csv(points, cfgs)
    pts, peaks, slopes = _parse_roofline_csv(text)

    xs = [x for _, x, _ in pts]
    ys = [y for _, _, y in pts] + peaks
    x_lo = min(xs + [p / s for p in peaks for s in slopes]) / 4
    x_hi = max(xs + [8.0]) * 4
    y_lo = min(ys) / 4
    y_hi = max(ys) * 4

    W, H, ML, MB = 640, 480, 70, 50

    def sx(x):
        return ML + (math.log10(x) - math.log10(x_lo)) / \
            (math.log10(x_hi) - math.log10(x_lo)) * (W - ML - 20)

    def sy(y):
        return (H - MB) - (math.log10(y) - math.log10(y_lo)) / \
            (math.log10(y_hi) - math.log10(y_lo)) * (H - MB - 20)

    out = [_SVG_HEAD % (W, H, W, H)]
    out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>\n')
    # axes
    out.append(f'<line x1="{ML}" y1="20" x2="{ML}" y2="{H - MB}" stroke="black"/>\n')
    out.append(f'<line x1="{ML}" y1="{H - MB}" x2="{W - 20}" y2="{H - MB}" stroke="black"/>\n')
    out.append(f'<text x="{W // 2}" y="{H - 12}">Ops/Byte</text>\n')
    out.append(f'<text x="12" y="16">Ops/Cycle</text>\n')
    # decade ticks
    d = math.floor(math.log10(x_lo))
    while 10 ** d <= x_hi:
        v = 10 ** d
        if v >= x_lo:
            out.append(f'<line x1="{sx(v):.1f}" y1="{H - MB}" x2="{sx(v):.1f}" '
                       f'y2="{H - MB + 5}" stroke="black"/>\n')
            out.append(f'<text x="{sx(v):.1f}" y="{H - MB + 18}" '
                       f'text-anchor="middle">1e{d}</text>\n')
        d += 1
    d = math.floor(math.log10(y_lo))
    while 10 ** d <= y_hi:
        v = 10 ** d
        if v >= y_lo:
            out.append(f'<line x1="{ML - 5}" y1="{sy(v):.1f}" x2="{ML}" '
                       f'y2="{sy(v):.1f}" stroke="black"/>\n')
            out.append(f'<text x="{ML - 8}" y="{sy(v):.1f}" '
                       f'text-anchor="end">1e{d}</text>\n')
        d += 1
    # compute roofs: horizontal dashed lines
    for peak in peaks:
        y = sy(peak)
        out.append(f'<line x1="{ML}" y1="{y:.1f}" x2="{W - 20}" y2="{y:.1f}" '
                   f'stroke="black" stroke-dasharray="6,3"/>\n')
        out.append(f'<text x="{W - 24}" y="{y - 4:.1f}" text-anchor="end">'
                   f'{peak:g} ops/cycle</text>\n')
    # bandwidth roofs: diagonals y = slope * x
    for slope in slopes:
        x0, x1v = x_lo, x_hi
        y0, y1v = slope * x0, slope * x1v
        out.append(f'<line x1="{sx(x0):.1f}" y1="{sy(y0):.1f}" '
                   f'x2="{sx(x1v):.1f}" y2="{sy(y1v):.1f}" '
                   f'stroke="gray" stroke-dasharray="6,3"/>\n')
        out.append(f'<text x="{sx(x_lo * 2):.1f}" y="{sy(slope * x_lo * 2) - 6:.1f}" '
                   f'fill="gray">{slope * 8:g} bits/cycle</text>\n')
    for label, x, y in pts:
        out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="4" fill="crimson">'
                   f'<title>{label}: {x:.4g} ops/B, {y:.4g} ops/cy</title></circle>\n')
        out.append(f'<text x="{sx(x) + 6:.1f}" y="{sy(y) - 6:.1f}">{label}</text>\n')
    out.append("</svg>\n")
    return "".join(out), text


_TIMELINE_COLORS = {
    "gemm": "#d62728",       # red, per the published timeline convention
    "alu": "#2ca02c",        # green
    "load_inp": "#1f77b4",
    "load_wgt": "#17becf",
    "load_acc": "#9467bd",
    "load_uop": "#8c564b",
    "store": "#ff7f0e",
    "finish": "#7f7f7f",
    "idle": "#eeeeee",
    "blocked": "#bbbbbb",
}


def utilization_timeline(report) -> tuple:
    """(svg, csv) three-bar activity timeline from a SimReport."""
    text = report.intervals_csv()
    rows = list(csv.reader(io.StringIO(text)))[1:]
    total = max((int(r[2]) for r in rows), default=1)
    W, H = 800, 190
    bar_h, gap, left = 40, 14, 80
    mods = ("load", "compute", "store")
    out = [_SVG_HEAD % (W, H, W, H)]
    out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>\n')
    out.append(f'<text x="{left}" y="14">cycles 0..{total}</text>\n')

    def x_of(c):
        return left + c / total * (W - left - 20)

    for i, m in enumerate(mods):
        y = 24 + i * (bar_h + gap)
        out.append(f'<text x="8" y="{y + bar_h * 0.62:.0f}">{m}</text>\n')
        for mod, t0, t1, label in ((r[0], int(r[1]), int(r[2]), r[3]) for r in rows):
            if mod != m or t1 <= t0:
                continue
            color = _TIMELINE_COLORS.get(label, "#cccccc")
            out.append(f'<rect x="{x_of(t0):.2f}" y="{y}" '
                       f'width="{max(x_of(t1) - x_of(t0), 0.2):.2f}" height="{bar_h}" '
                       f'fill="{color}"><title>{m} {label} [{t0},{t1})</title></rect>\n')
    out.append("</svg>\n")
    return "".join(out), text


def area_proxy(cfg: AccelConfig, alpha: float = 1.0, beta: float = 0.05) -> float:
    """Scaled-area stand-in: alpha * MAC count + beta * scratchpad bits.

    An explicit proxy; the published areas come from physical layout runs
    this model does not attempt.
    """
    if alpha < 0 or beta < 0:
        raise AnalysisError("area_proxy coefficients must be >= 0")
    macs = cfg.batch * cfg.block_in * cfg.block_out
    spad_bits = 8 * (cfg.inp_spad_bytes + cfg.wgt_spad_bytes +
                     cfg.acc_spad_bytes + cfg.uop_spad_bytes)
    return alpha * macs + beta * spad_bits


def total_spad_bits(cfg: AccelConfig) -> int:
    return 8 * (cfg.inp_spad_bytes + cfg.wgt_spad_bytes +
                cfg.acc_spad_bytes + cfg.uop_spad_bytes)


def design_space_table(entries) -> str:
    """CSV over (cfg, report, area) runs, sorted by area.

    `report` may be a SimReport or a plain total cycle count.
    """
    if not entries:
        raise AnalysisError("design-space table needs at least one entry")
    rows = []
    for cfg, report, area in entries:
        cycles = report if isinstance(report, int) else report.total_cycles
        rows.append((f"{cfg.batch}x{cfg.block_in}x{cfg.block_out}",
                     cfg.axi_data_bits, total_spad_bits(cfg), area, cycles))
    rows.sort(key=lambda r: (r[3], r[0], r[1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mac_shape", "bus_bits", "spad_bits", "area_proxy",
                "total_cycles"])
    for r in rows:
        w.writerow([r[0], r[1], r[2], repr(float(r[3])), r[4]])
    return buf.getvalue()
