import xml.dom.minidom

import numpy as np
import pytest

from acclab import (AccelConfig, AnalysisError, ConvLayer, RooflinePoint,
                    TilingParams, area_proxy, attainable, bandwidth_roof,
                    compute_roof, design_space_table, gen_conv_stream,
                    roofline_chart, roofline_csv, roofline_point, run,
                    search, utilization_timeline)

CFG = AccelConfig()


def sim_layer(layer, cfg=CFG):
    st = gen_conv_stream(layer, cfg, search(layer, cfg).params)
    return st, run(st, cfg, trace=False)


def test_roofline_point_arithmetic():
    layer = ConvLayer("conv", 1, 8, 8, 3, 3, 16, 16, ph=1, pw=1, name="c3")
    st, rep = sim_layer(layer)
    p = roofline_point(rep, st, CFG)
    ops = 2 * layer.mac_count()
    assert p.ops_per_byte == pytest.approx(ops / rep.dram_total_bytes)
    assert p.ops_per_cycle == pytest.approx(ops / rep.total_cycles)
    assert p.label == "c3"
    # A ConvLayer works in place of the stream.
    assert roofline_point(rep, layer, CFG) == p


def test_roofline_point_rejects_degenerate_runs():
    layer = ConvLayer("conv", 1, 8, 8, 1, 1, 16, 16)
    _, rep = sim_layer(layer)
    rep.dram_total_bytes = 0
    with pytest.raises(AnalysisError, match="DRAM bytes"):
        roofline_point(rep, layer, CFG)


def test_roofs_bound_every_simulated_point():
    layers = [
        ConvLayer("conv", 1, 8, 8, 3, 3, 16, 16, ph=1, pw=1),
        ConvLayer("conv", 1, 8, 8, 1, 1, 32, 16),
        ConvLayer("conv", 1, 16, 16, 3, 3, 16, 32, ph=1, pw=1),
    ]
    for layer in layers:
        st, rep = sim_layer(layer)
        p = roofline_point(rep, st, CFG)
        assert p.ops_per_cycle <= attainable(CFG, p.ops_per_byte) * (1 + 1e-9)


def test_bandwidth_roof_slope_is_bus_bytes_per_cycle():
    # At 8 Ops/Byte the roof reads exactly the bus width in bits/cycle.
    for bits in (64, 128, 256, 512):
        cfg = AccelConfig(axi_data_bits=bits)
        assert bandwidth_roof(cfg, 8.0) == float(bits)
    assert compute_roof(CFG) == 512.0
    assert attainable(CFG, 1e9) == 512.0
    assert attainable(CFG, 0.5) == 4.0


def test_roofline_csv_rows():
    pts = [RooflinePoint(4.0, 100.0, "a"), RooflinePoint(0.5, 3.0, "b")]
    cfgs = [CFG, AccelConfig(axi_data_bits=256)]
    lines = roofline_csv(pts, cfgs).splitlines()
    assert lines[0] == "kind,label,ops_per_byte,ops_per_cycle,bytes_per_cycle"
    kinds = [ln.split(",")[0] for ln in lines[1:]]
    assert kinds == ["point", "point", "compute_roof",
                     "bandwidth_roof", "bandwidth_roof"]
    # One compute roof (both configs share the MAC shape), two bus slopes.
    assert "8.0" in lines[-2] and "32.0" in lines[-1]


def test_roofline_chart_is_valid_svg_with_all_points():
    layer = ConvLayer("conv", 1, 8, 8, 3, 3, 16, 16, ph=1, pw=1, name="cc")
    st, rep = sim_layer(layer)
    p = roofline_point(rep, st, CFG)
    svg, csv_text = roofline_chart([p], [CFG])
    doc = xml.dom.minidom.parseString(svg)
    assert doc.documentElement.tagName == "svg"
    assert "cc" in svg
    assert csv_text == roofline_csv([p], [CFG])
    with pytest.raises(AnalysisError, match="at least one point"):
        roofline_chart([], [CFG])


def test_utilization_timeline_has_three_bars():
    layer = ConvLayer("conv", 1, 8, 8, 3, 3, 16, 16, ph=1, pw=1)
    st = gen_conv_stream(layer, CFG, TilingParams(1, 1, 1, 1, 1))
    rep = run(st)
    svg, csv_text = utilization_timeline(rep)
    xml.dom.minidom.parseString(svg)
    for mod in ("load", "compute", "store"):
        assert mod in svg
    # Busy interval colors come from the fixed palette.
    assert "#d62728" in svg  # gemm
    assert "#1f77b4" in svg  # input loads
    assert csv_text == rep.intervals_csv()


def test_area_proxy_defaults_and_overrides():
    # alpha * MACs + beta * spad bits
    macs = 1 * 16 * 16
    bits = 8 * (32768 + 262144 + 131072 + 32768)
    assert area_proxy(CFG) == pytest.approx(macs + 0.05 * bits)
    assert area_proxy(CFG, alpha=2.0, beta=0.0) == pytest.approx(2 * macs)
    with pytest.raises(AnalysisError):
        area_proxy(CFG, alpha=-1.0)


def test_design_space_table_sorted_by_area():
    rows = []
    for bits, bus in ((16, 64), (32, 128)):
        cfg = AccelConfig(block_in=bits, block_out=bits, axi_data_bits=bus)
        layer = ConvLayer("conv", 1, 8, 8, 1, 1, bits, bits)
        st = gen_conv_stream(layer, cfg, TilingParams(1, 1, 1, 1, 1))
        rep = run(st, cfg, trace=False)
        rows.append((cfg, rep, area_proxy(cfg)))
    table = design_space_table(rows)
    lines = table.splitlines()
    assert lines[0] == "mac_shape,bus_bits,spad_bits,area_proxy,total_cycles"
    assert len(lines) == 3
    areas = [float(ln.split(",")[3]) for ln in lines[1:]]
    assert areas == sorted(areas)
    assert lines[1].startswith("1x16x16,64,")
    with pytest.raises(AnalysisError):
        design_space_table([])


def test_design_space_accepts_plain_cycle_counts():
    table = design_space_table([(CFG, 12345, area_proxy(CFG))])
    assert table.splitlines()[1].endswith(",12345")
