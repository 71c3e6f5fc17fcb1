import pytest

from acclab import (ConvLayer, WorkloadError, load_workload,
                    load_workload_file, pad_channels, serialize_workload)


def test_output_dims_floor_rule():
    l = ConvLayer("conv", b=1, h=14, w=14, kh=3, kw=3, fi=8, fo=8, ph=1, pw=1)
    assert l.output_dims() == (14, 14)
    strided = ConvLayer("conv", b=1, h=7, w=7, kh=3, kw=3, fi=8, fo=8,
                        ph=0, pw=0, sh=2, sw=2)
    assert strided.output_dims() == (3, 3)


def test_mac_count_conv_vs_pool():
    conv = ConvLayer("conv", 1, 8, 8, 3, 3, 16, 32, ph=1, pw=1)
    assert conv.mac_count() == 1 * 8 * 8 * 32 * 3 * 3 * 16
    pool = ConvLayer("maxpool", 1, 8, 8, 2, 2, 16, 16, sh=2, sw=2)
    assert pool.mac_count() == 1 * 4 * 4 * 16 * 2 * 2


@pytest.mark.parametrize("kwargs,needle", [
    (dict(kind="blur", b=1, h=4, w=4, kh=1, kw=1, fi=4, fo=4), "kind"),
    (dict(kind="conv", b=0, h=4, w=4, kh=1, kw=1, fi=4, fo=4), ">= 1"),
    (dict(kind="conv", b=1, h=4, w=4, kh=1, kw=1, fi=4, fo=4, ph=-1), ">= 0"),
    (dict(kind="dense", b=1, h=2, w=1, kh=1, kw=1, fi=4, fo=4), "dense"),
    (dict(kind="maxpool", b=1, h=4, w=4, kh=2, kw=2, fi=4, fo=8), "fi == fo"),
    (dict(kind="conv", b=1, h=4, w=4, kh=9, kw=1, fi=4, fo=4), "kernel"),
])
def test_layer_validation(kwargs, needle):
    with pytest.raises(WorkloadError, match=needle):
        ConvLayer(**kwargs)


def test_pad_channels_rounds_up_to_blocks():
    l = ConvLayer("conv", 1, 8, 8, 3, 3, fi=3, fo=24)
    p = pad_channels(l, 16, 16)
    assert (p.fi, p.fo) == (16, 32)
    # Already aligned layers come back unchanged (same object).
    assert pad_channels(p, 16, 16) is p


def test_pad_channels_keeps_pool_symmetric():
    l = ConvLayer("maxpool", 1, 8, 8, 2, 2, fi=20, fo=20, sh=2, sw=2)
    p = pad_channels(l, 16, 32)
    assert p.fi == p.fo == 32


def test_workload_round_trip(tmp_path):
    layers = [
        ConvLayer("conv", 1, 16, 16, 3, 3, 16, 32, ph=1, pw=1, name="c1"),
        ConvLayer("dense", 4, 1, 1, 1, 1, 64, 16),
    ]
    text = serialize_workload(layers)
    assert load_workload(text) == layers
    p = tmp_path / "w.json"
    p.write_text(text)
    assert load_workload_file(p) == layers


def test_workload_rejects_unknown_keys_with_layer_index():
    objs = [{"kind": "conv", "b": 1, "h": 4, "w": 4, "kh": 1, "kw": 1,
             "fi": 4, "fo": 4, "ph": 0, "pw": 0, "sh": 1, "sw": 1,
             "stride": 2}]
    with pytest.raises(WorkloadError, match="layer 0.*stride"):
        load_workload(objs)


def test_workload_must_be_an_array():
    with pytest.raises(WorkloadError, match="array"):
        load_workload("{}")
    with pytest.raises(WorkloadError, match="JSON"):
        load_workload("[nope]")
