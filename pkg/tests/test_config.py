import json

import pytest

from acclab import (AccelConfig, ConfigError, MemKind,
                    derive_instruction_layout, load_config, load_config_file,
                    serialize_config)


def test_defaults_describe_the_stock_machine():
    cfg = AccelConfig()
    assert (cfg.batch, cfg.block_in, cfg.block_out) == (1, 16, 16)
    assert cfg.inp_spad_bytes == 32 * 1024
    assert cfg.wgt_spad_bytes == 256 * 1024
    assert cfg.acc_spad_bytes == 128 * 1024
    assert cfg.uop_spad_bytes == 32 * 1024
    assert cfg.axi_data_bits == 64
    assert cfg.axi_data_bytes == 8
    assert cfg.peak_ops_per_cycle == 2 * 16 * 16


def test_tensor_and_tile_geometry():
    cfg = AccelConfig()
    assert cfg.tensor_bits(MemKind.INP) == 16 * 8
    assert cfg.tensor_bits(MemKind.WGT) == 16 * 16 * 8
    assert cfg.tensor_bits(MemKind.ACC) == 16 * 32
    assert cfg.tensor_bits(MemKind.OUT) == 16 * 8
    assert cfg.tensor_bits(MemKind.UOP) == 32
    assert cfg.tile_bytes(MemKind.WGT) == 256
    assert cfg.spad_entries(MemKind.INP) == 32768 // 16
    assert cfg.spad_entries(MemKind.WGT) == 262144 // 256
    assert cfg.spad_entries(MemKind.ACC) == 131072 // 64
    assert cfg.spad_entries(MemKind.UOP) == 32768 // 4


def test_pulse_arithmetic():
    cfg = AccelConfig()
    # 2048-bit weight tensor over a 64-bit bus
    assert cfg.pulses_per_tile(MemKind.WGT) == 32
    wide = AccelConfig(axi_data_bits=128)
    assert wide.pulses_per_tile(MemKind.WGT) == 16
    assert wide.tiles_per_pulse(MemKind.UOP) == 4


@pytest.mark.parametrize("field,value", [
    ("batch", 0), ("block_in", 3), ("axi_data_bits", 96),
    ("inp_elem_bits", 12), ("gemm_ii", 0), ("vme_max_inflight", 0),
])
def test_validation_rejects_bad_fields(field, value):
    with pytest.raises(ConfigError):
        AccelConfig(**{field: value})


def test_spad_must_hold_one_tile():
    with pytest.raises(ConfigError):
        AccelConfig(wgt_spad_bytes=128)  # one WGT tile is 256 bytes


def test_serialization_round_trip(tmp_path):
    cfg = AccelConfig(block_in=32, block_out=32, axi_data_bits=128,
                      dram_latency_cycles=42)
    text = serialize_config(cfg)
    assert load_config(json.loads(text)) == cfg
    p = tmp_path / "c.json"
    p.write_text(text)
    assert load_config_file(p) == cfg


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError):
        load_config({"block_im": 16})


# ----------------------------------------------------------------- layout


def test_default_layout_fits_128_bits():
    lay = derive_instruction_layout(AccelConfig())
    assert lay.total_bits("LOAD") == 120
    assert lay.total_bits("STORE") == 120
    assert lay.total_bits("GEMM") == 127
    assert lay.total_bits("ALU") == 127
    assert lay.total_bits("FINISH") == 7
    assert lay.width("LOAD", "sram_base") == 13
    assert lay.width("LOAD", "dram_base") == 32
    assert lay.width("LOAD", "y_size") == 16
    assert lay.width("LOAD", "y_pad_top") == 4
    assert lay.width("GEMM", "uop_begin") == 13
    assert lay.width("GEMM", "uop_end") == 14
    assert lay.width("GEMM", "loop0") == 14
    assert lay.width("GEMM", "acc_factor0") == 11
    assert lay.width("GEMM", "wgt_factor0") == 10
    assert lay.width("ALU", "imm") == 16
    assert (lay.uop_width("acc_idx"), lay.uop_width("inp_idx"),
            lay.uop_width("wgt_idx")) == (11, 11, 10)


def test_wide_config_layout_shrinks_naturally():
    lay = derive_instruction_layout(AccelConfig(block_in=32, block_out=32,
                                                axi_data_bits=128))
    # Bigger tiles mean fewer scratchpad entries, so index fields narrow.
    assert lay.total_bits("GEMM") == 119
    assert (lay.uop_width("acc_idx"), lay.uop_width("inp_idx"),
            lay.uop_width("wgt_idx")) == (10, 10, 8)


def test_big_acc_spad_forces_field_shrink_to_exactly_128():
    # 16x the accumulator scratchpad needs wider uop index fields than a
    # 32-bit uop allows; with 64-bit uops the GEMM/ALU records shrink their
    # loop and immediate fields until they sit at exactly the record width.
    cfg = AccelConfig(acc_spad_bytes=131072 * 16, uop_bits=64,
                      uop_spad_bytes=32768 * 8)
    lay = derive_instruction_layout(cfg)
    assert lay.total_bits("GEMM") == 128
    assert lay.total_bits("ALU") == 128
    assert lay.uop_width("acc_idx") == 15


def test_uop_overflow_reported():
    with pytest.raises(ConfigError, match="uop overflow"):
        derive_instruction_layout(AccelConfig(acc_spad_bytes=131072 * 16))


def test_instruction_overflow_reported():
    # A 128-bit DRAM address cannot fit a LOAD/STORE record no matter how
    # far the extent and stride fields shrink.
    with pytest.raises(ConfigError, match="instruction overflow"):
        derive_instruction_layout(AccelConfig(dram_addr_bits=128))


def test_describe_lists_every_opcode():
    text = derive_instruction_layout(AccelConfig()).describe()
    for word in ("LOAD/STORE", "GEMM", "ALU", "FINISH", "UOP"):
        assert word in text
