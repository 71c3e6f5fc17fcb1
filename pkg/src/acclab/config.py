"""Machine configuration and instruction-word layout derivation.

A single AccelConfig value carries every machine parameter: GEMM core shape
(batch x block_in x block_out), element widths, scratchpad capacities, memory
interface width and latency, and the pipeline knobs of the compute units.
Downstream modules (tiling search, codegen, engine, reports) only ever read
from it, so configs are frozen and hashable.

The instruction word is a fixed 128 bits.  derive_instruction_layout() sizes
every scratchpad-index field to address the whole configured scratchpad and
then, if an opcode overflows the word, narrows loop-extent fields first and
stride/immediate fields second (8-bit floor, widest field first, ties by
field order).  Index, address and pad fields never shrink; if the word still
overflows, configuration fails with a per-field accounting.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

INSTRUCTION_BITS = 128

# Fields an overflowing opcode may narrow, in priority order.  Floor width 8.
_SHRINK_CLASS_EXTENT = ("y_size", "x_size", "loop0", "loop1")
_SHRINK_CLASS_STRIDE = ("x_stride", "imm")
_SHRINK_FLOOR = 8


class MemKind(enum.Enum):
    """Scratchpad / DRAM tensor kinds moved by LOAD and STORE."""

    INP = "INP"
    WGT = "WGT"
    ACC = "ACC"
    UOP = "UOP"
    OUT = "OUT"
    INS = "INS"


def _is_pow2(n: int) -> bool:
    return isinstance(n, int) and n > 0 and (n & (n - 1)) == 0


def ceil_log2(n: int) -> int:
    assert n > 0
    return (n - 1).bit_length()


@dataclass(frozen=True)
class AccelConfig:
    # GEMM core shape: one tile op multiplies a (batch x block_in) input tile
    # with a (block_out x block_in) weight tile into a (batch x block_out)
    # accumulator tile.
    batch: int = 1
    block_in: int = 16
    block_out: int = 16

    # Element widths in bits.
    inp_elem_bits: int = 8
    wgt_elem_bits: int = 8
    out_elem_bits: int = 8
    acc_elem_bits: int = 32
    uop_bits: int = 32
    ins_bits: int = 128

    # Scratchpad capacities in bytes.
    inp_spad_bytes: int = 32768
    wgt_spad_bytes: int = 262144
    acc_spad_bytes: int = 131072
    uop_spad_bytes: int = 32768

    # Memory interface.
    axi_data_bits: int = 64
    dram_latency_cycles: int = 100
    vme_max_inflight: int = 8

    # Compute pipeline knobs.  gemm_ii=1 is the pipelined core, 4 the legacy
    # one; ALU initiation interval is 2 with two register operands (one acc
    # read port) and 1 with an immediate.
    gemm_ii: int = 1
    alu_ii_imm: int = 1
    alu_ii_two: int = 2
    gemm_pipeline_depth: int = 4
    alu_pipeline_depth: int = 4

    # Queue depths (the published design never states them).
    token_q_depth: int = 256
    cmd_q_depth: int = 256

    # Nominal instruction field widths before any shrinking.
    loop_extent_bits: int = 14
    mem_extent_bits: int = 16
    mem_stride_bits: int = 16
    pad_extent_bits: int = 4
    imm_bits: int = 16
    dram_addr_bits: int = 32

    def __post_init__(self):
        for name in ("batch", "block_in", "block_out", "inp_spad_bytes",
                     "wgt_spad_bytes", "acc_spad_bytes", "uop_spad_bytes"):
            if not _is_pow2(getattr(self, name)):
                raise ConfigError(f"{name}: must be a power of 2, got {getattr(self, name)!r}")
        if self.axi_data_bits not in (64, 128, 256, 512):
            raise ConfigError(f"axi_data_bits: must be one of 64/128/256/512, got {self.axi_data_bits!r}")
        if self.ins_bits != INSTRUCTION_BITS:
            raise ConfigError(f"ins_bits: fixed at {INSTRUCTION_BITS}, got {self.ins_bits!r}")
        if not _is_pow2(self.uop_bits) or self.uop_bits < 8:
            raise ConfigError(f"uop_bits: must be a power of 2 >= 8, got {self.uop_bits!r}")
        for name in ("inp_elem_bits", "wgt_elem_bits", "out_elem_bits", "acc_elem_bits"):
            if not _is_pow2(getattr(self, name)):
                raise ConfigError(f"{name}: must be a power of 2, got {getattr(self, name)!r}")
        for name in ("dram_latency_cycles",):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be >= 0")
        for name in ("vme_max_inflight", "token_q_depth", "cmd_q_depth",
                     "alu_ii_imm", "alu_ii_two", "gemm_pipeline_depth", "alu_pipeline_depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        if self.gemm_ii not in (1, 4):
            raise ConfigError(f"gemm_ii: must be 1 (pipelined) or 4 (legacy), got {self.gemm_ii!r}")
        # Bus/tensor width ratios must be powers of 2 in whichever direction
        # is >= 1, so a transfer is a whole number of pulses or a whole
        # number of tensors per pulse.
        for kind in (MemKind.INP, MemKind.WGT, MemKind.ACC, MemKind.OUT,
                     MemKind.UOP, MemKind.INS):
            bits = self.tensor_bits(kind)
            hi, lo = max(bits, self.axi_data_bits), min(bits, self.axi_data_bits)
            if hi % lo != 0 or not _is_pow2(hi // lo):
                raise ConfigError(
                    f"{kind.value} tensor is {bits} bits vs axi_data_bits={self.axi_data_bits}: "
                    f"ratio must be a power of 2")
        # Each scratchpad must hold more than one tensor of its kind.
        for kind, cap in ((MemKind.INP, self.inp_spad_bytes),
                          (MemKind.WGT, self.wgt_spad_bytes),
                          (MemKind.ACC, self.acc_spad_bytes),
                          (MemKind.UOP, self.uop_spad_bytes)):
            if cap <= self.tile_bytes(kind):
                raise ConfigError(
                    f"{kind.value} scratchpad ({cap} B) must exceed one {kind.value} "
                    f"tensor tile ({self.tile_bytes(kind)} B)")

    def tensor_bits(self, kind: MemKind) -> int:
        """Bit width of one tensor tile of the given kind."""
        if kind == MemKind.INP:
            return self.batch * self.block_in * self.inp_elem_bits
        if kind == MemKind.WGT:
            return self.block_out * self.block_in * self.wgt_elem_bits
        if kind == MemKind.ACC:
            return self.batch * self.block_out * self.acc_elem_bits
        if kind == MemKind.OUT:
            return self.batch * self.block_out * self.out_elem_bits
        if kind == MemKind.UOP:
            return self.uop_bits
        if kind == MemKind.INS:
            return self.ins_bits
        raise ValueError(kind)

    def tile_bytes(self, kind: MemKind) -> int:
        return self.tensor_bits(kind) // 8

    def spad_entries(self, kind: MemKind) -> int:
        """Number of tensor tiles the scratchpad of this kind can hold."""
        cap = {MemKind.INP: self.inp_spad_bytes, MemKind.WGT: self.wgt_spad_bytes,
               MemKind.ACC: self.acc_spad_bytes, MemKind.UOP: self.uop_spad_bytes}[kind]
        return cap // self.tile_bytes(kind)

    @property
    def peak_ops_per_cycle(self) -> int:
        # One tile op per cycle at II=1; each MAC counts as 2 ops.
        return 2 * self.batch * self.block_in * self.block_out

    @property
    def axi_data_bytes(self) -> int:
        return self.axi_data_bits // 8

    def pulses_per_tile(self, kind: MemKind) -> int:
        """Bus pulses consumed by one tile (1 when several tiles share a pulse)."""
        return max(1, self.tensor_bits(kind) // self.axi_data_bits)

    def tiles_per_pulse(self, kind: MemKind) -> int:
        """Tiles delivered by one bus pulse (1 when a tile spans pulses)."""
        return max(1, self.axi_data_bits // self.tensor_bits(kind))


def tensor_bits(cfg: AccelConfig, kind: MemKind) -> int:
    return cfg.tensor_bits(kind)


# --------------------------------------------------------------------------
# JSON round trip


def load_config(text_or_dict) -> AccelConfig:
    """Build an AccelConfig from a JSON object string (or parsed dict).

    Unknown keys and non-integer values are rejected so a typo'd field name
    cannot silently fall back to a default.
    """
    if isinstance(text_or_dict, (str, bytes)):
        try:
            raw = json.loads(text_or_dict)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
    else:
        raw = text_or_dict
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")
    known = {f.name for f in fields(AccelConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key, val in raw.items():
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{key}: expected an integer, got {val!r}")
    return AccelConfig(**raw)


def serialize_config(cfg: AccelConfig) -> str:
    """Canonical JSON (field declaration order, one key per line)."""
    d = asdict(cfg)
    lines = ",\n".join(f'  "{k}": {v}' for k, v in d.items())
    return "{\n" + lines + "\n}\n"


def load_config_file(path) -> AccelConfig:
    with open(path, "r", encoding="utf-8") as f:
        return load_config(f.read())


# --------------------------------------------------------------------------
# Instruction layout


@dataclass(frozen=True)
class InstructionLayout:
    """Per-opcode ordered (field, bit width) tables plus the uop layout.

    `mem` is shared by LOAD and STORE.  Widths always sum to <= 128 per
    opcode; scratchpad-index fields cover the whole configured scratchpad.
    """

    mem: tuple
    gemm: tuple
    alu: tuple
    finish: tuple
    uop: tuple  # ((field, width), ...) summing to <= uop_bits

    def table(self, opcode: str) -> tuple:
        return {"LOAD": self.mem, "STORE": self.mem, "GEMM": self.gemm,
                "ALU": self.alu, "FINISH": self.finish}[opcode]

    def width(self, opcode: str, field: str) -> int:
        for name, w in self.table(opcode):
            if name == field:
                return w
        raise KeyError(f"{opcode} has no field {field!r}")

    def total_bits(self, opcode: str) -> int:
        return sum(w for _, w in self.table(opcode))

    def uop_width(self, field: str) -> int:
        for name, w in self.uop:
            if name == field:
                return w
        raise KeyError(f"uop has no field {field!r}")

    def describe(self) -> str:
        out = []
        for op in ("LOAD/STORE", "GEMM", "ALU", "FINISH"):
            tbl = self.mem if op == "LOAD/STORE" else self.table(op)
            body = " ".join(f"{n}:{w}" for n, w in tbl)
            out.append(f"{op} ({sum(w for _, w in tbl)} bits): {body}")
        out.append("UOP (%d bits): %s" % (sum(w for _, w in self.uop),
                                          " ".join(f"{n}:{w}" for n, w in self.uop)))
        return "\n".join(out)


def _shrink_to_fit(opcode: str, fields_: list) -> tuple:
    """Narrow shrinkable fields until the opcode fits the instruction word."""
    widths = dict(fields_)
    order = [n for n, _ in fields_]

    def total():
        return sum(widths.values())

    for cls in (_SHRINK_CLASS_EXTENT, _SHRINK_CLASS_STRIDE):
        while total() > INSTRUCTION_BITS:
            cands = [n for n in order if n in cls and widths[n] > _SHRINK_FLOOR]
            if not cands:
                break
            # Widest first; ties fall to the earlier field.
            pick = max(cands, key=lambda n: widths[n])
            widths[pick] -= 1
    if total() > INSTRUCTION_BITS:
        acct = ", ".join(f"{n}={widths[n]}" for n in order)
        raise ConfigError(
            f"instruction overflow: {opcode} needs {total()} bits > {INSTRUCTION_BITS} "
            f"({acct})")
    return tuple((n, widths[n]) for n in order)


def derive_instruction_layout(cfg: AccelConfig) -> InstructionLayout:
    """Size every instruction field for this config.

    Deterministic: equal configs give identical layouts.  Raises ConfigError
    ("instruction overflow") when index fields alone exceed the word, and
    ("uop overflow") when the three uop index fields exceed uop_bits.
    """
    inp_bits = ceil_log2(cfg.spad_entries(MemKind.INP))
    wgt_bits = ceil_log2(cfg.spad_entries(MemKind.WGT))
    acc_bits = ceil_log2(cfg.spad_entries(MemKind.ACC))
    uop_entries = cfg.spad_entries(MemKind.UOP)
    uop_begin_bits = ceil_log2(uop_entries)
    uop_end_bits = uop_begin_bits + 1  # end index may equal the entry count

    common = [("opcode", 3), ("pop_prev", 1), ("pop_next", 1),
              ("push_prev", 1), ("push_next", 1)]

    sram_bits = max(inp_bits, wgt_bits, acc_bits, uop_begin_bits)
    mem = common + [
        ("mem_kind", 3), ("pad_kind", 1),
        ("sram_base", sram_bits), ("dram_base", cfg.dram_addr_bits),
        ("y_size", cfg.mem_extent_bits), ("x_size", cfg.mem_extent_bits),
        ("x_stride", cfg.mem_stride_bits),
        ("y_pad_top", cfg.pad_extent_bits), ("y_pad_bottom", cfg.pad_extent_bits),
        ("x_pad_left", cfg.pad_extent_bits), ("x_pad_right", cfg.pad_extent_bits),
    ]
    gemm = common + [
        ("reset", 1),
        ("uop_begin", uop_begin_bits), ("uop_end", uop_end_bits),
        ("loop0", cfg.loop_extent_bits), ("loop1", cfg.loop_extent_bits),
        ("acc_factor0", acc_bits), ("acc_factor1", acc_bits),
        ("inp_factor0", inp_bits), ("inp_factor1", inp_bits),
        ("wgt_factor0", wgt_bits), ("wgt_factor1", wgt_bits),
    ]
    alu = common + [
        ("reset", 1),
        ("uop_begin", uop_begin_bits), ("uop_end", uop_end_bits),
        ("loop0", cfg.loop_extent_bits), ("loop1", cfg.loop_extent_bits),
        ("dst_factor0", acc_bits), ("dst_factor1", acc_bits),
        ("src_factor0", acc_bits), ("src_factor1", acc_bits),
        ("alu_op", 3), ("use_imm", 1), ("imm", cfg.imm_bits),
    ]
    finish = tuple(common)

    uop_fields = (("acc_idx", acc_bits), ("inp_idx", inp_bits), ("wgt_idx", wgt_bits))
    uop_used = sum(w for _, w in uop_fields)
    if uop_used > cfg.uop_bits:
        acct = ", ".join(f"{n}={w}" for n, w in uop_fields)
        raise ConfigError(
            f"uop overflow: index fields need {uop_used} bits > uop_bits={cfg.uop_bits} "
            f"({acct}); raise uop_bits")

    return InstructionLayout(
        mem=_shrink_to_fit("LOAD/STORE", mem),
        gemm=_shrink_to_fit("GEMM", gemm),
        alu=_shrink_to_fit("ALU", alu),
        finish=finish,
        uop=uop_fields,
    )
