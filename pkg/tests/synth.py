"""Hand-built instruction streams for engine tests.

These bypass the generator so timing experiments control exactly what the
machine executes: a configurable burst of GEMM or immediate-ALU work over
one loaded tile, or a single bare load.
"""

from dataclasses import asdict

from acclab.codegen import (AluOp, DramImage, Instruction, InstructionStream,
                            MemKind, Opcode, Uop, encode_uops, insert_tokens)
from acclab.config import derive_instruction_layout


def _round_up(n, a):
    return (n + a - 1) // a * a


def _segments(cfg, n_uop_bytes):
    it = cfg.tile_bytes(MemKind.INP)
    wt = cfg.tile_bytes(MemKind.WGT)
    ot = cfg.tile_bytes(MemKind.OUT)
    ut = cfg.tile_bytes(MemKind.UOP)
    segs, off = {}, 0
    segs["uop"] = (0, _round_up(max(n_uop_bytes, ut), ut))
    off = segs["uop"][1]
    off = _round_up(off, it)
    segs["inp"] = (off, it)
    off = _round_up(off + it, wt)
    segs["wgt"] = (off, wt)
    off = _round_up(off + wt, ot)
    segs["out"] = (off, ot)
    return segs, off + ot


def _meta(cfg, generator="synthetic"):
    return {"generator": generator, "cfg": asdict(cfg), "layer": None,
            "tiling": None, "options": None}


def compute_burst_stream(cfg, kind="gemm", n_ops=16, loop0=8, loop1=8,
                         n_uops=16) -> InstructionStream:
    """Load one tile of each kind, then hammer the compute unit.

    `kind` picks GEMM iterations (after one reset pass) or immediate-ALU
    passes; the stream ends with a store and FINISH so every token queue
    gets exercised.
    """
    layout = derive_instruction_layout(cfg)
    uops = [Uop(acc_idx=i) for i in range(n_uops)]
    blob = encode_uops(uops, layout, cfg.uop_bits)
    segs, size = _segments(cfg, len(blob))
    data = bytearray(size)
    data[:len(blob)] = blob
    dram = DramImage(size, segs, data)

    it = cfg.tile_bytes(MemKind.INP)
    wt = cfg.tile_bytes(MemKind.WGT)
    ot = cfg.tile_bytes(MemKind.OUT)
    ins = [
        Instruction(op=Opcode.LOAD, mem_kind=MemKind.UOP, sram_base=0,
                    dram_base=0, y_size=1, x_size=n_uops, x_stride=n_uops),
        Instruction(op=Opcode.LOAD, mem_kind=MemKind.INP, sram_base=0,
                    dram_base=segs["inp"][0] // it, y_size=1, x_size=1,
                    x_stride=1),
        Instruction(op=Opcode.LOAD, mem_kind=MemKind.WGT, sram_base=0,
                    dram_base=segs["wgt"][0] // wt, y_size=1, x_size=1,
                    x_stride=1),
    ]
    if kind == "gemm":
        ins.append(Instruction(op=Opcode.GEMM, reset=True, uop_begin=0,
                               uop_end=n_uops))
        for _ in range(n_ops):
            ins.append(Instruction(op=Opcode.GEMM, uop_begin=0, uop_end=n_uops,
                                   loop0=loop0, loop1=loop1))
    else:
        for _ in range(n_ops):
            ins.append(Instruction(op=Opcode.ALU, alu_op=AluOp.SHR,
                                   use_imm=True, imm=0, uop_begin=0,
                                   uop_end=n_uops, loop0=loop0, loop1=loop1))
    ins.append(Instruction(op=Opcode.STORE, mem_kind=MemKind.OUT, sram_base=0,
                           dram_base=segs["out"][0] // ot, y_size=1, x_size=1,
                           x_stride=1))
    ins.append(Instruction(op=Opcode.FINISH))
    insert_tokens(ins, uops)
    return InstructionStream(ins, uops, dram, layout, _meta(cfg))


def single_load_stream(cfg, kind=MemKind.WGT, tiles=1) -> InstructionStream:
    """One LOAD of `tiles` consecutive tiles, then FINISH."""
    layout = derive_instruction_layout(cfg)
    tb = cfg.tile_bytes(kind)
    size = tiles * tb
    dram = DramImage(size, {"data": (0, size)}, bytearray(size))
    ins = [Instruction(op=Opcode.LOAD, mem_kind=kind, sram_base=0, dram_base=0,
                       y_size=1, x_size=tiles, x_stride=tiles),
           Instruction(op=Opcode.FINISH)]
    insert_tokens(ins, [])
    return InstructionStream(ins, [], dram, layout, _meta(cfg))
