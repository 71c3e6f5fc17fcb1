"""Transaction-level simulator for the three-module pipeline.

The machine is stepped cycle by cycle: a fetch stage dispatches one
instruction per cycle into per-module command queues, the load / compute /
store modules execute their queue heads in order, and a shared memory
engine (VME) turns LOAD/STORE rows into DRAM bursts over a single data bus.
Dependency tokens are the only cross-module synchronization, exactly as in
the instruction set: an instruction first drains its pop bits, then
executes, then raises its push bits.

Timing model, kept deliberately small:
  * fetch: one instruction per cycle, stalls when the target queue is full;
  * GEMM: pipeline depth + ii * (loop0 * loop1 * uop count) cycles;
  * ALU:  pipeline depth + ii * iterations, ii depending on the operand mode;
  * LOAD/STORE: one row request issued per cycle; a read burst becomes
    ready dram_latency_cycles after issue and the number of concurrently
    outstanding reads is capped; the bus streams one burst at a time at one
    pulse (axi_data_bits) per cycle; writes are posted;
  * pad fill: one scratchpad entry per cycle on execution cycles where the
    module's own data is not streaming, so fully overlapped pads are free.

With seed 0 ready bursts are granted strictly in issue order; any other
seed permutes grants among the bursts that are ready in the same cycle,
which perturbs completion order without changing any data.

In functional mode the same schedule also moves real values: int8 x int8
products accumulate into 32-bit lanes with two's-complement wraparound, and
STORE truncates each lane to the output element width.
"""

from __future__ import annotations

import csv
import io
import json
import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import AccelConfig, MemKind
from .errors import ConfigError
from .codegen import (AluOp, InstructionStream, Opcode, PadKind, Uop,
                      decode_uops, instruction_regions,
                      MODULE_COMPUTE, MODULE_LOAD, MODULE_STORE, TOKEN_QUEUES)

_MODS = (MODULE_LOAD, MODULE_COMPUTE, MODULE_STORE)


def _wrap32(a):
    return ((a + (1 << 31)) & 0xFFFFFFFF) - (1 << 31)


class TokenQueue:
    def __init__(self, depth):
        self.depth = depth
        self.count = 0
        self.peak = 0

    def push(self):
        self.count += 1
        self.peak = max(self.peak, self.count)

    def pop(self):
        self.count -= 1

    @property
    def full(self):
        return self.count >= self.depth


class VmeRequest:
    __slots__ = ("seq", "module", "is_write", "kind", "nbytes", "pulses",
                 "ready_at", "granted", "row", "payload")

    def __init__(self, seq, module, is_write, kind, nbytes, pulses, ready_at,
                 row, payload=None):
        self.seq = seq
        self.module = module
        self.is_write = is_write
        self.kind = kind
        self.nbytes = nbytes
        self.pulses = pulses
        self.ready_at = ready_at
        self.granted = False
        self.row = row
        self.payload = payload


class Vme:
    """Single-ported memory engine: tag-limited reads, posted writes, one
    burst on the data bus at a time."""

    def __init__(self, cfg: AccelConfig, seed: int):
        self.cfg = cfg
        self.rng = random.Random(seed)
        self.in_order = seed == 0
        self.seq = 0
        self.reads = []    # issued, not yet fully streamed
        self.writes = []
        self.active = None  # (req, end_cycle)
        self.pulses = 0
        self.read_bytes = {k.value: 0 for k in MemKind}
        self.write_bytes = 0
        self.inflight_peak = 0

    def can_issue_read(self):
        return len(self.reads) < self.cfg.vme_max_inflight

    def issue_read(self, module, kind, nbytes, now, row, payload=None):
        self.seq += 1
        pulses = max(1, -(-nbytes // self.cfg.axi_data_bytes))
        req = VmeRequest(self.seq, module, False, kind, nbytes, pulses,
                         now + self.cfg.dram_latency_cycles, row, payload)
        self.reads.append(req)
        self.inflight_peak = max(self.inflight_peak, len(self.reads))
        return req

    def issue_write(self, module, kind, nbytes, now, row, payload=None):
        self.seq += 1
        pulses = max(1, -(-nbytes // self.cfg.axi_data_bytes))
        req = VmeRequest(self.seq, module, True, kind, nbytes, pulses,
                         now + 1, row, payload)
        self.writes.append(req)
        return req

    def step(self, now):
        """Retire a finished burst and grant the next; returns retired reqs."""
        changed = False
        done = []
        if self.active and self.active[1] <= now:
            req = self.active[0]
            if req.is_write:
                self.writes.remove(req)
            else:
                self.reads.remove(req)
            done.append(req)
            self.active = None
            changed = True
        if self.active is None:
            cands = [r for r in self.reads if not r.granted and r.ready_at <= now]
            cands += [w for w in self.writes if not w.granted and w.ready_at <= now]
            if cands:
                cands.sort(key=lambda r: r.seq)
                req = cands[0] if self.in_order else cands[self.rng.randrange(len(cands))]
                req.granted = True
                self.active = (req, now + req.pulses)
                self.pulses += req.pulses
                if req.is_write:
                    self.write_bytes += req.nbytes
                else:
                    self.read_bytes[req.kind.value] += req.nbytes
                changed = True
        return done, changed

    def busy_module(self):
        return self.active[0].module if self.active else None

    def idle(self):
        return not self.reads and not self.writes and self.active is None

    def next_event(self, now):
        """Earliest future time something can happen here.  A request that
        is already ready but blocked behind the active burst acts at that
        burst's end, which is always in the list."""
        ev = []
        if self.active:
            ev.append(self.active[1])
        ev += [r.ready_at for r in self.reads if not r.granted and r.ready_at > now]
        ev += [w.ready_at for w in self.writes if not w.granted and w.ready_at > now]
        return min(ev) if ev else None


@dataclass
class SimReport:
    mode: str
    seed: int
    total_cycles: int
    instr_count: int
    deadlock: dict | None
    dram_read_bytes: dict
    dram_write_bytes: int
    dram_total_bytes: int
    bus_pulses: int
    vme_inflight_peak: int
    token_queue_peak: dict
    cmd_queue_peak: dict
    gemm_tile_iters: int
    alu_iters: int
    intervals: dict
    hazards: list = field(default_factory=list)
    spads: dict = field(default_factory=dict, repr=False)
    dram: bytearray | None = field(default=None, repr=False)

    def busy_cycles(self, module, labels=None):
        total = 0
        for t0, t1, label in self.intervals[module]:
            if label in ("idle", "blocked"):
                continue
            if labels is None or label in labels:
                total += t1 - t0
        return total

    def to_json(self) -> str:
        d = {k: getattr(self, k) for k in
             ("mode", "seed", "total_cycles", "instr_count", "deadlock",
              "dram_read_bytes", "dram_write_bytes", "dram_total_bytes",
              "bus_pulses", "vme_inflight_peak", "token_queue_peak",
              "cmd_queue_peak", "gemm_tile_iters", "alu_iters")}
        d["hazards"] = self.hazards
        d["intervals"] = {m: [[t0, t1, lab] for t0, t1, lab in v]
                          for m, v in self.intervals.items()}
        return json.dumps(d, indent=2)

    def intervals_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["module", "start", "end", "label"])
        for m in _MODS:
            for t0, t1, label in self.intervals[m]:
                w.writerow([m, t0, t1, label])
        return buf.getvalue()


class _Spads:
    """Functional scratchpad state plus the host mirror of the uop table."""

    def __init__(self, cfg: AccelConfig):
        self.cfg = cfg
        self.inp = np.zeros((cfg.spad_entries(MemKind.INP), cfg.batch, cfg.block_in), np.int64)
        self.wgt = np.zeros((cfg.spad_entries(MemKind.WGT), cfg.block_out, cfg.block_in), np.int64)
        self.acc = np.zeros((cfg.spad_entries(MemKind.ACC), cfg.batch, cfg.block_out), np.int64)
        self.uop = [Uop()] * cfg.spad_entries(MemKind.UOP)

    def plane(self, kind):
        return {MemKind.INP: self.inp, MemKind.WGT: self.wgt,
                MemKind.ACC: self.acc}[kind]


class _Module:
    def __init__(self, name, eng):
        self.name = name
        self.eng = eng
        self.queue = deque()
        self.queue_peak = 0
        self.state = "IDLE"
        self.cur = None
        self.cur_idx = -1
        # mem exec state
        self.rows = []
        self.next_row = 0
        self.outstanding = 0
        self.pad_left = 0
        self.busy_until = 0
        self.exec_start = 0
        self.label = "idle"
        self.label_start = 0

    # interval bookkeeping -------------------------------------------------
    def _set_label(self, t, label):
        if label != self.label:
            if t > self.label_start:
                self.eng.intervals[self.name].append(
                    (self.label_start, t, self.label))
            self.label = label
            self.label_start = t

    # queue side ------------------------------------------------------------
    def enqueue(self, idx):
        self.queue.append(idx)
        self.queue_peak = max(self.queue_peak, len(self.queue))

    def pops_needed(self, ins):
        out = []
        for (src, dst), (push_f, pop_f) in TOKEN_QUEUES.items():
            if dst == self.name and getattr(ins, pop_f):
                out.append((src, dst))
        return out

    def pushes(self, ins):
        out = []
        for (src, dst), (push_f, pop_f) in TOKEN_QUEUES.items():
            if src == self.name and getattr(ins, push_f):
                out.append((src, dst))
        return out

    # main step ---------------------------------------------------------------
    def step(self, t):
        changed = False
        if self.state == "IDLE" and self.queue:
            self.cur_idx = self.queue.popleft()
            self.cur = self.eng.instrs[self.cur_idx]
            self.state = "TOKENS"
            self._set_label(t, "blocked")
            changed = True
        if self.state == "TOKENS":
            need = self.pops_needed(self.cur)
            if all(self.eng.tokens[q].count > 0 for q in need):
                for q in need:
                    self.eng.tokens[q].pop()
                self.state = "RUN"
                self.exec_start = t
                self._set_label(t, self.eng.exec_label(self.cur))
                self._start_exec(t)
                changed = True
        if self.state == "RUN":
            changed |= self._run(t)
        if self.state == "PUSH":
            targets = self.pushes(self.cur)
            if all(not self.eng.tokens[q].full for q in targets):
                for q in targets:
                    self.eng.tokens[q].push()
                self.eng.note_region_trace(self.cur_idx, self.cur, self.name,
                                           self.exec_start, t)
                self.cur = None
                self.state = "IDLE"
                self._set_label(t, "idle")
                changed = True
        return changed

    # execution ---------------------------------------------------------------
    def _start_exec(self, t):
        ins = self.cur
        if ins.op in (Opcode.LOAD, Opcode.STORE):
            self.rows = self.eng.mem_rows(ins)
            self.next_row = 0
            self.outstanding = len(self.rows)
            self.pad_left = ins.pad_total_entries() if ins.op == Opcode.LOAD else 0
            if ins.op == Opcode.LOAD and self.pad_left:
                self.eng.apply_pad_fill(ins)
        elif ins.op == Opcode.GEMM:
            n = ins.loop0 * ins.loop1 * (ins.uop_end - ins.uop_begin)
            self.busy_until = t + self.eng.cfg.gemm_pipeline_depth + \
                self.eng.cfg.gemm_ii * n
            self.eng.gemm_tile_iters += 0 if ins.reset else n
        elif ins.op == Opcode.ALU:
            n = ins.loop0 * ins.loop1 * (ins.uop_end - ins.uop_begin)
            ii = self.eng.cfg.alu_ii_imm if ins.use_imm else self.eng.cfg.alu_ii_two
            self.busy_until = t + self.eng.cfg.alu_pipeline_depth + ii * n
            self.eng.alu_iters += n
        else:  # FINISH
            self.busy_until = t + 1

    def _run(self, t):
        ins = self.cur
        changed = False
        if ins.op in (Opcode.LOAD, Opcode.STORE):
            if self.next_row < len(self.rows):
                row = self.rows[self.next_row]
                if ins.op == Opcode.STORE:
                    self.eng.vme.issue_write(self, row["kind"], row["nbytes"],
                                             t, row)
                    self.next_row += 1
                    changed = True
                elif self.eng.vme.can_issue_read():
                    self.eng.vme.issue_read(self, row["kind"], row["nbytes"],
                                            t, row)
                    self.next_row += 1
                    changed = True
            if self.pad_left > 0 and self.eng.vme.busy_module() is not self:
                self.pad_left -= 1
                changed = True
            if self.next_row == len(self.rows) and self.outstanding == 0 \
                    and self.pad_left == 0:
                self._complete(t)
                changed = True
        else:
            if t >= self.busy_until:
                self._complete(t)
                changed = True
        return changed

    def on_burst_done(self, req):
        self.outstanding -= 1
        if not req.is_write:
            self.eng.apply_load_row(self.cur, req.row)

    def _complete(self, t):
        ins = self.cur
        if ins.op == Opcode.GEMM:
            self.eng.exec_gemm(ins)
        elif ins.op == Opcode.ALU:
            self.eng.exec_alu(ins)
        self.state = "PUSH"


class Engine:
    def __init__(self, stream: InstructionStream, cfg: AccelConfig = None, *,
                 mode="timing", seed=0, dram=None, trace=True,
                 max_cycles=200_000_000):
        self.stream = stream
        self.cfg = cfg or AccelConfig(**stream.meta["cfg"])
        if mode not in ("timing", "functional"):
            raise ConfigError(f"unknown sim mode {mode!r}")
        self.mode = mode
        self.seed = seed
        self.trace = trace
        self.max_cycles = max_cycles
        self.instrs = stream.instrs
        src = dram if dram is not None else stream.dram
        self.dram = bytearray(src.data if hasattr(src, "data") else src)
        self.vme = Vme(self.cfg, seed)
        self.tokens = {q: TokenQueue(self.cfg.token_q_depth) for q in TOKEN_QUEUES}
        self.mods = {m: _Module(m, self) for m in _MODS}
        self.intervals = {m: [] for m in _MODS}
        self.spads = _Spads(self.cfg)
        self.fetch_idx = 0
        self.gemm_tile_iters = 0
        self.alu_iters = 0
        self.region_trace = []

    # ---- small helpers -------------------------------------------------
    def exec_label(self, ins):
        if ins.op == Opcode.LOAD:
            return f"load_{ins.mem_kind.value.lower()}"
        return {Opcode.STORE: "store", Opcode.GEMM: "gemm",
                Opcode.ALU: "alu", Opcode.FINISH: "finish"}[ins.op]

    def mem_rows(self, ins):
        if ins.y_size == 0 or ins.x_size == 0:
            return []
        tb = self.cfg.tile_bytes(ins.mem_kind)
        rows = []
        for ry in range(ins.y_size):
            rows.append({"kind": ins.mem_kind, "ry": ry,
                         "dram_off": (ins.dram_base + ry * ins.x_stride) * tb,
                         "nbytes": ins.x_size * tb})
        if ins.op == Opcode.STORE:
            for row in rows:
                row["payload"] = self.snapshot_store_row(ins, row["ry"])
        return rows

    def note_region_trace(self, idx, ins, module, t0, t1):
        if not self.trace or ins.op == Opcode.FINISH:
            return
        reads, writes = instruction_regions(ins, self.spads.uop)
        for r in reads:
            self.region_trace.append((module, idx, r, "r", t0, t1))
        for w in writes:
            self.region_trace.append((module, idx, w, "w", t0, t1))

    # ---- functional side -------------------------------------------------
    def _pad_value(self, ins):
        if ins.pad_kind == PadKind.MIN_VALUE:
            bits = {MemKind.INP: self.cfg.inp_elem_bits,
                    MemKind.WGT: self.cfg.wgt_elem_bits,
                    MemKind.ACC: self.cfg.acc_elem_bits}[ins.mem_kind]
            return -(1 << (bits - 1))
        return 0

    def apply_pad_fill(self, ins):
        if ins.mem_kind == MemKind.UOP:
            return
        plane = self.spads.plane(ins.mem_kind)
        width = ins.x_pad_left + ins.x_size + ins.x_pad_right
        height = ins.y_pad_top + ins.y_size + ins.y_pad_bottom
        val = self._pad_value(ins)
        for y in range(height):
            for x in range(width):
                in_data = (ins.y_pad_top <= y < ins.y_pad_top + ins.y_size and
                           ins.x_pad_left <= x < ins.x_pad_left + ins.x_size)
                if not in_data:
                    plane[ins.sram_base + y * width + x, :, :] = val

    def _decode_tiles(self, kind, blob, n):
        if kind == MemKind.INP:
            shape, dt = (self.cfg.batch, self.cfg.block_in), np.int8
        elif kind == MemKind.WGT:
            shape, dt = (self.cfg.block_out, self.cfg.block_in), np.int8
        else:
            shape, dt = (self.cfg.batch, self.cfg.block_out), np.int32
        return np.frombuffer(blob, dtype=dt).reshape((n,) + shape).astype(np.int64)

    def apply_load_row(self, ins, row):
        ry = row["ry"]
        blob = bytes(self.dram[row["dram_off"]:row["dram_off"] + row["nbytes"]])
        if ins.mem_kind == MemKind.UOP:
            ups = decode_uops(blob, self.stream.layout, self.cfg.uop_bits)
            base = ins.sram_base + ry * ins.x_size
            for k, u in enumerate(ups):
                self.spads.uop[base + k] = u
            return
        tiles = self._decode_tiles(ins.mem_kind, blob, ins.x_size)
        plane = self.spads.plane(ins.mem_kind)
        width = ins.x_pad_left + ins.x_size + ins.x_pad_right
        base = ins.sram_base + (ins.y_pad_top + ry) * width + ins.x_pad_left
        plane[base:base + ins.x_size] = tiles

    def snapshot_store_row(self, ins, ry):
        n = ins.x_size
        vals = self.spads.acc[ins.sram_base + ry * n:ins.sram_base + (ry + 1) * n]
        bits = self.cfg.out_elem_bits
        dt = {8: np.int8, 16: np.int16, 32: np.int32}[bits]
        trunc = (vals & ((1 << bits) - 1)).astype(np.uint64).astype(dt)
        return trunc.tobytes()

    def _write_store_row(self, req):
        row = req.row
        self.dram[row["dram_off"]:row["dram_off"] + row["nbytes"]] = row["payload"]

    def exec_gemm(self, ins):
        sp = self.spads
        ups = sp.uop[ins.uop_begin:ins.uop_end]
        for i0 in range(ins.loop0):
            for i1 in range(ins.loop1):
                for u in ups:
                    a = u.acc_idx + i0 * ins.acc_factor0 + i1 * ins.acc_factor1
                    if ins.reset:
                        sp.acc[a, :, :] = 0
                        continue
                    i = u.inp_idx + i0 * ins.inp_factor0 + i1 * ins.inp_factor1
                    w = u.wgt_idx + i0 * ins.wgt_factor0 + i1 * ins.wgt_factor1
                    sp.acc[a] = _wrap32(sp.acc[a] + sp.inp[i] @ sp.wgt[w].T)

    def exec_alu(self, ins):
        sp = self.spads
        ups = sp.uop[ins.uop_begin:ins.uop_end]
        op = ins.alu_op
        for i0 in range(ins.loop0):
            for i1 in range(ins.loop1):
                for u in ups:
                    d = u.acc_idx + i0 * ins.dst_factor0 + i1 * ins.dst_factor1
                    if ins.use_imm:
                        src = ins.imm
                    else:
                        s = u.inp_idx + i0 * ins.src_factor0 + i1 * ins.src_factor1
                        src = sp.acc[s]
                    x = sp.acc[d]
                    if op == AluOp.ADD:
                        x = x + src
                    elif op == AluOp.MAX:
                        x = np.maximum(x, src)
                    elif op == AluOp.MIN:
                        x = np.minimum(x, src)
                    elif op == AluOp.SHR:
                        x = x >> src
                    elif op == AluOp.MUL:
                        x = x * src
                    else:  # CLIP: clamp into [0, imm]
                        x = np.minimum(np.maximum(x, 0), src)
                    sp.acc[d] = _wrap32(x)

    # ---- main loop -------------------------------------------------------
    def _all_idle(self):
        return (self.fetch_idx >= len(self.instrs) and
                all(not m.queue and m.state == "IDLE" for m in self.mods.values()) and
                self.vme.idle())

    def _fetch(self, t):
        if self.fetch_idx >= len(self.instrs):
            return False
        ins = self.instrs[self.fetch_idx]
        mod = self.mods[ins.module()]
        if len(mod.queue) >= self.cfg.cmd_q_depth:
            return False
        mod.enqueue(self.fetch_idx)
        self.fetch_idx += 1
        return True

    def _next_event(self, t):
        ev = []
        for m in self.mods.values():
            if m.state == "RUN" and m.cur.op in (Opcode.GEMM, Opcode.ALU,
                                                 Opcode.FINISH):
                ev.append(m.busy_until)
        v = self.vme.next_event(t)
        if v is not None:
            ev.append(v)
        ev = [e for e in ev if e > t]
        return min(ev) if ev else None

    def _diagnose(self, t):
        mods = {}
        for name, m in self.mods.items():
            info = {"state": m.state.lower(), "queue_depth": len(m.queue)}
            if m.cur is not None:
                info["instr"] = m.cur_idx
                info["opcode"] = m.cur.op.name
                if m.state == "TOKENS":
                    waiting = [f"{s}->{d}" for (s, d) in m.pops_needed(m.cur)
                               if self.tokens[(s, d)].count == 0]
                    info["waiting_for_token_on"] = waiting
                if m.state == "PUSH":
                    stuck = [f"{s}->{d}" for (s, d) in m.pushes(m.cur)
                             if self.tokens[(s, d)].full]
                    info["waiting_for_space_on"] = stuck
            mods[name] = info
        return {"cycle": t, "modules": mods,
                "tokens": {f"{s}->{d}": q.count for (s, d), q in self.tokens.items()},
                "fetched": self.fetch_idx, "instr_count": len(self.instrs)}

    def run(self) -> SimReport:
        t = 0
        deadlock = None
        while True:
            if self._all_idle():
                break
            if t >= self.max_cycles:
                deadlock = {"cycle": t, "note": "max_cycles reached"}
                break
            changed = self._fetch(t)
            for m in _MODS:
                changed |= self.mods[m].step(t)
            done, vch = self.vme.step(t)
            changed |= vch
            for req in done:
                if req.is_write:
                    self._write_store_row(req)
                req.module.on_burst_done(req)
            if changed:
                t += 1
            else:
                ev = self._next_event(t)
                if ev is None:
                    deadlock = self._diagnose(t)
                    break
                t = ev
        for m in self.mods.values():
            m._set_label(t, "end")
        intervals = {m: self.intervals[m] for m in _MODS}
        report = SimReport(
            mode=self.mode, seed=self.seed, total_cycles=t,
            instr_count=len(self.instrs), deadlock=deadlock,
            dram_read_bytes=dict(self.vme.read_bytes),
            dram_write_bytes=self.vme.write_bytes,
            dram_total_bytes=sum(self.vme.read_bytes.values()) + self.vme.write_bytes,
            bus_pulses=self.vme.pulses,
            vme_inflight_peak=self.vme.inflight_peak,
            token_queue_peak={f"{s}->{d}": q.peak for (s, d), q in self.tokens.items()},
            cmd_queue_peak={m: self.mods[m].queue_peak for m in _MODS},
            gemm_tile_iters=self.gemm_tile_iters,
            alu_iters=self.alu_iters,
            intervals=intervals,
            spads={"acc": self.spads.acc.copy()} if self.mode == "functional" else {},
            dram=self.dram if self.mode == "functional" else None,
        )
        report.hazards = scan_hazards(self.region_trace)
        return report


def scan_hazards(trace) -> list:
    """Cross-module records on the same scratchpad kind whose address ranges
    and execution intervals both overlap, with at least one write."""
    out = []
    for i in range(len(trace)):
        mi, idx_i, reg_i, rw_i, a0, a1 = trace[i]
        for j in range(i + 1, len(trace)):
            mj, idx_j, reg_j, rw_j, b0, b1 = trace[j]
            if mi == mj or ("w" not in (rw_i, rw_j)):
                continue
            if reg_i.kind != reg_j.kind:
                continue
            if reg_i.lo >= reg_j.hi or reg_j.lo >= reg_i.hi:
                continue
            if a0 >= b1 or b0 >= a1:
                continue
            out.append({"kind": reg_i.kind.value,
                        "a": {"module": mi, "instr": idx_i, "rw": rw_i,
                              "span": [reg_i.lo, reg_i.hi], "time": [a0, a1]},
                        "b": {"module": mj, "instr": idx_j, "rw": rw_j,
                              "span": [reg_j.lo, reg_j.hi], "time": [b0, b1]}})
    return out


def run(stream: InstructionStream, cfg: AccelConfig = None, *, mode="timing",
        seed=0, dram=None, trace=True, max_cycles=200_000_000) -> SimReport:
    """Simulate a stream and return the cycle/byte/interval report."""
    eng = Engine(stream, cfg, mode=mode, seed=seed, dram=dram, trace=trace,
                 max_cycles=max_cycles)
    return eng.run()


def hazard_log(report: SimReport) -> list:
    """Read/write ordering conflicts found in the completed run's region
    trace; empty when every cross-module access pair was token-ordered."""
    return list(report.hazards)
