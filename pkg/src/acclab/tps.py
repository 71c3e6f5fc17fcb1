"""Tiling parameter search: analytical scratchpad usage and DRAM cost.

The search tiles five dimensions of a conv layer -- batch tiles, output
height, output width, output-channel blocks, input-channel blocks -- into
(outer, inner) factor pairs, optionally doubling up two pipeline contexts
along the output-channel or height loop (oc_threads / h_threads, never
both).  For every candidate it evaluates closed-form scratchpad usage and
total DRAM traffic, keeps the feasible ones, and returns the cheapest.

The usage/cost expressions are evaluated exactly as printed in the design
notes, with exact integer division throughout; a candidate whose divisions
do not come out integral (notably the inner-height term, which divides the
*input* height by the outer height factor) is rejected before evaluation.
The accumulator DRAM term is likewise carried verbatim (it scales with
outer spatial factors and fo only); it ranks schedules, it is not a store
byte count.  See README for the two places this intentionally diverges
from the generated streams' exact byte accounting.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .config import AccelConfig, MemKind
from .errors import TilingError
from .workload import ConvLayer

# (oc_threads, h_threads): two contexts on output channels, or on height,
# or no threading; never both doubled.
THREAD_CHOICES = ((1, 1), (2, 1), (1, 2))


@dataclass(frozen=True, order=True)
class TilingParams:
    """Outer tiling factors plus the context counts.

    batch_outer divides b/batch_tile, h_outer divides oh, w_outer divides
    ow, oc_outer divides fo/block_out, ic_outer divides fi/block_in.
    """
    batch_outer: int
    h_outer: int
    w_outer: int
    oc_outer: int
    ic_outer: int
    oc_threads: int = 1
    h_threads: int = 1


@dataclass(frozen=True)
class TpsResult:
    params: TilingParams
    feasible: bool
    # Scratchpad residency in bytes (both contexts when threaded).
    inp_use_bytes: int
    wgt_use_bytes: int
    acc_use_bytes: int
    # Slack = capacity - usage; feasible iff all three are >= 0.
    inp_slack_bytes: int
    wgt_slack_bytes: int
    acc_slack_bytes: int
    # Analytical DRAM traffic in bytes.
    inp_dram_bytes: int
    wgt_dram_bytes: int
    acc_dram_bytes: int

    @property
    def total_dram_bytes(self) -> int:
        return self.inp_dram_bytes + self.wgt_dram_bytes + self.acc_dram_bytes


def _divisors(n: int) -> list:
    out = [d for d in range(1, n + 1) if n % d == 0]
    return out


def _check_layer(layer: ConvLayer, cfg: AccelConfig):
    if layer.kind not in ("conv", "dense"):
        raise TilingError(f"tiling search handles conv/dense layers, not {layer.kind}")
    if layer.fi % cfg.block_in or layer.fo % cfg.block_out:
        raise TilingError(
            f"channels must be pre-padded to the block sizes: fi={layer.fi} "
            f"(block_in={cfg.block_in}), fo={layer.fo} (block_out={cfg.block_out})")
    if layer.b % cfg.batch:
        raise TilingError(f"batch {layer.b} not divisible by machine batch {cfg.batch}")


def enumerate_candidates(layer: ConvLayer, cfg: AccelConfig):
    """Yield every raw candidate: divisor tuples x thread choices.

    The count is exactly the product of the divisor counts of the five
    tiled dimensions times len(THREAD_CHOICES); evaluation later rejects
    the non-integral and thread-incompatible ones.
    """
    _check_layer(layer, cfg)
    oh, ow = layer.output_dims()
    nb = layer.b // cfg.batch
    oc = layer.fo // cfg.block_out
    ic = layer.fi // cfg.block_in
    for tb in _divisors(nb):
        for th in _divisors(oh):
            for tw in _divisors(ow):
                for tco in _divisors(oc):
                    for tci in _divisors(ic):
                        for oc_n, h_n in THREAD_CHOICES:
                            yield TilingParams(tb, th, tw, tco, tci, oc_n, h_n)


def evaluate(layer: ConvLayer, cfg: AccelConfig, p: TilingParams):
    """Evaluate one candidate; None when rejected before evaluation.

    Rejection covers thread/evenness constraints and any non-integral
    division in the printed expressions.
    """
    oh, ow = layer.output_dims()
    nb = layer.b // cfg.batch
    oc = layer.fo // cfg.block_out
    ic = layer.fi // cfg.block_in

    if (p.oc_threads, p.h_threads) not in THREAD_CHOICES:
        return None
    if p.oc_threads == 2 and p.oc_outer % 2:
        return None
    if p.h_threads == 2 and p.h_outer % 2:
        return None
    if nb % p.batch_outer or oh % p.h_outer or ow % p.w_outer:
        return None
    if oc % p.oc_outer or ic % p.ic_outer:
        return None
    # The inner-height/width extents divide the *input* dims by the outer
    # spatial factors; only exact divisions are admitted.
    if layer.h % p.h_outer or layer.w % p.w_outer:
        return None

    n_ctx = p.oc_threads * p.h_threads
    batch_inner = nb // p.batch_outer

    rows = ((layer.h // p.h_outer + 2 * layer.ph - layer.kh) // layer.sh) * layer.sh + layer.kh
    cols = ((layer.w // p.w_outer + 2 * layer.pw - layer.kw) // layer.sw) * layer.sw + layer.kw
    inp_use_elems = (batch_inner * (ic // p.ic_outer) * rows * cols
                     * cfg.batch * cfg.block_in * n_ctx)

    wgt_all = oc * ic * layer.kh * layer.kw * cfg.block_out * cfg.block_in
    if wgt_all % (p.oc_outer * p.ic_outer):
        return None
    wgt_use_elems = wgt_all // (p.oc_outer * p.ic_outer) * n_ctx

    acc_first = nb * oc * oh * ow * cfg.batch * cfg.block_out
    acc_div = p.batch_outer * p.oc_outer * p.h_outer * p.w_outer
    if acc_first % acc_div or (layer.fo * layer.b) % (p.batch_outer * p.oc_outer):
        return None
    acc_use_elems = (acc_first // acc_div
                     + layer.fo * layer.b // (p.batch_outer * p.oc_outer)) * n_ctx

    if p.h_outer % p.h_threads or p.oc_outer % p.oc_threads:
        return None
    trips = (p.batch_outer * (p.h_outer // p.h_threads)
             * (p.oc_outer // p.oc_threads) * p.w_outer * p.ic_outer)
    inp_dram_elems = trips * inp_use_elems
    wgt_dram_elems = trips * wgt_use_elems
    acc_dram_elems = p.batch_outer * p.h_outer * p.w_outer * layer.fo

    inp_b = cfg.inp_elem_bits // 8
    wgt_b = cfg.wgt_elem_bits // 8
    acc_b = cfg.acc_elem_bits // 8
    inp_use = inp_use_elems * inp_b
    wgt_use = wgt_use_elems * wgt_b
    acc_use = acc_use_elems * acc_b
    return TpsResult(
        params=p,
        feasible=(cfg.inp_spad_bytes >= inp_use and cfg.wgt_spad_bytes >= wgt_use
                  and cfg.acc_spad_bytes >= acc_use),
        inp_use_bytes=inp_use, wgt_use_bytes=wgt_use, acc_use_bytes=acc_use,
        inp_slack_bytes=cfg.inp_spad_bytes - inp_use,
        wgt_slack_bytes=cfg.wgt_spad_bytes - wgt_use,
        acc_slack_bytes=cfg.acc_spad_bytes - acc_use,
        inp_dram_bytes=inp_dram_elems * inp_b,
        wgt_dram_bytes=wgt_dram_elems * wgt_b,
        acc_dram_bytes=acc_dram_elems * acc_b,
    )


def scratchpad_usage(layer: ConvLayer, cfg: AccelConfig, p: TilingParams) -> TpsResult:
    """Evaluate one candidate, raising on rejected parameter combinations."""
    r = evaluate(layer, cfg, p)
    if r is None:
        raise TilingError(f"non-divisible dimension combination: {p}")
    return r


def dram_cost(layer: ConvLayer, cfg: AccelConfig, p: TilingParams) -> int:
    return scratchpad_usage(layer, cfg, p).total_dram_bytes


def _rank_key(r: TpsResult):
    # Cheapest total first; ties to smaller acc usage, then to the
    # lexicographically smallest parameter tuple.
    p = r.params
    return (r.total_dram_bytes, r.acc_use_bytes,
            (p.batch_outer, p.h_outer, p.w_outer, p.oc_outer, p.ic_outer,
             p.oc_threads, p.h_threads))


def rank(layer: ConvLayer, cfg: AccelConfig, candidates=None) -> list:
    """All feasible evaluated candidates, best first."""
    if candidates is None:
        candidates = enumerate_candidates(layer, cfg)
    rs = []
    for p in candidates:
        r = evaluate(layer, cfg, p)
        if r is not None and r.feasible:
            rs.append(r)
    rs.sort(key=_rank_key)
    return rs


def _tightest_constraint(layer, cfg):
    """Name the scratchpad with the worst shortfall at minimal usage."""
    best = {"inp": None, "wgt": None, "acc": None}
    for p in enumerate_candidates(layer, cfg):
        r = evaluate(layer, cfg, p)
        if r is None:
            continue
        for k, use in (("inp", r.inp_use_bytes), ("wgt", r.wgt_use_bytes),
                       ("acc", r.acc_use_bytes)):
            if best[k] is None or use < best[k]:
                best[k] = use
    caps = {"inp": cfg.inp_spad_bytes, "wgt": cfg.wgt_spad_bytes, "acc": cfg.acc_spad_bytes}
    worst = None
    for k in ("inp", "wgt", "acc"):
        if best[k] is None:
            continue
        short = best[k] - caps[k]
        if short > 0 and (worst is None or short > worst[1]):
            worst = (k, short)
    if worst is None:
        return "no evaluable candidate"
    return (f"{worst[0]} scratchpad: minimum usage {best[worst[0]]} B exceeds "
            f"capacity {caps[worst[0]]} B by {worst[1]} B")


def search(layer: ConvLayer, cfg: AccelConfig, candidates=None) -> TpsResult:
    """Exhaustive search for the feasible candidate with minimal DRAM cost.

    Deterministic under any enumeration order (the ranking key is a total
    order).  Raises TilingError naming the tightest constraint when nothing
    fits.
    """
    rs = rank(layer, cfg, candidates)
    if not rs:
        raise TilingError(f"no feasible tiling for {layer.kind} layer "
                          f"({_tightest_constraint(layer, cfg)})")
    return rs[0]


def fallback_schedule(layer: ConvLayer, cfg: AccelConfig) -> TpsResult:
    """The thread-free candidate with maximal outer factors.

    Per dimension, the largest divisor that keeps every expression integral
    (the spatial outers must also divide the input dims).  This minimizes
    each scratchpad usage pointwise, so it is feasible whenever anything
    is; it maximizes DRAM traffic in the same measure the search minimizes.
    """
    _check_layer(layer, cfg)
    oh, ow = layer.output_dims()
    nb = layer.b // cfg.batch
    oc = layer.fo // cfg.block_out
    ic = layer.fi // cfg.block_in
    th = max(d for d in _divisors(oh) if layer.h % d == 0)
    tw = max(d for d in _divisors(ow) if layer.w % d == 0)
    p = TilingParams(nb, th, tw, oc, ic, 1, 1)
    r = evaluate(layer, cfg, p)
    assert r is not None, "maximal outer factors must be evaluable"
    if not r.feasible:
        raise TilingError(f"no feasible tiling for {layer.kind} layer "
                          f"({_tightest_constraint(layer, cfg)})")
    return r


def ranking_csv(layer: ConvLayer, cfg: AccelConfig, top: int = 0) -> str:
    """CSV of the ranked feasible candidates (all of them when top == 0)."""
    rs = rank(layer, cfg)
    if top:
        rs = rs[:top]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "batch_outer", "h_outer", "w_outer", "oc_outer", "ic_outer",
                "oc_threads", "h_threads", "inp_use_bytes", "wgt_use_bytes",
                "acc_use_bytes", "inp_dram_bytes", "wgt_dram_bytes",
                "acc_dram_bytes", "total_dram_bytes"])
    for i, r in enumerate(rs):
        p = r.params
        w.writerow([i, p.batch_outer, p.h_outer, p.w_outer, p.oc_outer, p.ic_outer,
                    p.oc_threads, p.h_threads, r.inp_use_bytes, r.wgt_use_bytes,
                    r.acc_use_bytes, r.inp_dram_bytes, r.wgt_dram_bytes,
                    r.acc_dram_bytes, r.total_dram_bytes])
    return buf.getvalue()
