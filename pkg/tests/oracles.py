"""Independent reference implementations the test suite compares against.

Everything here is written from the published math, not from the package,
so a bug in the package cannot cancel out: direct dense/elementwise layer
references in numpy, and a naive exhaustive tiling-cost enumerator.
"""

import numpy as np

INT32_MIN = -(1 << 31)


def wrap32(a):
    """Two's-complement 32-bit wraparound on an int64 array."""
    return ((a + (1 << 31)) % (1 << 32)) - (1 << 31)


def store_narrow(acc, out_bits=8):
    """Truncate accumulator values the way the store path does."""
    if out_bits == 8:
        return acc.astype(np.int8).astype(np.int32)
    mask = (1 << out_bits) - 1
    v = acc.astype(np.int64) & mask
    v -= (v >> (out_bits - 1)) << out_bits
    return v.astype(np.int32)


def requant(acc, shift=-1, clip=-1):
    acc = np.asarray(acc, np.int64)
    if shift >= 0:
        acc = acc >> shift
    if clip >= 0:
        acc = np.minimum(np.maximum(acc, 0), clip)
    return acc


def conv_ref(inp, wgt, ph, pw, sh, sw, shift=-1, clip=-1, out_bits=8):
    """int8 conv -> wrapped int32 accumulate -> shift/clip -> narrowed."""
    b, fi, h, w = inp.shape
    fo, _, kh, kw = wgt.shape
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    x = np.zeros((b, fi, h + 2 * ph, w + 2 * pw), np.int64)
    x[:, :, ph:ph + h, pw:pw + w] = inp
    out = np.zeros((b, fo, oh, ow), np.int64)
    for dy in range(kh):
        for dx in range(kw):
            win = x[:, :, dy:dy + oh * sh:sh, dx:dx + ow * sw:sw]
            out += np.einsum("bihw,oi->bohw", win,
                             wgt[:, :, dy, dx].astype(np.int64))
    return store_narrow(requant(wrap32(out), shift, clip), out_bits)


def _windows(inp, kind, kh, kw, ph, pw, sh, sw):
    b, f, h, w = inp.shape
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    fill = INT32_MIN if kind == "maxpool" else 0
    x = np.full((b, f, h + 2 * ph, w + 2 * pw), fill, np.int64)
    x[:, :, ph:ph + h, pw:pw + w] = inp
    for dy in range(kh):
        for dx in range(kw):
            yield dy, dx, x[:, :, dy:dy + oh * sh:sh, dx:dx + ow * sw:sw]


def maxpool_ref(inp, kh, kw, ph, pw, sh, sw, shift=-1, clip=-1, out_bits=8):
    acc = None
    for _, _, win in _windows(inp, "maxpool", kh, kw, ph, pw, sh, sw):
        acc = win.copy() if acc is None else np.maximum(acc, win)
    return store_narrow(requant(wrap32(acc), shift, clip), out_bits)


def avgpool_ref(inp, kh, kw, ph, pw, sh, sw, shift=-1, clip=-1, out_bits=8):
    acc = None
    for _, _, win in _windows(inp, "avgpool", kh, kw, ph, pw, sh, sw):
        acc = win.copy() if acc is None else acc + win
    acc = wrap32(acc) >> ((kh * kw).bit_length() - 1)
    return store_narrow(requant(acc, shift, clip), out_bits)


def depthwise_ref(inp, taps, ph, pw, sh, sw, shift=-1, clip=-1, out_bits=8):
    acc = None
    for dy, dx, win in _windows(inp, "depthwise", taps.shape[1], taps.shape[2],
                                ph, pw, sh, sw):
        t = win * taps[None, :, dy, dx, None, None].astype(np.int64)
        acc = t if acc is None else acc + t
    return store_narrow(requant(wrap32(acc), shift, clip), out_bits)


# ------------------------------------------------------------- tiling cost


def _divs(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def tps_brute_force(layer, cfg):
    """Naive exhaustive argmin of the printed DRAM-cost model.

    Returns (params_tuple, cost_tuple) where params_tuple is
    (tb_o, th_o, tw_o, tco_o, tci_o, oc_n, h_n) and cost_tuple is
    (total_dram_bytes, inp_dram, wgt_dram, acc_dram, s_inp, s_wgt, s_acc),
    or None when no candidate fits the scratchpads.
    """
    bm, bi, bo = cfg.batch, cfg.block_in, cfg.block_out
    oh = (layer.h + 2 * layer.ph - layer.kh) // layer.sh + 1
    ow = (layer.w + 2 * layer.pw - layer.kw) // layer.sw + 1
    nb = layer.b // bm
    di, do = layer.fi // bi, layer.fo // bo
    inp_b = cfg.inp_elem_bits // 8
    wgt_b = cfg.wgt_elem_bits // 8
    acc_b = cfg.acc_elem_bits // 8

    best = None
    for tb_o in _divs(nb):
        for th_o in _divs(oh):
            for tw_o in _divs(ow):
                for tco_o in _divs(do):
                    for tci_o in _divs(di):
                        for oc_n, h_n in ((1, 1), (2, 1), (1, 2)):
                            if oc_n == 2 and tco_o % 2:
                                continue
                            if h_n == 2 and th_o % 2:
                                continue
                            if layer.h % th_o or layer.w % tw_o:
                                continue
                            rows = ((layer.h // th_o + 2 * layer.ph - layer.kh)
                                    // layer.sh) * layer.sh + layer.kh
                            cols = ((layer.w // tw_o + 2 * layer.pw - layer.kw)
                                    // layer.sw) * layer.sw + layer.kw
                            n_ctx = oc_n * h_n
                            s_inp = ((nb // tb_o) * (di // tci_o) * rows * cols
                                     * bm * bi * n_ctx) * inp_b
                            s_wgt = (do * di * layer.kh * layer.kw * bo * bi
                                     // (tco_o * tci_o) * n_ctx) * wgt_b
                            s_acc = ((nb * do * oh * ow * bm * bo
                                      // (tb_o * tco_o * th_o * tw_o))
                                     + layer.fo * layer.b // (tb_o * tco_o)) \
                                * n_ctx * acc_b
                            if (s_inp > cfg.inp_spad_bytes
                                    or s_wgt > cfg.wgt_spad_bytes
                                    or s_acc > cfg.acc_spad_bytes):
                                continue
                            trips = (tb_o * (th_o // h_n) * (tco_o // oc_n)
                                     * tw_o * tci_o)
                            l_inp = trips * s_inp
                            l_wgt = trips * s_wgt
                            l_acc = tb_o * th_o * tw_o * layer.fo * acc_b
                            total = l_inp + l_wgt + l_acc
                            params = (tb_o, th_o, tw_o, tco_o, tci_o, oc_n, h_n)
                            key = (total, s_acc, params)
                            if best is None or key < best[0]:
                                best = (key, (total, l_inp, l_wgt, l_acc,
                                              s_inp, s_wgt, s_acc))
    if best is None:
        return None
    return best[0][2], best[1]
