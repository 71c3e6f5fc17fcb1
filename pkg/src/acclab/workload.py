"""Layer descriptions.

A workload file is a JSON array of layer objects.  Field names mirror the
usual conv bookkeeping: b (batch), h/w (input spatial), kh/kw (kernel),
fi/fo (input/output channels), ph/pw (padding), sh/sw (stride).  Dense
layers are 1x1 convs on a 1x1 image; pooling layers carry the window in
kh/kw and keep fi == fo.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import WorkloadError

LAYER_KINDS = ("conv", "dense", "depthwise", "maxpool", "avgpool")
_FIELDS = ("b", "h", "w", "kh", "kw", "fi", "fo", "ph", "pw", "sh", "sw")


@dataclass(frozen=True)
class ConvLayer:
    kind: str
    b: int
    h: int
    w: int
    kh: int
    kw: int
    fi: int
    fo: int
    ph: int = 0
    pw: int = 0
    sh: int = 1
    sw: int = 1
    name: str = ""

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise WorkloadError(f"kind: expected one of {LAYER_KINDS}, got {self.kind!r}")
        for f in _FIELDS:
            v = getattr(self, f)
            if not isinstance(v, int) or isinstance(v, bool):
                raise WorkloadError(f"{f}: expected an integer, got {v!r}")
        for f in ("b", "h", "w", "kh", "kw", "fi", "fo", "sh", "sw"):
            if getattr(self, f) < 1:
                raise WorkloadError(f"{f}: must be >= 1")
        if self.ph < 0 or self.pw < 0:
            raise WorkloadError("ph/pw: must be >= 0")
        if self.kind == "dense" and (self.h, self.w, self.kh, self.kw) != (1, 1, 1, 1):
            raise WorkloadError("dense layers must have h=w=kh=kw=1")
        if self.kind in ("depthwise", "maxpool", "avgpool") and self.fi != self.fo:
            raise WorkloadError(f"{self.kind} layers must keep fi == fo")
        if self.kh > self.h + 2 * self.ph or self.kw > self.w + 2 * self.pw:
            raise WorkloadError("kernel larger than padded input")

    def output_dims(self) -> tuple:
        """(oh, ow): floor((dim + 2*pad - k) / stride) + 1."""
        oh = (self.h + 2 * self.ph - self.kh) // self.sh + 1
        ow = (self.w + 2 * self.pw - self.kw) // self.sw + 1
        return oh, ow

    def mac_count(self) -> int:
        """Multiply-accumulates (window ops for pooling, used for reporting)."""
        oh, ow = self.output_dims()
        per_out = self.kh * self.kw
        if self.kind in ("conv", "dense"):
            per_out *= self.fi
        # depthwise and pooling touch one input channel per output channel
        return self.b * oh * ow * self.fo * per_out


def pad_channels(layer: ConvLayer, block_in: int, block_out: int) -> ConvLayer:
    """Round fi/fo up to the GEMM block sizes.

    The padded region is defined to contribute zeros, so results over the
    original channels are unchanged.  Channel-preserving kinds pad both
    sides with the same block so fi == fo survives.
    """
    def up(n, b):
        return ((n + b - 1) // b) * b

    if layer.kind in ("depthwise", "maxpool", "avgpool"):
        blk = max(block_in, block_out)
        fi = fo = up(layer.fi, blk)
    else:
        fi = up(layer.fi, block_in)
        fo = up(layer.fo, block_out)
    if (fi, fo) == (layer.fi, layer.fo):
        return layer
    return replace(layer, fi=fi, fo=fo)


def load_workload(text_or_list) -> list:
    """Parse a workload JSON array into ConvLayer values."""
    if isinstance(text_or_list, (str, bytes)):
        try:
            raw = json.loads(text_or_list)
        except json.JSONDecodeError as e:
            raise WorkloadError(f"workload is not valid JSON: {e}") from e
    else:
        raw = text_or_list
    if not isinstance(raw, list):
        raise WorkloadError(f"workload must be a JSON array, got {type(raw).__name__}")
    layers = []
    for i, obj in enumerate(raw):
        if not isinstance(obj, dict):
            raise WorkloadError(f"layer {i}: expected an object")
        known = set(_FIELDS) | {"kind", "name"}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise WorkloadError(f"layer {i}: unknown keys: {', '.join(unknown)}")
        try:
            layers.append(ConvLayer(**obj))
        except TypeError as e:
            raise WorkloadError(f"layer {i}: {e}") from e
        except WorkloadError as e:
            raise WorkloadError(f"layer {i}: {e}") from e
    return layers


def load_workload_file(path) -> list:
    with open(path, "r", encoding="utf-8") as f:
        return load_workload(f.read())


def serialize_workload(layers) -> str:
    objs = []
    for l in layers:
        d = {"kind": l.kind}
        if l.name:
            d["name"] = l.name
        d.update({f: getattr(l, f) for f in _FIELDS})
        objs.append(d)
    return json.dumps(objs, indent=2) + "\n"
