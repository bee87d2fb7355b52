#!/usr/bin/env python3
"""Write a small SLCW float model and a probe CSV using only the stdlib.

Stands in for the trainer's export step so the Rust side can check the
interchange contract: same container layout, float logits per probe, and
the argmax of an 8-bit fake-quantised forward pass.

    python3 tools/slcw_export.py --out DIR [--seed 0] [--probes 64]
"""

import argparse
import math
import random
import struct
from pathlib import Path

INPUT_LEN = 64
CLASSES = 4


def f32(v):
    return struct.unpack("<f", struct.pack("<f", v))[0]


def he(rng, fan_in, n):
    sd = math.sqrt(2.0 / fan_in)
    return [f32(rng.gauss(0.0, sd)) for _ in range(n)]


def build(rng):
    """conv(1->4,k5) relu pool(2) depthwise(4,k3) relu flatten dense(8) relu dropout dense(4) softmax"""
    layers = []
    layers.append(("conv", dict(in_ch=1, out_ch=4, kernel=5, stride=1, w=he(rng, 5, 20), b=he(rng, 5, 4))))
    layers.append(("relu", {}))
    layers.append(("pool", dict(size=2, stride=2)))
    layers.append(("dw", dict(ch=4, kernel=3, stride=1, w=he(rng, 3, 12), b=he(rng, 3, 4))))
    layers.append(("relu", {}))
    layers.append(("flatten", {}))
    flat = ((INPUT_LEN - 5 + 1) // 2 - 3 + 1) * 4
    layers.append(("dense", dict(in_dim=flat, out_dim=8, w=he(rng, flat, flat * 8), b=he(rng, flat, 8))))
    layers.append(("relu", {}))
    layers.append(("dropout", dict(rate=0.5)))
    layers.append(("dense", dict(in_dim=8, out_dim=CLASSES, w=he(rng, 8, 8 * CLASSES), b=he(rng, 8, CLASSES))))
    layers.append(("softmax", {}))
    return layers


# ---- container ----

TAGS = {"conv": 1, "dw": 2, "pool": 3, "relu": 4, "dropout": 5, "flatten": 6, "dense": 7, "softmax": 8}


def dims(out, shapes):
    out += struct.pack("<B", len(shapes))
    for s in shapes:
        out += struct.pack("<B", len(s))
        for d in s:
            out += struct.pack("<I", d)


def to_bytes(layers):
    out = bytearray(b"SLCW")
    out += struct.pack("<HB", 1, 0)
    out += struct.pack("<IIII", INPUT_LEN, 1, CLASSES, len(layers))
    for kind, p in layers:
        out += struct.pack("<B", TAGS[kind])
        if kind == "conv":
            out += struct.pack("<IIII", p["in_ch"], p["out_ch"], p["kernel"], p["stride"])
            dims(out, [[p["out_ch"], p["kernel"], p["in_ch"]], [p["out_ch"]]])
        elif kind == "dw":
            out += struct.pack("<III", p["ch"], p["kernel"], p["stride"])
            dims(out, [[p["ch"], p["kernel"]], [p["ch"]]])
        elif kind == "pool":
            out += struct.pack("<II", p["size"], p["stride"])
            dims(out, [])
        elif kind == "dropout":
            out += struct.pack("<f", p["rate"])
            dims(out, [])
        elif kind == "dense":
            out += struct.pack("<II", p["in_dim"], p["out_dim"])
            dims(out, [[p["out_dim"], p["in_dim"]], [p["out_dim"]]])
        else:
            dims(out, [])
    for kind, p in layers:
        if "w" in p:
            out += struct.pack("<%df" % len(p["w"]), *p["w"])
            out += struct.pack("<%df" % len(p["b"]), *p["b"])
    return bytes(out)


# ---- inference, channels-last ----

def apply(kind, p, x, length, ch):
    if kind == "conv":
        k, s, ci, co = p["kernel"], p["stride"], p["in_ch"], p["out_ch"]
        n = (length - k) // s + 1
        y = []
        for t in range(n):
            for o in range(co):
                a = p["b"][o]
                for j in range(k):
                    for c in range(ci):
                        a += p["w"][(o * k + j) * ci + c] * x[(t * s + j) * ci + c]
                y.append(a)
        return y, n, co
    if kind == "dw":
        k, s, c_ = p["kernel"], p["stride"], p["ch"]
        n = (length - k) // s + 1
        y = []
        for t in range(n):
            for c in range(c_):
                a = p["b"][c]
                for j in range(k):
                    a += p["w"][c * k + j] * x[(t * s + j) * c_ + c]
                y.append(a)
        return y, n, c_
    if kind == "pool":
        n = (length - p["size"]) // p["stride"] + 1
        y = [max(x[(t * p["stride"] + j) * ch + c] for j in range(p["size"])) for t in range(n) for c in range(ch)]
        return y, n, ch
    if kind == "relu":
        return [max(v, 0.0) for v in x], length, ch
    if kind == "flatten":
        return x, 1, length * ch
    if kind == "dense":
        y = []
        for o in range(p["out_dim"]):
            a = p["b"][o]
            for j in range(p["in_dim"]):
                a += p["w"][o * p["in_dim"] + j] * x[j]
            y.append(a)
        return y, 1, p["out_dim"]
    return x, length, ch


def edges(layers, x):
    """Activations after every layer, softmax excluded."""
    out = [x]
    length, ch = INPUT_LEN, 1
    for kind, p in layers:
        if kind == "softmax":
            break
        x, length, ch = apply(kind, p, x, length, ch)
        out.append(x)
    return out


def exponent(m):
    if m <= 0.0:
        return -16
    return max(-16, min(16, math.ceil(math.log2(m / 127.0))))


def fq(v, e):
    # Python's round() is round-half-even
    return max(-128, min(127, round(v / 2.0 ** e))) * 2.0 ** e


def fake_quant_logits(layers, x, act_exp):
    """Weights and activations rounded to int8 grids; last dense left wide."""
    last = max(i for i, (k, _) in enumerate(layers) if "w" in _)
    xq = [fq(v, act_exp[0]) for v in x]
    length, ch = INPUT_LEN, 1
    for i, (kind, p) in enumerate(layers):
        if kind == "softmax":
            break
        if "w" in p:
            we = exponent(max(abs(w) for w in p["w"]))
            q = dict(p, w=[fq(w, we) for w in p["w"]])
            xq, length, ch = apply(kind, q, xq, length, ch)
            if i != last:
                xq = [fq(v, act_exp[i + 1]) for v in xq]
        else:
            xq, length, ch = apply(kind, p, xq, length, ch)
    return xq


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--probes", type=int, default=64)
    a = ap.parse_args()
    rng = random.Random(a.seed)
    layers = build(rng)
    probes = [[rng.uniform(-2.0, 2.0) for _ in range(INPUT_LEN)] for _ in range(a.probes)]
    all_edges = [edges(layers, x) for x in probes]
    act_exp = [exponent(max(abs(v) for e in all_edges for v in e[k])) for k in range(len(all_edges[0]))]

    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "toy.slcw").write_bytes(to_bytes(layers))
    rows = ["fq_argmax," + ",".join("logit_%d" % i for i in range(CLASSES)) + "," + ",".join("x_%d" % i for i in range(INPUT_LEN))]
    for x, e in zip(probes, all_edges):
        z = fake_quant_logits(layers, x, act_exp)
        arg = max(range(CLASSES), key=lambda i: (z[i], -i))
        rows.append(",".join([str(arg)] + [repr(v) for v in e[-1]] + [repr(v) for v in x]))
    (out / "toy.probes.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
