#!/usr/bin/env python3
"""Standalone re-implementation of the local trigram embedding and the
hierarchy-aware score, used to freeze expected values for the C++ tests.

Hash: FNV-1a 64 (offset 0xcbf29ce484222325, prime 0x100000001b3) over the
trigram bytes; index = h mod dim; sign = -1 when bit 63 of h is set.
"""
import json
import math
import sys

MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def features(text: str, dim: int):
    t = text.encode()
    t = bytes(c + 32 if 65 <= c <= 90 else c for c in t)
    if len(t) < 3:
        t = t + b" " * (3 - len(t))
    f = {}
    for i in range(len(t) - 2):
        h = fnv1a64(t[i:i + 3])
        idx = h % dim
        sign = -1.0 if (h >> 63) & 1 else 1.0
        f[idx] = f.get(idx, 0.0) + sign
    return f


def embed(text: str, dim: int = 256):
    f = features(text, dim)
    v = [0.0] * dim
    for k, w in f.items():
        v[k] = w
    n = math.sqrt(sum(x * x for x in v))
    if n == 0.0:
        v = [0.0] * dim
        v[0] = 1.0
        return v
    return [x / n for x in v]


def cos(a, b):
    return sum(x * y for x, y in zip(a, b))


def topic_text(t):
    parts = [t["pref_label"]]
    if t["alt_labels"]:
        parts.append(", ".join(t["alt_labels"]))
    if t["definition"]:
        parts.append(t["definition"])
    return "; ".join(parts)


def ancestors(topics, tid):
    # all-paths enumeration, keep the minimum length per ancestor
    best = {}

    def walk(node, d):
        for p in topics[node]["broader"]:
            if p not in best or d + 1 < best[p]:
                best[p] = d + 1
            walk(p, d + 1)
    walk(tid, 0)
    return best


def siblings(topics, tid):
    out = set()
    for p in topics[tid]["broader"]:
        for o in topics:
            if o != tid and p in topics[o]["broader"]:
                out.add(o)
    return out


def score(topics, vecs, q, tid, alpha=0.3, beta=0.5, gamma=0.1, m=3):
    base = cos(q, vecs[tid])
    anc = alpha * sum(beta ** d * cos(q, vecs[a]) for a, d in ancestors(topics, tid).items())
    sims = sorted((cos(q, vecs[s]) for s in siblings(topics, tid)), reverse=True)
    sims = [s for s in sims if s >= 0][:m]
    sib = gamma * (sum(sims) / len(sims)) if sims else 0.0
    return base, anc, sib, base + anc + sib


if __name__ == "__main__":
    a = embed("polymer recycling")
    print("cos(polymer recycling, polymer recycling processes) = %.17g" % cos(a, embed("polymer recycling processes")))
    print("cos(polymer recycling, baroque violin)               = %.17g" % cos(a, embed("baroque violin")))
    print("features('abc')  =", features("abc", 256))
    print("features('aaaa') =", features("aaaa", 256))
    print("features('ab')   =", features("ab", 256))
    doc = json.load(open(sys.argv[1] if len(sys.argv) > 1 else "fixtures/registry/schemes/research_areas.json"))
    topics = {t["id"]: t for t in doc["topics"]}
    vecs = {k: embed(topic_text(t)) for k, t in topics.items()}
    for tid in ("t_waste", "sf_music"):
        v = vecs[tid]
        nz = [(i, x) for i, x in enumerate(v) if x != 0.0][:3]
        print("spot", tid, repr(topic_text(topics[tid])), "first nonzeros", [(i, "%.17g" % x) for i, x in nz])
    q = embed("plastic recycling")
    ranked = sorted(topics, key=lambda t: (-score(topics, vecs, q, t)[3], t))
    print("oracle full ranking for 'plastic recycling' (default params):")
    for i, t in enumerate(ranked[:12]):
        b, an, s, f = score(topics, vecs, q, t)
        print("  %2d %-22s base=%.6f anc=%.6f sib=%.6f final=%.6f" % (i + 1, t, b, an, s, f))
    print("top-10 by base cosine:", sorted(topics, key=lambda t: (-cos(q, vecs[t]), t))[:10])
