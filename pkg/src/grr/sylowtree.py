"""The Sylow 2-subgroup of the symmetric group on 2^h letters, realised as
the grading-preserving automorphisms of the full binary tree with 2^h leaves,
and its orbits on multisets of leaves.

Leaves are numbered 1..2^h. The node of grading g above leaf i is
(g, (i - 1) >> g); leaves have grading 0 and the root has grading h. The
involution attached to node (g, p) swaps its two child subtrees, which on
leaf labels flips bit g - 1 of (i - 1).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .polyring import Ring, SparsePoly

MAX_ENUM_HEIGHT = 16
MAX_ELEMENT_HEIGHT = 3
MAX_POLY_HEIGHT = 4


class ResourceCapExceeded(ValueError):
    pass


# keys


@dataclass(frozen=True)
class Leaf:
    m: int

    def to_json(self):
        return {"m": self.m}


@dataclass(frozen=True)
class Node:
    depth: int
    children: tuple

    def to_json(self):
        return {"d": self.depth, "c": [c.to_json() for c in self.children]}


OrbitKey = Leaf | Node


def key_string(key) -> str:
    return json.dumps(key.to_json(), sort_keys=True, separators=(",", ":"))


def key_from_json(data):
    if "m" in data:
        return Leaf(int(data["m"]))
    return Node(int(data["d"]), tuple(key_from_json(c) for c in data["c"]))


def _node(depth, a, b):
    return Node(depth, tuple(sorted((a, b), key=key_string)))


def key_cardinality(key) -> int:
    if isinstance(key, Leaf):
        return key.m
    return sum(key_cardinality(c) for c in key.children)


def key_height(key) -> int:
    return 0 if isinstance(key, Leaf) else key.depth


def key_forks(key) -> list:
    """Gradings of the forks of the spanning tree, root first."""
    if isinstance(key, Leaf):
        return []
    return [key.depth] + [g for c in key.children for g in key_forks(c)]


# multisets


def make_multiset(entries, h: int) -> Counter:
    """A leaf multiset from an iterable of leaf indices or a mapping index -> multiplicity."""
    if isinstance(entries, dict):
        ms = Counter({int(i): int(c) for i, c in entries.items() if c})
    else:
        ms = Counter(int(i) for i in entries)
    m = 2 ** h
    for i, c in ms.items():
        if not 1 <= i <= m:
            raise ValueError(f"leaf index {i} out of range 1..{m}")
        if c < 0:
            raise ValueError("negative multiplicity")
    return ms


def orbit_key(S, h: int):
    """Canonical key of the orbit of the leaf multiset S."""
    ms = make_multiset(S, h)
    if not ms:
        raise ValueError("empty multiset")

    def build(g, p):
        if g == 0:
            c = ms.get(p + 1, 0)
            return Leaf(c) if c else None
        left, right = build(g - 1, 2 * p), build(g - 1, 2 * p + 1)
        if left is None:
            return right
        if right is None:
            return left
        return _node(g, left, right)

    return build(h, 0)


@lru_cache(maxsize=None)
def _keys(delta: int, maxdepth: int) -> tuple:
    out = {key_string(Leaf(delta)): Leaf(delta)}
    for g in range(1, maxdepth + 1):
        for da in range(1, delta // 2 + 1):
            db = delta - da
            A = _keys(da, g - 1)
            B = _keys(db, g - 1)
            for a in A:
                for b in B:
                    k = _node(g, a, b)
                    out.setdefault(key_string(k), k)
    return tuple(out[s] for s in sorted(out))


def representative(key, h: int) -> Counter:
    if key_height(key) > h:
        raise ValueError("key is taller than the tree")
    out = Counter()

    def place(k, offset):
        if isinstance(k, Leaf):
            out[offset + 1] += k.m
            return
        place(k.children[0], offset)
        place(k.children[1], offset + 2 ** (k.depth - 1))

    place(key, 0)
    return out


@dataclass
class OrbitEntry:
    key: object
    representative: Counter


def enumerate_orbits(delta: int, h: int) -> list[OrbitEntry]:
    """All orbits of multisets of cardinality delta on 2^h leaves."""
    if delta < 1 or h < 0:
        raise ValueError("need delta >= 1 and h >= 0")
    if h > MAX_ENUM_HEIGHT:
        raise ResourceCapExceeded(f"height {h} above the enumeration cap {MAX_ENUM_HEIGHT}")
    return [OrbitEntry(k, representative(k, h)) for k in _keys(delta, h)]


def orbit_count(delta: int, h: int) -> int:
    return len(_keys(delta, h))


def fitted_growth_constant(delta: int, heights) -> float:
    """Least c with count(delta, h) <= c h^(delta - 1) over the given heights."""
    return max(orbit_count(delta, h) / h ** (delta - 1) for h in heights)


# the group


def generators(h: int) -> list[tuple]:
    """Node-swap involutions as zero-based permutations of range(2^h)."""
    m = 2 ** h
    out = []
    for g in range(1, h + 1):
        for p in range(2 ** (h - g)):
            perm = list(range(m))
            for i in range(p << g, (p + 1) << g):
                perm[i] = i ^ (1 << (g - 1))
            out.append(tuple(perm))
    return out


def group_order(h: int) -> int:
    return 2 ** (2 ** h - 1)


def group_elements(h: int) -> list[tuple]:
    """Closure of the generators under composition (brute force, h <= 3)."""
    if h > MAX_ELEMENT_HEIGHT:
        raise ResourceCapExceeded(f"element listing is capped at height {MAX_ELEMENT_HEIGHT}")
    gens = generators(h)
    ident = tuple(range(2 ** h))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for s in frontier:
            for g in gens:
                t = tuple(g[s[i]] for i in range(len(s)))
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
    return sorted(seen)


def _apply(perm, ms: Counter) -> Counter:
    return Counter({perm[i - 1] + 1: c for i, c in ms.items()})


def _freeze(ms: Counter):
    return tuple(sorted(ms.items()))


def orbit_of(S, h: int, elements=None) -> list[Counter]:
    """Distinct images of S, by closure under the generators (or an explicit element list)."""
    ms = make_multiset(S, h)
    if elements is not None:
        imgs = {_freeze(_apply(g, ms)) for g in elements}
        return [Counter(dict(t)) for t in sorted(imgs)]
    gens = generators(h)
    seen = {_freeze(ms)}
    frontier = [ms]
    while frontier:
        nxt = []
        for cur in frontier:
            for g in gens:
                img = _apply(g, cur)
                f = _freeze(img)
                if f not in seen:
                    seen.add(f)
                    nxt.append(img)
        frontier = nxt
    return [Counter(dict(t)) for t in sorted(seen)]


def orbit_size(key, h: int) -> int:
    """Number of distinct multisets in the orbit, from the key alone."""
    if isinstance(key, Leaf):
        return 2 ** h
    a, b = key.children
    inner = orbit_size(a, key.depth - 1) * orbit_size(b, key.depth - 1)
    if a != b:
        inner *= 2
    return 2 ** (h - key.depth) * inner


def monomial_of(ms: Counter, nvars: int, ring: Ring = Ring.QQ) -> SparsePoly:
    e = [0] * nvars
    for i, c in ms.items():
        e[i - 1] = 2 * c
    return SparsePoly(ring, nvars, {tuple(e): 1})


def orbit_polynomial(U, h: int, ring: Ring = Ring.QQ) -> SparsePoly:
    """g_U: the sum of y^(2S) over the distinct images S of U (each image counted once)."""
    if h > MAX_POLY_HEIGHT:
        raise ResourceCapExceeded(f"dense orbit polynomials are capped at height {MAX_POLY_HEIGHT}")
    m = 2 ** h
    terms = {}
    for img in orbit_of(U, h):
        e = [0] * m
        for i, c in img.items():
            e[i - 1] = 2 * c
        terms[tuple(e)] = 1
    return SparsePoly(ring, m, terms)


def is_invariant(f: SparsePoly, h: int, tol: float | None = None) -> bool:
    if f.nvars != 2 ** h:
        raise ValueError(f"expected {2 ** h} variables, got {f.nvars}")
    for g in generators(h):
        img = f.permute_vars(g)
        if tol is None:
            if img != f:
                return False
        else:
            diff = img - f
            scale = max(f.coeff_norm(), 1.0)
            if diff.coeff_norm() > tol * scale:
                return False
    return True


# invariant coefficient systems


@dataclass
class InvariantCoefficients:
    h: int
    delta: int
    values: dict

    def __post_init__(self):
        for key in self.values:
            if key_cardinality(key) != self.delta or key_height(key) > self.h:
                raise ValueError(f"key {key_string(key)} does not fit (h={self.h}, delta={self.delta})")

    def coefficient(self, S) -> float:
        return self.values.get(orbit_key(S, self.h), 0)

    def polynomial(self, ring: Ring = Ring.RR) -> SparsePoly:
        out = SparsePoly.zero(ring, 2 ** self.h)
        for key, a in self.values.items():
            out = out + orbit_polynomial(representative(key, self.h), self.h, ring).scale(a)
        return out

    def to_json(self):
        return {"h": self.h, "delta": self.delta,
                "values": [[k.to_json(), v] for k, v in sorted(self.values.items(), key=lambda kv: key_string(kv[0]))]}


def random_invariant_coefficients(h: int, delta: int, rng: np.random.Generator) -> InvariantCoefficients:
    keys = [e.key for e in enumerate_orbits(delta, h)]
    return InvariantCoefficients(h, delta, {k: float(rng.standard_normal()) for k in keys})


def coefficients_factor_through_keys(f: SparsePoly, h: int) -> bool:
    """True when f = sum a_S y^(2S) with a_S depending only on the orbit of S."""
    seen = {}
    for mono, c in f.terms.items():
        if any(a % 2 for a in mono):
            return False
        ms = Counter({i + 1: a // 2 for i, a in enumerate(mono) if a})
        k = key_string(orbit_key(ms, h))
        seen.setdefault(k, []).append((ms, c))
    for k, items in seen.items():
        key = key_from_json(json.loads(k))
        if len(items) != orbit_size(key, h):
            return False
        if len({c for _, c in items}) > 1:
            return False
    return True
