#!/usr/bin/env python3
"""Regenerate the shipped ray sets and their census manifests.

Everything here is computed independently of the Rust library: exact
arithmetic in Q(sqrt r) via Fractions, brute-force clique scans and a plain
backtracking colourability check. The Rust test suite compares its own
results against the manifests written by this script.

    python3 scripts/census_oracle.py [--check]
"""

import itertools
import json
import sys
from fractions import Fraction
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"


class Surd:
    """a + b*sqrt(r) with rational a, b and a fixed radicand r."""

    def __init__(self, a, b=0, r=2):
        self.a, self.b, self.r = Fraction(a), Fraction(b), r

    def __add__(self, o):
        return Surd(self.a + o.a, self.b + o.b, self.r)

    def __mul__(self, o):
        return Surd(self.a * o.a + self.b * o.b * self.r, self.a * o.b + self.b * o.a, self.r)

    def is_zero(self):
        return self.a == 0 and self.b == 0

    def literal(self):
        def q(x):
            return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

        if self.b == 0:
            return q(self.a)
        surd = ("" if abs(self.b) == 1 else q(abs(self.b))) + f"√{self.r}"
        if self.a == 0:
            return ("-" if self.b < 0 else "") + surd
        return q(self.a) + ("-" if self.b < 0 else "+") + surd


def dot(u, v):
    acc = Surd(0, 0, u[0].r)
    for x, y in zip(u, v):
        acc = acc + x * y
    return acc


def peres33():
    s2 = Surd(0, 1)
    vals = {0: [Surd(0)], 1: [Surd(1), Surd(-1)], 2: [s2, Surd(0, -1)]}
    patterns = {(0, 0, 1), (0, 1, 1), (1, 1, 2), (0, 1, 2)}
    rays, seen = [], set()
    for sq in itertools.product([0, 1, 2], repeat=3):
        if tuple(sorted(sq)) not in patterns:
            continue
        for comps in itertools.product(*(vals[s] for s in sq)):
            first = next(c for c in comps if not c.is_zero())
            sign = 1 if (first.a > 0 or (first.a == 0 and first.b > 0)) else -1
            canon = tuple((c.a * sign, c.b * sign) for c in comps)
            if canon in seen:
                continue
            seen.add(canon)
            rays.append([Surd(a, b) for a, b in canon])
    assert len(rays) == 33, len(rays)
    return rays


def cabello18():
    bases = [
        [(0, 0, 0, 1), (0, 0, 1, 0), (1, 1, 0, 0), (1, -1, 0, 0)],
        [(0, 0, 0, 1), (0, 1, 0, 0), (1, 0, 1, 0), (1, 0, -1, 0)],
        [(1, -1, 1, -1), (1, -1, -1, 1), (1, 1, 0, 0), (0, 0, 1, 1)],
        [(1, -1, 1, -1), (1, 1, 1, 1), (1, 0, -1, 0), (0, 1, 0, -1)],
        [(0, 0, 1, 0), (0, 1, 0, 0), (1, 0, 0, 1), (1, 0, 0, -1)],
        [(1, -1, -1, 1), (1, 1, 1, 1), (1, 0, 0, -1), (0, 1, -1, 0)],
        [(1, 1, -1, 1), (1, 1, 1, -1), (1, -1, 0, 0), (0, 0, 1, 1)],
        [(1, 1, -1, 1), (-1, 1, 1, 1), (1, 0, 1, 0), (0, 1, 0, -1)],
        [(1, 1, 1, -1), (-1, 1, 1, 1), (1, 0, 0, 1), (0, 1, -1, 0)],
    ]
    rays = []
    for b in bases:
        for v in b:
            if v not in rays:
                rays.append(v)
    assert len(rays) == 18
    return [[Surd(x) for x in v] for v in rays]


def basis3():
    return [[Surd(int(i == j)) for j in range(3)] for i in range(3)]


def dim2_pairs():
    pairs = [((1, 0), (0, 1)), ((3, 4), (-4, 3)), ((1, 1), (1, -1)), ((5, 12), (-12, 5))]
    rays = [list(p) for pair in pairs for p in pair] + [[1, 2]]
    return [[Surd(x) for x in v] for v in rays]


def census(rays, dim):
    n = len(rays)
    orth = [[i != j and dot(rays[i], rays[j]).is_zero() for j in range(n)] for i in range(n)]
    cliques = []
    for k in range(1, dim + 1):
        for sub in itertools.combinations(range(n), k):
            if all(orth[a][b] for a, b in itertools.combinations(sub, 2)):
                cliques.append(frozenset(sub))
    maximal = [c for c in cliques if not any(c < d for d in cliques)]
    complete = sorted(sorted(c) for c in maximal if len(c) == dim)
    incomplete = sorted(sorted(c) for c in maximal if len(c) < dim)
    # poset nodes: maximal contexts closed under nonempty pairwise intersection
    nodes = set(frozenset(c) for c in maximal)
    while True:
        extra = {a & b for a in nodes for b in nodes if a != b and a & b} - nodes
        if not extra:
            break
        nodes |= extra
    nodes = sorted(nodes, key=lambda c: (len(c), sorted(c)))
    order = [(a, b) for a in nodes for b in nodes if a < b]
    covers = [(a, b) for a, b in order if not any(a < c < b for c in nodes)]
    pairs = sum(1 for i in range(n) for j in range(i + 1, n) if orth[i][j])
    positive = len(complete)
    negative = set()
    for ctx in complete + incomplete:
        for a, b in itertools.combinations(ctx, 2):
            negative.add((a, b))
    return {
        "orthogonal_pairs": pairs,
        "complete_contexts": complete,
        "maximal_incomplete_contexts": incomplete,
        "presheaf_nodes": len(nodes),
        "presheaf_order_pairs": len(order),
        "presheaf_cover_edges": len(covers),
        "cnf_variables": n,
        "cnf_clauses": positive + len(negative),
    }, orth


def count_colourings(n, complete, incomplete, limit=None):
    """Plain backtracking over rays in index order; returns the number of
    two-valued assignments (stopping at `limit`)."""
    constraints = [(c, True) for c in complete] + [(c, False) for c in incomplete]
    by_var = [[] for _ in range(n)]
    for idx, (c, _) in enumerate(constraints):
        for v in c:
            by_var[v].append(idx)
    value = [None] * n
    found = 0

    def ok(var):
        for idx in by_var[var]:
            c, exact = constraints[idx]
            ones = sum(1 for v in c if value[v] == 1)
            unknown = sum(1 for v in c if value[v] is None)
            if ones > 1:
                return False
            if exact and ones == 0 and unknown == 0:
                return False
        return True

    def go(var):
        nonlocal found
        if limit is not None and found >= limit:
            return
        if var == n:
            found += 1
            return
        for bit in (1, 0):
            value[var] = bit
            if ok(var):
                go(var + 1)
            value[var] = None

    go(0)
    return found


def render_rays(name, dim, rays, comment):
    lines = [f"# {name}: {comment}", f"rays {dim} exact {len(rays)}"]
    for i, v in enumerate(rays):
        lines.append(f"v{i + 1}: " + " ".join(c.literal() for c in v))
    return "\n".join(lines) + "\n"


def main():
    check = "--check" in sys.argv
    sets = [
        ("basis3", 3, basis3(), "standard basis of dimension 3"),
        ("dim2_pairs", 2, dim2_pairs(), "orthogonal ray pairs in dimension 2 plus one unpaired ray"),
        ("peres33", 3, peres33(), "33 rays with components in {0, ±1, ±√2}"),
        ("cabello18", 4, cabello18(), "18 rays in nine bases, each ray in exactly two"),
    ]
    status = 0
    for name, dim, rays, comment in sets:
        info, _ = census(rays, dim)
        total = count_colourings(len(rays), info["complete_contexts"], info["maximal_incomplete_contexts"],
                                 limit=None if len(rays) <= 12 else 1)
        manifest = {
            "name": name,
            "file": f"{name}.rays",
            "dim": dim,
            "mode": "exact",
            "ray_count": len(rays),
            **info,
            "expected_verdict": "SAT" if total else "UNSAT",
        }
        if len(rays) <= 12:
            manifest["witness_count"] = total
        rays_path = DATA / f"{name}.rays"
        man_path = DATA / f"{name}.manifest.json"
        man_text = json.dumps(manifest, indent=2) + "\n"
        rays_text = render_rays(name, dim, rays, comment)
        if check:
            if rays_path.read_text() != rays_text:
                print(f"{name}: ray file differs from the generated set")
                status = 1
            if man_path.read_text() != man_text:
                print(f"{name}: manifest differs from recomputed census")
                status = 1
            continue
        rays_path.write_text(rays_text)
        man_path.write_text(man_text)
        print(f"{name}: {len(rays)} rays, {len(info['complete_contexts'])} complete contexts, {manifest['expected_verdict']}")
    sys.exit(status)


if __name__ == "__main__":
    main()
