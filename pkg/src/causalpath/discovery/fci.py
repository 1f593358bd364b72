"""FCI: constraint-based search for a partial ancestral graph.

The skeleton phase is shared with PC-stable; possible-d-separation pruning
then removes edges that only a non-adjacent conditioning set can separate.
Marks are reset to circles, unshielded colliders re-oriented, and the
standard final orientation rules applied to a fixpoint: R1-R3 plus the
discriminating-path rule. Completeness-grade augmentations (selection-bias
and tail rules) are intentionally out of scope and noted in run records.
"""
from __future__ import annotations

import logging
import time
from itertools import combinations

from ..graph import ARROW, CIRCLE, TAIL, MixedGraph, _bk
from .common import DiscoveryConfig, as_citester, finish_record, stable_skeleton

logger = logging.getLogger(__name__)


def _circle_graph(skeleton):
    pag = MixedGraph(skeleton.nodes, "pag")
    for a, b, _, _ in skeleton.edges():
        pag.add_edge(a, b, CIRCLE, CIRCLE)
    return pag


def _set_mark(pag, node, other, mark, conflicts, reason):
    """Orient a circle endpoint; never overwrite a committed tail/arrow."""
    cur = pag.mark_at(node, other)
    if cur == mark:
        return False
    if cur != CIRCLE:
        msg = f"{reason}: endpoint {node} on {node}-{other} already {cur}; skipped"
        conflicts.append(msg)
        logger.warning(msg)
        return False
    pag.set_mark(node, other, mark)
    return True


def _orient_bk(pag, bk, conflicts):
    if bk.is_empty():
        return
    for a, b, _, _ in pag.edges():
        for u, v in ((a, b), (b, a)):
            if bk.is_required(u, v):
                _set_mark(pag, u, v, TAIL, conflicts, "knowledge-required")
                _set_mark(pag, v, u, ARROW, conflicts, "knowledge-required")
        for u, v in ((a, b), (b, a)):
            # u may not cause v: arrowhead at u says u is no ancestor of v
            if bk.is_forbidden(u, v) and not bk.is_required(v, u):
                _set_mark(pag, u, v, ARROW, conflicts, "knowledge-forbidden")


def _orient_colliders(pag, sepsets, conflicts):
    for z in sorted(pag.nodes):
        for x, y in combinations(pag.adjacent(z), 2):
            if pag.has_edge(x, y):
                continue
            key = frozenset((x, y))
            if key not in sepsets or z in sepsets[key]:
                continue
            _set_mark(pag, z, x, ARROW, conflicts, "collider")
            _set_mark(pag, z, y, ARROW, conflicts, "collider")


def possible_d_sep(pag, x):
    """Nodes reachable from x along paths whose interior vertices are either
    colliders on the path or part of a triangle with their path neighbors."""
    out = set()
    seen = set()
    stack = [(x, nbr) for nbr in pag.adjacent(x)]
    while stack:
        prev, cur = stack.pop()
        if (prev, cur) in seen:
            continue
        seen.add((prev, cur))
        out.add(cur)
        for nxt in pag.adjacent(cur):
            if nxt in (prev, cur):
                continue
            collider = pag.mark_at(cur, prev) == ARROW and pag.mark_at(cur, nxt) == ARROW
            triangle = pag.has_edge(prev, nxt)
            if collider or triangle:
                stack.append((cur, nxt))
    out.discard(x)
    return out


def _pds_prune(pag, tester, cfg, bk, sepsets):
    """Second skeleton pass: try conditioning sets drawn from possible-d-sep."""
    removed = 0
    for a, b, _, _ in list(pag.edges()):
        if not pag.has_edge(a, b):
            continue
        if bk.is_required(a, b) or bk.is_required(b, a):
            continue
        separated = False
        for x, y in ((a, b), (b, a)):
            pds = sorted(possible_d_sep(pag, x) - {x, y})
            limit = len(pds) if cfg.max_cond_size is None else min(len(pds), cfg.max_cond_size)
            for size in range(1, limit + 1):
                for zs in combinations(pds, size):
                    if tester(x, y, zs).independent:
                        pag.remove_edge(x, y)
                        sepsets[frozenset((x, y))] = set(zs)
                        separated = True
                        removed += 1
                        break
                if separated:
                    break
            if separated:
                break
    return removed


def _rule1(pag, conflicts, bk):
    changed = False
    for b in sorted(pag.nodes):
        for a in pag.adjacent(b):
            if pag.mark_at(b, a) != ARROW:
                continue
            for c in pag.adjacent(b):
                if c == a or pag.has_edge(a, c):
                    continue
                if pag.mark_at(b, c) == CIRCLE:
                    if bk.is_forbidden(b, c):
                        conflicts.append(f"rule1: {b}->{c} forbidden; skipped")
                        continue
                    ch1 = _set_mark(pag, b, c, TAIL, conflicts, "rule1")
                    ch2 = _set_mark(pag, c, b, ARROW, conflicts, "rule1")
                    changed |= ch1 or ch2
    return changed


def _rule2(pag, conflicts, bk):
    changed = False
    for a in sorted(pag.nodes):
        for c in pag.adjacent(a):
            if pag.mark_at(c, a) != CIRCLE:
                continue
            for b in pag.adjacent(a):
                if b == c or not pag.has_edge(b, c):
                    continue
                ab_dir = pag.is_directed(a, b)
                bc_dir = pag.is_directed(b, c)
                ab_arrow = pag.mark_at(b, a) == ARROW
                bc_arrow = pag.mark_at(c, b) == ARROW
                if (ab_dir and bc_arrow) or (ab_arrow and bc_dir):
                    changed |= _set_mark(pag, c, a, ARROW, conflicts, "rule2")
    return changed


def _rule3(pag, conflicts, bk):
    changed = False
    for b in sorted(pag.nodes):
        into_b = [u for u in pag.adjacent(b) if pag.mark_at(b, u) == ARROW]
        for a, c in combinations(sorted(into_b), 2):
            if pag.has_edge(a, c):
                continue
            for d in sorted(pag.nodes):
                if d in (a, b, c):
                    continue
                if not (pag.has_edge(a, d) and pag.has_edge(c, d) and pag.has_edge(d, b)):
                    continue
                if pag.mark_at(d, a) != CIRCLE or pag.mark_at(d, c) != CIRCLE:
                    continue
                if pag.mark_at(b, d) == CIRCLE:
                    changed |= _set_mark(pag, b, d, ARROW, conflicts, "rule3")
    return changed


def _discriminating_tail(pag, a, b, c):
    """Find d starting a discriminating path <d, ..., a, b, c>, or None.

    Interior vertices must be colliders on the path and parents of c.
    """
    seen = set()
    stack = [(a, b)]
    while stack:
        t, succ = stack.pop()
        for w in sorted(pag.adjacent(t)):
            if w in (succ, b, c):
                continue
            if pag.mark_at(t, w) != ARROW:
                continue
            if not pag.has_edge(w, c):
                return w
            if pag.mark_at(w, t) == ARROW and pag.is_directed(w, c):
                if (w, t) not in seen:
                    seen.add((w, t))
                    stack.append((w, t))
    return None


def _rule4(pag, sepsets, conflicts, bk):
    changed = False
    for c in sorted(pag.nodes):
        for b in pag.adjacent(c):
            if pag.mark_at(b, c) != CIRCLE:
                continue
            for a in pag.adjacent(b):
                if a == c or not pag.has_edge(a, c):
                    continue
                if not pag.is_directed(a, c):
                    continue
                if pag.mark_at(a, b) != ARROW:
                    continue
                d = _discriminating_tail(pag, a, b, c)
                if d is None:
                    continue
                key = frozenset((d, c))
                if b in sepsets.get(key, set()):
                    if bk.is_forbidden(b, c):
                        conflicts.append(f"rule4: {b}->{c} forbidden; skipped")
                        continue
                    ch1 = _set_mark(pag, b, c, TAIL, conflicts, "rule4")
                    ch2 = _set_mark(pag, c, b, ARROW, conflicts, "rule4")
                    changed |= ch1 or ch2
                else:
                    ch1 = _set_mark(pag, b, a, ARROW, conflicts, "rule4")
                    ch2 = _set_mark(pag, b, c, ARROW, conflicts, "rule4")
                    ch3 = _set_mark(pag, c, b, ARROW, conflicts, "rule4")
                    changed |= ch1 or ch2 or ch3
    return changed


def fci(source, cfg=None, bk=None, record=None):
    """Run FCI; returns a PAG (kind="pag") over the tester's variables."""
    cfg = cfg or DiscoveryConfig()
    bk = _bk(bk)
    started = time.perf_counter()
    tester = as_citester(source, cfg)
    conflicts = []

    skeleton, sepsets = stable_skeleton(tester, cfg, bk)
    pag = _circle_graph(skeleton)
    _orient_bk(pag, bk, conflicts)
    _orient_colliders(pag, sepsets, conflicts)

    pruned = _pds_prune(pag, tester, cfg, bk, sepsets)

    # reset to circles and re-orient against the final skeleton/sepsets
    pag = _circle_graph(pag)
    _orient_bk(pag, bk, conflicts)
    _orient_colliders(pag, sepsets, conflicts)

    changed = True
    while changed:
        changed = False
        changed |= _rule1(pag, conflicts, bk)
        changed |= _rule2(pag, conflicts, bk)
        changed |= _rule3(pag, conflicts, bk)
        changed |= _rule4(pag, sepsets, conflicts, bk)

    finish_record(record, "fci", cfg, bk, pag, started,
                  ci_tests=getattr(tester, "calls", None),
                  pds_removed=pruned,
                  conflicts=conflicts,
                  notes="final orientation rules R1-R4 (no completeness augmentations)")
    return pag
