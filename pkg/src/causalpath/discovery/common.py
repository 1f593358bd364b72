"""Shared machinery for the discovery algorithms: configuration, input
normalization, the order-independent skeleton phase, and knowledge-aware
orientation helpers."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from itertools import combinations

from ..data import CorrelationMatrix, Dataset, pearson_matrix
from ..graph import ARROW, TAIL, MixedGraph, apply_meek_rules
from ..independence import FisherZTest
from ..score import BicScorer

logger = logging.getLogger(__name__)


class DiscoveryError(ValueError):
    pass


@dataclass
class DiscoveryConfig:
    alpha: float = 0.05
    max_cond_size: int | None = None
    penalty_discount: float = 1.0
    prune_threshold: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DiscoveryError("alpha must lie in (0, 1)")
        if self.penalty_discount <= 0:
            raise DiscoveryError("penalty_discount must be positive")

    def to_json_dict(self):
        return {
            "alpha": self.alpha,
            "max_cond_size": self.max_cond_size,
            "penalty_discount": self.penalty_discount,
            "prune_threshold": self.prune_threshold,
            "seed": self.seed,
        }


def as_citester(source, cfg):
    """Normalize a CI-test source: a tester passes through, a correlation
    matrix gets Fisher-z, a dataset gets Fisher-z on Pearson correlations."""
    if callable(source) and hasattr(source, "nodes"):
        return source
    if isinstance(source, CorrelationMatrix):
        return FisherZTest(source, cfg.alpha)
    if isinstance(source, Dataset):
        return FisherZTest(pearson_matrix(source), cfg.alpha)
    raise DiscoveryError(f"cannot build a CI test from {type(source).__name__}")


def as_scorer(source, cfg):
    if isinstance(source, BicScorer):
        return source
    if isinstance(source, CorrelationMatrix):
        return BicScorer(source, cfg.penalty_discount)
    if isinstance(source, Dataset):
        return BicScorer(pearson_matrix(source), cfg.penalty_discount)
    raise DiscoveryError(f"cannot build a scorer from {type(source).__name__}")


def stable_skeleton(tester, cfg, bk):
    """Order-independent skeleton search (deletions within a depth level use
    the level-start adjacency sets). Returns the undirected graph and the
    recorded separating sets keyed by frozen node pairs.

    Knowledge: pairs required in either direction are never tested away;
    forbidden pairs are NOT pre-removed (only tests delete edges).
    """
    nodes = sorted(tester.nodes)
    g = MixedGraph(nodes, "cpdag")
    for a, b in combinations(nodes, 2):
        g.add_undirected(a, b)
    sepsets: dict[frozenset, set] = {}
    depth = 0
    while True:
        frozen = {v: set(g.adjacent(v)) for v in nodes}
        enough = False
        for x in nodes:
            for y in sorted(frozen[x]):
                if not g.has_edge(x, y):
                    continue
                if bk.is_required(x, y) or bk.is_required(y, x):
                    continue
                candidates = sorted(frozen[x] - {y})
                if len(candidates) < depth:
                    continue
                enough = True
                for zs in combinations(candidates, depth):
                    if tester(x, y, zs).independent:
                        g.remove_edge(x, y)
                        sepsets[frozenset((x, y))] = set(zs)
                        break
        depth += 1
        if not enough:
            break
        if cfg.max_cond_size is not None and depth > cfg.max_cond_size:
            break
    return g, sepsets


def orient_by_knowledge(g, bk, conflicts):
    """Orient undirected edges forced by required/forbidden pairs or tiers.

    A pair forbidden in both directions that survived the skeleton stays
    undirected and is reported as a conflict.
    """
    if bk.is_empty():
        return
    for a, b, ma, mb in g.edges():
        if (ma, mb) != (TAIL, TAIL):
            continue
        req_ab, req_ba = bk.is_required(a, b), bk.is_required(b, a)
        forb_ab, forb_ba = bk.is_forbidden(a, b), bk.is_forbidden(b, a)
        if req_ab:
            g.orient(a, b)
        elif req_ba:
            g.orient(b, a)
        elif forb_ab and forb_ba:
            msg = f"edge {a}-{b} is forbidden in both directions but survived the tests"
            conflicts.append(msg)
            logger.warning(msg)
        elif forb_ab:
            g.orient(b, a)
        elif forb_ba:
            g.orient(a, b)


def orient_colliders(g, sepsets, bk, conflicts):
    """Orient unshielded triples x - z - y with z outside sepset(x, y) as
    x -> z <- y, one arrowhead at a time under knowledge/conflict guards."""
    for z in sorted(g.nodes):
        nbrs = g.adjacent(z)
        for x, y in combinations(nbrs, 2):
            if g.has_edge(x, y):
                continue
            key = frozenset((x, y))
            if key not in sepsets or z in sepsets[key]:
                continue
            for u in (x, y):
                if g.is_directed(u, z):
                    continue
                if g.is_directed(z, u):
                    msg = f"collider {x}->{z}<-{y}: conflicts with existing {z}->{u}"
                    conflicts.append(msg)
                    logger.warning(msg)
                    continue
                if bk.is_forbidden(u, z):
                    msg = f"collider arrowhead {u}->{z} forbidden by knowledge; skipped"
                    conflicts.append(msg)
                    logger.warning(msg)
                    continue
                g.orient(u, z)


def finish_record(record, algorithm, cfg, bk, graph, started, **extra):
    """Fill the per-run JSON record in place (config, knowledge digest, edge
    list, counters, wall time)."""
    if record is None:
        return None
    record.update({
        "algorithm": algorithm,
        "config": cfg.to_json_dict(),
        "knowledge": bk.digest(),
        "nodes": list(graph.nodes),
        "edges": graph.to_json_dict()["edges"],
        "n_edges": graph.edge_count,
        "wall_time_ms": round((time.perf_counter() - started) * 1000.0, 3),
    })
    record.update(extra)
    return record


def meek_close(g, bk, conflicts):
    out = apply_meek_rules(g, None if bk.is_empty() else bk, conflicts)
    out.kind = "cpdag"
    return out
