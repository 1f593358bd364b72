"""Mixed causal graphs with endpoint marks.

A single graph class covers DAGs, CPDAGs (equivalence classes), PAGs and
weighted DAGs. Every edge is stored once per unordered pair with one mark
("tail", "arrow" or "circle") at each endpoint:

    a -> b      tail at a, arrow at b
    a -- b      tail at both ends (undirected)
    a <-> b     arrow at both ends (bidirected)
    a o-> b     circle at a, arrow at b

All operations are pure: they copy the input graph and never mutate shared
state, so graphs can be used concurrently once built.
"""
from __future__ import annotations

import json
import logging
from itertools import combinations

logger = logging.getLogger(__name__)

TAIL = "tail"
ARROW = "arrow"
CIRCLE = "circle"
MARKS = (TAIL, ARROW, CIRCLE)

GRAPH_KINDS = ("dag", "cpdag", "pag", "weighted-dag")


class GraphError(ValueError):
    """Structural error in a graph or graph operation."""


class NoExtensionError(GraphError):
    """A partially directed graph admits no consistent DAG extension."""

    def __init__(self, node, message=None):
        self.node = node
        super().__init__(message or f"no consistent extension; obstructed at node {node!r}")


def _pair(a, b):
    """Canonical (lexicographic) unordered pair key."""
    return (a, b) if a <= b else (b, a)


class MixedGraph:
    """Node set plus edges with endpoint marks; at most one edge per pair."""

    def __init__(self, nodes, kind="dag"):
        nodes = list(nodes)
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node names")
        if kind not in GRAPH_KINDS:
            raise GraphError(f"unknown graph kind {kind!r}")
        self.nodes = nodes
        self.kind = kind
        self._node_set = set(nodes)
        # pair (a,b) with a < b -> [mark_at_a, mark_at_b]
        self._edges: dict[tuple, list] = {}
        self._weights: dict[tuple, float] = {}
        self._nbrs: dict[str, set] = {v: set() for v in nodes}

    # -- construction ---------------------------------------------------

    def _check_node(self, v):
        if v not in self._node_set:
            raise GraphError(f"unknown node {v!r}")

    def add_edge(self, a, b, mark_a=TAIL, mark_b=ARROW, weight=None):
        self._check_node(a)
        self._check_node(b)
        if a == b:
            raise GraphError(f"self loop at {a!r}")
        if mark_a not in MARKS or mark_b not in MARKS:
            raise GraphError(f"bad marks ({mark_a!r}, {mark_b!r})")
        key = _pair(a, b)
        if key in self._edges:
            raise GraphError(f"edge {a!r}-{b!r} already present")
        marks = [mark_a, mark_b] if key == (a, b) else [mark_b, mark_a]
        self._edges[key] = marks
        self._nbrs[a].add(b)
        self._nbrs[b].add(a)
        if weight is not None:
            self._weights[key] = float(weight)

    def add_directed(self, a, b, weight=None):
        self.add_edge(a, b, TAIL, ARROW, weight)

    def add_undirected(self, a, b):
        self.add_edge(a, b, TAIL, TAIL)

    def add_bidirected(self, a, b):
        self.add_edge(a, b, ARROW, ARROW)

    def remove_edge(self, a, b):
        key = _pair(a, b)
        if key not in self._edges:
            raise GraphError(f"no edge {a!r}-{b!r}")
        del self._edges[key]
        self._weights.pop(key, None)
        self._nbrs[a].discard(b)
        self._nbrs[b].discard(a)

    # -- queries ---------------------------------------------------------

    def has_edge(self, a, b):
        return _pair(a, b) in self._edges

    def mark_at(self, node, other):
        """Mark at `node`'s end of the edge between node and other."""
        key = _pair(node, other)
        marks = self._edges.get(key)
        if marks is None:
            raise GraphError(f"no edge {node!r}-{other!r}")
        return marks[0] if key[0] == node else marks[1]

    def set_mark(self, node, other, mark):
        if mark not in MARKS:
            raise GraphError(f"bad mark {mark!r}")
        key = _pair(node, other)
        marks = self._edges.get(key)
        if marks is None:
            raise GraphError(f"no edge {node!r}-{other!r}")
        marks[0 if key[0] == node else 1] = mark

    def orient(self, a, b):
        """Turn the existing a-b edge into a -> b."""
        self.set_mark(a, b, TAIL)
        self.set_mark(b, a, ARROW)

    def is_directed(self, a, b):
        return self.has_edge(a, b) and self.mark_at(a, b) == TAIL and self.mark_at(b, a) == ARROW

    def is_undirected(self, a, b):
        return self.has_edge(a, b) and self.mark_at(a, b) == TAIL and self.mark_at(b, a) == TAIL

    def is_bidirected(self, a, b):
        return self.has_edge(a, b) and self.mark_at(a, b) == ARROW and self.mark_at(b, a) == ARROW

    def adjacent(self, v):
        self._check_node(v)
        return sorted(self._nbrs[v])

    def parents(self, v):
        return [u for u in self.adjacent(v) if self.is_directed(u, v)]

    def children(self, v):
        return [u for u in self.adjacent(v) if self.is_directed(v, u)]

    def undirected_neighbors(self, v):
        return [u for u in self.adjacent(v) if self.is_undirected(v, u)]

    def edges(self):
        """Sorted list of (a, b, mark_at_a, mark_at_b) with a < b."""
        out = []
        for key in sorted(self._edges):
            m = self._edges[key]
            out.append((key[0], key[1], m[0], m[1]))
        return out

    def directed_edges(self):
        out = []
        for a, b, ma, mb in self.edges():
            if ma == TAIL and mb == ARROW:
                out.append((a, b))
            elif ma == ARROW and mb == TAIL:
                out.append((b, a))
        return out

    @property
    def edge_count(self):
        return len(self._edges)

    def weight(self, a, b):
        key = _pair(a, b)
        if key not in self._weights:
            raise GraphError(f"no weight on edge {a!r}-{b!r}")
        return self._weights[key]

    def set_weight(self, a, b, w):
        key = _pair(a, b)
        if key not in self._edges:
            raise GraphError(f"no edge {a!r}-{b!r}")
        self._weights[key] = float(w)

    def weights(self):
        """Dict mapping directed (parent, child) pairs to weights."""
        out = {}
        for a, b in self.directed_edges():
            key = _pair(a, b)
            if key in self._weights:
                out[(a, b)] = self._weights[key]
        return out

    def ancestors(self, v):
        """All u with a directed path u -> ... -> v (v excluded)."""
        seen = set()
        stack = list(self.parents(v))
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(self.parents(u))
        return seen

    def descendants(self, v):
        seen = set()
        stack = list(self.children(v))
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(self.children(u))
        return seen

    # -- plumbing ----------------------------------------------------------

    def copy(self, kind=None):
        g = MixedGraph(self.nodes, kind or self.kind)
        g._edges = {k: list(v) for k, v in self._edges.items()}
        g._weights = dict(self._weights)
        g._nbrs = {v: set(s) for v, s in self._nbrs.items()}
        return g

    def __eq__(self, other):
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return (
            self._node_set == other._node_set
            and {k: tuple(v) for k, v in self._edges.items()}
            == {k: tuple(v) for k, v in other._edges.items()}
            and self._weights == other._weights
        )

    def __hash__(self):
        return hash(
            (
                frozenset(self._node_set),
                frozenset((k, tuple(v)) for k, v in self._edges.items()),
            )
        )

    def __repr__(self):
        arrow = {(TAIL, ARROW): "->", (ARROW, TAIL): "<-", (TAIL, TAIL): "--",
                 (ARROW, ARROW): "<->", (CIRCLE, CIRCLE): "o-o", (CIRCLE, ARROW): "o->",
                 (ARROW, CIRCLE): "<-o", (TAIL, CIRCLE): "-o", (CIRCLE, TAIL): "o-"}
        es = ", ".join(f"{a}{arrow[(ma, mb)]}{b}" for a, b, ma, mb in self.edges())
        return f"MixedGraph({self.kind}, {len(self.nodes)} nodes, [{es}])"

    def to_json_dict(self):
        edges = []
        for a, b, ma, mb in self.edges():
            e = {"a": a, "b": b, "mark_a": ma, "mark_b": mb}
            key = _pair(a, b)
            if key in self._weights:
                e["weight"] = self._weights[key]
            edges.append(e)
        return {"kind": self.kind, "nodes": list(self.nodes), "edges": edges}

    def to_json(self, indent=2):
        return json.dumps(self.to_json_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_json_dict(cls, d):
        g = cls(d["nodes"], d.get("kind", "dag"))
        for e in d["edges"]:
            g.add_edge(e["a"], e["b"], e.get("mark_a", TAIL), e.get("mark_b", ARROW),
                       e.get("weight"))
        return g

    @classmethod
    def from_json(cls, text):
        return cls.from_json_dict(json.loads(text))

    def validate(self):
        """Check the invariants of the declared kind; raise GraphError on failure."""
        if self.kind in ("dag", "weighted-dag"):
            for a, b, ma, mb in self.edges():
                if {ma, mb} != {TAIL, ARROW}:
                    raise GraphError(f"{self.kind} edge {a}-{b} has marks ({ma},{mb})")
            if _has_directed_cycle(self):
                raise GraphError("directed cycle in DAG")
        elif self.kind == "cpdag":
            for a, b, ma, mb in self.edges():
                if CIRCLE in (ma, mb) or (ma, mb) == (ARROW, ARROW):
                    raise GraphError(f"cpdag edge {a}-{b} has marks ({ma},{mb})")
            if _has_directed_cycle(self):
                raise GraphError("directed cycle in CPDAG")
        return self


def _has_directed_cycle(g):
    indeg = {v: 0 for v in g.nodes}
    for _, b in g.directed_edges():
        indeg[b] += 1
    queue = [v for v in g.nodes if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for c in g.children(v):
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen < len(g.nodes)


def is_dag(g):
    """True iff every edge is tail->arrow and the directed graph is acyclic."""
    for a, b, ma, mb in g.edges():
        if {ma, mb} != {TAIL, ARROW}:
            return False
    return not _has_directed_cycle(g)


def d_separated(g, x, y, z=()):
    """Decide whether x and y are d-separated by the set z in the DAG g.

    Uses linear-time reachability over active trails: a path is blocked at a
    non-collider inside z, and at a collider unless the collider or one of its
    descendants is in z.
    """
    if not is_dag(g):
        raise GraphError("d-separation requires a DAG")
    g._check_node(x)
    g._check_node(y)
    zset = set(z)
    for v in zset:
        g._check_node(v)
    if x == y or x in zset or y in zset:
        raise GraphError("x, y must be distinct and disjoint from the conditioning set")

    # z together with all its ancestors: the nodes at which a collider is open
    an_z = set(zset)
    stack = list(zset)
    while stack:
        v = stack.pop()
        for p in g.parents(v):
            if p not in an_z:
                an_z.add(p)
                stack.append(p)

    UP, DOWN = 0, 1  # whether the trail arrived from a child (UP) or parent (DOWN)
    visited = set()
    stack = [(x, UP)]
    while stack:
        v, d = stack.pop()
        if v == y:
            return False
        if (v, d) in visited:
            continue
        visited.add((v, d))
        if d == UP and v not in zset:
            for p in g.parents(v):
                stack.append((p, UP))
            for c in g.children(v):
                stack.append((c, DOWN))
        elif d == DOWN:
            if v not in zset:
                for c in g.children(v):
                    stack.append((c, DOWN))
            if v in an_z:
                for p in g.parents(v):
                    stack.append((p, UP))
    return True


class BackgroundKnowledge:
    """Tier ordering plus explicit forbidden/required directed pairs.

    Edges from a later tier into an earlier tier are forbidden. Explicit
    forbidden/required pairs are directed (cause, effect) tuples.
    """

    def __init__(self, tiers=(), forbidden=(), required=()):
        self.tiers = [frozenset(t) for t in tiers]
        self.forbidden = {tuple(p) for p in forbidden}
        self.required = {tuple(p) for p in required}
        self._tier_index = {}
        for i, tier in enumerate(self.tiers):
            for v in tier:
                if v in self._tier_index:
                    raise GraphError(f"node {v!r} appears in two tiers")
                self._tier_index[v] = i
        self.validate()

    def validate(self):
        bad = self.required & self.forbidden
        if bad:
            raise GraphError(f"edges both required and forbidden: {sorted(bad)}")
        for a, b in self.required:
            if self._violates_tiers(a, b):
                raise GraphError(f"required edge {a}->{b} contradicts tier order")
        # required edges must not force a directed cycle among themselves
        nodes = {v for p in self.required for v in p}
        g = MixedGraph(sorted(nodes))
        for a, b in self.required:
            g.add_directed(a, b)
        if _has_directed_cycle(g):
            raise GraphError("required edges form a directed cycle")
        return self

    def _violates_tiers(self, a, b):
        ta = self._tier_index.get(a)
        tb = self._tier_index.get(b)
        return ta is not None and tb is not None and ta > tb

    def is_forbidden(self, a, b):
        """True iff a directed edge a -> b is disallowed."""
        return (a, b) in self.forbidden or self._violates_tiers(a, b)

    def is_required(self, a, b):
        return (a, b) in self.required

    def is_empty(self):
        return not self.tiers and not self.forbidden and not self.required

    def to_json_dict(self):
        return {
            "tiers": [sorted(t) for t in self.tiers],
            "forbidden": sorted(list(p) for p in self.forbidden),
            "required": sorted(list(p) for p in self.required),
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(d.get("tiers", ()), d.get("forbidden", ()), d.get("required", ()))

    def digest(self):
        """Compact, reproducible summary for run records."""
        return {
            "tiers": [sorted(t) for t in self.tiers],
            "n_forbidden": len(self.forbidden),
            "n_required": len(self.required),
        }


_EMPTY_BK = BackgroundKnowledge()


def _bk(bk):
    return bk if bk is not None else _EMPTY_BK


def _would_cycle(g, a, b):
    """Would orienting a -> b close a directed cycle (a reachable from b)?"""
    return a == b or a in g.descendants(b)


def _try_orient(g, a, b, bk, conflicts, reason):
    """Orient a -> b if knowledge and acyclicity allow it; report otherwise."""
    if g.is_directed(a, b):
        return False
    if bk.is_forbidden(a, b):
        msg = f"{reason}: orientation {a}->{b} forbidden by knowledge; skipped"
        if conflicts is not None:
            conflicts.append(msg)
        logger.warning(msg)
        return False
    if _would_cycle(g, a, b):
        msg = f"{reason}: orientation {a}->{b} would create a cycle; skipped"
        if conflicts is not None:
            conflicts.append(msg)
        logger.warning(msg)
        return False
    g.orient(a, b)
    return True


def apply_meek_rules(g, bk=None, conflicts=None):
    """Close a partially directed graph under the four Meek orientation rules.

    Marks must be tail/arrow only. Orientations forbidden by the knowledge
    are skipped and reported through `conflicts` (a list, if given) and the
    module logger. Returns a new graph; never removes an orientation.
    """
    bk = _bk(bk)
    for a, b, ma, mb in g.edges():
        if CIRCLE in (ma, mb):
            raise GraphError("Meek rules apply to tail/arrow graphs only")
    out = g.copy()
    changed = True
    while changed:
        changed = False
        for a, b, ma, mb in out.edges():
            if (ma, mb) != (TAIL, TAIL):
                continue
            for u, v in ((a, b), (b, a)):
                if _meek_applies(out, u, v):
                    if _try_orient(out, u, v, bk, conflicts, "meek"):
                        changed = True
                        break
            if changed:
                break
    return out


def _meek_applies(g, a, b):
    """Do any of the four Meek rules compel a -> b for the undirected a-b?"""
    adj_b = set(g.adjacent(b))
    # rule 1: c -> a, c and b nonadjacent
    for c in g.parents(a):
        if c != b and c not in adj_b:
            return True
    # rule 2: a -> c -> b
    for c in g.children(a):
        if g.is_directed(c, b):
            return True
    # rule 3: a - c -> b and a - d -> b with c, d nonadjacent
    spokes = [c for c in g.undirected_neighbors(a) if g.is_directed(c, b)]
    for c, d in combinations(spokes, 2):
        if not g.has_edge(c, d):
            return True
    # rule 4: d -> c -> b with a - d undirected, a adjacent to c, d and b nonadjacent
    for c in g.parents(b):
        if c == a or not g.has_edge(a, c):
            continue
        for d in g.parents(c):
            if d != a and d != b and g.is_undirected(a, d) and not g.has_edge(d, b):
                return True
    return False


def cpdag_of(g):
    """The CPDAG (Markov equivalence class) of a DAG: skeleton, v-structures,
    then Meek closure."""
    if not is_dag(g):
        raise GraphError("cpdag_of requires a DAG")
    c = MixedGraph(g.nodes, "cpdag")
    for a, b, _, _ in g.edges():
        c.add_undirected(a, b)
    for v in sorted(g.nodes):
        ps = g.parents(v)
        for x, y in combinations(sorted(ps), 2):
            if not g.has_edge(x, y):
                c.orient(x, v)
                c.orient(y, v)
    c = apply_meek_rules(c)
    c.kind = "cpdag"
    return c


def consistent_extension(g):
    """Orient a CPDAG/PDAG into a DAG with the same skeleton, preserving all
    directed edges and creating no new v-structures.

    Sinks are peeled repeatedly; among valid sinks the lexicographically
    largest node is taken first, which makes the result deterministic.
    Raises NoExtensionError naming an obstructing node if none exists.
    """
    for a, b, ma, mb in g.edges():
        if CIRCLE in (ma, mb) or (ma, mb) == (ARROW, ARROW):
            raise GraphError("consistent_extension needs a tail/arrow partially directed graph")
    out = g.copy(kind="dag")
    remaining = set(g.nodes)
    while remaining:
        sink = None
        for x in sorted(remaining, reverse=True):
            if any(c in remaining for c in out.children(x)):
                continue
            und = [u for u in out.undirected_neighbors(x) if u in remaining]
            adj = [u for u in out.adjacent(x) if u in remaining]
            if all(out.has_edge(u, w) for u in und for w in adj if w != u):
                sink = x
                break
        if sink is None:
            raise NoExtensionError(min(remaining))
        for u in out.undirected_neighbors(sink):
            if u in remaining:
                out.orient(u, sink)
        remaining.remove(sink)
    out.kind = "dag"
    out.validate()
    return out


def structural_hamming_distance(g1, g2):
    """Number of node pairs whose edge presence or endpoint marks differ."""
    if set(g1.nodes) != set(g2.nodes):
        raise GraphError("graphs have different node sets")

    def state(g, a, b):
        if not g.has_edge(a, b):
            return None
        return (g.mark_at(a, b), g.mark_at(b, a))

    count = 0
    for a, b in combinations(sorted(g1.nodes), 2):
        if state(g1, a, b) != state(g2, a, b):
            count += 1
    return count


def simplify_by_weight(g, threshold):
    """Keep exactly the edges with |weight| > threshold."""
    if threshold < 0:
        raise GraphError("threshold must be nonnegative")
    out = MixedGraph(g.nodes, "weighted-dag")
    for a, b in g.directed_edges():
        w = g.weight(a, b)
        if abs(w) > threshold:
            out.add_directed(a, b, weight=w)
    return out


def knowledge_violations(g, bk):
    """Post-hoc audit of a graph against background knowledge.

    Returns human-readable violation strings: definitely directed edges that
    are forbidden, and required edges that are missing or contradicted.
    """
    bk = _bk(bk)
    out = []
    for a, b in g.directed_edges():
        if bk.is_forbidden(a, b):
            out.append(f"forbidden edge {a}->{b} present")
    for a, b in sorted(bk.required):
        if a not in g._node_set or b not in g._node_set:
            continue
        if not g.has_edge(a, b):
            out.append(f"required edge {a}->{b} missing")
        elif g.mark_at(a, b) == ARROW or g.mark_at(b, a) == TAIL:
            out.append(f"required edge {a}->{b} misoriented")
    return out


def _dot_quote(name):
    return '"%s"' % str(name).replace('"', '\\"')


def to_dot(g, name="g"):
    """Graphviz DOT text. Directed edges are plain `a -> b`, undirected edges
    carry dir=none, bidirected dir=both; circle endpoints use odot arrow
    shapes. Weighted edges get a label, penwidth proportional to |weight|,
    blue for positive and red for negative coefficients."""
    lines = [f"digraph {name} {{"]
    for v in g.nodes:
        lines.append(f"  {_dot_quote(v)};")
    shape = {TAIL: "none", ARROW: "normal", CIRCLE: "odot"}
    for a, b, ma, mb in g.edges():
        attrs = []
        if (ma, mb) == (TAIL, ARROW):
            head, tail = a, b
        elif (ma, mb) == (ARROW, TAIL):
            head, tail = b, a
        elif (ma, mb) == (TAIL, TAIL):
            head, tail = a, b
            attrs.append("dir=none")
        elif (ma, mb) == (ARROW, ARROW):
            head, tail = a, b
            attrs.append("dir=both")
        else:
            head, tail = a, b
            attrs.append("dir=both")
            attrs.append(f"arrowtail={shape[ma]}")
            attrs.append(f"arrowhead={shape[mb]}")
        key = _pair(a, b)
        if key in g._weights:
            w = g._weights[key]
            attrs.append(f'label="{w:.3f}"')
            attrs.append(f"penwidth={0.5 + 3.5 * abs(w):.2f}")
            attrs.append(f'color={"blue" if w >= 0 else "red"}')
        attr_text = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {_dot_quote(head)} -> {_dot_quote(tail)}{attr_text};")
    lines.append("}")
    return "\n".join(lines) + "\n"
