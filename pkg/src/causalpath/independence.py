"""Conditional-independence testing backends for constraint-based discovery.

All testers share one calling convention: `tester(x, y, z) -> CiTestResult`
with `tester.nodes` listing the variables it knows about. Results are pure
functions of the inputs, symmetric in (x, y), and therefore safe to evaluate
concurrently. A session log can wrap any tester to record every executed
query for later audit of edge deletions.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .graph import d_separated

logger = logging.getLogger(__name__)

_COND_LIMIT = 1e10  # condition number beyond which a conditioning set is unusable


class IndependenceError(ValueError):
    pass


class SingularConditioningError(IndependenceError):
    """The conditioning submatrix could not be inverted."""

    def __init__(self, x, y, z):
        self.x, self.y, self.z = x, y, tuple(z)
        super().__init__(f"singular conditioning submatrix for ({x}, {y} | {sorted(z)})")


@dataclass
class CiTestResult:
    statistic: float
    p_value: float
    dof_or_condsize: int
    independent: bool
    note: str = ""

    def to_json_dict(self):
        return {
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "dof_or_condsize": int(self.dof_or_condsize),
            "independent": bool(self.independent),
            "note": self.note,
        }


def partial_correlation(c, x, y, z=()):
    """Partial correlation of x and y given z via the precision matrix of the
    (z + {x, y}) submatrix of the correlation matrix c."""
    z = list(z)
    if x in z or y in z or x == y:
        raise IndependenceError("x, y must be distinct and disjoint from z")
    idx = [c.index(x), c.index(y)] + [c.index(v) for v in z]
    sub = c.matrix[np.ix_(idx, idx)]
    if np.linalg.cond(sub) > _COND_LIMIT:
        raise SingularConditioningError(x, y, z)
    try:
        prec = np.linalg.inv(sub)
    except np.linalg.LinAlgError:
        raise SingularConditioningError(x, y, z) from None
    return float(-prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1]))


class FisherZTest:
    """Gaussian CI test: z = sqrt(n - |Z| - 3) * atanh(partial correlation)."""

    def __init__(self, corr, alpha=0.05):
        self.corr = corr
        self.alpha = alpha
        self.nodes = list(corr.names)
        self.calls = 0

    def __call__(self, x, y, z=()):
        self.calls += 1
        z = list(z)
        n = self.corr.n
        if n <= len(z) + 3:
            raise IndependenceError(f"need n > |Z| + 3 (n={n}, |Z|={len(z)})")
        try:
            r = partial_correlation(self.corr, x, y, z)
        except SingularConditioningError:
            # near-singular conditioning: treat as dependent, keep searching
            logger.warning("fisher-z: near-singular conditioning set %s for (%s, %s); "
                           "treated as dependent", sorted(z), x, y)
            return CiTestResult(np.inf, 0.0, len(z), False, note="near-singular")
        if abs(r) >= 1.0:
            return CiTestResult(np.inf, 0.0, len(z), False, note="saturated")
        stat = np.sqrt(n - len(z) - 3) * np.arctanh(r)
        p = 2.0 * norm.sf(abs(stat))
        return CiTestResult(float(stat), float(p), len(z), bool(p > self.alpha))


class GSquaredTest:
    """Likelihood-ratio test on contingency tables for discrete columns."""

    def __init__(self, dataset, alpha=0.05):
        for v in dataset.schema:
            if v.kind == "continuous":
                raise IndependenceError(f"G^2 needs binary/ordinal columns; "
                                        f"{v.name} is continuous")
        self.dataset = dataset
        self.alpha = alpha
        self.nodes = list(dataset.names)
        self.calls = 0
        self._codes = {}
        for name in self.nodes:
            _, codes = np.unique(dataset.column(name), return_inverse=True)
            self._codes[name] = codes

    def _levels(self, name):
        return int(self._codes[name].max()) + 1

    def __call__(self, x, y, z=()):
        self.calls += 1
        z = list(z)
        xc, yc = self._codes[x], self._codes[y]
        lx, ly = self._levels(x), self._levels(y)
        if z:
            stride = 1
            strata = np.zeros(len(xc), dtype=int)
            for v in z:
                strata += self._codes[v] * stride
                stride *= self._levels(v)
            n_strata = stride
        else:
            strata = np.zeros(len(xc), dtype=int)
            n_strata = 1

        g2 = 0.0
        nonempty = 0
        for s in range(n_strata):
            mask = strata == s
            total = int(mask.sum())
            if total == 0:
                continue
            nonempty += 1
            table = np.zeros((lx, ly))
            np.add.at(table, (xc[mask], yc[mask]), 1.0)
            rows = table.sum(axis=1)
            cols = table.sum(axis=0)
            expected = np.outer(rows, cols) / total
            obs = table > 0
            g2 += 2.0 * float((table[obs] * np.log(table[obs] / expected[obs])).sum())

        if nonempty == 0:
            return CiTestResult(0.0, 1.0, 0, True, note="degenerate")
        dof = (lx - 1) * (ly - 1) * nonempty
        if dof <= 0:
            return CiTestResult(0.0, 1.0, 0, True, note="degenerate")
        p = float(chi2.sf(g2, dof))
        return CiTestResult(g2, p, dof, bool(p > self.alpha))


class OracleCI:
    """Exact CI oracle reading independence off a DAG by d-separation."""

    def __init__(self, dag, alpha=0.05):
        self.dag = dag
        self.alpha = alpha
        self.nodes = sorted(dag.nodes)
        self.calls = 0

    def __call__(self, x, y, z=()):
        self.calls += 1
        sep = d_separated(self.dag, x, y, z)
        return CiTestResult(0.0, 1.0 if sep else 0.0, len(tuple(z)), sep)


def oracle_ci(dag, alpha=0.05):
    """CI-test function whose `independent` flag equals d-separation in dag."""
    return OracleCI(dag, alpha)


class SessionLog:
    """Wrap a tester, recording every executed query as a JSON-ready dict."""

    def __init__(self, tester, path=None):
        self.tester = tester
        self.nodes = tester.nodes
        self.alpha = getattr(tester, "alpha", None)
        self.records = []
        self.path = path

    @property
    def calls(self):
        return getattr(self.tester, "calls", len(self.records))

    def __call__(self, x, y, z=()):
        res = self.tester(x, y, z)
        rec = {"x": x, "y": y, "z": sorted(z)}
        rec.update(res.to_json_dict())
        self.records.append(rec)
        return res

    def write(self, path=None):
        path = path or self.path
        if path is None:
            raise IndependenceError("no path for session log")
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return path
