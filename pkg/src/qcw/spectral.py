"""Numeric spectra of connection matrices.

Eigenvalues, Kronecker sums, clustered spectrum multisets, the bottleneck
matching distance between multisets and the convergence experiment along a
ray towards the Novikov origin.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .quantum import connection_K, factor_index_map

__all__ = [
    "DEFAULT_TOL_EIG",
    "DEFAULT_TOL_CLUSTER",
    "DEFAULT_CAP",
    "EigenError",
    "SpectrumMultiset",
    "RaySpec",
    "ConvergenceRow",
    "evaluate_matrix",
    "eigenvalues",
    "kronecker_sum",
    "spectrum_multiset",
    "matching_distance",
    "pairwise_sums",
    "convergence_experiment",
    "write_convergence_csv",
    "factor_point",
    "product_point",
    "generalized_decomposition",
]

DEFAULT_TOL_EIG = 1e-10
DEFAULT_TOL_CLUSTER = 1e-8
DEFAULT_CAP = 64


class EigenError(RuntimeError):
    pass


def evaluate_matrix(M, point: Mapping[str, complex]) -> np.ndarray:
    """Evaluate a matrix of series at a point."""
    out = np.array([[e.evaluate(point) for e in row] for row in M], dtype=complex)
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix evaluated to non-finite entries")
    return out


def _sort_key(z: complex):
    return (z.real, z.imag)


def eigenvalues(m, tol: float = DEFAULT_TOL_EIG, cap: int = DEFAULT_CAP) -> list[complex]:
    """Eigenvalues with algebraic multiplicity, sorted by real then imaginary part.

    LAPACK's Hessenberg/QR driver does the work; every returned value is
    certified by ``sigma_min(m - lambda I) <= tol * ||m||_2``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("eigenvalues needs a square matrix")
    n = m.shape[0]
    if n > cap:
        raise ValueError(f"matrix size {n} exceeds cap {cap}")
    if n == 0:
        return []
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        vals = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"eigenvalue iteration did not converge: {exc}") from exc
    scale = np.linalg.norm(m, 2)
    eye = np.eye(n)
    worst = 0.0
    for lam in vals:
        s = np.linalg.svd(m - lam * eye, compute_uv=False)[-1]
        worst = max(worst, s)
    if worst > tol * scale:
        raise EigenError(f"eigenvalue residual {worst:.3e} exceeds {tol:.1e} * {scale:.3e}")
    return sorted((complex(v) for v in vals), key=_sort_key)


def kronecker_sum(a, b, cap: int = 4096) -> np.ndarray:
    """``A (x) I_n + I_m (x) B`` in i-major block layout."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    m, n = a.shape[0], b.shape[0]
    if m * n > cap:
        raise ValueError(f"Kronecker sum of size {m * n} exceeds cap {cap}")
    return np.kron(a, np.eye(n)) + np.kron(np.eye(m), b)


@dataclass(frozen=True)
class SpectrumMultiset:
    items: tuple  # ((value, multiplicity), ...) sorted by value
    tol: float

    @property
    def size(self) -> int:
        return sum(m for _, m in self.items)

    def expanded(self) -> list[complex]:
        return [v for v, m in self.items for _ in range(m)]

    def to_json(self) -> dict:
        return {
            "tol": self.tol,
            "items": [{"re": v.real, "im": v.imag, "mult": m} for v, m in self.items],
        }


def _cluster(values: Sequence[complex], weights: Sequence[int], tol: float) -> tuple:
    """Single-linkage clusters (distance <= tol); weighted mean as representative."""
    n = len(values)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    order = sorted(range(n), key=lambda i: _sort_key(values[i]))
    for a_pos, i in enumerate(order):
        for j in order[a_pos + 1:]:
            if values[j].real - values[i].real > tol:
                break
            if abs(values[i] - values[j]) <= tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        w = sum(weights[i] for i in members)
        val = sum(values[i] * weights[i] for i in members) / w
        out.append((complex(val), w))
    return tuple(sorted(out, key=lambda vm: _sort_key(vm[0])))


def spectrum_multiset(eigs: Iterable[complex], cluster_tol: float = DEFAULT_TOL_CLUSTER) -> SpectrumMultiset:
    eigs = [complex(e) for e in eigs]
    return SpectrumMultiset(_cluster(eigs, [1] * len(eigs), cluster_tol), cluster_tol)


def _as_list(s) -> list[complex]:
    if isinstance(s, SpectrumMultiset):
        return s.expanded()
    return [complex(x) for x in s]


def matching_distance(s1, s2) -> float:
    """Bottleneck distance: min over bijections of the max pairing distance.

    Exact: the optimum is one of the pairwise distances, found by bisection
    over them with a perfect-matching test at each threshold.
    """
    a, b = _as_list(s1), _as_list(s2)
    if len(a) != len(b):
        raise ValueError(f"cardinality mismatch: {len(a)} vs {len(b)}")
    if not a:
        return 0.0
    cost = np.abs(np.subtract.outer(np.array(a), np.array(b)))
    candidates = np.unique(cost)
    n = len(a)

    def perfect(th):
        graph = csr_matrix((cost <= th).astype(np.int8))
        match = maximum_bipartite_matching(graph, perm_type="column")
        return bool(np.all(match >= 0)) and len(match) == n

    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if perfect(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def pairwise_sums(s1, s2) -> list[complex]:
    return [x + y for x in _as_list(s1) for y in _as_list(s2)]


@dataclass(frozen=True)
class RaySpec:
    """Ray ``q = eps * nu`` with fixed insertion values and a geometric eps schedule."""

    nu: tuple
    t_point: Mapping[str, complex]
    eps0: float = 1e-2
    factor: float = 0.5
    steps: int = 20

    def __post_init__(self):
        if not self.nu or any(complex(v) == 0 for v in self.nu):
            raise ValueError("every direction component must be nonzero")
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.factor < 1:
            raise ValueError("factor must lie in (0, 1)")
        if self.steps < 1:
            raise ValueError("steps must be positive")

    def schedule(self) -> list[float]:
        return [self.eps0 * self.factor ** k for k in range(self.steps)]


@dataclass
class ConvergenceRow:
    epsilon: float
    distance: float
    max_abs_eig: float
    slope: float
    error: str | None = None


def factor_point(qmxy, qmf, side: str, point: Mapping[str, complex]) -> dict:
    """Restrict a point of the product's variables to one factor's variables."""
    imap = factor_index_map(qmxy.model, qmf.model, side)
    out = {}
    for i, k in imap.items():
        if i != qmf.model.unit_index:
            out[qmf.model.var_name(i)] = complex(point.get(qmxy.model.var_name(k), 0.0))
    return out


def product_point(qmxy, qmx, qmy, px: Mapping[str, complex], py: Mapping[str, complex],
                  mixed: Mapping[str, complex] | None = None) -> dict:
    """Assemble a product point from factor points; mixed insertions default to 0."""
    out = {v: 0j for v in (*qmxy.series.q_vars, *qmxy.series.t_vars)}
    for side, qmf, pf in (("x", qmx, px), ("y", qmy, py)):
        imap = factor_index_map(qmxy.model, qmf.model, side)
        for i, k in imap.items():
            if i != qmf.model.unit_index:
                out[qmxy.model.var_name(k)] = complex(pf.get(qmf.model.var_name(i), 0.0))
    for v, val in (mixed or {}).items():
        if v not in out:
            raise ValueError(f"unknown variable {v!r} for {qmxy.model.name}")
        out[v] = complex(val)
    return out


def convergence_experiment(
    qmx,
    qmy,
    qmxy,
    ray: RaySpec,
    *,
    tol_eig: float = DEFAULT_TOL_EIG,
) -> list[ConvergenceRow]:
    """Distance between the product spectrum and the pairwise sums of factor spectra.

    For each eps, K_{XxY} is evaluated at ``q = eps * nu`` with the given
    insertion values and compared with the factor K's evaluated at the
    induced factor points.  The slope column is the local log-log slope of
    distance against eps (NaN on the first row or when undefined).
    """
    s = qmxy.series
    if len(ray.nu) != len(s.q_vars):
        raise ValueError(f"direction has {len(ray.nu)} components, product has {len(s.q_vars)} Novikov variables")
    unknown = set(ray.t_point) - set(s.t_vars)
    if unknown:
        raise ValueError(f"unknown insertion variables {sorted(unknown)}")
    Kxy, Kx, Ky = connection_K(qmxy), connection_K(qmx), connection_K(qmy)
    rows: list[ConvergenceRow] = []
    prev = None
    for eps in ray.schedule():
        point = {v: eps * complex(n) for v, n in zip(s.q_vars, ray.nu)}
        point.update({v: complex(ray.t_point.get(v, 0.0)) for v in s.t_vars})
        try:
            exy = eigenvalues(evaluate_matrix(Kxy, point), tol_eig)
            ex = eigenvalues(evaluate_matrix(Kx, factor_point(qmxy, qmx, "x", point)), tol_eig)
            ey = eigenvalues(evaluate_matrix(Ky, factor_point(qmxy, qmy, "y", point)), tol_eig)
        except (EigenError, ValueError) as exc:
            rows.append(ConvergenceRow(eps, math.nan, math.nan, math.nan, str(exc)))
            prev = None
            continue
        d = matching_distance(exy, pairwise_sums(ex, ey))
        slope = math.nan
        if prev is not None and prev[1] > 0 and d > 0:
            slope = (math.log(d) - math.log(prev[1])) / (math.log(eps) - math.log(prev[0]))
        rows.append(ConvergenceRow(eps, d, max(abs(e) for e in exy), slope))
        prev = (eps, d)
    return rows


def _g17(x: float) -> str:
    return format(x, ".17g")


def write_convergence_csv(rows: Sequence[ConvergenceRow], stream=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "distance", "max_abs_eig", "slope"])
    for r in rows:
        w.writerow([_g17(r.epsilon), _g17(r.distance), _g17(r.max_abs_eig), _g17(r.slope)])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


@dataclass
class GeneralizedBlock:
    value: complex
    multiplicity: int
    basis: np.ndarray  # n x k, spans the generalized eigenspace
    projector: np.ndarray  # spectral projector onto it
    block: np.ndarray  # k x k restriction of the matrix


@dataclass
class Decomposition:
    blocks: list = field(default_factory=list)
    residual: float = 0.0


class ClusterGapError(ValueError):
    pass


def generalized_decomposition(m, cluster_tol: float = DEFAULT_TOL_CLUSTER, tol_eig: float = DEFAULT_TOL_EIG) -> Decomposition:
    """Split ``m`` into generalized eigenspaces, one per eigenvalue cluster.

    Invariant subspaces come from reordered Schur forms; the spectral
    projectors follow from the block-diagonalising change of basis.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    eigs = eigenvalues(m, tol_eig)
    spec = spectrum_multiset(eigs, cluster_tol)
    values = [v for v, _ in spec.items]
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            gap = abs(values[i] - values[j])
            if gap <= 10 * cluster_tol:
                raise ClusterGapError(f"clusters {values[i]} and {values[j]} only {gap:.3e} apart")
    # each eigenvalue belongs to the nearest cluster centre
    owner = [min(range(len(values)), key=lambda c: abs(e - values[c])) for e in eigs]
    bases = []
    for c, (val, mult) in enumerate(spec.items):
        members = [e for e, o in zip(eigs, owner) if o == c]
        radius = max(abs(e - val) for e in members)
        others = [abs(val - v) for k, v in enumerate(values) if k != c]
        cut = radius + (min(others) - radius) / 2 if others else math.inf

        def select(x, val=val, cut=cut):
            return abs(x - val) <= cut

        T, Z, sdim = scipy.linalg.schur(m, output="complex", sort=select)
        if sdim != mult:
            raise ClusterGapError(f"Schur reordering isolated {sdim} eigenvalues for a cluster of size {mult}")
        bases.append(Z[:, :mult])
    V = np.hstack(bases) if bases else np.zeros((n, 0))
    Vinv = np.linalg.inv(V)
    out = Decomposition()
    start = 0
    total = np.zeros_like(m)
    for (val, mult), B in zip(spec.items, bases):
        W = Vinv[start:start + mult, :]
        P = B @ W
        block = W @ m @ B
        out.blocks.append(GeneralizedBlock(val, mult, B, P, block))
        total += P @ m @ P
        start += mult
    out.residual = float(np.linalg.norm(m - total))
    return out
