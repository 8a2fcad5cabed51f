"""Spectrum-level atoms and the toy motivic measure on catalog varieties.

An atom is proxied by the clustered eigenvalue multiset of K at a point.
``phi`` sends a formal integer combination of catalog varieties (with the
product ``[X]*[Y] = [X x Y]``) to a formal combination of such proxies.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .catalog import ALIASES, Catalog
from .quantum import QuantumModel, connection_K
from .spectral import (
    DEFAULT_TOL_CLUSTER,
    DEFAULT_TOL_EIG,
    EigenError,
    SpectrumMultiset,
    _cluster,
    eigenvalues,
    evaluate_matrix,
    factor_point,
    matching_distance,
    product_point,
    spectrum_multiset,
)

__all__ = [
    "AtomProxy",
    "AtomCombination",
    "K0Expression",
    "K0SyntaxError",
    "HomCheckReport",
    "atom_of",
    "atom_tensor",
    "atom_sum",
    "phi",
    "hom_check",
]


@dataclass(frozen=True)
class AtomProxy:
    """Exponent multiset ``((value, multiplicity), ...)`` plus where it came from."""

    items: tuple
    tol: float = DEFAULT_TOL_CLUSTER
    provenance: tuple = field(default=(), compare=False)

    @property
    def rank(self) -> int:
        return sum(m for _, m in self.items)

    def expanded(self) -> list:
        return [v for v, m in self.items for _ in range(m)]

    @classmethod
    def from_spectrum(cls, s: SpectrumMultiset, provenance=()) -> "AtomProxy":
        return cls(s.items, s.tol, tuple(provenance))

    @classmethod
    def of(cls, pairs, tol: float = DEFAULT_TOL_CLUSTER) -> "AtomProxy":
        """Build from ``(value, multiplicity)`` pairs, re-clustering them."""
        pairs = [(complex(v), int(m)) for v, m in pairs]
        if any(m <= 0 for _, m in pairs):
            raise ValueError("multiplicities must be positive")
        return cls(_cluster([v for v, _ in pairs], [m for _, m in pairs], tol), tol)

    def to_json(self) -> dict:
        return {
            "items": [{"re": v.real, "im": v.imag, "mult": m} for v, m in self.items],
            "rank": self.rank,
            "provenance": [str(p) for p in self.provenance],
        }


def atom_of(qm: QuantumModel, point: Mapping[str, complex], *,
            tol_eig: float = DEFAULT_TOL_EIG, tol_cluster: float = DEFAULT_TOL_CLUSTER) -> AtomProxy:
    m = evaluate_matrix(connection_K(qm), point)
    s = spectrum_multiset(eigenvalues(m, tol_eig), tol_cluster)
    prov = (qm.model.name, tuple(sorted((k, complex(v)) for k, v in point.items())))
    return AtomProxy.from_spectrum(s, prov)


def atom_tensor(a: AtomProxy, b: AtomProxy) -> AtomProxy:
    tol = max(a.tol, b.tol)
    vals, weights = [], []
    for x, mx in a.items:
        for y, my in b.items:
            vals.append(x + y)
            weights.append(mx * my)
    return AtomProxy(_cluster(vals, weights, tol), tol, (("tensor", a.provenance, b.provenance),))


def atom_sum(a: AtomProxy, b: AtomProxy) -> AtomProxy:
    tol = max(a.tol, b.tol)
    items = a.items + b.items
    return AtomProxy(_cluster([v for v, _ in items], [m for _, m in items], tol), tol,
                     (("sum", a.provenance, b.provenance),))


def _empty(tol=DEFAULT_TOL_CLUSTER) -> AtomProxy:
    return AtomProxy((), tol)


# -- formal combinations ----------------------------------------------------


class K0SyntaxError(ValueError):
    pass


def _canon(name: str) -> str:
    key = name.strip().lower()
    return ALIASES.get(key, key)


class K0Expression:
    """Formal integer combination of products of catalog varieties.

    Terms are keyed by the sorted tuple of factor names; the empty tuple is
    never produced by parsing.  Zero coefficients are dropped.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[tuple, int] | None = None):
        acc: dict = {}
        for key, c in (terms or {}).items():
            key = tuple(sorted(_canon(n) for n in key))
            if not key:
                raise ValueError("empty product term")
            acc[key] = acc.get(key, 0) + int(c)
        self._terms = tuple(sorted((k, c) for k, c in acc.items() if c))

    @property
    def terms(self) -> tuple:
        return self._terms

    @classmethod
    def variety(cls, name: str) -> "K0Expression":
        return cls({(name,): 1})

    def __add__(self, other):
        out = dict(self._terms)
        for k, c in other.terms:
            out[k] = out.get(k, 0) + c
        return K0Expression(out)

    def __neg__(self):
        return K0Expression({k: -c for k, c in self._terms})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return K0Expression({k: c * other for k, c in self._terms})
        out: dict = {}
        for k1, c1 in self._terms:
            for k2, c2 in other.terms:
                k = tuple(sorted(k1 + k2))
                out[k] = out.get(k, 0) + c1 * c2
        return K0Expression(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, K0Expression) and self._terms == other.terms

    def __hash__(self):
        return hash(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for i, (key, c) in enumerate(self._terms):
            body = "*".join(f"[{n}]" for n in key)
            sign = "-" if c < 0 else ("+" if i else "")
            mag = "" if abs(c) == 1 else f"{abs(c)}*"
            parts.append(f"{sign} {mag}{body}".strip() if i else f"{sign}{mag}{body}")
        return " ".join(parts)

    __repr__ = __str__

    @classmethod
    def parse(cls, text: str) -> "K0Expression":
        """Parse e.g. ``[P1]*[P1] - [P1xP1] + 2*[pt]``."""
        return _K0Parser(text).parse()


_TOKEN = re.compile(r"\s*(?:(\[[^\[\]]*\])|(\d+)|([-+*()]))")


class _K0Parser:
    # expr := term (('+'|'-') term)* ; term := factor ('*' factor)* ;
    # factor := INT | '[' name ']' | '(' expr ')' | '-' factor
    def __init__(self, text):
        self.text = text
        self.toks = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise K0SyntaxError(f"unexpected character at position {pos}: {text[pos:pos + 10]!r}")
            self.toks.append(m.group(1) or m.group(2) or m.group(3))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self):
        if not self.toks:
            return K0Expression()
        e = self.expr()
        if self.peek() is not None:
            raise K0SyntaxError(f"trailing token {self.peek()!r}")
        if isinstance(e, int):
            raise K0SyntaxError("expression has no varieties")
        return e

    def expr(self):
        e = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            t = self.term()
            if isinstance(e, int) or isinstance(t, int):
                raise K0SyntaxError("bare integers can only multiply varieties")
            e = e + t if op == "+" else e - t
        return e

    def term(self):
        e = self.factor()
        while self.peek() == "*":
            self.take()
            e = e * self.factor()
        return e

    def factor(self):
        tok = self.take()
        if tok is None:
            raise K0SyntaxError("unexpected end of expression")
        if tok == "-":
            return -self.factor()
        if tok == "(":
            e = self.expr()
            if self.take() != ")":
                raise K0SyntaxError("missing ')'")
            return e
        if tok.isdigit():
            return int(tok)
        if tok.startswith("["):
            name = tok[1:-1].strip()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise K0SyntaxError(f"bad variety name {name!r}")
            return K0Expression.variety(name)
        raise K0SyntaxError(f"unexpected token {tok!r}")


class AtomCombination:
    """Formal integer combination of atom proxies.  Identical proxies merge."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Sequence[tuple] = ()):
        acc: dict = {}
        order = []
        for c, a in terms:
            if a not in acc:
                order.append(a)
                acc[a] = 0
            acc[a] += int(c)
        self._terms = tuple((acc[a], a) for a in order if acc[a])

    @property
    def terms(self) -> tuple:
        return self._terms

    def __add__(self, other):
        return AtomCombination(self._terms + other.terms)

    def __neg__(self):
        return AtomCombination([(-c, a) for c, a in self._terms])

    def __sub__(self, other):
        return self + (-other)

    def scale(self, k: int):
        return AtomCombination([(k * c, a) for c, a in self._terms])

    def tensor(self, other):
        return AtomCombination([(c1 * c2, atom_tensor(a, b)) for c1, a in self._terms for c2, b in other.terms])

    def __eq__(self, other):
        if not isinstance(other, AtomCombination):
            return NotImplemented
        return dict((a, c) for c, a in self._terms) == dict((a, c) for c, a in other.terms)

    def __hash__(self):
        return hash(frozenset((a, c) for c, a in self._terms))

    def is_zero(self) -> bool:
        return not self._terms

    def virtual_parts(self) -> tuple:
        """(positive, negative) parts as single proxies via atom_sum."""
        pos, neg = _empty(), _empty()
        for c, a in self._terms:
            for _ in range(abs(c)):
                if c > 0:
                    pos = atom_sum(pos, a)
                else:
                    neg = atom_sum(neg, a)
        return pos, neg

    def distance(self, other) -> float:
        """Bottleneck distance between the positive parts and between the
        negative parts (the larger of the two)."""
        p1, n1 = self.virtual_parts()
        p2, n2 = other.virtual_parts()
        return max(matching_distance(p1.expanded(), p2.expanded()),
                   matching_distance(n1.expanded(), n2.expanded()))

    def to_json(self) -> list:
        return [{"coeff": c, "atom": a.to_json()} for c, a in self._terms]


def _product_model(catalog: Catalog, names: Sequence[str]):
    """Quantum model for a product term plus its factor list, folded left."""
    if len(names) == 1:
        return catalog.quantum(names[0])
    if len(names) > 2:
        raise KeyError(f"products of more than two varieties are not in the catalog: {'*'.join(names)}")
    return catalog.product_quantum(names[0], names[1])


def phi(expr: K0Expression, points: Mapping[str, Mapping[str, complex]], catalog: Catalog | None = None,
        *, mixed: Mapping[str, complex] | None = None, tol_eig: float = DEFAULT_TOL_EIG,
        tol_cluster: float = DEFAULT_TOL_CLUSTER) -> AtomCombination:
    """Additive extension of ``atom_of``.

    ``points`` assigns a point to each variety name.  A product term is
    evaluated at the product point induced by its factors' points; insertion
    variables of mixed classes take their value from ``mixed``; unassigned
    insertion variables are 0.
    """
    catalog = catalog or Catalog()
    points = {_canon(k): v for k, v in points.items()}
    out = []
    for key, c in expr.terms:
        if len(key) == 1:
            qm = catalog.quantum(key[0])
            point = {v: 0j for v in qm.series.t_vars}
            point.update(points.get(key[0], {}))
        else:
            qm = _product_model(catalog, key)
            qx, qy = catalog.quantum(key[0]), catalog.quantum(key[1])
            point = product_point(qm, qx, qy, points.get(key[0], {}), points.get(key[1], {}),
                                  {k: v for k, v in (mixed or {}).items() if k in qm.series.t_vars})
        out.append((c, atom_of(qm, point, tol_eig=tol_eig, tol_cluster=tol_cluster)))
    return AtomCombination(out)


@dataclass
class HomCheckReport:
    rows: list  # (epsilon, distance or nan, error or None)
    decreasing: bool
    final: float
    skipped: list  # (relation, reason)

    def ok(self, tol: float) -> bool:
        return self.decreasing and self.final <= tol


BLOWUP_SKIP = (
    "[Y] + [Z] = [X] + [E] (blow-up)",
    "SKIPPED: no blow-up data in the catalog",
)


def hom_check(
    catalog: Catalog,
    x: str,
    y: str,
    nu: Sequence[complex],
    t_point: Mapping[str, complex],
    schedule: Sequence[float],
    *,
    tol_eig: float = DEFAULT_TOL_EIG,
    tol_cluster: float = DEFAULT_TOL_CLUSTER,
) -> HomCheckReport:
    """Compare the atom of ``x * y`` with the tensor of the factor atoms.

    At each ``eps`` the product is evaluated at ``q = eps * nu`` with the given
    insertion values and each factor at its induced point.
    """
    qm = catalog.product_quantum(x, y)
    qx, qy = catalog.quantum(x), catalog.quantum(y)
    s = qm.series
    if len(nu) != len(s.q_vars):
        raise ValueError(f"direction has {len(nu)} components, {qm.model.name} has {len(s.q_vars)} Novikov variables")
    unknown = set(t_point) - set(s.t_vars)
    if unknown:
        raise ValueError(f"unknown insertion variables {sorted(unknown)}")
    rows = []
    for eps in schedule:
        point = {v: eps * complex(n) for v, n in zip(s.q_vars, nu)}
        point.update({v: complex(t_point.get(v, 0.0)) for v in s.t_vars})
        try:
            a = atom_of(qm, point, tol_eig=tol_eig, tol_cluster=tol_cluster)
            ax = atom_of(qx, factor_point(qm, qx, "x", point), tol_eig=tol_eig, tol_cluster=tol_cluster)
            ay = atom_of(qy, factor_point(qm, qy, "y", point), tol_eig=tol_eig, tol_cluster=tol_cluster)
        except (EigenError, ValueError) as exc:
            rows.append((eps, float("nan"), str(exc)))
            continue
        rows.append((eps, matching_distance(a.expanded(), atom_tensor(ax, ay).expanded()), None))
    ds = [d for _, d, _ in rows]
    decreasing = all(r[2] is None for r in rows) and all(b < a for a, b in zip(ds, ds[1:]))
    # a distance that is exactly zero throughout counts as decreasing (trivial products)
    if not decreasing and ds and all(d == 0 for d in ds):
        decreasing = True
    return HomCheckReport(rows, decreasing, ds[-1] if ds else float("nan"), [BLOWUP_SKIP])
