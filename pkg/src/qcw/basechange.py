"""Cohomology base changes: conjugation plus Novikov monomial substitution."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from ._linalg import SingularMatrix, as_fraction_matrix, det, identity, inverse, matmul
from .series import Series

__all__ = [
    "BaseChange",
    "BaseChangeError",
    "apply_base_change",
    "invert_base_change",
    "compose_base_changes",
    "conjugate",
    "permutation_base_change",
]


class BaseChangeError(ValueError):
    pass


@dataclass(frozen=True)
class BaseChange:
    """``T`` expresses the new basis in the old one (columns); ``q_subst`` maps
    each old Novikov variable to a monomial in the new ones."""

    T: tuple
    q_subst: Mapping[str, Mapping[str, Fraction]]
    new_q_vars: tuple

    def __post_init__(self):
        T = as_fraction_matrix(self.T)
        object.__setattr__(self, "T", T)
        subst = {
            str(k): {str(w): Fraction(e) for w, e in v.items() if Fraction(e)}
            for k, v in self.q_subst.items()
        }
        object.__setattr__(self, "q_subst", subst)
        new = tuple(self.new_q_vars) if self.new_q_vars else tuple(
            dict.fromkeys(w for v in subst.values() for w in v)
        )
        object.__setattr__(self, "new_q_vars", new)
        if not T or any(len(r) != len(T) for r in T):
            raise BaseChangeError("T must be a nonempty square matrix")
        if det(T) == 0:
            raise BaseChangeError("T is singular")
        for k, v in subst.items():
            if not v:
                raise BaseChangeError(f"substitution for {k!r} is the constant monomial")
            for w in v:
                if w not in new:
                    raise BaseChangeError(f"{w!r} is not among the new variables {new}")
        if len(subst) != len(new):
            raise BaseChangeError("monomial map must have as many new variables as old ones")
        if subst and det(self.exponent_matrix()) == 0:
            raise BaseChangeError("monomial substitution is not invertible")

    @property
    def old_q_vars(self) -> tuple:
        return tuple(self.q_subst)

    def exponent_matrix(self) -> tuple:
        """Rows: old variables, columns: new variables."""
        return tuple(
            tuple(self.q_subst[o].get(n, Fraction(0)) for n in self.new_q_vars) for o in self.old_q_vars
        )

    def is_degree_preserving(self, degrees: Sequence[int]) -> bool:
        n = len(self.T)
        return all(not self.T[i][j] or degrees[i] == degrees[j] for i in range(n) for j in range(n))

    def to_json(self) -> dict:
        return {
            "T": [[str(x) for x in row] for row in self.T],
            "q_subst": {k: {w: str(e) for w, e in v.items()} for k, v in self.q_subst.items()},
            "new_q_vars": list(self.new_q_vars),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "BaseChange":
        try:
            return cls(doc["T"], doc.get("q_subst", {}), tuple(doc.get("new_q_vars", ())))
        except KeyError as exc:
            raise BaseChangeError(f"base change document missing field {exc.args[0]!r}") from exc
        except (TypeError, ZeroDivisionError) as exc:
            raise BaseChangeError(f"malformed base change document: {exc}") from exc


def conjugate(K, T) -> list:
    """Exact ``T^{-1} K T`` for a matrix of series and a rational matrix."""
    n = len(K)
    if len(T) != n:
        raise BaseChangeError(f"T has size {len(T)}, matrix has size {n}")
    try:
        Tinv = inverse(T)
    except SingularMatrix as exc:
        raise BaseChangeError("T is singular") from exc
    zero = K[0][0].zero()
    KT = [[zero for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = zero
            for a in range(n):
                if T[a][j] and K[i][a]:
                    acc = acc + K[i][a].scale(T[a][j])
            KT[i][j] = acc
    out = [[zero for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = zero
            for a in range(n):
                if Tinv[i][a] and KT[a][j]:
                    acc = acc + KT[a][j].scale(Tinv[i][a])
            out[i][j] = acc
    return out


def apply_base_change(K, bc: BaseChange, *, degrees: Sequence[int] | None = None) -> list:
    """Conjugate by ``T`` and then substitute the Novikov variables entrywise."""
    if degrees is not None and not bc.is_degree_preserving(degrees):
        raise BaseChangeError("T mixes basis elements of different degrees")
    q_vars = K[0][0].q_vars
    if set(q_vars) != set(bc.q_subst):
        raise BaseChangeError(f"substitution covers {sorted(bc.q_subst)}, matrix has {list(q_vars)}")
    C = conjugate(K, bc.T)
    out = [[e.substitute(bc.q_subst, bc.new_q_vars) for e in row] for row in C]
    den = max(e.den_bound for row in out for e in row)
    return [[e if e.den_bound == den else e.with_den_bound(den) for e in row] for row in out]


def invert_base_change(bc: BaseChange) -> BaseChange:
    E = bc.exponent_matrix()
    try:
        Einv = inverse(E) if E else ()
    except SingularMatrix as exc:
        raise BaseChangeError("monomial substitution is not invertible") from exc
    # old_i = prod_j new_j^{E_ij}  =>  new_j = prod_i old_i^{(E^-1)_ji}
    subst = {
        n: {o: Einv[j][i] for i, o in enumerate(bc.old_q_vars) if Einv[j][i]}
        for j, n in enumerate(bc.new_q_vars)
    }
    return BaseChange(inverse(bc.T), subst, bc.old_q_vars)


def compose_base_changes(first: BaseChange, second: BaseChange) -> BaseChange:
    """The base change equal to applying ``first`` and then ``second``."""
    if set(first.new_q_vars) != set(second.q_subst):
        raise BaseChangeError("second base change does not act on the first one's variables")
    subst = {}
    for old, rule in first.q_subst.items():
        acc: dict = {}
        for mid, e in rule.items():
            for new, f in second.q_subst[mid].items():
                acc[new] = acc.get(new, Fraction(0)) + e * f
        subst[old] = {k: v for k, v in acc.items() if v}
    return BaseChange(matmul(first.T, second.T), subst, second.new_q_vars)


def identity_base_change(q_vars: Sequence[str], n: int) -> BaseChange:
    return BaseChange(identity(n), {v: {v: 1} for v in q_vars}, tuple(q_vars))


def permutation_base_change(order: Sequence[int], q_vars: Sequence[str]) -> BaseChange:
    """Reorder the basis: new basis element k is old element ``order[k]``."""
    n = len(order)
    if sorted(order) != list(range(n)):
        raise BaseChangeError(f"{list(order)} is not a permutation")
    T = [[Fraction(int(order[j] == i)) for j in range(n)] for i in range(n)]
    return BaseChange(T, {v: {v: 1} for v in q_vars}, tuple(q_vars))
