"""Gromov-Witten potentials, the quantum product and connection matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .cohomology import CohomologyModel, DualData, ModelError, dual_basis, validate_model
from .series import Series, SeriesError, TruncationError

__all__ = [
    "Potential",
    "QuantumModel",
    "ConnectionFamily",
    "dimension_validate",
    "quantum_product",
    "multiplication_matrix",
    "euler_field",
    "connection_K",
    "connection_A",
    "connection_family",
    "grading_G",
    "associativity_check",
    "frobenius_check",
    "classify_monomials",
    "pure_part_match",
    "leading_purity_check",
    "leading_purity_all",
    "leading_K_decomposition",
    "kronecker_sum_series",
    "factor_index_map",
    "TruncationError",
]

Matrix = list  # list of rows of Series


@dataclass(frozen=True)
class Potential:
    """Genus-0 potential of a model as a truncated series (no ``t0``)."""

    model_ref: str
    series: Series
    cone_floor: Fraction = Fraction(0)

    def to_json(self) -> dict:
        doc = self.series.to_json()
        doc["model_ref"] = self.model_ref
        return doc

    @classmethod
    def from_json(cls, doc: Mapping, model_ref: str | None = None) -> "Potential":
        ref = doc.get("model_ref", model_ref)
        if ref is None:
            raise ModelError("potential document lacks 'model_ref'")
        return cls(str(ref), Series.from_json(doc))


def dimension_validate(model: CohomologyModel, potential: Potential) -> list:
    """Monomials violating the codimension-zero constraint.

    A term ``q^beta prod t_a^{n_a}`` can only carry a numerical invariant when
    ``sum_a n_a (deg T_a / 2 - 1) == dim X - 3 + c1 . beta``.  Returns a list
    of ``(monomial, lhs, rhs)`` triples; empty means valid.
    """
    s = potential.series
    if s.q_vars != model.q_vars or s.t_vars != model.t_vars:
        raise ModelError(
            f"potential variables {s.q_vars + s.t_vars} do not match model {model.q_vars + model.t_vars}"
        )
    t_half = [model.basis[i].degree // 2 - 1 for i in model.t_indices]
    c1 = [model.c1[d] for d in model.divisor_indices]
    bad = []
    for (qe, te), _ in s.terms:
        lhs = sum(n * w for n, w in zip(te, t_half))
        rhs = model.dim_c - 3 + sum((c * e for c, e in zip(c1, qe)), Fraction(0))
        if lhs != rhs:
            bad.append(((qe, te), Fraction(lhs), rhs))
    return bad


class QuantumModel:
    """A cohomology model together with its potential.

    Third derivatives of the potential are computed lazily and cached; the
    object is otherwise immutable.
    """

    def __init__(self, model: CohomologyModel, potential: Potential, *, check: bool = True):
        if check:
            issues = validate_model(model)
            if issues:
                raise ModelError(f"invalid model {model.name}: {issues}")
        s = potential.series
        if s.q_vars != model.q_vars or s.t_vars != model.t_vars:
            raise ModelError(
                f"potential variables {s.q_vars + s.t_vars} do not match model "
                f"{model.q_vars + model.t_vars}"
            )
        for (qe, _), _c in s.terms:
            if any(e < potential.cone_floor for e in qe):
                raise ModelError(f"potential term below effective-cone floor {potential.cone_floor}")
        self.model = model
        self.potential = potential
        self.dual: DualData = dual_basis(model)
        self._derivs: dict = {(): s}
        self._products: dict = {}

    @property
    def rank(self) -> int:
        return self.model.rank

    @property
    def series(self) -> Series:
        return self.potential.series

    def const(self, value) -> Series:
        return self.series._const(value)

    def variable(self, index: int) -> Series:
        return self.series.variable(self.model.var_name(index))

    def derivative(self, *indices: int) -> Series:
        """Iterated derivative of the potential along basis directions."""
        key = tuple(sorted(indices))
        if key in self._derivs:
            return self._derivs[key]
        base = self.derivative(*key[:-1])
        a = key[-1]
        if a == self.model.unit_index:
            out = base.zero()
        else:
            try:
                out = base.derive(self.model.var_name(a))
            except TruncationError as exc:
                raise TruncationError(
                    f"potential truncation t<={self.series.t_max} too low to form "
                    f"derivative along {[self.model.basis[i].name for i in key]}; "
                    f"needs t-degree >= {sum(1 for i in key if i in self.model.t_indices)}"
                ) from exc
        self._derivs[key] = out
        return out

    def gamma(self, i: int, j: int, k: int) -> Series:
        return self.derivative(i, j, k)

    def truncated(self, q_max=None, t_max=None) -> "QuantumModel":
        pot = Potential(self.potential.model_ref, self.series.truncate(q_max, t_max), self.potential.cone_floor)
        return QuantumModel(self.model, pot, check=False)

    def with_potential(self, series: Series) -> "QuantumModel":
        return QuantumModel(self.model, Potential(self.potential.model_ref, series), check=False)


def quantum_product(qm: QuantumModel, i: int, j: int) -> tuple:
    """Coefficients of ``T_i * T_j`` in the basis."""
    key = (min(i, j), max(i, j))
    if key in qm._products:
        return qm._products[key]
    n = qm.rank
    ginv = qm.dual.pairing_inverse
    cup = qm.model.cup[i][j]
    out = []
    gam = [qm.gamma(i, j, e) for e in range(n)]
    for f in range(n):
        acc = qm.const(cup[f])
        for e in range(n):
            if ginv[e][f]:
                acc = acc + gam[e].scale(ginv[e][f])
        out.append(acc)
    out = tuple(out)
    qm._products[key] = out
    return out


def multiplication_matrix(qm: QuantumModel, a: int) -> Matrix:
    """Matrix of ``T_a *``; column j holds the coefficients of ``T_a * T_j``."""
    n = qm.rank
    cols = [quantum_product(qm, a, j) for j in range(n)]
    return [[cols[j][f] for j in range(n)] for f in range(n)]


def connection_A(qm: QuantumModel) -> list:
    return [multiplication_matrix(qm, a) for a in range(qm.rank)]


def euler_field(qm: QuantumModel) -> tuple:
    """``c1 + sum (2 - deg T_a) t_a T_a`` over insertion directions (t0 pinned at 0)."""
    m = qm.model
    out = []
    for a in range(m.rank):
        v = qm.const(m.c1[a])
        if a in m.t_indices:
            w = 2 - m.basis[a].degree
            if w:
                v = v + qm.variable(a).scale(w)
        out.append(v)
    return tuple(out)


def connection_K(qm: QuantumModel) -> Matrix:
    """Quantum multiplication by the Euler field, columns = images of basis elements."""
    n = qm.rank
    euler = euler_field(qm)
    K = [[qm.const(0) for _ in range(n)] for _ in range(n)]
    for a, coeff in enumerate(euler):
        if coeff.is_zero():
            continue
        A = multiplication_matrix(qm, a)
        for f in range(n):
            for j in range(n):
                if A[f][j]:
                    K[f][j] = K[f][j] + coeff * A[f][j]
    return K


def grading_G(model: CohomologyModel) -> tuple:
    n = model.rank
    return tuple(
        tuple(Fraction(model.basis[i].degree - 2, 2) if i == j else Fraction(0) for j in range(n))
        for i in range(n)
    )


@dataclass(frozen=True)
class ConnectionFamily:
    K: Matrix
    A: list
    G: tuple


def connection_family(qm: QuantumModel) -> ConnectionFamily:
    return ConnectionFamily(connection_K(qm), connection_A(qm), grading_G(qm.model))


# -- structural checks ------------------------------------------------------


def _max_abs_coeff(s: Series) -> Fraction:
    return max((abs(c) for _, c in s.terms), default=Fraction(0))


@dataclass
class AssociativityReport:
    ok: bool
    max_residual: Fraction
    failures: list = field(default_factory=list)  # (i, j, k, f, residual series)
    truncation: tuple = ()


def associativity_check(qm: QuantumModel, q_order=None, t_degree=None) -> AssociativityReport:
    """Exact check of ``(T_i*T_j)*T_k == T_i*(T_j*T_k)`` up to truncation."""
    if q_order is not None or t_degree is not None:
        qm = qm.truncated(q_order, t_degree)
    n = qm.rank
    prod = {(i, j): quantum_product(qm, i, j) for i in range(n) for j in range(i, n)}

    def p(i, j):
        return prod[(i, j)] if i <= j else prod[(j, i)]

    failures = []
    worst = Fraction(0)
    for i in range(n):
        for j in range(n):
            for k in range(j, n):
                ij, jk = p(i, j), p(j, k)
                for f in range(n):
                    lhs = qm.const(0)
                    rhs = qm.const(0)
                    for e in range(n):
                        if ij[e]:
                            lhs = lhs + ij[e] * p(e, k)[f]
                        if jk[e]:
                            rhs = rhs + jk[e] * p(i, e)[f]
                    r = lhs - rhs
                    if r:
                        failures.append((i, j, k, f, r))
                        worst = max(worst, _max_abs_coeff(r))
    return AssociativityReport(not failures, worst, failures, (qm.series.q_max, qm.series.t_max))


def frobenius_check(qm: QuantumModel) -> list:
    """Triples where ``g(T_i*T_j, T_k) != g(T_i, T_j*T_k)``."""
    n = qm.rank
    g = qm.model.pairing
    bad = []
    for i in range(n):
        for j in range(n):
            ij = quantum_product(qm, i, j)
            for k in range(n):
                jk = quantum_product(qm, j, k)
                lhs = qm.const(0)
                rhs = qm.const(0)
                for f in range(n):
                    if g[f][k]:
                        lhs = lhs + ij[f].scale(g[f][k])
                    if g[i][f]:
                        rhs = rhs + jk[f].scale(g[i][f])
                if lhs != rhs:
                    bad.append((i, j, k, lhs - rhs))
    return bad


def _require_product(model: CohomologyModel):
    if model.product is None:
        raise ModelError(f"model {model.name} carries no factor split")
    return model.product


def _q_sides(model: CohomologyModel) -> list:
    info = _require_product(model)
    return [info.side(d) for d in model.divisor_indices]


def _classify_key(sides, qe) -> str:
    used = {s for s, e in zip(sides, qe) if e}
    if not used:
        return "constant"
    if used == {"x"}:
        return "pure-X"
    if used == {"y"}:
        return "pure-Y"
    return "mixed"


CLASSES = ("pure-X", "pure-Y", "mixed", "constant")


def classify_monomials(model: CohomologyModel, series: Series) -> dict:
    """Split a series over a product model by the support of its q-exponents."""
    sides = _q_sides(model)
    buckets: dict = {c: {} for c in CLASSES}
    for key, c in series.terms:
        buckets[_classify_key(sides, key[0])][key] = c
    return {c: series._new(terms) for c, terms in buckets.items()}


@dataclass
class PureMatchReport:
    ok: bool
    mismatches: list = field(default_factory=list)  # (side, key, product coeff, factor coeff)
    bookkeeping: list = field(default_factory=list)  # (side, key, coeff) excluded from comparison


def factor_index_map(model: CohomologyModel, factor: CohomologyModel, side: str):
    """Index maps factor basis index -> product basis index for one side."""
    info = _require_product(model)
    ny = info.shape[1]
    ux, uy = info.units
    if side == "x":
        return {i: i * ny + uy for i in range(info.shape[0])}
    return {j: ux * ny + j for j in range(ny)}


def pure_part_match(qmxy: QuantumModel, qmx: QuantumModel, qmy: QuantumModel) -> PureMatchReport:
    """Compare the pure parts of a product potential with the factor potentials.

    Pure-X monomials are projected onto the X-side variables; any extra
    insertion variables they carry (Y-side or mixed) are stripped and the
    stripped monomial is recorded as bookkeeping.  When several monomials share
    a projection, the one with the fewest stripped insertions is compared and
    the rest are recorded as bookkeeping.
    """
    model = qmxy.model
    info = _require_product(model)
    if info.shape != (qmx.rank, qmy.rank):
        raise ModelError("factor models do not match the product's shape")
    classes = classify_monomials(model, qmxy.series)
    report = PureMatchReport(True)
    for side, qmf, label in (("x", qmx, "pure-X"), ("y", qmy, "pure-Y")):
        fs = qmf.series
        if fs.q_max < qmxy.series.q_max:
            raise ModelError(
                f"factor {qmf.model.name} truncated at q-order {fs.q_max} below product's {qmxy.series.q_max}"
            )
        imap = factor_index_map(model, qmf.model, side)
        # factor variable name -> product variable name
        rename = {qmf.model.var_name(i): model.var_name(k) for i, k in imap.items() if i != qmf.model.unit_index}
        pq = [rename[v] for v in fs.q_vars]
        pt = [rename[v] for v in fs.t_vars]
        qpos = [qmxy.series.q_vars.index(v) for v in pq]
        tpos = [qmxy.series.t_vars.index(v) for v in pt]
        projected: dict = {}
        for (qe, te), c in classes[label].terms:
            key = (tuple(qe[p] for p in qpos), tuple(te[p] for p in tpos))
            extra = sum(te) - sum(key[1])
            projected.setdefault(key, []).append((extra, (qe, te), c))
        seen = set()
        for key, entries in projected.items():
            entries.sort(key=lambda e: (e[0], e[1]))
            extra, full, c = entries[0]
            if extra:
                report.bookkeeping.append((side, full, c))
            for _, other, oc in entries[1:]:
                report.bookkeeping.append((side, other, oc))
            fc = fs.coefficient(*key)
            seen.add(key)
            if c != fc:
                report.ok = False
                report.mismatches.append((side, full, c, fc))
        q_max = qmxy.series.q_max
        for key, fc in fs.terms:
            if key not in seen and Series.order(key[0]) <= q_max and sum(key[1]) <= qmxy.series.t_max:
                report.ok = False
                report.mismatches.append((side, None, Fraction(0), fc))
    report.mismatches.sort(key=lambda m: (m[0], Series.order(m[1][0]) if m[1] else 0, str(m[1])))
    return report


@dataclass
class PurityResult:
    status: str  # "pass" | "fail" | "empty"
    indices: tuple
    leading: Series | None = None
    violations: list = field(default_factory=list)


def leading_purity_check(qm: QuantumModel, a: int, b: int, c: int) -> PurityResult:
    """Check that no minimal-order monomial of Gamma_abc is mixed."""
    sides = _q_sides(qm.model)
    g = qm.gamma(a, b, c)
    if g.is_zero():
        return PurityResult("empty", (a, b, c))
    lead = g.min_order_part()
    bad = [(k, v) for k, v in lead.terms if _classify_key(sides, k[0]) == "mixed"]
    return PurityResult("fail" if bad else "pass", (a, b, c), lead, bad)


def leading_purity_all(qm: QuantumModel) -> list:
    n = qm.rank
    return [leading_purity_check(qm, a, b, c) for a in range(n) for b in range(n) for c in range(n)]


def kronecker_sum_series(kx: Matrix, ky: Matrix) -> Matrix:
    """``Kx (x) I + I (x) Ky`` for matrices of series over common variables, i-major."""
    nx, ny = len(kx), len(ky)
    zero = (kx[0][0] if nx else ky[0][0]).zero()
    out = [[zero for _ in range(nx * ny)] for _ in range(nx * ny)]
    for i in range(nx):
        for i2 in range(nx):
            for j in range(ny):
                out[i * ny + j][i2 * ny + j] = out[i * ny + j][i2 * ny + j] + kx[i][i2]
    for i in range(nx):
        for j in range(ny):
            for j2 in range(ny):
                out[i * ny + j][i * ny + j2] = out[i * ny + j][i * ny + j2] + ky[j][j2]
    return out


def embed_factor_matrix(qmxy: QuantumModel, qmf: QuantumModel, side: str, M: Matrix) -> Matrix:
    """Rename a factor's variables into the product's and widen the variable lists."""
    model = qmxy.model
    imap = factor_index_map(model, qmf.model, side)
    rename = {qmf.model.var_name(i): model.var_name(k) for i, k in imap.items() if i != qmf.model.unit_index}
    s = qmxy.series
    out = []
    for row in M:
        new_row = []
        for e in row:
            e = e.embed(s.q_vars, s.t_vars, rename)
            if e.den_bound != s.den_bound:
                e = e.with_den_bound(s.den_bound)
            new_row.append(e)
        out.append(new_row)
    return out


@dataclass
class KDecomposition:
    K: Matrix
    kronecker: Matrix
    residual: Matrix
    gaps: dict  # (r, c) -> (residual min order, kronecker min order or None)
    violations: list  # entries where the residual is not of strictly higher order
    not_mixed: list  # nonzero residual entries lacking positive exponents of both factors' q

    @property
    def ok(self) -> bool:
        return not self.violations


def leading_K_decomposition(qmx: QuantumModel, qmy: QuantumModel, qmxy: QuantumModel) -> KDecomposition:
    """Residual ``K_{XxY} - (K_X (x) I + I (x) K_Y)`` and its order gaps."""
    info = _require_product(qmxy.model)
    if info.shape != (qmx.rank, qmy.rank) or info.units != (qmx.model.unit_index, qmy.model.unit_index):
        raise ModelError("product basis order does not match the factors (expected i-major Kunneth order)")
    kx = embed_factor_matrix(qmxy, qmx, "x", connection_K(qmx))
    ky = embed_factor_matrix(qmxy, qmy, "y", connection_K(qmy))
    kron = kronecker_sum_series(kx, ky)
    K = connection_K(qmxy)
    n = qmxy.rank
    sides = _q_sides(qmxy.model)
    residual = [[K[r][c] - kron[r][c] for c in range(n)] for r in range(n)]
    gaps, violations, not_mixed = {}, [], []
    for r in range(n):
        for c in range(n):
            R = residual[r][c]
            if R.is_zero():
                continue
            kr = kron[r][c]
            ko = None if kr.is_zero() else kr.min_order()
            ro = R.min_order()
            gaps[(r, c)] = (ro, ko)
            if ko is not None and not ro > ko:
                violations.append((r, c))
            for (qe, _), _v in R.terms:
                used = {s for s, e in zip(sides, qe) if e > 0}
                if not {"x", "y"} <= used:
                    not_mixed.append((r, c))
                    break
    return KDecomposition(K, kron, residual, gaps, violations, not_mixed)
