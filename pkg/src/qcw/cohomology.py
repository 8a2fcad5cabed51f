"""Classical cohomology data of a variety and the Kunneth product."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from ._linalg import SingularMatrix, as_fraction_matrix, inverse, matmul, identity

__all__ = [
    "BasisElement",
    "CohomologyModel",
    "DualData",
    "ModelError",
    "validate_model",
    "dual_basis",
    "kunneth_product",
    "vdim",
]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class BasisElement:
    name: str
    degree: int
    var: str | None = None


@dataclass(frozen=True)
class ProductInfo:
    """How a product model's basis is indexed by its factors (i-major)."""

    factors: tuple[str, str]
    shape: tuple[int, int]
    units: tuple[int, int]

    def split(self, index: int) -> tuple[int, int]:
        return divmod(index, self.shape[1])

    def side(self, index: int) -> str:
        """'x' for T_i (x) 1, 'y' for 1 (x) S_j, 'unit' or 'mixed' otherwise."""
        i, j = self.split(index)
        ux, uy = self.units
        if i == ux and j == uy:
            return "unit"
        if j == uy:
            return "x"
        if i == ux:
            return "y"
        return "mixed"


@dataclass(frozen=True)
class CohomologyModel:
    """Graded basis, Poincare pairing, cup table, c1 and divisor indices.

    ``cup[i][j]`` is the coefficient vector of ``T_i . T_j``.  Every basis
    element other than the unit owns a formal variable: a Novikov variable
    for divisor classes, an insertion variable otherwise.
    """

    name: str
    dim_c: int
    basis: tuple[BasisElement, ...]
    pairing: tuple[tuple[Fraction, ...], ...]
    cup: tuple[tuple[tuple[Fraction, ...], ...], ...]
    c1: tuple[Fraction, ...]
    divisor_indices: tuple[int, ...]
    unit_index: int = 0
    product: ProductInfo | None = field(default=None, compare=False)

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(b.degree for b in self.basis)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.basis)

    def var_name(self, index: int) -> str | None:
        if index == self.unit_index:
            return None
        b = self.basis[index]
        if b.var:
            return b.var
        if index in self.divisor_indices:
            k = self.divisor_indices.index(index)
            return "q" if len(self.divisor_indices) == 1 else f"q{k + 1}"
        return f"t_{b.name}"

    @property
    def q_vars(self) -> tuple[str, ...]:
        return tuple(self.var_name(i) for i in self.divisor_indices)

    @property
    def t_indices(self) -> tuple[int, ...]:
        return tuple(
            i for i in range(self.rank) if i != self.unit_index and i not in self.divisor_indices
        )

    @property
    def t_vars(self) -> tuple[str, ...]:
        return tuple(self.var_name(i) for i in self.t_indices)

    def index(self, name: str) -> int:
        return self.names.index(name)

    # -- JSON -------------------------------------------------------------

    def to_json(self) -> dict:
        doc = {
            "name": self.name,
            "dim_c": self.dim_c,
            "basis": [
                {"name": b.name, "degree": b.degree, "var": self.var_name(i)}
                if i != self.unit_index else {"name": b.name, "degree": b.degree}
                for i, b in enumerate(self.basis)
            ],
            "pairing": [[str(x) for x in row] for row in self.pairing],
            "cup": [[[str(x) for x in vec] for vec in row] for row in self.cup],
            "c1": [str(x) for x in self.c1],
            "divisor_indices": list(self.divisor_indices),
            "unit_index": self.unit_index,
        }
        if self.product is not None:
            doc["product"] = {
                "factors": list(self.product.factors),
                "shape": list(self.product.shape),
                "units": list(self.product.units),
            }
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "CohomologyModel":
        try:
            basis = tuple(
                BasisElement(str(b["name"]), int(b["degree"]), b.get("var")) for b in doc["basis"]
            )
            n = len(basis)
            cup = doc.get("cup")
            if cup is None:
                raise ModelError("model document lacks the 'cup' table")
            product = None
            if "product" in doc:
                p = doc["product"]
                product = ProductInfo(tuple(p["factors"]), tuple(p["shape"]), tuple(p["units"]))
            return cls(
                name=str(doc["name"]),
                dim_c=int(doc["dim_c"]),
                basis=basis,
                pairing=as_fraction_matrix(doc["pairing"]),
                cup=tuple(tuple(tuple(Fraction(x) for x in vec) for vec in row) for row in cup),
                c1=tuple(Fraction(x) for x in doc.get("c1", ["0"] * n)),
                divisor_indices=tuple(int(i) for i in doc.get("divisor_indices", [])),
                unit_index=int(doc.get("unit_index", 0)),
                product=product,
            )
        except KeyError as exc:
            raise ModelError(f"model document missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"malformed model document: {exc}") from exc


@dataclass(frozen=True)
class DualData:
    pairing_inverse: tuple[tuple[Fraction, ...], ...]


def validate_model(m: CohomologyModel) -> list[str]:
    """Return every violated invariant (empty list when the model is valid)."""
    issues = []
    n = m.rank
    if n == 0:
        return ["empty basis"]
    for b in m.basis:
        if b.degree % 2:
            issues.append(f"odd degree unsupported: {b.name} has degree {b.degree}")
        elif not 0 <= b.degree <= 2 * m.dim_c:
            issues.append(f"degree of {b.name} outside [0, {2 * m.dim_c}]")
    if len(m.pairing) != n or any(len(r) != n for r in m.pairing):
        issues.append("pairing has wrong shape")
        return issues
    if any(m.pairing[i][j] != m.pairing[j][i] for i in range(n) for j in range(n)):
        issues.append("pairing not symmetric")
    try:
        inverse(m.pairing)
    except SingularMatrix:
        issues.append("pairing not invertible")
    for i in range(n):
        for j in range(n):
            if m.pairing[i][j] and m.basis[i].degree + m.basis[j].degree != 2 * m.dim_c:
                issues.append(
                    f"pairing of {m.basis[i].name}, {m.basis[j].name} nonzero outside complementary degrees"
                )
    if not 0 <= m.unit_index < n:
        issues.append("unit index out of range")
    elif m.basis[m.unit_index].degree != 0:
        issues.append("unit class does not have degree 0")
    for d in m.divisor_indices:
        if not 0 <= d < n:
            issues.append(f"divisor index {d} out of range")
        elif m.basis[d].degree != 2:
            issues.append(f"divisor {m.basis[d].name} does not have degree 2")
    if len(set(m.divisor_indices)) != len(m.divisor_indices):
        issues.append("repeated divisor index")
    if len(m.c1) != n:
        issues.append("c1 has wrong length")
    else:
        for i, c in enumerate(m.c1):
            if c and i not in m.divisor_indices:
                issues.append(f"c1 has a component along non-divisor class {m.basis[i].name}")
    if len(m.cup) != n or any(len(row) != n or any(len(v) != n for v in row) for row in m.cup):
        issues.append("cup table has wrong shape")
        return issues
    for i in range(n):
        for j in range(n):
            if m.cup[i][j] != m.cup[j][i]:
                issues.append(f"cup product not commutative at ({m.basis[i].name}, {m.basis[j].name})")
            for f, c in enumerate(m.cup[i][j]):
                if c and m.basis[f].degree != m.basis[i].degree + m.basis[j].degree:
                    issues.append(
                        f"cup product {m.basis[i].name}.{m.basis[j].name} not homogeneous"
                    )
    if 0 <= m.unit_index < n:
        u = m.unit_index
        for j in range(n):
            if m.cup[u][j] != tuple(Fraction(int(f == j)) for f in range(n)):
                issues.append(f"unit does not act as identity on {m.basis[j].name}")
    names = [m.var_name(i) for i in range(n) if i != m.unit_index]
    if len(set(names)) != len(names):
        issues.append("variable names are not distinct")
    return issues


def dual_basis(m: CohomologyModel) -> DualData:
    try:
        inv = inverse(m.pairing)
    except SingularMatrix as exc:
        raise ModelError(f"pairing of {m.name} is singular") from exc
    assert matmul(m.pairing, inv) == identity(m.rank)
    return DualData(inv)


def kunneth_product(
    x: CohomologyModel,
    y: CohomologyModel,
    *,
    name: str | None = None,
    basis_names: Sequence[str] | None = None,
    var_names: Mapping[int, str] | None = None,
) -> CohomologyModel:
    """Model of X x Y with basis T_i (x) S_j in i-major order.

    Only even classes are supported, so no Koszul signs appear.  Divisor
    indices list the X-side divisors first, then the Y-side ones; default
    Novikov names follow that order (``q1, q2, ...``).
    """
    for m in (x, y):
        if any(b.degree % 2 for b in m.basis):
            raise ModelError(f"{m.name} has odd-degree classes; Kunneth product unsupported")
    nx, ny = x.rank, y.rank
    ux, uy = x.unit_index, y.unit_index

    def idx(i, j):
        return i * ny + j

    divisors = tuple(idx(i, uy) for i in x.divisor_indices) + tuple(idx(ux, j) for j in y.divisor_indices)
    names = list(basis_names) if basis_names else [
        f"{x.basis[i].name}*{y.basis[j].name}" for i in range(nx) for j in range(ny)
    ]
    if len(names) != nx * ny:
        raise ModelError("wrong number of basis names")
    var_names = dict(var_names or {})
    basis = []
    for i in range(nx):
        for j in range(ny):
            k = idx(i, j)
            var = var_names.get(k)
            if var is None and k in divisors:
                var = "q" if len(divisors) == 1 else f"q{divisors.index(k) + 1}"
            basis.append(BasisElement(names[k], x.basis[i].degree + y.basis[j].degree, var))
    n = nx * ny
    pairing = tuple(
        tuple(x.pairing[i][i2] * y.pairing[j][j2] for i2 in range(nx) for j2 in range(ny))
        for i in range(nx) for j in range(ny)
    )
    cup = []
    for i in range(nx):
        for j in range(ny):
            row = []
            for i2 in range(nx):
                for j2 in range(ny):
                    vec = [Fraction(0)] * n
                    for a, ca in enumerate(x.cup[i][i2]):
                        if ca:
                            for b, cb in enumerate(y.cup[j][j2]):
                                if cb:
                                    vec[idx(a, b)] += ca * cb
                    row.append(tuple(vec))
            cup.append(tuple(row))
    c1 = [Fraction(0)] * n
    for i in range(nx):
        c1[idx(i, uy)] += x.c1[i]
    for j in range(ny):
        c1[idx(ux, j)] += y.c1[j]
    return CohomologyModel(
        name=name or f"{x.name}x{y.name}",
        dim_c=x.dim_c + y.dim_c,
        basis=tuple(basis),
        pairing=pairing,
        cup=tuple(cup),
        c1=tuple(c1),
        divisor_indices=divisors,
        unit_index=idx(ux, uy),
        product=ProductInfo((x.name, y.name), (nx, ny), (ux, uy)),
    )


def vdim(m: CohomologyModel, beta: Sequence) -> Fraction:
    """Virtual dimension of genus-0 stable maps: integral of c1 over beta + dim - 3.

    ``beta`` lists the degrees of the curve class against the divisor basis,
    i.e. the q-exponents.
    """
    if len(beta) != len(m.divisor_indices):
        raise ModelError("curve class has wrong length")
    c1_beta = sum((m.c1[d] * Fraction(b) for d, b in zip(m.divisor_indices, beta)), Fraction(0))
    return c1_beta + m.dim_c - 3
