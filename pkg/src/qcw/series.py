"""Truncated multivariate series with exact rational coefficients.

Two kinds of variables are tracked.  Novikov variables ``q`` carry rational
exponents (bounded below by a floor, with denominators dividing a global
bound), insertion variables ``t`` carry nonnegative integer exponents.
Truncation is by total q-order and total t-degree and is fixed when a series
is created; arithmetic never extends it.
"""

from __future__ import annotations

import cmath
import math
import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Series",
    "SeriesError",
    "VariableMismatch",
    "TruncationError",
    "BRANCH",
    "DEFAULT_FLOOR",
    "DEFAULT_DEN_LIMIT",
]

# Fractional powers are taken on the principal branch of log.
BRANCH = "principal"
DEFAULT_FLOOR = Fraction(-8)
DEFAULT_DEN_LIMIT = 64


class SeriesError(ValueError):
    pass


class VariableMismatch(SeriesError):
    pass


class TruncationError(SeriesError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not accepted as exact values; pass a string or Fraction")
    return Fraction(x)


def _order(qexps) -> Fraction:
    return sum(qexps, Fraction(0))


class Series:
    """An immutable truncated series ``sum c * q^a * t^b``.

    ``terms`` maps ``(q_exponents, t_exponents)`` tuples to nonzero Fractions.
    Terms beyond the truncation are dropped on construction.
    """

    __slots__ = ("q_vars", "t_vars", "den_bound", "q_max", "t_max", "floor", "_terms", "_hash")

    def __init__(
        self,
        q_vars: Sequence[str] = (),
        t_vars: Sequence[str] = (),
        terms: Mapping | Iterable | None = None,
        *,
        q_max=6,
        t_max: int = 8,
        den_bound: int = 1,
        floor=DEFAULT_FLOOR,
    ):
        q_vars = tuple(q_vars)
        t_vars = tuple(t_vars)
        if len(set(q_vars + t_vars)) != len(q_vars) + len(t_vars):
            raise VariableMismatch(f"duplicate variable names in {q_vars + t_vars}")
        if den_bound < 1:
            raise SeriesError("denominator bound must be positive")
        q_max = _frac(q_max)
        floor = _frac(floor)
        t_max = int(t_max)
        if t_max < 0:
            raise TruncationError(f"t-degree truncation {t_max} is negative")
        items = terms.items() if isinstance(terms, Mapping) else (terms or ())
        acc: dict = {}
        for key, coeff in items:
            qe, te = key
            qe = tuple(_frac(e) for e in qe)
            te = tuple(int(e) for e in te)
            if len(qe) != len(q_vars) or len(te) != len(t_vars):
                raise VariableMismatch(f"monomial {key} does not match variables {q_vars}, {t_vars}")
            for e in qe:
                if den_bound % e.denominator:
                    raise SeriesError(f"exponent {e} not compatible with denominator bound {den_bound}")
                if e < floor:
                    raise SeriesError(f"q-exponent {e} below floor {floor}")
            if any(e < 0 for e in te):
                raise SeriesError(f"negative t-exponent in {key}")
            if _order(qe) > q_max or sum(te) > t_max:
                continue
            c = _frac(coeff)
            acc[(qe, te)] = acc.get((qe, te), Fraction(0)) + c
        self._init(q_vars, t_vars, den_bound, q_max, t_max, floor, {k: v for k, v in acc.items() if v})

    def _init(self, q_vars, t_vars, den_bound, q_max, t_max, floor, terms):
        object.__setattr__(self, "q_vars", q_vars)
        object.__setattr__(self, "t_vars", t_vars)
        object.__setattr__(self, "den_bound", den_bound)
        object.__setattr__(self, "q_max", q_max)
        object.__setattr__(self, "t_max", t_max)
        object.__setattr__(self, "floor", floor)
        object.__setattr__(self, "_terms", terms)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Series is immutable")

    def _new(self, terms, *, q_max=None, t_max=None, den_bound=None, q_vars=None):
        s = object.__new__(Series)
        s._init(
            self.q_vars if q_vars is None else q_vars,
            self.t_vars,
            self.den_bound if den_bound is None else den_bound,
            self.q_max if q_max is None else q_max,
            self.t_max if t_max is None else t_max,
            self.floor,
            terms,
        )
        return s

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, value, like: "Series") -> "Series":
        return like._const(value)

    def _const(self, value) -> "Series":
        value = _frac(value)
        key = ((Fraction(0),) * len(self.q_vars), (0,) * len(self.t_vars))
        if not value or self.q_max < 0:
            return self._new({})
        return self._new({key: value})

    def zero(self) -> "Series":
        return self._new({})

    def variable(self, name: str) -> "Series":
        """The series consisting of the single variable ``name``."""
        return self.monomial({name: 1})

    def monomial(self, exps: Mapping[str, object], coeff=1) -> "Series":
        qe = [Fraction(0)] * len(self.q_vars)
        te = [0] * len(self.t_vars)
        for name, e in exps.items():
            if name in self.q_vars:
                qe[self.q_vars.index(name)] = _frac(e)
            elif name in self.t_vars:
                te[self.t_vars.index(name)] = int(e)
            else:
                raise VariableMismatch(f"unknown variable {name!r}")
        return Series(
            self.q_vars, self.t_vars, {(tuple(qe), tuple(te)): coeff},
            q_max=self.q_max, t_max=self.t_max, den_bound=self.den_bound, floor=self.floor,
        )

    # -- inspection -------------------------------------------------------

    @property
    def terms(self) -> list:
        """Terms as ``[((q_exps, t_exps), coeff), ...]`` sorted by q-order, then monomial."""
        return sorted(self._terms.items(), key=lambda kv: (_order(kv[0][0]), kv[0]))

    def coefficient(self, q_exps, t_exps) -> Fraction:
        key = (tuple(_frac(e) for e in q_exps), tuple(int(e) for e in t_exps))
        return self._terms.get(key, Fraction(0))

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def variables(self) -> tuple:
        return self.q_vars + self.t_vars

    @staticmethod
    def order(q_exps) -> Fraction:
        return _order(q_exps)

    def min_order(self) -> Fraction:
        if not self._terms:
            raise SeriesError("zero series has no minimal order")
        return min(_order(k[0]) for k in self._terms)

    def is_constant(self) -> bool:
        return all(not any(k[0]) and not any(k[1]) for k in self._terms)

    # -- ring structure ---------------------------------------------------

    def _check(self, other: "Series"):
        if self.q_vars != other.q_vars or self.t_vars != other.t_vars:
            raise VariableMismatch(
                f"variables differ: {self.q_vars + self.t_vars} vs {other.q_vars + other.t_vars}"
            )
        if self.den_bound != other.den_bound:
            raise SeriesError(f"denominator bounds differ: {self.den_bound} vs {other.den_bound}")

    def _coerce(self, other):
        if isinstance(other, Series):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            return self._const(other)
        return NotImplemented

    def _combine(self, other, sign):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        q_max = min(self.q_max, other.q_max)
        t_max = min(self.t_max, other.t_max)
        out = {}
        for k, v in self._terms.items():
            if _order(k[0]) <= q_max and sum(k[1]) <= t_max:
                out[k] = v
        for k, v in other._terms.items():
            if _order(k[0]) <= q_max and sum(k[1]) <= t_max:
                c = out.get(k, Fraction(0)) + sign * v
                if c:
                    out[k] = c
                else:
                    out.pop(k, None)
        return self._new(out, q_max=q_max, t_max=t_max)

    def __add__(self, other):
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self._new({k: -v for k, v in self._terms.items()})

    def scale(self, c) -> "Series":
        c = _frac(c)
        if not c:
            return self._new({})
        return self._new({k: c * v for k, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        q_max = min(self.q_max, other.q_max)
        t_max = min(self.t_max, other.t_max)
        out: dict = {}
        for (qa, ta), ca in self._terms.items():
            oa, da = _order(qa), sum(ta)
            for (qb, tb), cb in other._terms.items():
                if oa + _order(qb) > q_max or da + sum(tb) > t_max:
                    continue
                key = (tuple(x + y for x, y in zip(qa, qb)), tuple(x + y for x, y in zip(ta, tb)))
                if any(e < self.floor for e in key[0]):
                    raise SeriesError(f"product exponent below floor {self.floor}")
                out[key] = out.get(key, Fraction(0)) + ca * cb
        return self._new({k: v for k, v in out.items() if v}, q_max=q_max, t_max=t_max)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(1 / _frac(other))
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, Series):
            return (
                self.q_vars == other.q_vars
                and self.t_vars == other.t_vars
                and self._terms == other._terms
            )
        if isinstance(other, (int, Fraction)):
            return self._terms == self._const(other)._terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(
                self, "_hash", hash((self.q_vars, self.t_vars, frozenset(self._terms.items())))
            )
        return self._hash

    # -- truncation and variables ------------------------------------------

    def truncate(self, q_max=None, t_max=None) -> "Series":
        """Lower the truncation bounds; raising them is refused."""
        q_max = self.q_max if q_max is None else _frac(q_max)
        t_max = self.t_max if t_max is None else int(t_max)
        if q_max > self.q_max or t_max > self.t_max:
            raise TruncationError(
                f"cannot extend truncation ({self.q_max}, {self.t_max}) to ({q_max}, {t_max})"
            )
        terms = {k: v for k, v in self._terms.items() if _order(k[0]) <= q_max and sum(k[1]) <= t_max}
        return self._new(terms, q_max=q_max, t_max=t_max)

    def embed(self, q_vars: Sequence[str], t_vars: Sequence[str], rename: Mapping[str, str] | None = None):
        """Re-express over larger variable lists, optionally renaming variables first."""
        rename = dict(rename or {})
        q_vars, t_vars = tuple(q_vars), tuple(t_vars)
        qpos = []
        for v in self.q_vars:
            target = rename.get(v, v)
            if target not in q_vars:
                raise VariableMismatch(f"q-variable {v!r} -> {target!r} missing from {q_vars}")
            qpos.append(q_vars.index(target))
        tpos = []
        for v in self.t_vars:
            target = rename.get(v, v)
            if target not in t_vars:
                raise VariableMismatch(f"t-variable {v!r} -> {target!r} missing from {t_vars}")
            tpos.append(t_vars.index(target))
        out = {}
        for (qe, te), c in self._terms.items():
            nq = [Fraction(0)] * len(q_vars)
            nt = [0] * len(t_vars)
            for p, e in zip(qpos, qe):
                nq[p] = e
            for p, e in zip(tpos, te):
                nt[p] = e
            out[(tuple(nq), tuple(nt))] = c
        s = object.__new__(Series)
        s._init(q_vars, t_vars, self.den_bound, self.q_max, self.t_max, self.floor, out)
        return s

    def with_den_bound(self, den_bound: int) -> "Series":
        if den_bound % self.den_bound:
            raise SeriesError(f"{den_bound} is not a multiple of {self.den_bound}")
        return self._new(dict(self._terms), den_bound=den_bound)

    # -- calculus ---------------------------------------------------------

    def derive(self, var: str) -> "Series":
        """``q d/dq`` for a Novikov variable, ``d/dt`` for an insertion variable.

        Differentiating in ``t`` lowers the t-truncation by one, since the
        top degree of the result is no longer complete.
        """
        if var in self.q_vars:
            i = self.q_vars.index(var)
            out = {k: v * k[0][i] for k, v in self._terms.items() if k[0][i]}
            return self._new(out)
        if var in self.t_vars:
            if self.t_max == 0:
                raise TruncationError(
                    f"d/d{var} needs t-degree truncation >= 1 (series has 0)"
                )
            i = self.t_vars.index(var)
            out = {}
            for (qe, te), v in self._terms.items():
                n = te[i]
                if n:
                    nt = te[:i] + (n - 1,) + te[i + 1:]
                    out[(qe, nt)] = v * n
            return self._new(out, t_max=self.t_max - 1)
        raise VariableMismatch(f"unknown variable {var!r}")

    def min_order_part(self) -> "Series":
        """Terms of minimal total q-order (t-exponents play no role)."""
        m = self.min_order()
        return self._new({k: v for k, v in self._terms.items() if _order(k[0]) == m})

    # -- substitution and evaluation ------------------------------------

    def substitute(
        self,
        rules: Mapping[str, Mapping[str, object]],
        new_q_vars: Sequence[str] | None = None,
        *,
        q_max=None,
        den_limit: int = DEFAULT_DEN_LIMIT,
    ) -> "Series":
        """Monomial substitution ``q_i -> prod_j new_j^{r_ij}`` of every Novikov variable.

        The result is truncated at ``q_max`` (default: unchanged) measured in
        the new variables.
        """
        missing = set(self.q_vars) - set(rules)
        if missing:
            raise SeriesError(f"substitution rules missing for {sorted(missing)}")
        if new_q_vars is None:
            seen: list = []
            for v in self.q_vars:
                for w in rules[v]:
                    if w not in seen:
                        seen.append(w)
            new_q_vars = seen
        new_q_vars = tuple(new_q_vars)
        if set(new_q_vars) & set(self.t_vars):
            raise VariableMismatch("new Novikov variables clash with insertion variables")
        matrix = []
        den = self.den_bound
        for v in self.q_vars:
            rule = rules[v]
            if not rule:
                raise SeriesError(f"rule for {v!r} is the empty monomial")
            row = [Fraction(0)] * len(new_q_vars)
            for w, e in rule.items():
                if w not in new_q_vars:
                    raise VariableMismatch(f"rule target {w!r} not among {new_q_vars}")
                row[new_q_vars.index(w)] = _frac(e)
            if not any(row):
                raise SeriesError(f"rule for {v!r} maps to a constant monomial")
            den = math.lcm(den, *(e.denominator for e in row))
            matrix.append(row)
        out: dict = {}
        for (qe, te), c in self._terms.items():
            nq = tuple(sum((qe[i] * matrix[i][j] for i in range(len(qe))), Fraction(0))
                       for j in range(len(new_q_vars)))
            den = math.lcm(den, *(e.denominator for e in nq))
            key = (nq, te)
            out[key] = out.get(key, Fraction(0)) + c
        if den > den_limit:
            raise SeriesError(f"denominator bound {den} exceeds limit {den_limit}")
        q_max = self.q_max if q_max is None else _frac(q_max)
        terms = {}
        for k, v in out.items():
            if not v or _order(k[0]) > q_max:
                continue
            if any(e < self.floor for e in k[0]):
                raise SeriesError(f"substituted exponent below floor {self.floor}")
            terms[k] = v
        s = object.__new__(Series)
        s._init(new_q_vars, self.t_vars, den, q_max, self.t_max, self.floor, terms)
        return s

    def evaluate(self, point: Mapping[str, complex]) -> complex:
        """Numeric value at ``point``; coefficients become floats only here."""
        missing = [v for v in self.variables if v not in point]
        if missing:
            raise SeriesError(f"no value assigned to {missing}")
        total = 0j
        for (qe, te), c in self._terms.items():
            val = complex(c.numerator) / c.denominator
            for v, e in zip(self.q_vars, qe):
                val *= _power(complex(point[v]), e, v)
            for v, e in zip(self.t_vars, te):
                if e:
                    val *= complex(point[v]) ** e
            total += val
        return total

    # -- text and JSON ----------------------------------------------------

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for (qe, te), c in self.terms:
            factors = []
            for v, e in list(zip(self.q_vars, qe)) + list(zip(self.t_vars, te)):
                if e == 1:
                    factors.append(v)
                elif e:
                    e = Fraction(e)
                    factors.append(f"{v}^{e.numerator}" if e.denominator == 1 and e > 0 else f"{v}^({e})")
            mag = abs(c)
            body = "*".join(factors)
            if not body:
                text = str(mag)
            elif mag == 1:
                text = body
            elif mag.denominator == 1:
                text = f"{mag.numerator}*{body}"
            elif mag.numerator == 1:
                text = f"{body}/{mag.denominator}"
            else:
                text = f"{mag.numerator}*{body}/{mag.denominator}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, text))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, text in parts[1:]:
            out += f" {sign} {text}"
        return out

    def __repr__(self):
        return f"Series({str(self)!r}, q_vars={self.q_vars}, t_vars={self.t_vars})"

    def to_json(self) -> dict:
        return {
            "q_vars": list(self.q_vars),
            "t_vars": list(self.t_vars),
            "den_bound": self.den_bound,
            "floor": str(self.floor),
            "trunc": {"q": str(self.q_max), "t": self.t_max},
            "terms": [
                {"q": [str(e) for e in qe], "t": list(te), "c": str(c)}
                for (qe, te), c in self.terms
            ],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "Series":
        try:
            terms = {
                (tuple(Fraction(e) for e in t["q"]), tuple(int(e) for e in t["t"])): Fraction(t["c"])
                for t in doc.get("terms", [])
            }
            trunc = doc["trunc"]
            return cls(
                doc["q_vars"], doc["t_vars"], terms,
                q_max=Fraction(trunc["q"]), t_max=int(trunc["t"]),
                den_bound=int(doc.get("den_bound", 1)),
                floor=Fraction(doc.get("floor", str(DEFAULT_FLOOR))),
            )
        except (KeyError, TypeError, ZeroDivisionError) as exc:
            raise SeriesError(f"malformed series document: {exc!r}") from exc

    @classmethod
    def parse(cls, text: str, q_vars: Sequence[str] = (), t_vars: Sequence[str] = (), **kwargs) -> "Series":
        """Parse sums of monomials such as ``"2*q1 - q1*q2*tp^3/3 + q^(1/2)"``.

        The denominator bound is raised automatically to fit the exponents.
        """
        terms = _parse_terms(text, tuple(q_vars), tuple(t_vars))
        den = kwargs.pop("den_bound", 1)
        for (qe, _), _c in terms:
            den = math.lcm(den, *(e.denominator for e in qe))
        return cls(q_vars, t_vars, terms, den_bound=den, **kwargs)


def _power(value: complex, e: Fraction, name: str) -> complex:
    if e.denominator == 1:
        if value == 0 and e < 0:
            raise SeriesError(f"{name} = 0 with negative exponent {e}")
        return value ** int(e)
    if value == 0:
        raise SeriesError(f"{name} = 0 with fractional exponent {e}")
    return cmath.exp(float(e) * cmath.log(value))


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    tokens = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise SeriesError(f"cannot parse series text at {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", int(num)))
        elif name is not None:
            tokens.append(("var", name))
        else:
            tokens.append(("op", "^" if op == "**" else op))
        pos = m.end()
    return tokens


def _parse_terms(text, q_vars, t_vars):
    tokens = _tokenize(text)
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else (None, None)

    def take():
        nonlocal i
        tok = peek()
        i += 1
        return tok

    def exponent():
        kind, val = take()
        if kind == "num":
            return Fraction(val)
        sign = 1
        if (kind, val) == ("op", "-"):
            sign = -1
            kind, val = take()
            if kind == "num":
                return Fraction(-val)
        if (kind, val) != ("op", "("):
            raise SeriesError(f"bad exponent in {text!r}")
        kind, val = take()
        if (kind, val) == ("op", "-"):
            sign = -sign
            kind, val = take()
        if kind != "num":
            raise SeriesError(f"bad exponent in {text!r}")
        e = Fraction(val)
        if peek() == ("op", "/"):
            take()
            kind, den = take()
            if kind != "num":
                raise SeriesError(f"bad exponent in {text!r}")
            e = e / den
        if take() != ("op", ")"):
            raise SeriesError(f"unbalanced parenthesis in {text!r}")
        return sign * e

    out = []
    if not tokens:
        return out
    sign = 1
    if peek() in (("op", "+"), ("op", "-")):
        sign = -1 if take()[1] == "-" else 1
    while True:
        coeff = Fraction(sign)
        qe = [Fraction(0)] * len(q_vars)
        te = [0] * len(t_vars)
        expect_factor = True
        while True:
            kind, val = peek()
            if expect_factor:
                take()
                if kind == "num":
                    coeff *= val
                elif kind == "var":
                    e = Fraction(1)
                    if peek() == ("op", "^"):
                        take()
                        e = exponent()
                    if val in q_vars:
                        qe[q_vars.index(val)] += e
                    elif val in t_vars:
                        if e.denominator != 1 or e < 0:
                            raise SeriesError(f"t-variable {val} needs a nonnegative integer exponent")
                        te[t_vars.index(val)] += int(e)
                    else:
                        raise SeriesError(f"unknown variable {val!r}")
                else:
                    raise SeriesError(f"unexpected token {val!r} in {text!r}")
                expect_factor = False
            elif (kind, val) == ("op", "*"):
                take()
                expect_factor = True
            elif (kind, val) == ("op", "/"):
                take()
                k2, den = take()
                if k2 != "num" or den == 0:
                    raise SeriesError(f"expected a nonzero integer after '/' in {text!r}")
                coeff /= den
            else:
                break
        out.append(((tuple(qe), tuple(te)), coeff))
        kind, val = peek()
        if kind is None:
            break
        if (kind, val) not in (("op", "+"), ("op", "-")):
            raise SeriesError(f"unexpected token {val!r} in {text!r}")
        take()
        sign = -1 if val == "-" else 1
    return out
