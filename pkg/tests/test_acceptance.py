"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line (shown in the pytest terminal
summary, or printed when the module is run directly) and then asserts.
Tolerances and runtime limits are the required ones; nothing is relaxed.
"""

import csv
import io
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from qcw.atoms import K0Expression, hom_check, phi
from qcw.basechange import BaseChange, apply_base_change, conjugate, permutation_base_change
from qcw.catalog import Catalog
from qcw.cli import main as cli_main
from qcw.quantum import (
    associativity_check,
    connection_K,
    dimension_validate,
    frobenius_check,
    leading_K_decomposition,
    leading_purity_all,
    leading_purity_check,
)
from qcw.series import Series
from qcw.spectral import eigenvalues, evaluate_matrix, kronecker_sum, matching_distance

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

DATA = Path(__file__).with_name("data")

# basis order (1, H1, H2, pt); H1 pairs with q1
REFERENCE_K = [
    ["0", "2*q1", "2*q2", "2*q1*q2*tp"],
    ["2", "-q1*q2*tp^3/3", "q2*tp", "2*q2"],
    ["2", "q1*tp", "-q1*q2*tp^3/3", "2*q1"],
    ["-2*tp", "2", "2", "0"],
]
# basis (1, H, D, pt) with H = H1 + H2, D = H1 - H2, before substitution
REFERENCE_CONJUGATED = [
    ["0", "2*q1 + 2*q2", "2*q1 - 2*q2", "2*q1*q2*tp"],
    ["2", "-q1*q2*tp^3/3 + q1*tp/2 + q2*tp/2", "q1*tp/2 - q2*tp/2", "q1 + q2"],
    ["0", "-q1*tp/2 + q2*tp/2", "-q1*q2*tp^3/3 - q1*tp/2 - q2*tp/2", "-q1 + q2"],
    ["-2*tp", "4", "0", "0"],
]
# after q1 = (qh qd)^(1/2), q2 = (qh / qd)^(1/2)
REFERENCE_FINAL = [
    ["0", "2*qh^(1/2)*qd^(1/2) + 2*qh^(1/2)*qd^(-1/2)",
     "2*qh^(1/2)*qd^(1/2) - 2*qh^(1/2)*qd^(-1/2)", "2*qh*tp"],
    ["2", "-qh*tp^3/3 + qh^(1/2)*qd^(1/2)*tp/2 + qh^(1/2)*qd^(-1/2)*tp/2",
     "qh^(1/2)*qd^(1/2)*tp/2 - qh^(1/2)*qd^(-1/2)*tp/2", "qh^(1/2)*qd^(1/2) + qh^(1/2)*qd^(-1/2)"],
    ["0", "-qh^(1/2)*qd^(1/2)*tp/2 + qh^(1/2)*qd^(-1/2)*tp/2",
     "-qh*tp^3/3 - qh^(1/2)*qd^(1/2)*tp/2 - qh^(1/2)*qd^(-1/2)*tp/2", "-qh^(1/2)*qd^(1/2) + qh^(1/2)*qd^(-1/2)"],
    ["-2*tp", "4", "0", "0"],
]
HD = BaseChange(
    [[1, 0, 0, 0], [0, 1, 1, 0], [0, 1, -1, 0], [0, 0, 0, 1]],
    {"q1": {"qh": "1/2", "qd": "1/2"}, "q2": {"qh": "1/2", "qd": "-1/2"}},
    ("qh", "qd"),
)


def record(n, title, ok, seconds, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} ({seconds:.2f}s)"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def parse_matrix(rows, q_vars, t_vars):
    return [[Series.parse(x, q_vars, t_vars, q_max=3, t_max=5) for x in row] for row in rows]


def leading(M):
    return [[e if e.is_zero() else e.min_order_part() for e in row] for row in M]


def mismatches(A, B, names):
    return [f"({names[i]},{names[j]}): {A[i][j]} vs {B[i][j]}"
            for i in range(len(A)) for j in range(len(A)) if A[i][j] != B[i][j]]


def test_criterion_1_potential_terms():
    t0 = time.perf_counter()
    qm = Catalog().quantum("p1xp1")
    s = qm.series
    dim_ok = dimension_validate(qm.model, qm.potential) == []
    F = Fraction
    expected = {
        ((F(1), F(0)), (1,)): F(1),
        ((F(0), F(1)), (1,)): F(1),
        ((F(1), F(1)), (3,)): F(1, 6),
        ((F(2), F(1)), (5,)): F(1, 120),
        ((F(1), F(2)), (5,)): F(1, 120),
    }
    terms_ok = s.q_vars == ("q1", "q2") and s.t_vars == ("tp",) and dict(s.terms) == expected
    dt = time.perf_counter() - t0
    ok = dim_ok and terms_ok and dt < 1
    record(1, "shipped P1xP1 potential and dimension constraint", ok, dt,
           f"dimension_validate clean={dim_ok}, terms exact={terms_ok}")
    assert ok


def test_criterion_2_golden_matrices():
    t0 = time.perf_counter()
    qm = Catalog().quantum("p1xp1")
    perm = permutation_base_change([qm.model.index(n) for n in ("1", "H1", "H2", "pt")], qm.series.q_vars)
    K = apply_base_change(connection_K(qm), perm)
    qv, tv = K[0][0].q_vars, K[0][0].t_vars
    ref_k = parse_matrix(REFERENCE_K, qv, tv)
    ref_c = parse_matrix(REFERENCE_CONJUGATED, qv, tv)
    ref_f = parse_matrix(REFERENCE_FINAL, ("qh", "qd"), tv)
    names = ["1", "H1", "H2", "pt"]
    bad_k = mismatches(leading(K), ref_k, names)
    bad_c = mismatches(conjugate(K, HD.T), ref_c, ["1", "H", "D", "pt"])
    bad_f = mismatches(apply_base_change(K, HD), ref_f, ["1", "H", "D", "pt"])
    # the base-change machinery on its own, fed the reference K
    chain_ok = conjugate(ref_k, HD.T) == ref_c and apply_base_change(ref_k, HD) == ref_f
    dt = time.perf_counter() - t0
    ok = not bad_k and not bad_c and not bad_f and dt < 1
    detail = (f"K entries matching {16 - len(bad_k)}/16, conjugated {16 - len(bad_c)}/16, "
              f"substituted {16 - len(bad_f)}/16; reference K through the base change reproduces "
              f"both later matrices={chain_ok}")
    if bad_k:
        detail += "; K differs at " + "; ".join(bad_k)
    record(2, "golden K, conjugated and substituted matrices", ok, dt, detail)
    assert chain_ok
    assert ok, detail


def test_criterion_3_kronecker_spectrum():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240607)
    worst = 0.0
    pairs = 0
    for _ in range(24):
        m, n = rng.integers(2, 6, size=2)
        A = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        B = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        la, mu = eigenvalues(A), eigenvalues(B)
        scale = max(1.0, max(abs(x) for x in la) + max(abs(y) for y in mu))
        d = matching_distance(eigenvalues(kronecker_sum(A, B)), [x + y for x in la for y in mu])
        worst = max(worst, d / scale)
        pairs += 1
    dt = time.perf_counter() - t0
    ok = pairs >= 20 and worst <= 1e-9 and dt < 5
    record(3, "spectrum of Kronecker sums is the pairwise sums", ok, dt,
           f"{pairs} pairs, worst relative distance {worst:.2e}")
    assert ok


def test_criterion_4_residual_structure():
    t0 = time.perf_counter()
    cat = Catalog()
    qm, p1 = cat.quantum("p1xp1"), cat.quantum("p1")
    dec = leading_K_decomposition(p1, p1, qm)
    dt = time.perf_counter() - t0
    names = qm.model.names
    ok = dec.ok and not dec.not_mixed and dt < 1
    detail = (f"order gap violations={[(names[r], names[c]) for r, c in dec.violations]}, "
              f"entries without both q1 and q2="
              + ", ".join(f"({names[r]},{names[c]}): {dec.residual[r][c]}" for r, c in dec.not_mixed))
    record(4, "residual K - (Kx (+) Ky) is mixed and of higher order", ok, dt, detail)
    assert ok, detail


def test_criterion_5_convergence(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "conv.csv"
    code = cli_main(["converge", "--x", "p1", "--y", "p1", "--nu", "1,1", "--t", "tp=1",
                     "--eps0", "1e-2", "--factor", "0.5", "--steps", "20", "--out", str(out)])
    dt = time.perf_counter() - t0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    d = [float(r["distance"]) for r in rows]
    golden = list(csv.DictReader(io.StringIO((DATA / "converge_p1xp1.csv").read_text())))
    strictly = all(b < a for a, b in zip(d, d[1:]))
    golden_ok = len(golden) == len(rows) and all(
        math.isclose(float(g["distance"]), x, rel_tol=1e-9, abs_tol=1e-300) for g, x in zip(golden, d)
    )
    ok = code == 0 and len(d) == 20 and strictly and d[-1] <= 1e-8 and golden_ok and dt < 10
    record(5, "product spectrum converges to pairwise sums along the ray", ok, dt,
           f"strictly decreasing={strictly}, final distance {d[-1]:.3e}, matches golden CSV={golden_ok}")
    assert ok


def test_criterion_6_associativity():
    t0 = time.perf_counter()
    cat = Catalog()
    p1_ok = associativity_check(cat.quantum("p1")).ok
    qm = cat.quantum("p1xp1")
    rep = associativity_check(qm, 3, 5)
    s = qm.series
    perturbed = qm.with_potential(s + s.monomial({"q1": 1, "q2": 1, "tp": 3}, Fraction(1, 1000)))
    detected = not associativity_check(perturbed, 3, 5).ok
    dt = time.perf_counter() - t0
    ok = p1_ok and rep.ok and detected and dt < 10
    record(6, "associativity of the quantum product", ok, dt,
           f"P1 exact={p1_ok}, P1xP1 exact at (q<=3, t<=5)={rep.ok}, perturbation detected={detected}")
    assert ok


def test_criterion_7_leading_purity():
    t0 = time.perf_counter()
    qm = Catalog().quantum("p1xp1")
    results = leading_purity_all(qm)
    fails = [r for r in results if r.status == "fail"]
    s = qm.series
    counter = qm.with_potential(s.monomial({"q1": 1, "q2": 1, "tp": 3}, Fraction(1, 6)))
    pt = qm.model.index("pt")
    counter_fails = leading_purity_check(counter, pt, pt, pt).status == "fail"
    dt = time.perf_counter() - t0
    names = qm.model.names
    ok = len(results) == 64 and not fails and counter_fails and dt < 5
    detail = (f"{64 - len(fails)}/64 triples pass, counter-instance rejected={counter_fails}")
    if fails:
        r = fails[0]
        detail += f"; e.g. Gamma_{{{','.join(names[i] for i in r.indices)}}} leads with {r.leading}"
    record(7, "leading terms of structure constants are pure", ok, dt, detail)
    assert counter_fails
    assert ok, detail


def test_criterion_8_motivic_measure():
    t0 = time.perf_counter()
    cat = Catalog()
    r = hom_check(cat, "p1", "p1", (1, 1), {"tp": 1}, [1e-2 * 0.5 ** k for k in range(20)])
    pts = {"p1": {"q": 0.01}, "p1xp1": {"q1": 0.01, "q2": 0.01}}
    E = K0Expression.parse
    f = lambda e: phi(e, pts, cat)
    add_ok = (
        f(E("[P1] + [P1]")) == f(E("[P1]")).scale(2)
        and f(E("[P1] + [pt]")) == f(E("[P1]")) + f(E("[pt]"))
        and f(E("[P1]*[P1] - [P1xP1] + 2*[pt]")) == f(E("[P1]*[P1]")) - f(E("[P1xP1]")) + f(E("[pt]")).scale(2)
        and f(E("")).is_zero()
    )
    dt = time.perf_counter() - t0
    ok = r.decreasing and r.final <= 1e-8 and add_ok and dt < 10
    record(8, "atom of the product vs tensor of atoms; additivity", ok, dt,
           f"decreasing={r.decreasing}, final {r.final:.3e}, additivity exact={add_ok}, "
           f"blow-up relation: {r.skipped[0][1]}")
    assert ok


def test_criterion_9_frobenius_and_metric():
    t0 = time.perf_counter()
    cat = Catalog()
    frob_ok = all(frobenius_check(cat.quantum(n)) == [] for n in cat.names())
    rng = np.random.default_rng(99)
    metric_ok = True
    for _ in range(50):
        k = int(rng.integers(1, 6))
        a, b, c = (list(rng.normal(size=k) + 1j * rng.normal(size=k)) for _ in range(3))
        dab, dba = matching_distance(a, b), matching_distance(b, a)
        metric_ok &= matching_distance(a, a) == 0 and dab == dba and dab >= 0
        metric_ok &= matching_distance(a, c) <= dab + matching_distance(b, c) + 1e-12
    trace_worst = 0.0
    mats = [rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for n in (2, 3, 4, 5, 8)]
    K = connection_K(cat.quantum("p1xp1"))
    mats += [evaluate_matrix(K, {"q1": e, "q2": 2 * e, "tp": 1}) for e in (1, 1e-2, 1e-5)]
    for m in mats:
        scale = max(1.0, np.linalg.norm(m, 2))
        trace_worst = max(trace_worst, abs(np.trace(m) - sum(eigenvalues(m))) / scale)
    dt = time.perf_counter() - t0
    ok = frob_ok and metric_ok and trace_worst <= 1e-10 and dt < 5
    record(9, "Frobenius property, matching metric axioms, trace identity", ok, dt,
           f"Frobenius exact={frob_ok}, metric axioms={metric_ok}, worst trace gap {trace_worst:.1e}")
    assert ok


if __name__ == "__main__":
    import tempfile

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    for t in tests:
        try:
            if "tmp_path" in t.__code__.co_varnames[: t.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    t(Path(d))
            else:
                t()
        except AssertionError:
            pass
