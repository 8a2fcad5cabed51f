"""Command line interface: ``qcw <command> [options]``.

Exit status is 0 on success, 1 when a diagnostic check fails and 2 on input
errors (unreadable files, schema violations, unknown models).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from .atoms import AtomCombination, K0Expression, K0SyntaxError, atom_of, hom_check, phi
from .basechange import BaseChange, BaseChangeError, apply_base_change, invert_base_change, permutation_base_change
from .catalog import Catalog, UnknownModel, dump_json, load_document
from .cohomology import CohomologyModel, ModelError, kunneth_product, validate_model
from .quantum import (
    Potential,
    QuantumModel,
    associativity_check,
    connection_K,
    dimension_validate,
    frobenius_check,
    leading_K_decomposition,
    leading_purity_all,
)
from .series import BRANCH, Series, SeriesError
from .spectral import (
    DEFAULT_TOL_CLUSTER,
    DEFAULT_TOL_EIG,
    ClusterGapError,
    EigenError,
    RaySpec,
    convergence_experiment,
    eigenvalues,
    evaluate_matrix,
    generalized_decomposition,
    spectrum_multiset,
    write_convergence_csv,
)

INPUT_ERRORS = (
    ModelError,
    SeriesError,
    BaseChangeError,
    K0SyntaxError,
    UnknownModel,
    FileNotFoundError,
    json.JSONDecodeError,
    ValueError,
)


class InputError(Exception):
    pass


# -- argument helpers -------------------------------------------------------


def _number(text: str) -> complex:
    text = text.strip()
    try:
        return complex(Fraction(text))
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise InputError(f"not a number: {text!r}") from None


def parse_assignments(text: str | None) -> dict:
    """``"q1=1,tp=1/2"`` -> ``{"q1": 1+0j, "tp": 0.5+0j}``."""
    out = {}
    if not text:
        return out
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise InputError(f"expected name=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = _number(v)
    return out


def _assignment_list(items) -> dict:
    out = {}
    for item in items or []:
        out.update(parse_assignments(item))
    return out


def _nu(text: str) -> tuple:
    return tuple(_number(x) for x in text.split(",") if x.strip())


def _cjson(z: complex):
    return {"re": z.real, "im": z.imag}


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- model loading ----------------------------------------------------------


def _catalog(args) -> Catalog:
    return Catalog(getattr(args, "catalog", None))


def load_quantum(args, name: str | None = None) -> QuantumModel:
    """Resolve ``--model`` (catalog name or JSON path) and optional ``--potential``."""
    ref = name or args.model
    cat = _catalog(args)
    if ref.endswith(".json") or Path(ref).is_file():
        doc = load_document(ref)
        model = CohomologyModel.from_json(doc)
    else:
        doc = cat.document(ref)
        model = CohomologyModel.from_json(doc)
    pot_path = getattr(args, "potential", None)
    if pot_path and name is None:
        pdoc = load_document(pot_path)
        if "potential" in pdoc:
            pdoc = dict(pdoc["potential"], model_ref=pdoc.get("name", model.name))
        potential = Potential.from_json(pdoc, model.name)
        if potential.model_ref != model.name:
            raise ModelError(f"potential refers to {potential.model_ref!r}, model is {model.name!r}")
    elif "potential" in doc:
        potential = Potential(model.name, Series.from_json(doc["potential"]))
    else:
        raise ModelError(f"no potential for {model.name!r}; pass --potential")
    qm = QuantumModel(model, potential)
    q_order = getattr(args, "q_order", None)
    t_degree = getattr(args, "t_degree", None)
    if q_order is not None or t_degree is not None:
        qm = qm.truncated(Fraction(q_order) if q_order is not None else None, t_degree)
    return qm


def _matrix_doc(M, names) -> dict:
    s = M[0][0]
    return {
        "basis": list(names),
        "q_vars": list(s.q_vars),
        "t_vars": list(s.t_vars),
        "truncation": {"q": str(s.q_max), "t": s.t_max},
        "matrix": [[str(e) for e in row] for row in M],
    }


def _matrix_text(M, names) -> str:
    cells = [[str(e) for e in row] for row in M]
    width = max(len(c) for row in cells for c in row)
    lines = [f"basis: {', '.join(names)}"]
    for row in cells:
        lines.append("  ".join(c.rjust(width) for c in row))
    return "\n".join(lines) + "\n"


def read_matrix_doc(doc) -> tuple:
    """Parse a matrix document produced by ``kmatrix``."""
    try:
        q_vars, t_vars = doc["q_vars"], doc["t_vars"]
        trunc = doc.get("truncation", {})
        kw = {}
        if "q" in trunc:
            kw["q_max"] = Fraction(trunc["q"])
        if "t" in trunc:
            kw["t_max"] = int(trunc["t"])
        M = [[Series.parse(x, q_vars, t_vars, **kw) for x in row] for row in doc["matrix"]]
        names = doc.get("basis") or [str(i) for i in range(len(M))]
    except KeyError as exc:
        raise ModelError(f"matrix document missing field {exc.args[0]!r}") from exc
    if any(len(row) != len(M) for row in M):
        raise ModelError("field 'matrix' is not square")
    return M, names


# -- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    dim_bad = []
    ref = args.model
    doc = load_document(ref) if ref.endswith(".json") else _catalog(args).document(ref)
    model = CohomologyModel.from_json(doc)
    qm_issues = validate_model(model)
    if not qm_issues:
        try:
            qm = load_quantum(args)
        except ModelError as exc:
            qm_issues.append(str(exc))
        else:
            dim_bad = dimension_validate(qm.model, qm.potential)
    report = {
        "model": model.name,
        "model_issues": qm_issues,
        "dimension_violations": [
            {"monomial": _mono(qm.series, k), "lhs": str(l), "rhs": str(r)} for k, l, r in dim_bad
        ],
        "ok": not qm_issues and not dim_bad,
    }
    _emit(dump_json(report), args.out)
    return 0 if report["ok"] else 1


def _mono(s: Series, key) -> str:
    return str(s.monomial(
        {**dict(zip(s.q_vars, key[0])), **dict(zip(s.t_vars, key[1]))}
    )) if key is not None else "0"


def cmd_kmatrix(args) -> int:
    qm = load_quantum(args)
    K = connection_K(qm)
    names = list(qm.model.names)
    if args.order:
        order = [x.strip() for x in args.order.split(",")]
        if sorted(order) != sorted(names):
            raise InputError(f"--order must list every basis name {names}")
        perm = [names.index(x) for x in order]
        K = apply_base_change(K, permutation_base_change(perm, qm.series.q_vars))
        names = order
    if args.leading:
        K = [[e if e.is_zero() else e.min_order_part() for e in row] for row in K]
    if args.format == "text":
        _emit(_matrix_text(K, names), args.out)
    else:
        doc = _matrix_doc(K, names)
        doc["model"] = qm.model.name
        _emit(dump_json(doc), args.out)
    return 0


def cmd_product(args) -> int:
    cat = _catalog(args)
    x, y = cat.model(args.x), cat.model(args.y)
    model = kunneth_product(x, y, name=args.name)
    _emit(dump_json(model.to_json()), args.out)
    return 0


def _spectrum_doc(qm, point, args) -> dict:
    m = evaluate_matrix(connection_K(qm), point)
    eigs = eigenvalues(m, args.tol_eig)
    spec = spectrum_multiset(eigs, args.tol_cluster)
    doc = {
        "model": qm.model.name,
        "point": {k: _cjson(v) for k, v in sorted(point.items())},
        "branch": BRANCH,
        "spectrum": spec.to_json(),
    }
    if getattr(args, "decompose", False):
        dec = generalized_decomposition(m, args.tol_cluster, args.tol_eig)
        doc["decomposition"] = {
            "blocks": [{"value": _cjson(b.value), "multiplicity": b.multiplicity} for b in dec.blocks],
            "residual": dec.residual,
        }
    return doc


def _point_for(qm, args) -> dict:
    point = _assignment_list(args.point)
    known = set(qm.series.q_vars) | set(qm.series.t_vars)
    unknown = set(point) - known
    if unknown:
        raise InputError(f"unknown variables {sorted(unknown)} for {qm.model.name}")
    missing = [v for v in qm.series.q_vars if v not in point]
    if missing:
        raise InputError(f"--point must assign the Novikov variables {missing}")
    for v in qm.series.t_vars:
        point.setdefault(v, 0j)
    return point


def cmd_spectrum(args) -> int:
    qm = load_quantum(args)
    _emit(dump_json(_spectrum_doc(qm, _point_for(qm, args), args)), args.out)
    return 0


def cmd_converge(args) -> int:
    cat = _catalog(args)
    qmxy = cat.product_quantum(args.x, args.y)
    qmx, qmy = cat.quantum(args.x), cat.quantum(args.y)
    ray = RaySpec(_nu(args.nu), _assignment_list(args.t), args.eps0, args.factor, args.steps)
    rows = convergence_experiment(qmx, qmy, qmxy, ray, tol_eig=args.tol_eig)
    _emit(write_convergence_csv(rows), args.out)
    for r in rows:
        if r.error:
            print(f"eps={r.epsilon:.3e}: {r.error}", file=sys.stderr)
    return 1 if any(r.error for r in rows) else 0


def cmd_basechange(args) -> int:
    bc = BaseChange.from_json(load_document(args.bc))
    if args.inverse:
        bc = invert_base_change(bc)
    if args.matrix:
        K, names = read_matrix_doc(load_document(args.matrix))
        degrees = None
    else:
        if not args.model:
            raise InputError("basechange needs --model or --matrix")
        qm = load_quantum(args)
        K, names = connection_K(qm), list(qm.model.names)
        degrees = qm.model.degrees
    out = apply_base_change(K, bc, degrees=degrees)
    new_names = [f"e{k}" for k in range(len(out))]
    if args.format == "text":
        _emit(_matrix_text(out, new_names), args.out)
    else:
        _emit(dump_json(_matrix_doc(out, new_names)), args.out)
    return 0


def cmd_atom(args) -> int:
    qm = load_quantum(args)
    a = atom_of(qm, _point_for(qm, args), tol_eig=args.tol_eig, tol_cluster=args.tol_cluster)
    _emit(dump_json({"model": qm.model.name, "branch": BRANCH, "atom": a.to_json()}), args.out)
    return 0


def _variety_points(items) -> dict:
    """``p1:q=1`` style assignments, one per variety."""
    out = {}
    for item in items or []:
        if ":" not in item:
            raise InputError(f"expected variety:name=value,..., got {item!r}")
        name, rest = item.split(":", 1)
        out.setdefault(name.strip(), {}).update(parse_assignments(rest))
    return out


def cmd_phi(args) -> int:
    expr = K0Expression.parse(args.expr)
    comb: AtomCombination = phi(
        expr, _variety_points(args.point), _catalog(args), mixed=_assignment_list(args.mixed),
        tol_eig=args.tol_eig, tol_cluster=args.tol_cluster,
    )
    doc = {"expression": str(expr), "branch": BRANCH, "terms": comb.to_json()}
    _emit(dump_json(doc), args.out)
    return 0


def _factor_names(args, qm) -> tuple:
    if args.x and args.y:
        return args.x, args.y
    info = qm.model.product
    if info is None:
        raise InputError(f"{qm.model.name} is not a product; pass --x and --y")
    return info.factors


def cmd_check(args) -> int:
    suite = args.suite
    cat = _catalog(args)
    report: dict = {"suite": suite}
    if suite == "hom":
        x, y = args.x, args.y
        if not (x and y):
            if not args.model:
                raise InputError("the hom suite needs --x and --y (or a product --model)")
            x, y = _factor_names(args, load_quantum(args))
        ray = RaySpec(_nu(args.nu), _assignment_list(args.t), args.eps0, args.factor, args.steps)
        r = hom_check(cat, x, y, ray.nu, ray.t_point, ray.schedule(),
                      tol_eig=args.tol_eig, tol_cluster=args.tol_cluster)
        report.update(
            product=f"{x}*{y}",
            rows=[{"epsilon": e, "distance": None if math.isnan(d) else d, "error": err} for e, d, err in r.rows],
            decreasing=r.decreasing,
            final=None if math.isnan(r.final) else r.final,
            skipped=[{"relation": rel, "status": why} for rel, why in r.skipped],
        )
        ok = r.decreasing
    else:
        if not args.model:
            raise InputError(f"the {suite} suite needs --model")
        qm = load_quantum(args)
        report["model"] = qm.model.name
        if suite == "associativity":
            a = associativity_check(qm)
            ok = a.ok
            report.update(
                truncation={"q": str(a.truncation[0]), "t": a.truncation[1]},
                max_residual=str(a.max_residual),
                failures=[list(f[:3]) for f in a.failures],
            )
        elif suite == "frobenius":
            bad = frobenius_check(qm)
            ok = not bad
            report["failures"] = [list(b[:3]) for b in bad]
        elif suite == "purity":
            res = leading_purity_all(qm)
            fails = [r for r in res if r.status == "fail"]
            ok = not fails
            report.update(
                checked=len(res),
                passed=sum(r.status == "pass" for r in res),
                empty=sum(r.status == "empty" for r in res),
                failures=[
                    {"indices": [qm.model.names[i] for i in r.indices], "leading": str(r.leading)} for r in fails
                ],
            )
        elif suite == "decomposition":
            x, y = _factor_names(args, qm)
            d = leading_K_decomposition(cat.quantum(x), cat.quantum(y), qm)
            names = qm.model.names
            ok = d.ok and not d.not_mixed
            report.update(
                order_violations=[[names[r], names[c]] for r, c in d.violations],
                not_mixed=[[names[r], names[c]] for r, c in d.not_mixed],
                residual={
                    f"{names[r]},{names[c]}": str(d.residual[r][c]) for (r, c) in sorted(d.gaps)
                },
            )
        elif suite == "dimension":
            bad = dimension_validate(qm.model, qm.potential)
            ok = not bad
            report["violations"] = [
                {"monomial": _mono(qm.series, k), "lhs": str(l), "rhs": str(r)} for k, l, r in bad
            ]
        else:  # pragma: no cover - argparse restricts choices
            raise InputError(f"unknown suite {suite}")
    report["ok"] = ok
    _emit(dump_json(report), args.out)
    return 0 if ok else 1


def cmd_catalog(args) -> int:
    cat = _catalog(args)
    if args.action == "list":
        _emit("".join(f"{n}\n" for n in cat.names()), args.out)
        return 0
    if not args.name:
        raise InputError("catalog show needs a name")
    doc = cat.document(args.name)
    model = CohomologyModel.from_json(doc)
    if args.format == "text":
        lines = [f"name: {model.name}", f"dim_c: {model.dim_c}",
                 "basis: " + ", ".join(f"{b.name}(deg {b.degree})" for b in model.basis),
                 "c1: " + " + ".join(f"{c}*{model.basis[i].name}" for i, c in enumerate(model.c1) if c)]
        if "potential" in doc:
            lines.append(f"potential: {Series.from_json(doc['potential'])}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        _emit(dump_json(doc), args.out)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-eig", type=float, default=DEFAULT_TOL_EIG)
    common.add_argument("--tol-cluster", type=float, default=DEFAULT_TOL_CLUSTER)
    common.add_argument("--catalog", help="catalog directory (default: $QCW_CATALOG_DIR or the built-in one)")
    common.add_argument("--out", help="write output to this file instead of stdout")

    p = argparse.ArgumentParser(prog="qcw", description="Quantum connection matrices and their spectra.")
    sub = p.add_subparsers(dest="command", required=True)

    def model_opts(sp, required=True):
        sp.add_argument("--model", required=required, help="catalog name or model JSON path")
        sp.add_argument("--potential", help="potential JSON (overrides the catalog potential)")
        sp.add_argument("--q-order", help="truncate to this total q-order (rational)")
        sp.add_argument("--t-degree", type=int, help="truncate to this t-degree")

    def ray_opts(sp):
        sp.add_argument("--nu", default="1,1", help="ray direction, comma separated")
        sp.add_argument("--t", action="append", help="insertion values, e.g. tp=1")
        sp.add_argument("--eps0", type=float, default=1e-2)
        sp.add_argument("--factor", type=float, default=0.5)
        sp.add_argument("--steps", type=int, default=20)

    sp = sub.add_parser("validate", parents=[common], help="check a model and its potential")
    model_opts(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("kmatrix", parents=[common], help="connection matrix K")
    model_opts(sp)
    sp.add_argument("--order", help="basis names in output order, comma separated")
    sp.add_argument("--leading", action="store_true", help="keep only the minimal q-order part of each entry")
    sp.add_argument("--format", choices=["json", "text"], default="json")
    sp.set_defaults(func=cmd_kmatrix)

    sp = sub.add_parser("product", parents=[common], help="Kunneth product of two catalog models")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--name")
    sp.set_defaults(func=cmd_product)

    sp = sub.add_parser("spectrum", parents=[common], help="eigenvalues of K at a point")
    model_opts(sp)
    sp.add_argument("--point", action="append", help="e.g. q1=1,q2=1,tp=0")
    sp.add_argument("--decompose", action="store_true", help="also split into generalized eigenspaces")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("converge", parents=[common], help="product spectrum vs pairwise sums along a ray")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    ray_opts(sp)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("basechange", parents=[common], help="apply a base change to K")
    model_opts(sp, required=False)
    sp.add_argument("--bc", required=True, help="base change JSON")
    sp.add_argument("--matrix", help="matrix JSON (as written by kmatrix) instead of --model")
    sp.add_argument("--inverse", action="store_true")
    sp.add_argument("--format", choices=["json", "text"], default="json")
    sp.set_defaults(func=cmd_basechange)

    sp = sub.add_parser("atom", parents=[common], help="atom proxy (spectrum multiset) at a point")
    model_opts(sp)
    sp.add_argument("--point", action="append")
    sp.set_defaults(func=cmd_atom)

    sp = sub.add_parser("phi", parents=[common], help="motivic measure of a formal combination")
    sp.add_argument("--expr", required=True, help="e.g. '[P1]*[P1] - [P1xP1] + 2*[pt]'")
    sp.add_argument("--point", action="append", help="per variety, e.g. p1:q=1")
    sp.add_argument("--mixed", action="append", help="values of mixed insertion variables, e.g. tp=0")
    sp.set_defaults(func=cmd_phi)

    sp = sub.add_parser("check", parents=[common], help="run a diagnostic suite")
    sp.add_argument("--suite", required=True,
                    choices=["associativity", "frobenius", "purity", "decomposition", "dimension", "hom"])
    model_opts(sp, required=False)
    sp.add_argument("--x")
    sp.add_argument("--y")
    ray_opts(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("catalog", parents=[common], help="list or show catalog entries")
    sp.add_argument("action", choices=["list", "show"])
    sp.add_argument("name", nargs="?")
    sp.add_argument("--format", choices=["json", "text"], default="json")
    sp.set_defaults(func=cmd_catalog)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"qcw: error: {exc}", file=sys.stderr)
        return 2
    except (EigenError, ClusterGapError) as exc:
        print(f"qcw: numerical failure: {exc}", file=sys.stderr)
        return 1
    except INPUT_ERRORS as exc:
        print(f"qcw: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
