"""Built-in catalog of varieties (model plus potential per JSON file)."""

from __future__ import annotations

import json
import os
from pathlib import Path

from .cohomology import CohomologyModel, ModelError, kunneth_product
from .quantum import Potential, QuantumModel, factor_index_map
from .series import Series

__all__ = ["Catalog", "UnknownModel", "CATALOG_ENV", "default_catalog_dir", "dump_json", "load_document"]

CATALOG_ENV = "QCW_CATALOG_DIR"
ALIASES = {"pt": "point"}


class UnknownModel(KeyError):
    def __str__(self):
        return f"unknown model {self.args[0]!r}"


def default_catalog_dir() -> Path:
    env = os.environ.get(CATALOG_ENV)
    if env:
        return Path(env)
    return Path(__file__).with_name("catalog")


def dump_json(doc) -> str:
    """Deterministic JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_document(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


class Catalog:
    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else default_catalog_dir()
        self._cache: dict = {}

    def names(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def _path(self, name: str) -> Path:
        key = ALIASES.get(name.lower(), name.lower())
        path = self.directory / f"{key}.json"
        if not path.exists():
            raise UnknownModel(name)
        return path

    def document(self, name: str) -> dict:
        return load_document(self._path(name))

    def model(self, name: str) -> CohomologyModel:
        return CohomologyModel.from_json(self.document(name))

    def potential(self, name: str) -> Potential:
        doc = self.document(name)
        if "potential" not in doc:
            raise ModelError(f"catalog entry {name!r} has no potential")
        return Potential(doc["name"], Series.from_json(doc["potential"]))

    def quantum(self, name: str) -> QuantumModel:
        key = ALIASES.get(name.lower(), name.lower())
        if key not in self._cache:
            self._cache[key] = QuantumModel(self.model(key), self.potential(key))
        return self._cache[key]

    def find_product(self, x: str, y: str) -> str | None:
        x = ALIASES.get(x.lower(), x.lower())
        y = ALIASES.get(y.lower(), y.lower())
        for name in self.names():
            doc = self.document(name)
            if doc.get("product", {}).get("factors") == [x, y]:
                return name
        return None

    def product_quantum(self, x: str, y: str) -> QuantumModel:
        """Quantum model of ``x * y``.

        Catalog entries are used when present.  Otherwise a product can only be
        built with a point factor, which adds no classes and no invariants.
        """
        name = self.find_product(x, y)
        if name is not None:
            return self.quantum(name)
        qx, qy = self.quantum(x), self.quantum(y)
        if qx.rank != 1 and qy.rank != 1:
            raise UnknownModel(f"{x}x{y}")
        model = kunneth_product(qx.model, qy.model)
        keep = qy if qx.rank == 1 else qx
        side = "y" if keep is qy else "x"
        imap = factor_index_map(model, keep.model, side)
        rename = {keep.model.var_name(i): model.var_name(k) for i, k in imap.items()
                  if i != keep.model.unit_index}
        series = keep.series.embed(model.q_vars, model.t_vars, rename)
        return QuantumModel(model, Potential(model.name, series))


def entry_document(model: CohomologyModel, potential: Series | None) -> dict:
    doc = model.to_json()
    if potential is not None:
        doc["potential"] = potential.to_json()
    return doc


P1XP1_POTENTIAL = "q1*tp + q2*tp + q1*q2*tp^3/6 + q1^2*q2*tp^5/120 + q1*q2^2*tp^5/120"


def generate_p1xp1(catalog: Catalog | None = None) -> dict:
    """The shipped P1 x P1 entry: Kunneth model of the catalog P1 with itself and
    the genus-0 potential through q-order 3 (t-degree 5)."""
    catalog = catalog or Catalog(Path(__file__).with_name("catalog"))
    p1 = catalog.model("p1")
    model = kunneth_product(
        p1, p1, name="p1xp1", basis_names=["1", "H2", "H1", "pt"], var_names={3: "tp"}
    )
    series = Series.parse(P1XP1_POTENTIAL, model.q_vars, model.t_vars, q_max=3, t_max=5)
    return entry_document(model, series)
