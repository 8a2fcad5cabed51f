"""Scikit-learn style wrapper: points in, sorted K-eigenvalues out."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .catalog import Catalog
from .quantum import connection_K
from .spectral import DEFAULT_TOL_EIG, eigenvalues, evaluate_matrix


class QuantumSpectrum(TransformerMixin, BaseEstimator):
    """Map points ``(q..., t...)`` of a catalog model to the spectrum of K.

    ``fit`` ignores its data and only builds the connection matrix; columns of
    ``X`` follow ``variables_`` (Novikov variables first, then insertions).
    ``transform`` returns a complex array of shape ``(n_samples, rank)`` with
    eigenvalues sorted by real then imaginary part.
    """

    def __init__(self, model="p1xp1", catalog_dir=None, tol_eig=DEFAULT_TOL_EIG):
        self.model = model
        self.catalog_dir = catalog_dir
        self.tol_eig = tol_eig

    def fit(self, X=None, y=None):
        qm = Catalog(self.catalog_dir).quantum(self.model)
        self.K_ = connection_K(qm)
        self.variables_ = tuple(qm.series.q_vars) + tuple(qm.series.t_vars)
        self.rank_ = qm.rank
        self.n_features_in_ = len(self.variables_)
        return self

    def _points(self, X):
        X = np.asarray(X, dtype=complex)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} columns {self.variables_}, got shape {X.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("input contains non-finite values")
        return X

    def transform(self, X):
        check_is_fitted(self, "K_")
        X = self._points(X)
        out = np.empty((X.shape[0], self.rank_), dtype=complex)
        for r, row in enumerate(X):
            point = dict(zip(self.variables_, row))
            out[r] = eigenvalues(evaluate_matrix(self.K_, point), self.tol_eig)
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "K_")
        return np.array([f"eig{k}" for k in range(self.rank_)], dtype=object)
