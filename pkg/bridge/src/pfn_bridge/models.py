"""Distributional regressors the exporter can drive.

A model must fit (X, y) and report a predictive CDF (and density) on an
arbitrary label grid for one query row.  The real backend is TabPFN,
imported lazily; a tiny local-Gaussian stub exists so the export machinery
can be exercised and tested without the model or its weights.
"""

from __future__ import annotations

import numpy as np

INSTALL_HINT = (
    "TabPFN backend not available: install it with `pip install 'pfn-bridge[tabpfn]'` "
    "(or `pip install tabpfn`) and ensure its model weights are reachable"
)


class ModelUnavailable(RuntimeError):
    pass


class LocalGaussianStub:
    """Nearest-neighbor Gaussian stand-in used for tests and dry runs."""

    def __init__(self, k: int = 20):
        self.k = k
        self._x = None
        self._y = None

    def fit(self, X, y):
        self._x = np.asarray(X, dtype=float)
        self._y = np.asarray(y, dtype=float)
        return self

    def predict_cdf(self, x_row, grid):
        if self._x is None:
            raise RuntimeError("stub not fitted")
        x_row = np.asarray(x_row, dtype=float)
        d2 = np.sum((self._x - x_row) ** 2, axis=1)
        k = min(self.k, self._y.size)
        idx = np.argpartition(d2, k - 1)[:k]
        m = float(np.mean(self._y[idx]))
        sd = float(max(np.std(self._y[idx]), 1e-3))
        z = (np.asarray(grid) - m) / sd
        cdf = 0.5 * (1.0 + _erf(z / np.sqrt(2.0)))
        pdf = np.exp(-0.5 * z * z) / (sd * np.sqrt(2.0 * np.pi))
        return cdf, pdf


def _erf(x):
    # Abramowitz-Stegun 7.1.26; plenty for a test stub
    x = np.asarray(x, dtype=float)
    sign = np.sign(x)
    ax = np.abs(x)
    t = 1.0 / (1.0 + 0.3275911 * ax)
    poly = t * (
        0.254829592
        + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429)))
    )
    return sign * (1.0 - poly * np.exp(-ax * ax))


class TabPFNModel:
    """Thin adapter around the TabPFN regressor's distributional output."""

    def __init__(self, **kwargs):
        try:
            from tabpfn import TabPFNRegressor
        except ImportError as err:
            raise ModelUnavailable(INSTALL_HINT) from err
        self._regressor = TabPFNRegressor(**kwargs)
        self._fitted = False

    def fit(self, X, y):
        self._regressor.fit(np.asarray(X, dtype=float), np.asarray(y, dtype=float))
        self._fitted = True
        return self

    def predict_cdf(self, x_row, grid):
        if not self._fitted:
            raise RuntimeError("model not fitted")
        import torch

        out = self._regressor.predict(
            np.asarray(x_row, dtype=float)[None, :], output_type="full"
        )
        logits = out["logits"]
        criterion = out["criterion"]
        ys = torch.as_tensor(np.asarray(grid, dtype=float), dtype=torch.float32)
        cdf = criterion.cdf(logits, ys).detach().cpu().numpy().reshape(-1)
        pdf = np.gradient(cdf, np.asarray(grid, dtype=float))
        return cdf, np.maximum(pdf, 0.0)


def make_model(name: str, **kwargs):
    if name == "tabpfn":
        return TabPFNModel(**kwargs)
    if name == "stub":
        return LocalGaussianStub(**kwargs)
    raise ValueError(f"unknown model {name!r}; expected 'tabpfn' or 'stub'")
