"""Least squares, ridge and lasso with an unpenalized intercept."""
from __future__ import annotations

import numpy as np
import scipy.linalg
from numba import njit

from .base import Regressor


class _LinearModel(Regressor):
    def _predict(self, X):
        return X @ self.coef_ + self.intercept_

    def _state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_}

    def _load_state(self, state):
        self.coef_ = np.array(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])


class LinearRegression(_LinearModel):
    """OLS via a complete orthogonal decomposition (QR with column pivoting).

    Rank-deficient designs get the minimum-norm least-squares solution.
    """

    kind = "linear"
    defaults = {}

    def _fit(self, X, y, seed, feature_names):
        xm, ym = X.mean(axis=0), y.mean()
        cond = np.finfo(float).eps * max(X.shape)
        coef, *_ = scipy.linalg.lstsq(X - xm, y - ym, cond=cond, lapack_driver="gelsy")
        self.coef_ = coef
        self.intercept_ = float(ym - xm @ coef)


class Ridge(_LinearModel):
    """Minimizes ``||y - b0 - X b||^2 + lam ||b||^2``."""

    kind = "ridge"
    defaults = {"lam": 1.0}

    def _fit(self, X, y, seed, feature_names):
        lam = float(self.hyperparameters["lam"])
        xm, ym = X.mean(axis=0), y.mean()
        Xc = X - xm
        A = Xc.T @ Xc + lam * np.eye(X.shape[1])
        self.coef_ = scipy.linalg.solve(A, Xc.T @ (y - ym), assume_a="pos")
        self.intercept_ = float(ym - xm @ self.coef_)

    def objective(self, X, y, coef=None, intercept=None):
        coef = self.coef_ if coef is None else coef
        intercept = self.intercept_ if intercept is None else intercept
        r = y - X @ coef - intercept
        return float(r @ r + self.hyperparameters["lam"] * coef @ coef)


@njit(cache=True, nogil=True)
def _lasso_cd(Zt, y, lam, tol, max_sweeps, history):
    # Zt is the transposed design so that each column is a contiguous row
    p, n = Zt.shape
    w = np.zeros(p)
    r = y.copy()
    sweeps = 0
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in range(p):
            zj = Zt[j]
            rho = zj @ r / n + w[j]
            if rho > lam:
                new = rho - lam
            elif rho < -lam:
                new = rho + lam
            else:
                new = 0.0
            delta = new - w[j]
            if delta != 0.0:
                r -= delta * zj
                w[j] = new
                if abs(delta) > max_change:
                    max_change = abs(delta)
        history[sweep] = 0.5 * (r @ r) / n + lam * np.abs(w).sum()
        sweeps = sweep + 1
        if max_change < tol:
            break
    return w, sweeps


class Lasso(_LinearModel):
    """Cyclic coordinate descent on standardized columns.

    Minimizes ``(1/2n) ||y - b0 - Z w||^2 + lam ||w||_1`` where ``Z`` holds
    the z-scored columns; coefficients are mapped back to the original scale.
    Zero-variance columns get a zero coefficient.
    """

    kind = "lasso"
    defaults = {"lam": 0.1, "tol": 1e-6, "max_sweeps": 10_000}

    def _fit(self, X, y, seed, feature_names):
        hp = self.hyperparameters
        xm, sd = X.mean(axis=0), X.std(axis=0)
        live = sd > 0
        Z = np.zeros_like(X)
        Z[:, live] = (X[:, live] - xm[live]) / sd[live]
        ym = y.mean()
        history = np.full(int(hp["max_sweeps"]), np.nan)
        w, sweeps = _lasso_cd(np.ascontiguousarray(Z.T), y - ym, float(hp["lam"]), float(hp["tol"]),
                              int(hp["max_sweeps"]), history)
        self.objective_history_ = history[:sweeps]
        self.n_sweeps_ = int(sweeps)
        self.coef_ = np.where(live, w / np.where(live, sd, 1.0), 0.0)
        self.intercept_ = float(ym - xm @ self.coef_)
