"""Poisson regression with log link fitted by IRLS."""
from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .base import ConvergenceError, DomainError, Regressor


def poisson_loglik(eta: np.ndarray, y: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        mu = np.exp(eta)
        ll = float(np.sum(y * eta - mu - gammaln(y + 1)))
    return ll if np.isfinite(ll) else -np.inf


class PoissonRegression(Regressor):
    """Log-link Poisson GLM.

    Each IRLS step solves the weighted least-squares problem with weights
    ``mu`` and working response ``eta + (y - mu) / mu``; a step that lowers
    the log-likelihood is halved up to ``max_halvings`` times.  Targets are
    rounded to the nearest integer.
    """

    kind = "poisson"
    defaults = {"max_iter": 100, "max_halvings": 10, "tol": 1e-10}

    def _fit(self, X, y, seed, feature_names):
        if np.any(y < 0):
            raise DomainError("Poisson regression needs non-negative targets")
        hp = self.hyperparameters
        y = np.rint(y)
        A = np.column_stack([np.ones(len(y)), X])
        beta = np.zeros(A.shape[1])
        beta[0] = np.log(max(y.mean(), 1e-8))
        eta = A @ beta
        ll = poisson_loglik(eta, y)
        history = [ll]
        cond = np.finfo(float).eps * max(A.shape)
        converged = False
        for it in range(int(hp["max_iter"])):
            mu = np.exp(eta)
            z = eta + (y - mu) / mu
            sw = np.sqrt(mu)
            target, *_ = scipy.linalg.lstsq(A * sw[:, None], z * sw, cond=cond, lapack_driver="gelsy")
            step = target - beta
            s = 1.0
            for _ in range(int(hp["max_halvings"]) + 1):
                cand = beta + s * step
                cand_eta = A @ cand
                cand_ll = poisson_loglik(cand_eta, y)
                if cand_ll >= ll:
                    break
                s *= 0.5
            else:
                if abs(cand_ll - ll) <= 1e-8 * (abs(ll) + 1):
                    converged = True
                    break
                raise ConvergenceError("IRLS step-halving failed to improve the likelihood")
            change = cand_ll - ll
            beta, eta, ll = cand, cand_eta, cand_ll
            history.append(ll)
            if change <= hp["tol"] * (abs(ll) + 1):
                converged = True
                break
        self.converged_ = converged
        self.n_iter_ = len(history) - 1
        self.loglik_history_ = np.array(history)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]

    def _predict(self, X):
        with np.errstate(over="ignore"):
            return np.exp(X @ self.coef_ + self.intercept_)

    def _state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_}

    def _load_state(self, state):
        self.coef_ = np.array(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])
