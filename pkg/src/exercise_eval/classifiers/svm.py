"""Soft-margin kernel SVM trained by sequential minimal optimization.

Each binary problem solves the dual

    min_a  1/2 a^T Q a - e^T a,   Q_ij = y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C,  y^T a = 0

with maximal-violating-pair working-set selection refined by second-order
information, stopping when the KKT gap m(a) - M(a) drops below ``tol``.
Multiclass problems are decomposed one-vs-one with majority voting.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..errors import DimensionMismatch

TAU = 1e-12


@dataclass(frozen=True)
class KernelParams:
    kind: Literal["linear", "polynomial", "gaussian"] = "linear"
    gamma: float = 1.0
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "gaussian"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind != "linear" and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.kind == "polynomial" and self.degree < 2:
            raise ValueError("polynomial degree must be >= 2")


def kernel_matrix(params: KernelParams, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"kernel inputs have dimensions {A.shape[1]} and {B.shape[1]}")
    if params.kind == "linear":
        return A @ B.T
    if params.kind == "polynomial":
        return (params.gamma * (A @ B.T) + params.coef0) ** params.degree
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-params.gamma * np.maximum(sq, 0.0))


def kernel_eval(params: KernelParams, x, z) -> float:
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape != z.shape:
        raise DimensionMismatch(f"kernel inputs have dimensions {x.size} and {z.size}")
    if params.kind == "linear":
        return float(x @ z)
    if params.kind == "polynomial":
        return float((params.gamma * (x @ z) + params.coef0) ** params.degree)
    d = x - z
    return float(np.exp(-params.gamma * (d @ d)))


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    n_iter: int
    gap: float
    converged: bool


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int | None = None) -> SmoResult:
    """Solve the binary soft-margin dual for labels ``y`` in {-1, +1}.

    The decision function is ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if max_iter is None:
        max_iter = max(10_000_000, 100 * n)
    Q_diag = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of the dual objective, Q a - e
    pos = y > 0
    n_iter = 0
    gap = np.inf
    while n_iter < max_iter:
        minus_yG = -y * G
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        if not up.any() or not low.any():
            gap = 0.0
            break
        cand_up = np.where(up, minus_yG, -np.inf)
        i = int(np.argmax(cand_up))
        m = cand_up[i]
        M = np.min(np.where(low, minus_yG, np.inf))
        gap = m - M
        if gap < tol:
            break
        # second-order choice of j among violating low-set members
        Ki = K[i]
        b = m - minus_yG
        a = Q_diag[i] + Q_diag - 2.0 * Ki
        a = np.where(a > 0, a, TAU)
        obj = np.where(low & (minus_yG < m), -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        Kj = K[j]
        yi, yj = y[i], y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        quad = max(Q_diag[i] + Q_diag[j] - 2.0 * Ki[j], TAU)
        if yi != yj:
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        dai, daj = ai - ai_old, aj - aj_old
        alpha[i], alpha[j] = ai, aj
        # Q[:, i] = y * y_i * K[:, i]
        G += y * (yi * dai * Ki + yj * daj * Kj)
        n_iter += 1
    converged = gap < tol
    return SmoResult(alpha=alpha, rho=_rho(alpha, y, G, C), n_iter=n_iter, gap=float(gap), converged=converged)


def _rho(alpha, y, G, C) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    pos = y > 0
    at_upper = alpha >= C
    at_lower = alpha <= 0
    # bounds on rho from the KKT conditions at the box limits
    ub_mask = (at_upper & ~pos) | (at_lower & pos)
    lb_mask = (at_upper & pos) | (at_lower & ~pos)
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isfinite(ub) and np.isfinite(lb):
        return float((ub + lb) / 2)
    return float(ub if np.isfinite(ub) else lb if np.isfinite(lb) else 0.0)


def default_gamma(X: np.ndarray) -> float:
    var = float(np.asarray(X, dtype=float).var())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


class OneVsOneSVC:
    """Multiclass SVM: one binary SMO problem per class pair, majority vote."""

    def __init__(self, kernel: str = "linear", C: float = 1.0, gamma: float | None = None,
                 degree: int = 3, coef0: float = 1.0, tol: float = 1e-3, max_iter: int | None = None):
        self.kernel = kernel
        self.C = C
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "OneVsOneSVC":
        """``y`` holds class indices in ``range(n_classes)``."""
        X = np.asarray(X, dtype=float)
        y_idx = np.asarray(y, dtype=np.int64)
        gamma = self.gamma if self.gamma is not None else default_gamma(X)
        self.kernel_params_ = KernelParams(self.kernel, gamma=gamma, degree=self.degree, coef0=self.coef0)
        self.n_classes_ = int(n_classes)
        self.n_features_ = X.shape[1]
        support = set()
        pairs, coefs, rhos = [], [], []
        self.converged_ = True
        for a, b in itertools.combinations(range(self.n_classes_), 2):
            idx = np.flatnonzero((y_idx == a) | (y_idx == b))
            if len(idx) == 0:
                continue
            yy = np.where(y_idx[idx] == a, 1.0, -1.0)
            if np.all(yy > 0) or np.all(yy < 0):
                # one class absent from training: that class always wins the pair
                pairs.append((a, b))
                coefs.append((np.empty(0, dtype=np.int64), np.empty(0)))
                rhos.append(-1.0 if yy[0] > 0 else 1.0)
                continue
            K = kernel_matrix(self.kernel_params_, X[idx], X[idx])
            res = smo_solve(K, yy, self.C, self.tol, self.max_iter)
            self.converged_ &= res.converged
            sv = np.flatnonzero(res.alpha > 0)
            support.update(idx[sv].tolist())
            pairs.append((a, b))
            coefs.append((idx[sv], res.alpha[sv] * yy[sv]))
            rhos.append(res.rho)
        order = np.array(sorted(support), dtype=np.int64)
        pos_of = {g: k for k, g in enumerate(order)}
        self.support_vectors_ = X[order]
        self.pairs_ = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        self.rho_ = np.array(rhos, dtype=float)
        self.sv_pos_ = [np.array([pos_of[g] for g in gidx], dtype=np.int64) for gidx, _ in coefs]
        self.dual_coef_ = [c for _, c in coefs]
        self._finalize()
        return self

    def _finalize(self):
        if self.kernel_params_.kind == "linear":
            W = np.zeros((len(self.pairs_), self.n_features_))
            for p, (pos, c) in enumerate(zip(self.sv_pos_, self.dual_coef_)):
                if len(pos):
                    W[p] = c @ self.support_vectors_[pos]
            self.linear_w_ = W
        else:
            self.linear_w_ = None

    def pair_decisions(self, X: np.ndarray) -> np.ndarray:
        """``(n, n_pairs)`` decision values; positive favours the first class of a pair."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_:
            raise DimensionMismatch(f"expected {self.n_features_} features, got {X.shape[1]}")
        if self.linear_w_ is not None:
            return X @ self.linear_w_.T - self.rho_
        Ksv = kernel_matrix(self.kernel_params_, X, self.support_vectors_) if len(self.support_vectors_) else \
            np.zeros((len(X), 0))
        out = np.empty((len(X), len(self.pairs_)))
        for p, (pos, c) in enumerate(zip(self.sv_pos_, self.dual_coef_)):
            out[:, p] = Ksv[:, pos] @ c - self.rho_[p]
        return out

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Votes per class plus a bounded (< 1/3) tie-breaking confidence term."""
        dec = self.pair_decisions(X)
        votes = np.zeros((len(dec), self.n_classes_))
        conf = np.zeros_like(votes)
        a, b = self.pairs_[:, 0], self.pairs_[:, 1]
        win_a = dec > 0
        for p in range(len(self.pairs_)):
            votes[:, a[p]] += win_a[:, p]
            votes[:, b[p]] += ~win_a[:, p]
            conf[:, a[p]] += dec[:, p]
            conf[:, b[p]] -= dec[:, p]
        return votes + conf / (3.0 * (np.abs(conf) + 1.0))

    def state(self) -> dict:
        offsets = np.cumsum([0] + [len(p) for p in self.sv_pos_])
        return {
            "kernel": self.kernel_params_.kind,
            "gamma": self.kernel_params_.gamma,
            "degree": self.kernel_params_.degree,
            "coef0": self.kernel_params_.coef0,
            "C": self.C,
            "tol": self.tol,
            "n_classes": self.n_classes_,
            "n_features": self.n_features_,
            "support_vectors": self.support_vectors_,
            "pairs": self.pairs_,
            "rho": self.rho_,
            "sv_pos": np.concatenate(self.sv_pos_) if self.sv_pos_ else np.empty(0, dtype=np.int64),
            "dual_coef": np.concatenate(self.dual_coef_) if self.dual_coef_ else np.empty(0),
            "offsets": offsets,
        }

    @classmethod
    def from_state(cls, st: dict) -> "OneVsOneSVC":
        m = cls(kernel=str(st["kernel"]), C=float(st["C"]), gamma=float(st["gamma"]), degree=int(st["degree"]),
                coef0=float(st["coef0"]), tol=float(st["tol"]))
        m.kernel_params_ = KernelParams(m.kernel, gamma=m.gamma, degree=m.degree, coef0=m.coef0)
        m.n_classes_ = int(st["n_classes"])
        m.n_features_ = int(st["n_features"])
        m.support_vectors_ = np.asarray(st["support_vectors"], dtype=float).reshape(-1, m.n_features_)
        m.pairs_ = np.asarray(st["pairs"], dtype=np.int64).reshape(-1, 2)
        m.rho_ = np.asarray(st["rho"], dtype=float)
        off = np.asarray(st["offsets"], dtype=np.int64)
        pos, coef = np.asarray(st["sv_pos"], dtype=np.int64), np.asarray(st["dual_coef"], dtype=float)
        m.sv_pos_ = [pos[off[k]:off[k + 1]] for k in range(len(off) - 1)]
        m.dual_coef_ = [coef[off[k]:off[k + 1]] for k in range(len(off) - 1)]
        m.converged_ = True
        m._finalize()
        return m
