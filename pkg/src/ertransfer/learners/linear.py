"""Weighted L2-regularised linear classifiers trained by full-batch gradient descent."""

from __future__ import annotations

import numpy as np


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z):
    return np.logaddexp(0.0, z)


def logistic_objective(params, X, y, s, l2):
    """Weighted mean log-loss + l2/2 * |coef|^2 and its gradient.

    ``params`` is [coef..., intercept]; the intercept is not penalised.
    Sample weights are normalised by their sum, so rescaling them is a no-op.
    A zero total weight leaves only the penalty.
    """
    w, b = params[:-1], params[-1]
    S = s.sum()
    reg = 0.5 * l2 * float(w @ w)
    grad = np.zeros_like(params)
    grad[:-1] = l2 * w
    if S <= 0:
        return reg, grad
    m = X @ w + b
    loss = float(s @ (_softplus(m) - y * m)) / S
    r = s * (sigmoid(m) - y) / S
    grad[:-1] += X.T @ r
    grad[-1] += r.sum()
    return loss + reg, grad


def smoothed_hinge_objective(params, X, y, s, l2, h=0.1):
    """Weighted mean hinge loss, quadratically smoothed on a width-h band below margin 1."""
    w, b = params[:-1], params[-1]
    S = s.sum()
    reg = 0.5 * l2 * float(w @ w)
    grad = np.zeros_like(params)
    grad[:-1] = l2 * w
    if S <= 0:
        return reg, grad
    sign = 2.0 * y - 1.0
    m = sign * (X @ w + b)
    gap = 1.0 - m
    loss_i = np.where(gap <= 0, 0.0, np.where(gap >= h, gap - 0.5 * h, gap * gap / (2 * h)))
    dm = -np.where(gap <= 0, 0.0, np.where(gap >= h, 1.0, gap / h))
    r = s * dm * sign / S
    grad[:-1] += X.T @ r
    grad[-1] += r.sum()
    return float(s @ loss_i) / S + reg, grad


def gradient_descent(objective, x0, max_epochs=500, tol=1e-8, shrink=0.5, armijo=1e-4):
    """Backtracking gradient descent; the trial step doubles after every accepted step.

    Stops when the relative objective change drops below ``tol``.
    Returns (params, epochs_run, final_objective).
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = objective(x)
    step = 1.0
    epochs = 0
    for epochs in range(1, max_epochs + 1):
        gg = float(g @ g)
        if gg == 0.0:
            break
        while True:
            cand = x - step * g
            fc, gc = objective(cand)
            if fc <= f - armijo * step * gg or step < 1e-20:
                break
            step *= shrink
        change = abs(f - fc) / max(abs(f), 1e-300)
        x, f, g = cand, fc, gc
        step *= 2.0
        if change < tol:
            break
    return x, epochs, f


def fit_logistic(X, y, s, l2=1e-3, max_epochs=500, tol=1e-8):
    x0 = np.zeros(X.shape[1] + 1)
    return gradient_descent(lambda p: logistic_objective(p, X, y, s, l2), x0, max_epochs, tol)


def fit_svm(X, y, s, l2=1e-3, max_epochs=500, tol=1e-8, h=0.1):
    x0 = np.zeros(X.shape[1] + 1)
    return gradient_descent(lambda p: smoothed_hinge_objective(p, X, y, s, l2, h), x0, max_epochs, tol)


def fit_platt(margins, y, s, l2=1e-6, max_epochs=500, tol=1e-10):
    """One-dimensional logistic fit mapping SVM margins to probabilities."""
    (a, b), _, _ = fit_logistic(np.asarray(margins, dtype=np.float64).reshape(-1, 1), y, s, l2, max_epochs, tol)
    return float(a), float(b)


def numerical_gradient(f, params, h=1e-6):
    g = np.zeros_like(params)
    for j in range(len(params)):
        e = np.zeros_like(params)
        e[j] = h
        g[j] = (f(params + e) - f(params - e)) / (2 * h)
    return g
