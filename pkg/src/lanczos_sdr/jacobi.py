"""Jacobi matrices and the symmetric tridiagonal eigensolver behind Gauss rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EigenConvergenceError(RuntimeError):
    """Raised when the implicit QL iteration exceeds its iteration budget."""

    def __init__(self, iterations: int, size: int):
        self.iterations = iterations
        self.size = size
        super().__init__(
            f"tridiagonal QL iteration did not converge after {iterations} "
            f"iterations (matrix size {size})"
        )


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class JacobiMatrix:
    """Three-term recurrence coefficients of a family of orthonormal polynomials.

    ``alpha`` holds the k diagonal entries and ``beta`` the k-1 strictly
    positive off-diagonal entries of the symmetric tridiagonal matrix.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = _frozen(self.alpha).reshape(-1)
        beta = _frozen(self.beta).reshape(-1)
        if alpha.size < 1:
            raise ValueError("a Jacobi matrix needs at least one coefficient")
        if beta.size != alpha.size - 1:
            raise ValueError(
                f"expected {alpha.size - 1} off-diagonal entries, got {beta.size}"
            )
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise ValueError("recurrence coefficients must be finite")
        if np.any(beta <= 0):
            raise ValueError("off-diagonal entries must be strictly positive")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def k(self) -> int:
        return self.alpha.size

    def truncated(self, k: int) -> "JacobiMatrix":
        if not 1 <= k <= self.k:
            raise ValueError(f"cannot truncate a size-{self.k} Jacobi matrix to {k}")
        return JacobiMatrix(self.alpha[:k], self.beta[: k - 1])

    def dense(self) -> np.ndarray:
        return np.diag(self.alpha) + np.diag(self.beta, 1) + np.diag(self.beta, -1)

    def eigh(self, max_iter: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and orthonormal eigenvectors (columns)."""
        return tridiagonal_eigh(self.alpha, self.beta, max_iter=max_iter)

    def gauss_nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and probability weights of the associated Gauss rule.

        Nodes are the eigenvalues; each weight is the squared first component
        of the matching normalized eigenvector.
        """
        evals, evecs = self.eigh()
        if self.k > 1 and np.any(np.diff(evals) <= 0):
            raise ValueError(
                "Jacobi matrix has numerically repeated eigenvalues; "
                "the recurrence has effectively broken down"
            )
        return evals, evecs[0, :] ** 2

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "JacobiMatrix":
        return cls(np.asarray(data["alpha"], float), np.asarray(data["beta"], float))

    def __eq__(self, other):
        if not isinstance(other, JacobiMatrix):
            return NotImplemented
        return np.array_equal(self.alpha, other.alpha) and np.array_equal(
            self.beta, other.beta
        )

    __hash__ = None


def tridiagonal_eigh(diag, offdiag, max_iter: int | None = None):
    """Eigen-decomposition of a symmetric tridiagonal matrix by implicit-shift QL.

    Parameters
    ----------
    diag : array_like, shape (n,)
    offdiag : array_like, shape (n-1,)
    max_iter : int, optional
        Total QL sweeps allowed over all eigenvalues; defaults to ``50 * n``.

    Returns
    -------
    evals : ndarray, shape (n,)
        Ascending eigenvalues.
    evecs : ndarray, shape (n, n)
        Orthonormal eigenvectors stored as columns, matching ``evals``.
    """
    d = np.array(diag, dtype=float).reshape(-1)
    n = d.size
    if n == 0:
        raise ValueError("empty matrix")
    e = np.zeros(n)
    e[: n - 1] = np.asarray(offdiag, dtype=float).reshape(-1)
    if max_iter is None:
        max_iter = 50 * n
    z = np.eye(n)
    eps = np.finfo(float).eps
    total = 0

    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            total += 1
            if total > max_iter:
                raise EigenConvergenceError(total - 1, n)
            # Wilkinson-type shift from the leading 2x2 block
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            deflated = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = z[:, i].copy()
                z[:, i] = c * zi - s * z[:, i + 1]
                z[:, i + 1] = s * zi + c * z[:, i + 1]
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0

    order = np.argsort(d, kind="stable")
    return d[order], z[:, order]
