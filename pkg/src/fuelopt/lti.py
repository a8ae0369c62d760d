"""
Linear time-invariant systems x' = Ax + Bu.

Holds the system container, the action of the matrix exponential, the
Kalman controllability test and the spectral splitting R^n = E+ (+) E-
used by the infinite-horizon solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg as sla

from .errors import InvalidArgumentError, NumericFailure


def _as_matrix(M, name):
    M = np.array(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return M


def controllability_matrix(A, B):
    """Return [B, AB, ..., A^{n-1}B]."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def kalman_rank_ok(A, B) -> bool:
    """Numerical Kalman rank test.

    The rank threshold is ``n * eps * sigma_max`` on the singular values of
    the controllability matrix.
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidArgumentError(f"A must be square, got {A.shape}")
    if B.shape[0] != n:
        raise InvalidArgumentError(f"B must have {n} rows, got {B.shape[0]}")
    sv = np.linalg.svd(controllability_matrix(A, B), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return False
    return int(np.sum(sv > n * np.finfo(float).eps * sv[0])) == n


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """The pair (A, B) of x' = Ax + Bu with |u| <= 1.

    Parameters
    ----------
    A : array_like, shape (n, n)
    B : array_like, shape (n, m)
    check : bool
        Reject pairs failing the Kalman rank test. Pass ``False`` only to
        build deliberately uncontrollable systems.
    """

    A: np.ndarray
    B: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidArgumentError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise InvalidArgumentError(f"B must have {n} rows, got {B.shape[0]}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if self.check and not kalman_rank_ok(A, B):
            raise InvalidArgumentError("(A, B) fails the Kalman rank condition")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @classmethod
    def unchecked(cls, A, B):
        return cls(A, B, check=False)

    @classmethod
    def from_json(cls, text):
        """Build from ``{"A": [[...]], "B": [[...]]}``."""
        data = json.loads(text) if isinstance(text, str) else text
        try:
            return cls(data["A"], data["B"])
        except KeyError as exc:
            raise InvalidArgumentError(f"missing field {exc.args[0]!r}") from None

    def to_dict(self):
        return {"A": self.A.tolist(), "B": self.B.tolist()}

    def norm(self) -> float:
        return float(np.linalg.norm(self.A, 2)) if self.A.size else 0.0

    # cached exponentials keyed on the time step; systems are immutable
    def expm(self, t: float) -> np.ndarray:
        return _expm_cached(self, float(t))

    def step_maps(self, h: float):
        """Return (e^{hA}, int_0^h e^{sA} ds B) for a step of length h.

        Negative h gives the backward step maps.
        """
        return _step_cached(self, float(h))

    def backward_cell(self, h: float):
        """Return (e^{-hA}, int_0^h e^{-sA} ds B)."""
        return _backward_cell_cached(self, float(h))

    def __hash__(self):
        return id(self)


@lru_cache(maxsize=4096)
def _expm_cached(sys, t):
    return sla.expm(t * sys.A)


def _augmented(A, B, h):
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = sla.expm(h * M)
    return E[:n, :n], E[:n, n:]


@lru_cache(maxsize=4096)
def _step_cached(sys, h):
    return _augmented(sys.A, sys.B, h)


@lru_cache(maxsize=4096)
def _backward_cell_cached(sys, h):
    return _augmented(-sys.A, sys.B, h)


def expm_apply(sys: LtiSystem, t: float, V) -> np.ndarray:
    """Return e^{tA} V."""
    if not np.isfinite(t):
        raise InvalidArgumentError("t must be finite")
    V = np.asarray(V, dtype=float)
    if not np.all(np.isfinite(V)):
        raise InvalidArgumentError("V has non-finite entries")
    if V.shape[0] != sys.n:
        raise InvalidArgumentError(f"V must have {sys.n} rows")
    return sys.expm(t) @ V


@dataclass(frozen=True, eq=False)
class HyperbolicSplit:
    """Spectral splitting of A into expanding and contracting parts.

    ``basis_plus`` and ``basis_minus`` hold orthonormal bases (as columns) of
    E+ (Re > 0) and E- (Re < 0). ``projector_plus`` projects onto E+ along
    the complementary invariant subspace.
    """

    is_hyperbolic: bool
    basis_plus: np.ndarray
    basis_minus: np.ndarray
    alpha: float
    projector_plus: np.ndarray
    eigenvalues: np.ndarray

    @property
    def projector_minus(self):
        return np.eye(self.projector_plus.shape[0]) - self.projector_plus


def hyperbolic_tolerance(A) -> float:
    A = np.asarray(A, dtype=float)
    return 1e-9 * max(1.0, float(np.linalg.norm(A, 2)) if A.size else 0.0)


def invariant_subspace(A, select):
    """Orthonormal basis of the invariant subspace for eigenvalues where
    ``select(re, im)`` is true, via an ordered real Schur form.

    Returns ``(basis, complement_basis)``; the complement spans the
    invariant subspace of the remaining eigenvalues.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    try:
        _, Z, k = sla.schur(A, output="real", sort=select)
        _, Zc, kc = sla.schur(A, output="real", sort=lambda re, im: not select(re, im))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericFailure(f"Schur decomposition failed: {exc}") from exc
    if k + kc != n:
        raise NumericFailure("eigenvalue selection is ambiguous (conjugate pair split)")
    return Z[:, :k], Zc[:, :kc]


def projector_along(basis, complement):
    """Projector onto span(basis) along span(complement)."""
    n = basis.shape[0]
    k = basis.shape[1]
    if k == 0:
        return np.zeros((n, n))
    if k == n:
        return np.eye(n)
    V = np.hstack([basis, complement])
    D = np.zeros((n, n))
    D[:k, :k] = np.eye(k)
    return V @ D @ np.linalg.inv(V)


def hyperbolic_split(A) -> HyperbolicSplit:
    A = _as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidArgumentError("A must be square")
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigenvalue computation failed: {exc}") from exc
    tol = hyperbolic_tolerance(A)
    re = lam.real
    is_hyp = bool(np.all(np.abs(re) > tol))
    plus, rest = invariant_subspace(A, lambda r, i: r > tol)
    minus, _ = invariant_subspace(A, lambda r, i: r < -tol)
    P = projector_along(plus, rest)
    alpha = float(np.min(np.abs(re))) if is_hyp else 0.0
    return HyperbolicSplit(is_hyp, plus, minus, alpha, P, lam)
