"""Trace moments, Newton-Girard conversion and capacity evaluation.

Moment vectors are plain 1-D arrays ``(m_1, ..., m_P)``; index 0 holds the
first moment. Functions that operate on estimated moments accept arrays with
arbitrary leading dimensions and work along the last axis, so the same code
serves a single batch and a stack of Monte Carlo trials.
"""

import math

import numpy as np

CLAMP_EPS = 1e-12
HERMITIAN_TOL = 1e-10


def _check_hermitian(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    if np.max(np.abs(M - M.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian")
    return M


def batched_trace_moments(M, order):
    """Normalized trace moments of a stack of square matrices.

    Parameters
    ----------
    M : ndarray, shape (..., n, n)
    order : int

    Returns
    -------
    ndarray, shape (..., order)
        ``out[..., j-1] = tr_n(M^j)``, real part only.
    """
    M = np.asarray(M)
    n = M.shape[-1]
    out = np.empty(M.shape[:-2] + (order,))
    P = M
    for j in range(order):
        out[..., j] = np.trace(P, axis1=-2, axis2=-1).real / n
        if j + 1 < order:
            P = P @ M
    return out


def trace_moments(M, order):
    """Return ``(tr_n(M), ..., tr_n(M^order))`` for a Hermitian matrix.

    Powers are formed by repeated products; no eigendecomposition is done.

    >>> trace_moments(np.diag([1.0, 2.0, 3.0]), 3)
    array([ 2.        ,  4.66666667, 12.        ])
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    M = _check_hermitian(M)
    return batched_trace_moments(M, order)


def power_sums_to_elementary(S):
    """Convert power sums ``S_1..S_r`` into elementary symmetric values.

    Uses the Newton-Girard identities for ``r <= 4``::

        P1 = S1
        P2 = (S1^2 - S2) / 2
        P3 = (S1^3 - 3 S1 S2 + 2 S3) / 6
        P4 = (S1^4 - 6 S1^2 S2 + 3 S2^2 + 8 S1 S3 - 6 S4) / 24

    ``S`` may carry leading batch dimensions; the last axis holds the sums.
    """
    S = np.asarray(S, dtype=float)
    r = S.shape[-1]
    if r not in (1, 2, 3, 4):
        raise ValueError(f"rank must be in 1..4, got {r}")
    s = [S[..., k] for k in range(r)]
    out = [s[0]]
    if r >= 2:
        out.append((s[0] ** 2 - s[1]) / 2)
    if r >= 3:
        out.append((s[0] ** 3 - 3 * s[0] * s[1] + 2 * s[2]) / 6)
    if r >= 4:
        out.append((s[0] ** 4 - 6 * s[0] ** 2 * s[1] + 3 * s[1] ** 2
                    + 8 * s[0] * s[2] - 6 * s[3]) / 24)
    return np.stack(out, axis=-1)


def capacity_from_spectrum(elementary, sigma2, n, with_flag=False):
    """Capacity per receive antenna from elementary symmetric values.

    Evaluates ``(1/n) log2(1 + sum_k P_k / sigma2^k)``. The polynomial
    argument is clamped at ``CLAMP_EPS`` because estimated values of ``P_k``
    can be negative; with ``with_flag=True`` a boolean clamp indicator is
    returned alongside the capacity.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    P = np.asarray(elementary, dtype=float)
    k = np.arange(1, P.shape[-1] + 1)
    arg = 1.0 + np.sum(P / sigma2 ** k, axis=-1)
    clamped = arg < CLAMP_EPS
    cap = np.log2(np.maximum(arg, CLAMP_EPS)) / n
    if cap.ndim == 0:
        cap, clamped = float(cap), bool(clamped)
    if with_flag:
        return cap, clamped
    return cap


def capacity_from_moments(moments, sigma2, n, with_flag=False):
    """Capacity from the first ``r`` trace moments of ``HH^H/m``.

    Power sums are ``S_j = n * moments[j-1]``; the rank is taken to be the
    number of moments supplied.
    """
    S = n * np.asarray(moments, dtype=float)
    return capacity_from_spectrum(power_sums_to_elementary(S), sigma2, n,
                                  with_flag=with_flag)


def capacity_from_eigenvalues(eigenvalues, sigma2, n=None):
    """Direct evaluation ``(1/n) sum_l log2(1 + lambda_l / sigma2)``."""
    lam = np.asarray(eigenvalues, dtype=float)
    if n is None:
        n = lam.shape[-1]
    return np.sum(np.log2(1.0 + lam / sigma2), axis=-1) / n


def capacity_of_channel(H, sigma2):
    """Exact capacity ``(1/n) log2 det(I + HH^H / (m sigma2))``."""
    H = np.asarray(H)
    n, m = H.shape
    lam = np.linalg.eigvalsh(H @ H.conj().T / m)
    return float(capacity_from_eigenvalues(np.clip(lam, 0.0, None), sigma2, n))


def capacity_taylor(moments, rho, terms):
    """Truncated series ``(1/ln 2) sum_{k<=K} (-1)^(k+1) m_k rho^k / k``.

    Only meaningful when ``rho`` times the largest eigenvalue is below one;
    the radius of convergence is not checked.
    """
    moments = np.asarray(moments, dtype=float)
    if terms > moments.shape[-1]:
        raise ValueError(f"requested {terms} terms but only "
                         f"{moments.shape[-1]} moments available")
    total = 0.0
    for k in range(1, terms + 1):
        total = total + (-1) ** (k + 1) * moments[..., k - 1] * rho ** k / k
    return total / math.log(2)
