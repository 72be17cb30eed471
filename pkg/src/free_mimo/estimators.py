"""Capacity estimators for noisy MIMO channel observations.

Two moment-based estimators are provided, both working on the first ``r``
trace moments of ``HH^H/m`` and turning them into a capacity through the
Newton-Girard identities:

* the free estimator stacks all observations into one ``n x mL`` matrix and
  deconvolves the Marchenko-Pastur law with ratio ``c = n/(mL)``;
* the Gaussian-matrix-mean (GMM) estimator inverts the exact finite-size
  expectation for each observation separately (``c = n/m``) and averages.

The three classical plug-in estimators ``C1``, ``C2``, ``C3`` are included
as baselines.

Array-level helpers (``solve_free``, ``solve_gmm``, ``observation_moments``
and friends) accept arbitrary leading dimensions so the Monte Carlo harness
runs the very same code on stacks of trials.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import moments as mc

MAX_RANK = 4


class Model(str, enum.Enum):
    """Observation model: with or without random phase impairments."""

    PLAIN = "plain"
    PHASE = "phase_impaired"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"plain": cls.PLAIN, "phase": cls.PHASE,
                   "phase_impaired": cls.PHASE}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown model {value!r}") from None


ESTIMATORS = ("Cf", "CG", "C1", "C2", "C3")


class StackingError(ValueError):
    """Stacked free deconvolution requested where it does not apply."""


@dataclass
class ObservationBatch:
    """``L`` noisy ``n x m`` observations of one channel.

    ``observations`` has shape ``(L, n, m)``. ``sigma2`` is the known noise
    variance; zero is accepted as a noiseless test hook.
    """

    observations: np.ndarray
    sigma2: float
    model: Model = Model.PLAIN

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=complex)
        if obs.ndim == 2:
            obs = obs[None]
        if obs.ndim != 3 or obs.shape[0] < 1:
            raise ValueError("observations must have shape (L, n, m)")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")
        self.observations = obs
        self.model = Model.parse(self.model)

    @classmethod
    def from_list(cls, matrices, sigma2, model=Model.PLAIN):
        shapes = {np.shape(M) for M in matrices}
        if len(shapes) != 1:
            raise ValueError(f"observations have mismatched shapes {shapes}")
        return cls(np.stack([np.asarray(M) for M in matrices]), sigma2, model)

    @property
    def L(self):
        return self.observations.shape[0]

    @property
    def n(self):
        return self.observations.shape[1]

    @property
    def m(self):
        return self.observations.shape[2]


@dataclass
class EstimationReport:
    estimator: str
    capacity: float
    moments: np.ndarray | None = None
    flags: set = field(default_factory=set)

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "capacity": self.capacity,
            "moments": None if self.moments is None else [float(v) for v in self.moments],
            "flags": sorted(self.flags),
        }


# -- array-level moment computations ---------------------------------------

def sample_covariances(obs):
    """``Hhat Hhat^H / m`` for every observation; shape ``(..., n, n)``."""
    obs = np.asarray(obs)
    return obs @ np.conj(np.swapaxes(obs, -1, -2)) / obs.shape[-1]


def observation_moments(obs, order):
    """Trace moments of ``Hhat_i Hhat_i^H / m`` per observation."""
    return mc.batched_trace_moments(sample_covariances(obs), order)


def stacked_moments(obs, order):
    """Trace moments of ``S S^H / m`` for the stacked matrix ``S``.

    Uses ``S S^H = (1/L) sum_i Hhat_i Hhat_i^H`` so the ``n x mL`` matrix is
    never formed; ``obs`` has shape ``(..., L, n, m)``.
    """
    return mc.batched_trace_moments(sample_covariances(obs).mean(axis=-3), order)


def stack_observations(batch):
    """Horizontal stack ``(1/sqrt(L)) [Hhat_1, ..., Hhat_L]``, shape ``n x mL``."""
    return np.concatenate(list(batch.observations), axis=1) / np.sqrt(batch.L)


# -- closed-form noise maps -------------------------------------------------

def _noise_tail(k, h, s2, c, inv_n2, sq1, p12):
    """Everything in the k-th forward equation except the leading ``h_k``.

    ``sq1`` and ``p12`` stand for ``h_1^2`` and ``h_1 h_2``; ``inv_n2`` is
    the ``1/N^2`` finite-size term (zero for the free-probability map).
    """
    k3 = c * c + 3 * c + 1 + inv_n2
    k4 = c ** 3 + 6 * c * c + 6 * c + 1 + 5 * (c + 1) * inv_n2
    if k == 1:
        return s2
    if k == 2:
        return 2 * s2 * (1 + c) * h[0] + s2 ** 2 * (1 + c)
    if k == 3:
        return (3 * s2 * (1 + c) * h[1] + 3 * s2 * c * sq1
                + 3 * s2 ** 2 * k3 * h[0] + s2 ** 3 * k3)
    return (4 * s2 * (1 + c) * h[2] + 8 * s2 * c * p12
            + s2 ** 2 * (6 * c * c + 16 * c + 6 + 16 * inv_n2) * h[1]
            + 14 * s2 ** 2 * c * (1 + c) * sq1
            + 4 * s2 ** 3 * k4 * h[0] + s2 ** 4 * k4)


def _check_order(h):
    if not 1 <= len(h) <= MAX_RANK:
        raise ValueError(f"moment order must be in 1..{MAX_RANK}")


def forward_map(h, sigma2, c, inv_n2=0.0):
    """Expected observed moments given channel moments ``h`` (orders <= 4).

    With ``inv_n2 = 0`` this is the free-probability relation; with
    ``inv_n2 = 1/N^2`` it is the exact Gaussian expectation.
    """
    h = list(h)
    _check_order(h)
    sq1 = h[0] ** 2
    p12 = h[0] * h[1] if len(h) > 1 else 0
    return [h[k - 1] + _noise_tail(k, h, sigma2, c, inv_n2, sq1, p12)
            for k in range(1, len(h) + 1)]


def _solve(hhat, sigma2, c, inv_n2, var_scale=None):
    """Forward substitution through the triangular noise map.

    ``hhat`` has the moment index on its last axis. When ``var_scale`` (the
    value ``1/(nN)``) is given, the products ``h_1^2`` and ``h_1 h_2`` that
    enter orders 3 and 4 are replaced by unbiased estimates of ``m_1^2`` and
    ``m_1 m_2``, using

        Var(hhat_1)      = (2 sigma2 m_1 + sigma2^2) / (nN)
        Cov(h_1, h_2)    = (4 sigma2 m_2 + 2 sigma2^2 (1 + c) m_1) / (nN)

    for complex Gaussian noise.
    """
    hhat = np.asarray(hhat, dtype=float)
    r = hhat.shape[-1]
    if not 1 <= r <= MAX_RANK:
        raise ValueError(f"moment order must be in 1..{MAX_RANK}")
    s2 = sigma2
    h = []
    sq1 = p12 = 0.0
    for k in range(1, r + 1):
        if k == 3:
            sq1 = h[0] ** 2
            if var_scale is not None:
                sq1 = sq1 - (2 * s2 * h[0] + s2 ** 2) * var_scale
        if k == 4:
            p12 = h[0] * h[1]
            if var_scale is not None:
                p12 = p12 - (4 * s2 * h[1] + 2 * s2 ** 2 * (1 + c) * h[0]) * var_scale
        h.append(hhat[..., k - 1] - _noise_tail(k, h, s2, c, inv_n2, sq1, p12))
    return np.stack(h, axis=-1)


def solve_free(hhat, sigma2, c):
    """Invert the free-probability noise map for moments ``hhat``."""
    return _solve(hhat, sigma2, c, 0.0)


def solve_gmm(hhat, sigma2, n, m, debias=True):
    """Invert the exact Gaussian-mean noise map for one ``n x m`` observation.

    ``debias=False`` plugs ``h_1^2`` and ``h_1 h_2`` straight into the
    third- and fourth-order equations. That estimator is biased at orders 3
    and 4 by the variance of the plug-in products; the default corrects it
    so all four estimated moments are unbiased.
    """
    c = n / m
    return _solve(hhat, sigma2, c, 1.0 / m ** 2,
                  var_scale=1.0 / (n * m) if debias else None)


def free_moments_from_array(obs, sigma2, r):
    """Free-probability moment estimates from observations ``(..., L, n, m)``."""
    L, n, m = obs.shape[-3:]
    return solve_free(stacked_moments(obs, r), sigma2, n / (m * L))


def gmm_moments_from_array(obs, sigma2, r, debias=True):
    """GMM moment estimates from observations ``(..., L, n, m)``."""
    _, n, m = obs.shape[-3:]
    per_obs = solve_gmm(observation_moments(obs, r), sigma2, n, m, debias=debias)
    return per_obs.mean(axis=-2)


def _logdet_capacity(cov, sigma2):
    n = cov.shape[-1]
    sign, logdet = np.linalg.slogdet(np.eye(n) + cov / sigma2)
    return logdet / np.log(2) / n


def classical_from_array(obs, sigma2):
    """``(C1, C2, C3)`` for observations ``(..., L, n, m)``."""
    covs = sample_covariances(obs)
    c1 = _logdet_capacity(covs, sigma2).mean(axis=-1)
    c2 = _logdet_capacity(covs.mean(axis=-3), sigma2)
    c3 = _logdet_capacity(sample_covariances(obs.mean(axis=-3)), sigma2)
    return c1, c2, c3


# -- batch-level API --------------------------------------------------------

def _check_rank(r):
    if not 1 <= r <= MAX_RANK:
        raise ValueError(f"rank must be in 1..{MAX_RANK}, got {r}")


def stacking_applies(model, L):
    return Model.parse(model) is Model.PLAIN or L == 1


def free_moment_estimator(batch, r, force=False):
    """Free-probability estimates of the first ``r`` moments of ``HH^H/m``.

    Raises :class:`StackingError` for phase-impaired batches with ``L > 1``
    unless ``force`` is set: stacking rotated copies of ``H`` does not
    preserve the moments of ``HH^H``.
    """
    _check_rank(r)
    if not force and not stacking_applies(batch.model, batch.L):
        raise StackingError("stacking invalid for the phase-impaired model with "
                            "L>1: phase offsets change the moments of the "
                            "stacked channel")
    return free_moments_from_array(batch.observations, batch.sigma2, r)


def gmm_moment_estimator(batch, r, debias=True):
    """GMM estimates of the first ``r`` moments, averaged over observations."""
    _check_rank(r)
    return gmm_moments_from_array(batch.observations, batch.sigma2, r, debias=debias)


def _resolve_eval_sigma2(batch, sigma2_eval):
    s2 = batch.sigma2 if sigma2_eval is None else sigma2_eval
    if not s2 > 0:
        raise ValueError("capacity needs a positive noise variance; pass "
                         "sigma2_eval for noiseless batches")
    return s2


def capacity_estimate(batch, r, which, sigma2_eval=None, force=False, debias=True):
    """Estimate capacity with ``Cf`` or ``CG`` assuming channel rank ``r``.

    ``sigma2_eval`` sets the noise level at which capacity is evaluated and
    defaults to the batch noise variance.
    """
    s2 = _resolve_eval_sigma2(batch, sigma2_eval)
    flags = set()
    if which == "Cf":
        h = free_moment_estimator(batch, r, force=force)
        if not stacking_applies(batch.model, batch.L):
            flags.add("stacking_invalid_for_model")
    elif which == "CG":
        h = gmm_moment_estimator(batch, r, debias=debias)
    else:
        raise ValueError(f"unknown moment estimator {which!r}")
    cap, clamped = mc.capacity_from_moments(h, s2, batch.n, with_flag=True)
    if clamped:
        flags.add("clamped")
    if np.any(h < 0):
        flags.add("negative_moment")
    return EstimationReport(which, float(cap), np.asarray(h), flags)


def classical_estimators(batch, sigma2_eval=None):
    """The three plug-in baselines ``C1``, ``C2`` and ``C3``."""
    s2 = _resolve_eval_sigma2(batch, sigma2_eval)
    values = classical_from_array(batch.observations, s2)
    return [EstimationReport(name, float(v))
            for name, v in zip(("C1", "C2", "C3"), values)]


def estimate(batch, which, r=None, sigma2_eval=None, force=False):
    """Run the named estimators and return their reports in order."""
    reports = []
    classical = None
    for name in which:
        if name in ("Cf", "CG"):
            if r is None:
                raise ValueError("rank is required for Cf and CG")
            reports.append(capacity_estimate(batch, r, name, sigma2_eval, force))
        elif name in ("C1", "C2", "C3"):
            if classical is None:
                classical = {rep.estimator: rep
                             for rep in classical_estimators(batch, sigma2_eval)}
            reports.append(classical[name])
        else:
            raise ValueError(f"unknown estimator {name!r}")
    return reports
