"""Channel samplers and the Monte Carlo harness.

Random streams come from :class:`numpy.random.Philox` generators seeded by
spawned :class:`numpy.random.SeedSequence` children. Trials are processed
in fixed-size blocks, one stream per block, so results are bit-identical
for a given seed whatever the number of worker threads.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from .estimators import Model
from .moments import (batched_trace_moments, capacity_from_moments,
                      capacity_of_channel, trace_moments)
from .oracle import mixed_moment_expectation

BLOCK = 512
MOMENT_ORDER = 4


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def complex_gaussian(rng, shape):
    """I.i.d. circular complex Gaussian entries with ``E|x|^2 = 1``."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@dataclass
class ChannelMatrix:
    H: np.ndarray
    rank: int
    true_moments: np.ndarray = field(init=False)

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        n, m = self.H.shape
        self.true_moments = trace_moments(self.H @ self.H.conj().T / m, MOMENT_ORDER)

    @property
    def n(self):
        return self.H.shape[0]

    @property
    def m(self):
        return self.H.shape[1]

    def true_capacity(self, sigma2):
        return capacity_of_channel(self.H, sigma2)


def sample_channel(n, m, r, seed=None):
    """Random rank-``r`` channel normalised to ``tr_n(HH^H/m) = 1``.

    ``H`` is a sum of ``r`` outer products of complex Gaussian vectors.
    """
    if r < 0 or r > min(n, m):
        raise ValueError(f"rank {r} impossible for a {n}x{m} channel")
    if r == 0:
        return ChannelMatrix(np.zeros((n, m), dtype=complex), 0)
    rng = make_rng(seed)
    U = complex_gaussian(rng, (n, r))
    V = complex_gaussian(rng, (m, r))
    H = U @ V.conj().T
    H /= np.sqrt(np.sum(np.abs(H) ** 2) / (n * m))
    return ChannelMatrix(H, r)


def draw_observations(H, sigma2, model, rng, shape=()):
    """Observations of ``H`` with leading dimensions ``shape``.

    Phase-impaired draws apply fresh uniform phases at both ends of every
    observation.
    """
    H = np.asarray(H)
    n, m = H.shape
    model = Model.parse(model)
    if model is Model.PHASE:
        phi = rng.uniform(0.0, 2 * np.pi, tuple(shape) + (n, 1))
        theta = rng.uniform(0.0, 2 * np.pi, tuple(shape) + (1, m))
        signal = np.exp(1j * phi) * H * np.exp(1j * theta)
    else:
        signal = np.broadcast_to(H, tuple(shape) + (n, m))
    if sigma2 == 0:
        return np.array(signal, dtype=complex)
    return signal + np.sqrt(sigma2) * complex_gaussian(rng, tuple(shape) + (n, m))


def sample_observation(channel, sigma2, model=Model.PLAIN, seed=None):
    """One noisy observation of ``channel`` under the given model."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    H = channel.H if isinstance(channel, ChannelMatrix) else channel
    return draw_observations(H, sigma2, model, make_rng(seed))


def _threads():
    try:
        return max(1, int(os.environ.get("FREE_MIMO_THREADS", "1")))
    except ValueError:
        return 1


def _blocks(trials):
    sizes = [BLOCK] * (trials // BLOCK)
    if trials % BLOCK:
        sizes.append(trials % BLOCK)
    return sizes


def _map_blocks(fn, seed_seq, trials):
    sizes = _blocks(trials)
    children = seed_seq.spawn(len(sizes))
    args = [(make_rng(ss), b) for ss, b in zip(children, sizes)]
    workers = min(_threads(), len(args))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda a: fn(*a), args))
    return [fn(*a) for a in args]


def sample_moment_estimates(channel, sigma2, model, L, trials, seed, which="CG",
                            debias=True, force=False):
    """Per-trial moment estimates, shape ``(trials, 4)``.

    ``which`` is ``"CG"`` or ``"Cf"``. Noise and phases are fresh each trial.
    """
    H = channel.H
    if which == "Cf" and not force and not est.stacking_applies(model, L):
        raise est.StackingError("stacking invalid for the phase-impaired model with L>1")

    def block(rng, size):
        obs = draw_observations(H, sigma2, model, rng, (size, L))
        if which == "Cf":
            return est.free_moments_from_array(obs, sigma2, MOMENT_ORDER)
        return est.gmm_moments_from_array(obs, sigma2, MOMENT_ORDER, debias=debias)

    return np.concatenate(_map_blocks(block, np.random.SeedSequence(seed), trials))


# -- experiments -------------------------------------------------------------

class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Parameters of one simulation sweep.

    ``L`` and ``sigma2`` are lists; the swept one may have many entries, the
    other exactly one. ``capacity_sigma2`` fixes the noise level at which
    capacities are evaluated (default: the noise level of the sweep point),
    which is required when a noise variance of zero is simulated.
    """

    n: int
    m: int
    L: list
    rank: int
    sigma2: list
    trials: int
    seed: int
    model: Model = Model.PLAIN
    estimators: list = field(default_factory=lambda: ["Cf", "CG"])
    sweep: str = "over_L"
    capacity_sigma2: float | None = None
    force_stacking: bool = False
    name: str = ""

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("description", None)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            if isinstance(d.get("L"), int):
                d["L"] = [d["L"]]
            if isinstance(d.get("sigma2"), (int, float)):
                d["sigma2"] = [d["sigma2"]]
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def validate(self):
        try:
            self.model = Model.parse(self.model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.L = [int(v) for v in self.L]
        self.sigma2 = [float(v) for v in self.sigma2]
        if self.n < 1 or self.m < 1:
            raise ConfigError("n and m must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.L or min(self.L) < 1:
            raise ConfigError("L values must be >= 1")
        if not self.sigma2 or min(self.sigma2) < 0:
            raise ConfigError("sigma2 values must be >= 0")
        if not 0 <= self.rank <= min(self.n, self.m):
            raise ConfigError("rank must satisfy 0 <= rank <= min(n, m)")
        unknown = set(self.estimators) - set(est.ESTIMATORS)
        if unknown or not self.estimators:
            raise ConfigError(f"unknown estimators {sorted(unknown)}")
        if {"Cf", "CG"} & set(self.estimators) and not 1 <= self.rank <= est.MAX_RANK:
            raise ConfigError("Cf and CG need 1 <= rank <= 4")
        if self.sweep == "over_L":
            if len(self.sigma2) != 1:
                raise ConfigError("over_L sweeps take a single sigma2")
        elif self.sweep == "over_sigma":
            if len(self.L) != 1:
                raise ConfigError("over_sigma sweeps take a single L")
        else:
            raise ConfigError(f"unknown sweep {self.sweep!r}")
        if self.capacity_sigma2 is not None and not self.capacity_sigma2 > 0:
            raise ConfigError("capacity_sigma2 must be positive")
        if self.capacity_sigma2 is None and min(self.sigma2) == 0:
            raise ConfigError("sigma2 = 0 needs an explicit capacity_sigma2")
        if ("Cf" in self.estimators and not self.force_stacking
                and not all(est.stacking_applies(self.model, L) for L in self.L)):
            raise ConfigError("Cf stacking is invalid for the phase model with "
                              "L > 1; set force_stacking to run it anyway")

    def points(self):
        """``(sweep_value, L, sigma2)`` for every sweep point."""
        if self.sweep == "over_L":
            return [(L, L, self.sigma2[0]) for L in self.L]
        return [(s2, self.L[0], s2) for s2 in self.sigma2]


@dataclass
class SweepRow:
    sweep_value: float
    estimator: str
    mean_capacity: float
    se_capacity: float
    true_capacity: float
    mean_moments: list | None
    se_moments: list | None
    flags_count: int


def _se(x, axis=0):
    T = x.shape[axis]
    if T < 2:
        return np.zeros(np.delete(x.shape, axis)) if x.ndim > 1 else 0.0
    return np.std(x, axis=axis, ddof=1) / np.sqrt(T)


def _run_block(cfg, H, L, s2, s2_eval, rng, size):
    obs = draw_observations(H, s2, cfg.model, rng, (size, L))
    out = {}
    if {"C1", "C2", "C3"} & set(cfg.estimators):
        for name, vals in zip(("C1", "C2", "C3"), est.classical_from_array(obs, s2_eval)):
            out[name] = (vals, None, np.zeros(size, dtype=bool))
    for name in ("Cf", "CG"):
        if name not in cfg.estimators:
            continue
        if name == "Cf":
            h = est.free_moments_from_array(obs, s2, MOMENT_ORDER)
        else:
            h = est.gmm_moments_from_array(obs, s2, MOMENT_ORDER)
        hr = h[:, :cfg.rank]
        cap, clamped = capacity_from_moments(hr, s2_eval, cfg.n, with_flag=True)
        flagged = clamped | np.any(hr < 0, axis=1)
        if name == "Cf" and not est.stacking_applies(cfg.model, L):
            flagged = np.ones(size, dtype=bool)
        out[name] = (cap, h, flagged)
    return out


def run_experiment(cfg):
    """Run every sweep point of ``cfg`` and aggregate per estimator.

    The channel is drawn once per experiment; noise and phases are fresh per
    trial. Returns a list of :class:`SweepRow` in sweep order, estimators in
    the order given by the config.
    """
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    channel_ss, *point_ss = root.spawn(1 + len(cfg.points()))
    channel = sample_channel(cfg.n, cfg.m, cfg.rank, channel_ss)
    rows = []
    for (value, L, s2), ss in zip(cfg.points(), point_ss):
        s2_eval = cfg.capacity_sigma2 if cfg.capacity_sigma2 is not None else s2
        true_cap = channel.true_capacity(s2_eval)
        blocks = _map_blocks(
            lambda rng, size: _run_block(cfg, channel.H, L, s2, s2_eval, rng, size),
            ss, cfg.trials)
        for name in cfg.estimators:
            caps = np.concatenate([b[name][0] for b in blocks])
            flags = np.concatenate([b[name][2] for b in blocks])
            mean_h = se_h = None
            if blocks[0][name][1] is not None:
                h = np.concatenate([b[name][1] for b in blocks])
                mean_h = [float(v) for v in h.mean(axis=0)]
                se_h = [float(v) for v in np.atleast_1d(_se(h))]
            rows.append(SweepRow(value, name, float(caps.mean()), float(_se(caps)),
                                 true_cap, mean_h, se_h, int(flags.sum())))
    return rows


# -- mixed-moment verification -------------------------------------------------

@dataclass
class MomentCheck:
    order: int
    empirical: float
    se: float
    closed_form: float
    z: float


def verify_lemma1(n, m, sigma2, trials, seed, rank=3):
    """Compare empirical ``E tr_n(W^j)`` with the closed-form expectation.

    ``W = (R + sigma X)(R + sigma X)^H / m`` with a fixed random rank-``rank``
    ``R``; returns one :class:`MomentCheck` per order ``j = 1..4``.
    """
    if trials < 10_000:
        raise ValueError("verify_lemma1 needs at least 10^4 trials")
    root = np.random.SeedSequence(seed)
    channel_ss, noise_ss = root.spawn(2)
    channel = sample_channel(n, m, min(rank, n, m), channel_ss)
    closed = mixed_moment_expectation(channel.true_moments, n / m, m, sigma2)

    def block(rng, size):
        Y = draw_observations(channel.H, sigma2, Model.PLAIN, rng, (size,))
        return batched_trace_moments(est.sample_covariances(Y), MOMENT_ORDER)

    samples = np.concatenate(_map_blocks(block, noise_ss, trials))
    mean = samples.mean(axis=0)
    se = _se(samples)
    out = []
    for j in range(MOMENT_ORDER):
        diff = mean[j] - closed[j]
        tol = 1e-12 * max(1.0, abs(closed[j]))
        if se[j] > tol:
            z = diff / se[j]
        else:
            # deterministic samples (sigma2 = 0): only rounding separates them
            z = 0.0 if abs(diff) <= tol else np.inf
        out.append(MomentCheck(j + 1, float(mean[j]), float(se[j]),
                               float(closed[j]), float(z)))
    return out
