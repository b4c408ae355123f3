"""Ground-truth step-model generators for simulation studies.

A step model is a piecewise-constant mean plus noise: per covariate n the
mean starts at baseline b_n and jumps by w_mn after each change point c_m
(the jump takes effect at t = c_m + 1). Noise is either a Gaussian MA(q)
process with innovation s.d. sigma, or Poisson counts whose rate equals the
instantaneous mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import UnknownScenarioError, ValidationError
from .series import MultiSeries

GAUSSIAN_MA = "gaussian-ma"
POISSON = "poisson"


@dataclass(frozen=True)
class RngSpec:
    """Reproducible randomness: (seed, stream_id) fixes every draw.

    Derived sub-streams extend the spawn key, so independent parts of a
    computation (covariates, bootstrap replicates, realisations) can draw
    from decoupled streams while staying deterministic on every platform.
    """

    seed: int
    stream_id: int = 0
    key_path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= int(self.stream_id) < 2**64:
            raise ValidationError(f"stream_id must be a 64-bit unsigned integer, got {self.stream_id}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream_id", int(self.stream_id))
        object.__setattr__(self, "key_path", tuple(int(k) for k in self.key_path))

    def substream(self, *keys: int) -> "RngSpec":
        return RngSpec(self.seed, self.stream_id, self.key_path + tuple(int(k) for k in keys))

    def generator(self, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence(
            self.seed, spawn_key=(self.stream_id, *self.key_path, *(int(k) for k in keys))
        )
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class StepModelSpec:
    """Generative parameters of a multivariate step model.

    baseline: per-covariate level b_n, shape (N,).
    cps: strictly increasing interior change points, 2 <= c_m <= T - 1.
    weights: step magnitudes w_mn, shape (M, N).
    ma_coeffs: MA noise coefficients kappa_1..kappa_q (kappa_0 = 1 implicit).
    sigma: innovation s.d. (> 0 for gaussian-ma, ignored for poisson).
    """

    T: int
    baseline: np.ndarray
    cps: tuple[int, ...] = ()
    weights: np.ndarray = field(default=None)
    ma_coeffs: tuple[float, ...] = ()
    sigma: float = 1.0
    noise_kind: str = GAUSSIAN_MA

    def __post_init__(self):
        T = int(self.T)
        if T < 3:
            raise ValidationError(f"T must be >= 3, got {T}")
        object.__setattr__(self, "T", T)

        b = np.atleast_1d(np.asarray(self.baseline, dtype=np.float64)).copy()
        if b.ndim != 1 or b.size < 1:
            raise ValidationError("baseline must be a scalar or 1-d vector")
        b.setflags(write=False)
        object.__setattr__(self, "baseline", b)
        N = b.size

        cps = tuple(int(c) for c in self.cps)
        if any(c2 <= c1 for c1, c2 in zip(cps, cps[1:])):
            raise ValidationError(f"change points must be strictly increasing, got {cps}")
        if any(not 2 <= c <= T - 1 for c in cps):
            raise ValidationError(f"change points must be interior (2 <= c <= T-1 = {T - 1}), got {cps}")
        object.__setattr__(self, "cps", cps)
        M = len(cps)

        w = self.weights
        if w is None:
            w = np.zeros((M, N))
        w = np.asarray(w, dtype=np.float64).copy()
        if w.ndim == 0:
            w = w.reshape(1, 1)
        elif w.ndim == 1:
            # a vector of M per-step weights (univariate) takes priority;
            # a length-N vector is a single step across covariates
            if w.size == M and N == 1:
                w = w.reshape(M, 1)
            elif w.size == N and M == 1:
                w = w.reshape(1, N)
            elif M == 0:
                raise ValidationError("weights given but no change points")
            else:
                raise ValidationError(f"cannot broadcast weights of size {w.size} to (M={M}, N={N})")
        if w.shape != (M, N):
            raise ValidationError(f"weights must have shape (M={M}, N={N}), got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

        object.__setattr__(self, "ma_coeffs", tuple(float(k) for k in self.ma_coeffs))
        object.__setattr__(self, "sigma", float(self.sigma))

        if self.noise_kind not in (GAUSSIAN_MA, POISSON):
            raise ValidationError(f"noise_kind must be '{GAUSSIAN_MA}' or '{POISSON}'")
        if self.noise_kind == GAUSSIAN_MA and not self.sigma > 0:
            raise ValidationError(f"sigma must be > 0 for {GAUSSIAN_MA} noise, got {self.sigma}")
        if self.noise_kind == POISSON:
            rates = _mean_array(self)
            if rates.min() < 0:
                t, n = np.unravel_index(int(rates.argmin()), rates.shape)
                raise ValidationError(
                    f"poisson rate is negative ({rates[t, n]}) at t={int(t) + 1}, covariate {int(n) + 1}"
                )

    @property
    def N(self) -> int:
        return self.baseline.size

    @property
    def M(self) -> int:
        return len(self.cps)

    @property
    def q(self) -> int:
        return len(self.ma_coeffs)


def _mean_array(spec: StepModelSpec) -> np.ndarray:
    t = np.arange(1, spec.T + 1)
    mean = np.broadcast_to(spec.baseline, (spec.T, spec.N)).copy()
    for c, w_row in zip(spec.cps, spec.weights):
        mean[t > c] += w_row
    return mean


def deterministic_mean(spec: StepModelSpec) -> MultiSeries:
    """The noiseless piecewise-constant mean, entry (t, n) = b_n + sum_m w_mn * [t > c_m]."""
    return MultiSeries(_mean_array(spec))


def _ma_noise(gen: np.random.Generator, T: int, kappa: Sequence[float], sigma: float) -> np.ndarray:
    """Stationary MA(q) noise; q extra innovations warm the process up before t = 1."""
    q = len(kappa)
    eps = gen.normal(0.0, sigma, size=T + q)
    if q == 0:
        return eps
    kernel = np.concatenate(([1.0], np.asarray(kappa, dtype=float)))
    return np.convolve(eps, kernel)[q : q + T]


def generate(spec: StepModelSpec, rng: RngSpec) -> MultiSeries:
    """Draw one realisation of the step model.

    Covariate n draws from the sub-stream keyed by n, so output is identical
    whether covariates are generated serially or in parallel.
    """
    mean = _mean_array(spec)
    out = np.empty_like(mean)
    for n in range(spec.N):
        gen = rng.generator(n)
        if spec.noise_kind == POISSON:
            out[:, n] = gen.poisson(mean[:, n])
        else:
            out[:, n] = mean[:, n] + _ma_noise(gen, spec.T, spec.ma_coeffs, spec.sigma)
    return MultiSeries(out)


def ma_lag1_autocorrelation(kappa: Sequence[float]) -> float:
    """Closed-form lag-1 autocorrelation of an MA(q) process with kappa_0 = 1."""
    k = np.concatenate(([1.0], np.asarray(kappa, dtype=float)))
    return float(np.dot(k[:-1], k[1:]) / np.dot(k, k))


def _round_cp(fraction: float, T: int) -> int:
    c = int(round(fraction * T))
    return min(max(c, 2), T - 1)


def _amoc(T, sigma, w0, c, ma=False):
    if c is None:
        c = _round_cp(0.5, T)
    kappa = (-0.5 / sigma, 0.4 / sigma) if ma else ()
    return StepModelSpec(T=T, baseline=0.0, cps=(int(c),), weights=[[w0]], ma_coeffs=kappa, sigma=sigma)


def _two_cp(T, sigma, w0, w1w2, ma=False):
    cps = (_round_cp(0.2, T), _round_cp(0.6, T))
    kappa = (-0.5 / sigma, 0.4 / sigma) if ma else ()
    w = np.array([[w1w2[0] * w0], [w1w2[1] * w0]])
    return StepModelSpec(T=T, baseline=0.0, cps=cps, weights=w, ma_coeffs=kappa, sigma=sigma)


_NINE_B_GAUSS = (0, 0, 0, 2, 2, 2, 0, 1, 2)
_NINE_B_POIS = (1, 1, 1, 3, 3, 3, 1, 2, 1)
_NINE_W1 = (1, 2, 2, -2, 0, 0, 0, 0, 0)
_NINE_W2 = (2, 1, -1, 0, 1, -1, 0, 0, 0)


def _nine(T, sigma, w0, poisson=False):
    cps = (_round_cp(0.2, T), _round_cp(0.6, T))
    w = w0 * np.array([_NINE_W1, _NINE_W2], dtype=float)
    if poisson:
        return StepModelSpec(T=T, baseline=_NINE_B_POIS, cps=cps, weights=w, noise_kind=POISSON)
    return StepModelSpec(T=T, baseline=_NINE_B_GAUSS, cps=cps, weights=w, sigma=sigma)


# name -> (builder(T, sigma, w0, c), default sigma, default max-CP order for detection)
_SCENARIOS = {
    "amoc-grid": (lambda T, s, w0, c: _amoc(T, s, w0, c), 1.0, 1),
    "ma2-amoc": (lambda T, s, w0, c: _amoc(T, s, w0, c, ma=True), 0.7, 1),
    "two-cp-1": (lambda T, s, w0, c: _two_cp(T, s, w0, (1, 2)), 1.0, 3),
    "two-cp-2": (lambda T, s, w0, c: _two_cp(T, s, w0, (2, -1)), 1.0, 3),
    "two-cp-3": (lambda T, s, w0, c: _two_cp(T, s, w0, (2, 1)), 1.0, 3),
    "ma2-two-cp": (lambda T, s, w0, c: _two_cp(T, s, w0, (2, -1), ma=True), 0.7, 3),
    "multivariate-9": (lambda T, s, w0, c: _nine(T, s, w0), 1.0, 3),
    "poisson-9": (lambda T, s, w0, c: _nine(T, s, w0, poisson=True), 1.0, 3),
}


def scenario_names() -> tuple[str, ...]:
    return tuple(sorted(_SCENARIOS))


def default_max_cps(name: str) -> int:
    """The detection order conventionally paired with a preset (true M + 1 for multi-CP)."""
    if name not in _SCENARIOS:
        raise UnknownScenarioError(f"unknown scenario '{name}'; available: {', '.join(scenario_names())}")
    return _SCENARIOS[name][2]


def scenario(
    name: str,
    *,
    T: int = 100,
    sigma: Optional[float] = None,
    w0: float = 1.0,
    c: Optional[int] = None,
) -> StepModelSpec:
    """Build a registered simulation preset, optionally overriding T, sigma, w0, or c.

    Change points stay at the same relative position when T is overridden
    (20%/60% of T for the two-CP presets, 50% for the single-CP ones unless
    c is given explicitly).
    """
    if name not in _SCENARIOS:
        raise UnknownScenarioError(f"unknown scenario '{name}'; available: {', '.join(scenario_names())}")
    builder, default_sigma, _ = _SCENARIOS[name]
    if c is not None and name not in ("amoc-grid", "ma2-amoc"):
        raise ValidationError(f"the c override applies to single-CP presets only, not '{name}'")
    return builder(int(T), float(sigma if sigma is not None else default_sigma), float(w0), c)
