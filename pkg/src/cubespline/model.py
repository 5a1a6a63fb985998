"""Statistical model of per-point execution time.

Normalised time ``y/n`` is a baseline plus Gamma-distributed noise. The
baseline blends an L3-bound line into a main-memory-bound slope through a
Weibull survival weight; the noise has a fixed mode and a standard deviation
``sigma_inf + sigma0/n``.

Parameter vectors are ordered as :data:`PARAM_NAMES`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import astuple, dataclass, field
from typing import NamedTuple

import emcee
import numba
import numpy as np
from scipy import optimize, special, stats

__all__ = [
    "PARAM_NAMES",
    "DEFAULT_T_BOUNDS",
    "ModelParams",
    "GammaParams",
    "PosteriorSamples",
    "FitConfig",
    "InitializationError",
    "gamma_from_mode_sigma",
    "baseline",
    "noise_sigma",
    "prior_violation",
    "log_prior",
    "log_likelihood",
    "log_likelihood_batch",
    "simulate",
    "fit_posterior",
    "credible_interval",
    "summarize_posterior",
    "format_summary",
    "write_posterior",
    "read_posterior",
    "model_band",
]

PARAM_NAMES = ("m_l3", "m_mm", "b_l3", "t", "s", "p", "mode", "sigma0", "sigma_inf")

# fitted on an i7-7700k; other hardware needs its own transition window
DEFAULT_T_BOUNDS = (32000.0, 350000.0)


@dataclass(frozen=True)
class ModelParams:
    m_l3: float       # ns/point, L3-bound slope
    m_mm: float       # ns/point, main-memory-bound slope
    b_l3: float       # ns, L3-bound intercept
    t: float          # points, transition onset
    s: float          # 1/points, Weibull scale
    p: float          # Weibull power
    mode: float       # ns/point, Gamma mode above the baseline
    sigma0: float     # ns, noise that does not scale with n
    sigma_inf: float  # ns/point, noise that scales with n

    def __array__(self, dtype=None, copy=None):
        return np.array(astuple(self), dtype=dtype or np.float64)

    @classmethod
    def from_array(cls, values):
        values = [float(v) for v in values]
        if len(values) != len(PARAM_NAMES):
            raise ValueError(f"expected {len(PARAM_NAMES)} parameters, got {len(values)}")
        return cls(*values)


class GammaParams(NamedTuple):
    kappa: float
    theta: float


def _unpack(theta):
    if isinstance(theta, ModelParams):
        return astuple(theta)
    theta = tuple(theta)
    if len(theta) != len(PARAM_NAMES):
        raise ValueError(f"expected {len(PARAM_NAMES)} parameters, got {len(theta)}")
    return theta


def gamma_from_mode_sigma(mode, sigma) -> GammaParams:
    """Gamma shape and scale with the given mode and standard deviation.

    Solves ``mode = (kappa-1)*theta`` and ``sigma = sqrt(kappa)*theta``. The
    closed form is rationalised so that ``sigma << mode`` loses no digits.
    Vectorises over array inputs.
    """
    mode = np.asarray(mode, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(~(sigma > 0)):
        raise ValueError("standard deviation must be positive")
    if np.any(~(mode >= 0)):
        raise ValueError("mode must be non-negative")
    root = np.sqrt(mode * mode + 4.0 * sigma * sigma)
    theta = 2.0 * sigma * sigma / (root + mode)
    kappa = ((mode + root) / (2.0 * sigma)) ** 2
    if kappa.ndim == 0:
        return GammaParams(float(kappa), float(theta))
    return GammaParams(kappa, theta)


def _weight(n, t, s, p):
    n = np.asarray(n, dtype=np.float64)
    w = np.ones_like(n)
    above = n > t
    if np.any(above):
        with np.errstate(all="ignore"):
            v = np.exp(-(((n[above] - t) * s) ** p))
        w[above] = np.clip(np.nan_to_num(v, nan=1.0), 0.0, 1.0)
    return w


def baseline(theta, n):
    """Lowest attainable ns/point at list length ``n``."""
    m_l3, m_mm, b_l3, t, s, p, *_ = _unpack(theta)
    n_arr = np.asarray(n, dtype=np.float64)
    w = _weight(n_arr, t, s, p)
    out = (m_l3 + b_l3 / n_arr) * w + m_mm * (1.0 - w)
    return float(out) if out.ndim == 0 else out


def noise_sigma(theta, n):
    *_, sigma0, sigma_inf = _unpack(theta)
    out = sigma_inf + sigma0 / np.asarray(n, dtype=np.float64)
    return float(out) if np.ndim(out) == 0 else out


def prior_violation(theta, t_bounds=DEFAULT_T_BOUNDS):
    """Name of the first prior constraint ``theta`` breaks, or ``None``."""
    vals = _unpack(theta)
    if not all(math.isfinite(v) for v in vals):
        return "all parameters finite"
    m_l3, m_mm, b_l3, t, s, p, mode, sigma0, sigma_inf = vals
    if m_l3 <= 0 or m_mm <= 0:
        return "m_l3 > 0 and m_mm > 0"
    if m_l3 > m_mm:
        return "m_l3 <= m_mm"
    if b_l3 < 0:
        return "b_l3 >= 0"
    if t < t_bounds[0] or t > t_bounds[1]:
        return f"{t_bounds[0]:g} <= t <= {t_bounds[1]:g}"
    if s > 1e-2 or s <= 0:
        return "0 < s <= 1e-2"
    if p <= 0 or p > 1000:
        return "0 < p <= 1000"
    if mode <= 0 or sigma0 <= 0 or sigma_inf <= 0:
        return "mode, sigma0, sigma_inf > 0"
    if sigma_inf > sigma0:
        return "sigma_inf <= sigma0"
    return None


def log_prior(theta, t_bounds=DEFAULT_T_BOUNDS) -> float:
    """Improper log prior: box constraints plus a Cauchy-like tail on both slopes."""
    if prior_violation(theta, t_bounds) is not None:
        return -np.inf
    m_l3, m_mm = _unpack(theta)[:2]
    return -1.5 * (math.log1p(m_l3 * m_l3) + math.log1p(m_mm * m_mm))


def log_likelihood(theta, n, times) -> float:
    """Sum of Gamma log densities of ``times/n - baseline``.

    Any point at or below the baseline makes the whole likelihood ``-inf``.
    """
    n = np.asarray(n, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    vals = _unpack(theta)
    z = times / n - baseline(vals, n)
    if not np.all(z > 0):
        return -np.inf
    kappa, scale = gamma_from_mode_sigma(vals[6], noise_sigma(vals, n))
    with np.errstate(all="ignore"):
        terms = (kappa - 1.0) * np.log(z) - z / scale - kappa * np.log(scale) - special.gammaln(kappa)
    total = float(np.sum(terms))
    return total if not math.isnan(total) else -np.inf


@numba.njit(cache=True)
def _loglike_kernel(params, n, times, out):
    for w in range(params.shape[0]):
        m_l3 = params[w, 0]
        m_mm = params[w, 1]
        b_l3 = params[w, 2]
        t = params[w, 3]
        s = params[w, 4]
        p = params[w, 5]
        mode = params[w, 6]
        sigma0 = params[w, 7]
        sigma_inf = params[w, 8]
        total = 0.0
        for i in range(n.shape[0]):
            ni = n[i]
            frac = 1.0
            if ni > t:
                frac = math.exp(-math.pow((ni - t) * s, p))
                if math.isnan(frac):
                    frac = 1.0
                frac = min(max(frac, 0.0), 1.0)
            floor = (m_l3 + b_l3 / ni) * frac + m_mm * (1.0 - frac)
            z = times[i] / ni - floor
            if not z > 0.0:
                total = -math.inf
                break
            sigma = sigma_inf + sigma0 / ni
            root = math.sqrt(mode * mode + 4.0 * sigma * sigma)
            scale = 2.0 * sigma * sigma / (root + mode)
            r = (mode + root) / (2.0 * sigma)
            kappa = r * r
            total += (kappa - 1.0) * math.log(z) - z / scale - kappa * math.log(scale) - math.lgamma(kappa)
        if math.isnan(total):
            total = -math.inf
        out[w] = total
    return out


def log_likelihood_batch(params, n, times) -> np.ndarray:
    """Compiled :func:`log_likelihood` for a stack of parameter rows."""
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    out = np.empty(params.shape[0])
    return _loglike_kernel(params, np.asarray(n, dtype=np.float64),
                           np.asarray(times, dtype=np.float64), out)


def _log_posterior_batch(params, n, times, t_bounds):
    params = np.atleast_2d(params)
    lp = np.array([log_prior(row, t_bounds) for row in params])
    ok = np.isfinite(lp)
    if np.any(ok):
        lp[ok] += log_likelihood_batch(params[ok], n, times)
    return lp


def simulate(theta, n, rng) -> np.ndarray:
    """Draw total execution times (ns) for list lengths ``n`` from the model."""
    n = np.asarray(n, dtype=np.float64)
    vals = _unpack(theta)
    kappa, scale = gamma_from_mode_sigma(vals[6], noise_sigma(vals, n))
    return n * (baseline(vals, n) + rng.gamma(kappa, scale))


class InitializationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitConfig:
    walkers: int = 32
    steps: int = 2000
    burn_in: int | None = None      # default: first half of the steps
    seed: int = 0
    t_bounds: tuple = DEFAULT_T_BOUNDS
    min_draws: int = 4096
    init_spread: float = 1e-3       # walkers start log-uniform in [x/(1+spread), x*(1+spread)]
    optimize: bool = True

    def __post_init__(self):
        if self.walkers < 2 * len(PARAM_NAMES):
            raise ValueError(f"need at least {2 * len(PARAM_NAMES)} walkers, got {self.walkers}")
        if self.walkers % 2:
            raise ValueError("walker count must be even")
        burn = self.burn
        if not 0 <= burn < self.steps:
            raise ValueError(f"burn-in {burn} must lie in [0, steps={self.steps})")
        if self.draws < self.min_draws:
            raise ValueError(f"{self.walkers} walkers x {self.steps - burn} kept steps = "
                             f"{self.draws} draws, below the minimum {self.min_draws}")
        lo, hi = self.t_bounds
        if not 0 < lo < hi:
            raise ValueError(f"bad t bounds {self.t_bounds!r}")
        if not self.init_spread > 0:
            raise ValueError("init_spread must be positive")

    @property
    def burn(self):
        return self.steps // 2 if self.burn_in is None else self.burn_in

    @property
    def draws(self):
        return self.walkers * (self.steps - self.burn)


@dataclass
class PosteriorSamples:
    draws: np.ndarray                 # (count, 9), rows ordered as PARAM_NAMES
    acceptance_fraction: float = float("nan")
    t_bounds: tuple = DEFAULT_T_BOUNDS
    start: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=np.float64))
        if self.draws.shape[1] != len(PARAM_NAMES):
            raise ValueError(f"posterior rows need {len(PARAM_NAMES)} columns, got {self.draws.shape[1]}")

    def __len__(self):
        return len(self.draws)

    def column(self, name):
        return self.draws[:, PARAM_NAMES.index(name)]

    def params(self, i) -> ModelParams:
        return ModelParams.from_array(self.draws[i])


# Search coordinates for the start-point optimiser: logs of the positive
# quantities, with the slope gap and noise ratio kept non-negative by
# construction.
def _to_search(v, t_bounds):
    m_l3, m_mm, b_l3, t, s, p, mode, sigma0, sigma_inf = v
    lo, hi = t_bounds
    return np.array([
        math.log(m_l3), math.log(max(m_mm - m_l3, 1e-12 * m_l3)), math.log(max(b_l3, 1e-12)),
        (t - lo) / (hi - lo), math.log(s), math.log(p), math.log(mode), math.log(sigma0),
        math.log(sigma_inf / sigma0),
    ])


def _from_search(u, t_bounds):
    lo, hi = t_bounds
    with np.errstate(over="ignore"):
        m_l3 = math.exp(min(u[0], 700.0))
        sigma0 = math.exp(min(u[7], 700.0))
        return np.array([
            m_l3, m_l3 + math.exp(min(u[1], 700.0)), math.exp(min(u[2], 700.0)),
            lo + u[3] * (hi - lo), math.exp(min(u[4], 700.0)), math.exp(min(u[5], 700.0)),
            math.exp(min(u[6], 700.0)), sigma0, sigma0 * math.exp(min(u[8], 0.0)),
        ])


def _heuristic_start(n, times, t_bounds):
    """Rough parameter guess read off the data's lower envelope."""
    r = times / n
    lo, hi = t_bounds
    order = np.argsort(n)
    k = max(len(n) // 5, 1)
    low = n <= lo
    if low.sum() < 10:
        low = np.zeros(len(n), bool)
        low[order[:k]] = True
    high = n >= hi
    if high.sum() < 10:
        high = np.zeros(len(n), bool)
        high[order[-k:]] = True
    smallest = np.zeros(len(n), bool)
    smallest[order[:k]] = True

    m_l3 = 0.999 * np.min(r[low])
    m_mm = max(0.999 * np.min(r[high]), 1.001 * m_l3)
    mode = max(float(np.median(r[high]) - m_mm), 1e-3 * m_mm)
    sigma_inf = max(float(np.std(r[high])), 1e-6 * m_mm)
    sigma0 = max(float(np.std(r[smallest]) * np.median(n[smallest])), 2 * sigma_inf)
    t = math.sqrt(lo * hi)
    s = min(1.0 / (hi - t), 1e-2)
    b_l3 = 1e-6 * m_l3
    return np.array([m_l3, m_mm, b_l3, t, s, 1.0, mode, sigma0, sigma_inf])


def _describe_failure(v, n, times, t_bounds):
    why = prior_violation(v, t_bounds)
    if why is not None:
        return f"prior constraint violated: {why}"
    below = int(np.sum(times / n - baseline(v, n) <= 0))
    if below:
        return f"likelihood support violated: {below} data points at or below the baseline"
    return "log probability is not finite"


def _start_point(n, times, cfg):
    start = _heuristic_start(n, times, cfg.t_bounds)
    # shrink the slopes until every point clears the baseline
    for _ in range(60):
        if np.isfinite(_log_posterior_batch(start, n, times, cfg.t_bounds)[0]):
            break
        start[0] *= 0.98
        start[1] = max(start[1] * 0.98, start[0])
        start[2] *= 0.5
    else:
        raise InitializationError(
            "no valid starting point: " + _describe_failure(start, n, times, cfg.t_bounds))
    if not cfg.optimize:
        return start

    def objective(u):
        v = _from_search(u, cfg.t_bounds)
        lp = _log_posterior_batch(v, n, times, cfg.t_bounds)[0]
        return -lp if np.isfinite(lp) else np.inf

    u = _to_search(start, cfg.t_bounds)
    best = objective(u)
    for _ in range(3):
        res = optimize.minimize(objective, u, method="Nelder-Mead",
                                options={"maxfev": 6000, "xatol": 1e-9, "fatol": 1e-7,
                                         "adaptive": True})
        if not res.fun < best - 1e-6:
            break
        u, best = res.x, res.fun
    return _from_search(u, cfg.t_bounds)


def _initial_walkers(center, n, times, cfg, rng):
    spread = math.log1p(cfg.init_spread)
    center = center.copy()
    center[2] = max(center[2], 1e-12)
    walkers = np.empty((cfg.walkers, len(PARAM_NAMES)))
    for w in range(cfg.walkers):
        for attempt in range(1000):
            cand = center * np.exp(rng.uniform(-spread, spread, size=len(center)))
            if np.isfinite(_log_posterior_batch(cand, n, times, cfg.t_bounds)[0]):
                walkers[w] = cand
                break
            if attempt % 100 == 99:
                spread *= 0.5
        else:
            raise InitializationError(
                f"walker {w}: " + _describe_failure(cand, n, times, cfg.t_bounds))
    return walkers


def fit_posterior(n, times, config: FitConfig = FitConfig()) -> PosteriorSamples:
    """Sample the model posterior with an affine-invariant ensemble sampler.

    ``n`` are list lengths and ``times`` total nanoseconds per run. Walkers
    start in a small log-uniform box around a posterior-mode estimate; the
    first ``config.burn`` steps are discarded.
    """
    n = np.asarray(n, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if n.shape != times.shape or n.ndim != 1 or len(n) == 0:
        raise ValueError("n and times must be equal-length, non-empty 1-d sequences")
    if np.any(~np.isfinite(n)) or np.any(n < 1):
        raise ValueError("every n must be a finite value >= 1")

    rng = np.random.default_rng(config.seed)
    center = _start_point(n, times, config)
    p0 = _initial_walkers(center, n, times, config, rng)

    sampler = emcee.EnsembleSampler(config.walkers, len(PARAM_NAMES), _log_posterior_batch,
                                    args=(n, times, config.t_bounds), vectorize=True)
    sampler.random_state = np.random.RandomState(config.seed % 2**32).get_state()
    sampler.run_mcmc(p0, config.steps, progress=False)

    accept = float(np.mean(sampler.acceptance_fraction))
    if not 0.1 <= accept <= 0.9:
        warnings.warn(f"mean acceptance fraction {accept:.3f} outside [0.1, 0.9]", RuntimeWarning)
    draws = sampler.get_chain(discard=config.burn, flat=True)
    return PosteriorSamples(draws, accept, tuple(config.t_bounds), start=p0)


def credible_interval(theta, n, fraction=2.0 / 3.0):
    """Central ``fraction`` interval of ns/point at list length ``n``."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction!r}")
    vals = _unpack(theta)
    floor = baseline(vals, n)
    kappa, scale = gamma_from_mode_sigma(vals[6], noise_sigma(vals, n))
    low, high = stats.gamma.interval(fraction, kappa, 0, scale)
    return floor + low, floor + high


def summarize_posterior(samples) -> dict:
    """``{name: (p16, p50, p84)}`` with linear interpolation between order statistics."""
    draws = samples.draws if isinstance(samples, PosteriorSamples) else np.atleast_2d(samples)
    if draws.size == 0 or len(draws) == 0:
        raise ValueError("cannot summarise an empty posterior")
    pct = np.percentile(draws, [16, 50, 84], axis=0)
    names = PARAM_NAMES if draws.shape[1] == len(PARAM_NAMES) else [str(i) for i in range(draws.shape[1])]
    return {name: tuple(float(v) for v in pct[:, i]) for i, name in enumerate(names)}


def format_summary(p16, p50, p84, fmt="{:.2e}"):
    """Median with upper and lower offsets: ``'5.28e+00 +9.03e-05 -4.29e-03'``."""
    return f"{fmt.format(p50)} +{fmt.format(p84 - p50)} -{fmt.format(p50 - p16)}"


def write_posterior(path_or_file, samples, rng=None):
    """Nine tab-separated columns, no header; rows shuffled when ``rng`` is given."""
    draws = samples.draws if isinstance(samples, PosteriorSamples) else np.asarray(samples)
    if rng is not None:
        draws = draws[rng.permutation(len(draws))]
    np.savetxt(path_or_file, draws, delimiter="\t", fmt="%.17g")


def read_posterior(path_or_file) -> PosteriorSamples:
    draws = np.loadtxt(path_or_file, delimiter="\t", ndmin=2)
    return PosteriorSamples(draws)


def model_band(samples, n_grid, fraction=2.0 / 3.0, draws=256, rng=None):
    """Per-n medians over posterior draws of (low, baseline + mode, high).

    Returns an array of shape ``(len(n_grid), 4)``: n, low, mode line, high,
    all in ns/point. ``draws`` rows are picked at random when the posterior
    is larger.
    """
    rows = samples.draws if isinstance(samples, PosteriorSamples) else np.atleast_2d(samples)
    if len(rows) == 0:
        raise ValueError("cannot build a band from an empty posterior")
    if len(rows) > draws:
        rng = np.random.default_rng(0) if rng is None else rng
        rows = rows[rng.choice(len(rows), draws, replace=False)]
    n_grid = np.asarray(n_grid, dtype=np.float64)
    lo = np.empty((len(rows), len(n_grid)))
    hi = np.empty_like(lo)
    mid = np.empty_like(lo)
    for i, r in enumerate(rows):
        lo[i], hi[i] = credible_interval(r, n_grid, fraction)
        mid[i] = baseline(r, n_grid) + r[6]
    return np.column_stack([n_grid, np.median(lo, 0), np.median(mid, 0), np.median(hi, 0)])
