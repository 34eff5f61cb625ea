"""Space-time norms, norm-equivalence ratios, decay fits, and almost-conservation checks.

The four space-time norms are mixed Lebesgue norms L^q_t L^r_x of u or of a
derivative of u, with the scaling-dictated exponents

    M:  ||Delta u||,  q = 2(n+4)/(n-4),  r = 2n(n+4)/(n^2+16)
    W:  ||grad u||,   q = 2(n+4)/(n-4),  r = 2n(n+4)/(n^2-2n+8)
    Z:  ||u||,        q = r = 2(n+4)/(n-4)
    N:  ||grad u||,   q = 2,             r = 2n/(n+2)

The gradient magnitude is realized spectrally as |grad| u = (Delta^2)^{1/4} u
through the free calculus; Delta u comes from the grid stencil.  Time
integrals use the composite trapezoid over the sample times.

Admissibility of a pair (q, r) for the fourth-order flow means
4/q + n/r = n/2; it is validated in exact rational arithmetic because the
identity is brittle in floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .radial import RadialField, boundary_mass, localized_mass, lp_norm, smooth_cutoff
from .solver import SimulationConfig, critical_exponent, mass
from .spectral import (
    SpectralOperator,
    apply_function,
    free_fractional_gradient,
    hdot2_norm,
    laplacian_values,
)

SPACETIME_NORMS = ("M", "W", "Z", "N")
MIN_TIME_SAMPLES = 4


class AdmissibilityError(ValueError):
    pass


class WindowError(RuntimeError):
    """A measurement window was contaminated by boundary reflection."""


class ResolutionError(RuntimeError):
    """Sampling too sparse for the requested estimate."""


@dataclass
class SpaceTimeSample:
    """Fields sampled at increasing times inside an interval."""

    times: np.ndarray
    fields: list[RadialField]
    interval: tuple[float, float]
    uniform: bool = True

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.fields) != self.times.size:
            raise ValueError("times and fields length mismatch")
        if self.times.size >= 2:
            dt = np.diff(self.times)
            if np.any(dt <= 0):
                raise ValueError("sample times must be strictly increasing")
            self.uniform = bool(np.allclose(dt, dt[0], rtol=1e-9))
        lo, hi = self.interval
        if self.times.size and (self.times[0] < lo - 1e-12 or self.times[-1] > hi + 1e-12):
            raise ValueError("sample times fall outside the stated interval")

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def restricted(self, t_lo: float, t_hi: float) -> "SpaceTimeSample":
        keep = (self.times >= t_lo - 1e-12) & (self.times <= t_hi + 1e-12)
        return SpaceTimeSample(
            self.times[keep],
            [f for f, k in zip(self.fields, keep) if k],
            (t_lo, t_hi),
        )

    def decimated(self, stride: int) -> "SpaceTimeSample":
        return SpaceTimeSample(
            self.times[::stride], self.fields[::stride], self.interval
        )


def sample_from_trajectory(record, t_lo=None, t_hi=None) -> SpaceTimeSample:
    if not record.snapshots:
        raise ValueError("trajectory record carries no snapshots")
    times = np.array([t for t, _ in record.snapshots])
    lo = times[0] if t_lo is None else t_lo
    hi = times[-1] if t_hi is None else t_hi
    keep = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    return SpaceTimeSample(
        times[keep],
        [f for (_, f), k in zip(record.snapshots, keep) if k],
        (lo, hi),
    )


def spacetime_exponents(which: str, n: int) -> tuple[Fraction, Fraction]:
    q_crit = Fraction(2 * (n + 4), n - 4)
    if which == "M":
        return q_crit, Fraction(2 * n * (n + 4), n * n + 16)
    if which == "W":
        return q_crit, Fraction(2 * n * (n + 4), n * n - 2 * n + 8)
    if which == "Z":
        return q_crit, q_crit
    if which == "N":
        return Fraction(2), Fraction(2 * n, n + 2)
    raise ValueError(f"unknown space-time norm {which!r}; choose from {SPACETIME_NORMS}")


def _time_lq(times: np.ndarray, values: np.ndarray, q: float) -> float:
    peak = values.max() if values.size else 0.0
    if peak == 0.0:
        return 0.0
    return float(peak * np.trapezoid((values / peak) ** q, times) ** (1.0 / q))


def spacetime_norm(
    sample: SpaceTimeSample, which: str, op_free: SpectralOperator | None = None
) -> float:
    """L^q_t L^r_x norm over the sample; W and N need the free operator for |grad|."""
    if sample.times.size < MIN_TIME_SAMPLES:
        raise ResolutionError(
            f"need at least {MIN_TIME_SAMPLES} time samples, got {sample.times.size}"
        )
    n = sample.fields[0].grid.dimension
    q, r = spacetime_exponents(which, n)
    q_f, r_f = float(q), float(r)
    spatial = np.empty(sample.times.size)
    for i, u in enumerate(sample.fields):
        if which == "M":
            g = RadialField(u.grid, laplacian_values(u.grid, u.values))
        elif which in ("W", "N"):
            if op_free is None:
                raise ValueError(f"norm {which} needs the free operator for |grad|")
            g = free_fractional_gradient(op_free, 1.0, u)
        else:
            g = u
        spatial[i] = lp_norm(g, r_f)
    return _time_lq(sample.times, spatial, q_f)


def is_b_admissible(q: Fraction, r: Fraction, n: int) -> bool:
    """4/q + n/r = n/2 with 2 <= q, r, in exact rational arithmetic."""
    if q < 2 or r < 2:
        return False
    return Fraction(4) / q + Fraction(n) / r == Fraction(n, 2)


def require_b_admissible(q: Fraction, r: Fraction, n: int, r_below_half_n: bool = False):
    if not is_b_admissible(q, r, n):
        raise AdmissibilityError(
            f"(q, r) = ({q}, {r}) violates 4/q + n/r = n/2 "
            f"(got {Fraction(4)/q + Fraction(n)/r} != {Fraction(n,2)}) or q, r < 2"
        )
    if r_below_half_n and not r < Fraction(n, 2):
        raise AdmissibilityError(f"pair requires r < n/2 = {Fraction(n,2)}, got r = {r}")


# ---------------------------------------------------------------------------
# norm equivalence

def sobolev_equiv_ratio(
    op_full: SpectralOperator,
    op_free: SpectralOperator,
    u: RadialField,
    s: float,
    p: float,
) -> float:
    """||H^{s/4} u||_{L^p} / || |grad|^s u ||_{L^p}."""
    n = u.grid.dimension
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"s must lie in [0, 2], got {s}")
    if not 1.0 < p < n / 2.0:
        raise ValueError(f"p must lie in (1, n/2) = (1, {n/2}), got {p}")
    num = lp_norm(apply_function(op_full, "power_s", s, u), p)
    den = lp_norm(free_fractional_gradient(op_free, s, u), p)
    if den == 0.0:
        raise ZeroDivisionError("|grad|^s u vanishes; ratio undefined")
    return num / den


# ---------------------------------------------------------------------------
# linear decay fit

@dataclass
class FitResult:
    exponent: float    # fitted slope of log||u(t)|| vs log t
    amplitude: float
    residual: float    # RMS of the log-log fit
    window: tuple[float, float]


def fit_decay(
    op: SpectralOperator,
    u0: RadialField,
    p: float,
    window: tuple[float, float],
    num_samples: int = 24,
    boundary_threshold: float = 1e-6,
) -> FitResult:
    """Fit the decay rate of ||exp(itH) u0||_{L^p} on a log-spaced time grid.

    Raises WindowError (with the first contamination time) if boundary mass
    exceeds the threshold anywhere in the window.
    """
    t_lo, t_hi = window
    if not 0 < t_lo < t_hi:
        raise ValueError("window must satisfy 0 < t_lo < t_hi")
    times = np.geomspace(t_lo, t_hi, num_samples)
    m0 = mass(u0)
    norms = np.empty(num_samples)
    for i, t in enumerate(times):
        ut = apply_function(op, "exp_it", t, u0)
        if boundary_mass(ut) > boundary_threshold * m0:
            raise WindowError(f"boundary contamination at t = {t:.4g}")
        norms[i] = lp_norm(ut, p)
    logs_t = np.log(times)
    logs_n = np.log(norms)
    slope, intercept = np.polyfit(logs_t, logs_n, 1)
    resid = float(np.sqrt(np.mean((logs_n - (slope * logs_t + intercept)) ** 2)))
    return FitResult(float(slope), float(math.exp(intercept)), resid, window)


def predicted_decay_exponent(n: int, p: float) -> float:
    """-(n/4) (1 - 2/p), the dispersive rate for the fourth-order flow."""
    return -(n / 4.0) * (1.0 - 2.0 / p)


# ---------------------------------------------------------------------------
# inhomogeneous linear flow and the Strichartz quotient

@dataclass
class ModalForcing:
    """h(t) = sum_m exp(i omega_m t) g_m; closed-form Duhamel integrals."""

    omegas: np.ndarray
    fields: list[RadialField]

    def values_at(self, t: float) -> np.ndarray:
        out = np.zeros_like(self.fields[0].values)
        for w, g in zip(self.omegas, self.fields):
            out = out + np.exp(1j * w * t) * g.values
        return out


def _phase_integral(delta: np.ndarray, t: float) -> np.ndarray:
    """int_0^t exp(i delta s) ds, stable near delta = 0."""
    out = np.empty_like(delta, dtype=complex)
    small = np.abs(delta * t) < 1e-8
    d_small = delta[small]
    out[small] = t * (1.0 + 0.5j * d_small * t - (d_small * t) ** 2 / 6.0)
    d = delta[~small]
    out[~small] = (np.exp(1j * d * t) - 1.0) / (1j * d)
    return out


def duhamel_solution_at(
    op: SpectralOperator, u0: RadialField, forcing: ModalForcing | None, t: float
) -> RadialField:
    """u(t) = e^{itH} u0 + i int_0^t e^{i(t-s)H} h(s) ds, exact per mode."""
    mu = op.eigenvalues
    coeffs = op.to_modal(u0.values) * np.exp(1j * mu * t)
    if forcing is not None:
        for w, g in zip(forcing.omegas, forcing.fields):
            g_modal = op.to_modal(g.values)
            coeffs = coeffs + 1j * np.exp(1j * mu * t) * g_modal * _phase_integral(
                w - mu, t
            )
    return RadialField(op.grid, op.from_modal(coeffs))


def strichartz_quotient(
    op_full: SpectralOperator,
    op_free: SpectralOperator,
    u0: RadialField,
    forcing: ModalForcing | None,
    pair: tuple[Fraction, Fraction],
    interval: tuple[float, float] = (0.0, 1.0),
    num_samples: int = 129,
) -> float:
    """||Delta u||_{L^q L^r} / (||Delta u0||_2 + ||grad h||_{L^2 L^{2n/(n+2)}})."""
    n = op_full.grid.dimension
    q, r = Fraction(pair[0]), Fraction(pair[1])
    require_b_admissible(q, r, n, r_below_half_n=True)
    t0, t1 = interval
    times = np.linspace(t0, t1, num_samples)
    lhs_spatial = np.empty(num_samples)
    rhs_spatial = np.zeros(num_samples)
    _, r_dual = spacetime_exponents("N", n)
    for i, t in enumerate(times):
        u_t = duhamel_solution_at(op_full, u0, forcing, t)
        lhs_spatial[i] = lp_norm(
            RadialField(u_t.grid, laplacian_values(u_t.grid, u_t.values)), float(r)
        )
        if forcing is not None:
            h_t = RadialField(op_full.grid, forcing.values_at(t))
            rhs_spatial[i] = lp_norm(
                free_fractional_gradient(op_free, 1.0, h_t), float(r_dual)
            )
    lhs = _time_lq(times, lhs_spatial, float(q))
    dual = _time_lq(times, rhs_spatial, 2.0) if forcing is not None else 0.0
    denom = hdot2_norm(u0) + dual
    if denom == 0.0:
        raise ZeroDivisionError("trivial data and forcing")
    return lhs / denom


# ---------------------------------------------------------------------------
# localized-mass almost-conservation and the Morawetz functional

@dataclass
class LocalizedMassRateReport:
    radius: float
    empirical_constant: float   # sup |dM/dt| R / (E^{3/4} M^{1/4})
    max_abs_rate: float
    rates: np.ndarray
    masses: np.ndarray
    resolved: bool


def localized_mass_rate_check(
    sample: SpaceTimeSample, radius: float, chi=smooth_cutoff
) -> LocalizedMassRateReport:
    """Central-difference d/dt of the localized mass against its dispersive bound.

    Raises ResolutionError when halving the snapshot stride changes the
    measured peak rate by more than 50%.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if sample.times.size < 3:
        raise ResolutionError("need at least 3 snapshots for a central difference")

    def peak_and_profile(s: SpaceTimeSample):
        masses = np.array([localized_mass(u, radius, chi) for u in s.fields])
        energies = np.array([hdot2_norm(u) ** 2 for u in s.fields])
        rates = (masses[2:] - masses[:-2]) / (s.times[2:] - s.times[:-2])
        return masses, energies, rates

    masses, energies, rates = peak_and_profile(sample)
    resolved = True
    if sample.times.size >= 6:
        _, _, rates_coarse = peak_and_profile(sample.decimated(2))
        peak, peak_coarse = np.max(np.abs(rates)), np.max(np.abs(rates_coarse))
        scale = max(peak, peak_coarse)
        if scale > 0 and abs(peak - peak_coarse) > 0.5 * scale:
            raise ResolutionError(
                f"rate estimate changes by {abs(peak-peak_coarse)/scale:.0%} under "
                "stride halving; snapshots too sparse"
            )

    total = mass(sample.fields[0])
    dt = float(np.min(np.diff(sample.times)))
    rate_floor = 1e-12 * total / dt
    constants = []
    for k, rate in enumerate(rates):
        m_k = masses[k + 1]
        e_k = energies[k + 1]
        if abs(rate) <= rate_floor or m_k <= 0 or e_k <= 0:
            constants.append(0.0)
        else:
            constants.append(abs(rate) * radius / (e_k**0.75 * m_k**0.25))
    return LocalizedMassRateReport(
        radius=radius,
        empirical_constant=float(np.max(constants)) if constants else 0.0,
        max_abs_rate=float(np.max(np.abs(rates))) if rates.size else 0.0,
        rates=rates,
        masses=masses,
        resolved=resolved,
    )


@dataclass
class MorawetzReport:
    k_parameter: float
    interval: tuple[float, float]
    lhs: float            # int_I int_{|x| <= K |I|^{1/4}} |u|^{2#} / |x| dx dt
    rhs_core: float       # (K^3 + 1/K) sup_I (E + E^{2#/2}) |I|^{3/4}
    empirical_constant: float
    verdict: bool | None


def morawetz_check(
    sample: SpaceTimeSample,
    k_parameter: float,
    cfg: SimulationConfig,
    c_cap: float | None = None,
) -> MorawetzReport:
    """Weighted space-time nonlinearity inside |x| <= K |I|^{1/4} vs its bound."""
    n = sample.fields[0].grid.dimension
    p_crit = critical_exponent(n)
    if abs(cfg.p - p_crit) > 1e-9:
        raise ValueError(
            f"Morawetz check needs the critical power p = {p_crit}, got {cfg.p}"
        )
    two_sharp = p_crit + 1.0
    length = sample.length
    ball = k_parameter * length**0.25
    grid = sample.fields[0].grid
    inside = grid.nodes <= ball
    weights = grid.metric[inside] / grid.nodes[inside]
    density = np.empty(sample.times.size)
    sup_e_hat = 0.0
    for i, u in enumerate(sample.fields):
        density[i] = float(np.sum(weights * np.abs(u.values[inside]) ** two_sharp))
        e = hdot2_norm(u) ** 2
        sup_e_hat = max(sup_e_hat, e + e ** (two_sharp / 2.0))
    lhs = float(np.trapezoid(density, sample.times))
    rhs_core = (k_parameter**3 + 1.0 / k_parameter) * sup_e_hat * length**0.75
    c_emp = lhs / rhs_core if rhs_core > 0 else 0.0
    verdict = None if c_cap is None else bool(c_emp <= c_cap)
    return MorawetzReport(
        k_parameter=k_parameter,
        interval=sample.interval,
        lhs=lhs,
        rhs_core=rhs_core,
        empirical_constant=c_emp,
        verdict=verdict,
    )
