"""Wave-operator probes, scattering-state extraction, and the final-state solver.

On the truncated disk only finite-time compositions of the two exact
propagators exist, so every asymptotic statement becomes a trend measured on
the pre-reflection window:

* wave operator:      W(t) psi = e^{itH} e^{-it Delta^2} psi, H^2 Cauchy gaps;
* scattering state:   v(t) = e^{-itH} u(t) from trajectory snapshots, with
                      u+ = v at the last clean time, the mass identity
                      M(u0) = M(u+), and the energy identity
                      2 E(u0) = ||u+_*||_{Hdot^2}^2 once the critical
                      Lebesgue norm of u has collapsed;
* final state:        backward fixed point of
                      u(t) = e^{itH} u+ - i lam int_t^{Tmax} e^{i(t-s)H} f(u) ds,
                      sharing the forward oracle's Gauss panels so the
                      round trip isolates fixed-point error only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import SpaceTimeSample, WindowError, sample_from_trajectory, spacetime_norm
from .radial import RadialField, boundary_mass, lp_norm
from .solver import (
    GaussPanels,
    SimulationConfig,
    _picard_iterate,
    critical_exponent,
    energy,
    mass,
)
from .spectral import SpectralOperator, apply_function, h2_norm, hdot2_norm

Z_TAIL_THRESHOLD = 1e-3
LEBESGUE_TRIGGER = 0.1


def has_decreasing_triplet(gaps: np.ndarray) -> bool:
    """True when some three consecutive gaps strictly decrease."""
    gaps = np.asarray(gaps)
    if gaps.size < 3:
        return False
    return bool(np.any((gaps[:-2] > gaps[1:-1]) & (gaps[1:-1] > gaps[2:])))


@dataclass
class WaveOperatorProbe:
    test_state: RadialField
    times: np.ndarray
    series: list[RadialField]          # W(t) psi per time
    convergence_gaps: np.ndarray       # H^2 distance of consecutive entries
    convergent: bool


def probe_wave_operator(
    op_full: SpectralOperator,
    op_free: SpectralOperator,
    test_state: RadialField,
    times,
    boundary_threshold: float = 1e-6,
) -> WaveOperatorProbe:
    """Compose the exact propagators e^{itH} e^{-it Delta^2} at the given times."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("probe times must be strictly increasing")
    m0 = mass(test_state)
    series = []
    for t in times:
        free_back = apply_function(op_free, "exp_it", -t, test_state)
        if boundary_mass(free_back) > boundary_threshold * m0:
            raise WindowError(f"free evolution leaves the clean window at t = {t:.4g}")
        series.append(apply_function(op_full, "exp_it", t, free_back))
    gaps = np.array([h2_norm(b - a) for a, b in zip(series, series[1:])])
    tail = gaps[-3:] if gaps.size >= 3 else gaps
    convergent = bool(np.all(np.diff(tail) < 0)) if tail.size >= 2 else False
    return WaveOperatorProbe(test_state, times, series, gaps, convergent)


def free_frame_transfer(
    op_full: SpectralOperator, op_free: SpectralOperator, u: RadialField, t: float
) -> RadialField:
    """e^{-it Delta^2} e^{itH} u: moves a perturbed-frame state to the free frame."""
    return apply_function(op_free, "exp_it", -t, apply_function(op_full, "exp_it", t, u))


@dataclass
class ScatteringReport:
    cauchy_series: list[tuple[tuple[float, float], float]]
    u_plus: RadialField
    mass_identity_gap: float
    energy_identity_gap: float | None
    free_comparison_series: list[tuple[float, float]]
    u_plus_star: RadialField | None
    z_tail: float
    trigger_time: float | None          # first time the critical norm fell below 10%
    status: str                         # scattered | not yet scattered


def extract_scattering_state(
    record_or_sample,
    op_full: SpectralOperator,
    op_free: SpectralOperator,
    cfg: SimulationConfig,
) -> ScatteringReport:
    """Read v(t) = e^{-itH} u(t) off trajectory snapshots and test the identities."""
    if isinstance(record_or_sample, SpaceTimeSample):
        sample = record_or_sample
    else:
        sample = sample_from_trajectory(record_or_sample)
    if sample.times.size < 4:
        raise ValueError("need at least 4 snapshots to extract a scattering state")
    times = sample.times
    v_fields = [
        apply_function(op_full, "exp_it", -t, u) for t, u in zip(times, sample.fields)
    ]
    cauchy = [
        ((times[k], times[k + 1]), h2_norm(v_fields[k + 1] - v_fields[k]))
        for k in range(len(v_fields) - 1)
    ]
    gaps = np.array([g for _, g in cauchy])
    u_plus = v_fields[-1]

    u0 = sample.fields[0]
    m0 = mass(u0)
    mass_gap = abs(m0 - mass(u_plus)) / m0

    # tail of the critical space-time norm over the last quarter of the window
    tail_start = times[0] + 0.75 * (times[-1] - times[0])
    tail_sample = sample.restricted(tail_start, times[-1])
    if tail_sample.times.size >= 4:
        z_tail = spacetime_norm(tail_sample, "Z")
    else:
        z_tail = spacetime_norm(sample.decimated(max(1, len(v_fields) // 8)), "Z")

    two_sharp = critical_exponent(op_full.grid.dimension) + 1.0
    crit_norms = np.array([lp_norm(u, two_sharp) for u in sample.fields])
    triggered = np.nonzero(crit_norms <= LEBESGUE_TRIGGER * crit_norms[0])[0]
    trigger_time = float(times[triggered[0]]) if triggered.size else None

    energy_gap = None
    u_plus_star = None
    free_series: list[tuple[float, float]] = []
    if trigger_time is not None:
        u_plus_star = free_frame_transfer(op_full, op_free, u_plus, float(times[-1]))
        e0 = energy(u0, op_full.potential_values, cfg.lam, cfg.p)
        energy_gap = abs(2.0 * e0 - hdot2_norm(u_plus_star) ** 2) / abs(2.0 * e0)
        free_series = [
            (float(t), h2_norm(u - apply_function(op_free, "exp_it", t, u_plus_star)))
            for t, u in zip(times, sample.fields)
        ]

    decreasing = has_decreasing_triplet(gaps)
    settled = gaps.size >= 3 and bool(np.max(gaps[-3:]) <= 1e-9 * max(h2_norm(u0), 1.0))
    scattered = (decreasing or settled) and z_tail < Z_TAIL_THRESHOLD
    return ScatteringReport(
        cauchy_series=cauchy,
        u_plus=u_plus,
        mass_identity_gap=mass_gap,
        energy_identity_gap=energy_gap,
        free_comparison_series=free_series,
        u_plus_star=u_plus_star,
        z_tail=z_tail,
        trigger_time=trigger_time,
        status="scattered" if scattered else "not yet scattered",
    )


@dataclass
class FinalStateSolution:
    field: RadialField          # u at t_start
    iterations: int
    converged: bool
    contraction_factor: float
    w_tail_norm: float | None   # ||e^{itH} u+||_{W([t_start, t_max])} when measurable
    diffs: list = field(default_factory=list)


def solve_final_state(
    u_plus: RadialField,
    op_full: SpectralOperator,
    cfg: SimulationConfig,
    t_start: float,
    t_max: float,
    op_free: SpectralOperator | None = None,
    num_w_samples: int = 17,
) -> FinalStateSolution:
    """Backward fixed point from the scattering datum down to t_start."""
    if not 0 <= t_start < t_max:
        raise ValueError("need 0 <= t_start < t_max")
    w_tail = None
    if op_free is not None:
        ts = np.linspace(t_start, t_max, num_w_samples)
        linear = SpaceTimeSample(
            ts,
            [apply_function(op_full, "exp_it", t, u_plus) for t in ts],
            (t_start, t_max),
        )
        w_tail = spacetime_norm(linear, "W", op_free)

    panels = GaussPanels(t_start, t_max, max(1, int(round((t_max - t_start) / cfg.dt))))
    mu = op_full.eigenvalues
    c_plus = op_full.to_modal(u_plus.values)
    start_phase = np.exp(1j * mu * t_start)

    def combine(node_phases, g_cum, g_total):
        new_coeffs = node_phases * (c_plus - 1j * cfg.lam * (g_total[None, None] - g_cum))
        return new_coeffs, start_phase * (c_plus - 1j * cfg.lam * g_total)

    initial = np.exp(1j * mu[None, None, :] * panels.nodes[:, :, None]) * c_plus
    start_modal, solution = _picard_iterate(op_full, cfg, panels, combine, initial)
    return FinalStateSolution(
        field=RadialField(u_plus.grid, op_full.from_modal(start_modal)),
        iterations=solution.iterations,
        converged=solution.converged,
        contraction_factor=solution.contraction_factor,
        w_tail_norm=w_tail,
        diffs=solution.diffs,
    )


def forward_picard_on_window(
    u_start: RadialField,
    op_full: SpectralOperator,
    cfg: SimulationConfig,
    t_start: float,
    t_max: float,
) -> RadialField:
    """Forward fixed point on [t_start, t_max] with the same panel layout.

    Used by the round-trip test: identical collocation makes the forward
    solve the exact inverse of the backward one up to fixed-point tolerance.
    """
    panels = GaussPanels(t_start, t_max, max(1, int(round((t_max - t_start) / cfg.dt))))
    mu = op_full.eigenvalues
    c_start = op_full.to_modal(u_start.values) * np.exp(-1j * mu * t_start)
    end_phase = np.exp(1j * mu * t_max)

    def combine(node_phases, g_cum, g_total):
        new_coeffs = node_phases * (c_start + 1j * cfg.lam * g_cum)
        return new_coeffs, end_phase * (c_start + 1j * cfg.lam * g_total)

    initial = np.exp(1j * mu[None, None, :] * panels.nodes[:, :, None]) * c_start
    end_modal, _ = _picard_iterate(op_full, cfg, panels, combine, initial)
    return RadialField(u_start.grid, op_full.from_modal(end_modal))
