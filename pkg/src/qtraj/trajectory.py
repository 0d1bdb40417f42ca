"""Stochastic integration of the linear diffusive measurement equations.

Trajectories are integrated under the reference Wiener measure Q with the
Euler-Maruyama scheme (left-point Ito discretization throughout).  Two
equations are implemented:

* the linear state-vector equation, driven by all channels' noises, whose
  squared norm is a Q-martingale;
* the linear state-matrix equation, driven by the observed channel's noise
  only, whose trace is the probability density of the physical output law
  with respect to Q.

Physical-measure statistics are obtained by weighting with that density
(never by integrating a nonlinear equation); for long horizons the ensemble
runner optionally performs systematic resampling inside independent
sub-ensembles to keep the effective sample size healthy, which is the
weighted-ensemble form of the same change of measure.

Every trajectory is a pure function of (master seed, stream id, grid,
model): noise comes from the counter-based generator in ``rng``, so results
do not depend on batching or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import rng
from .lindblad import _LiouvillianEvaluator, cf4_step_matrices, propagate
from .model import ModelSpec
from .numerics import dagger, left_mult, right_mult, unvec, vec

__all__ = [
    "DegenerateWeightError",
    "TimeGrid",
    "WienerPath",
    "Trajectory",
    "Ensemble",
    "sample_wiener",
    "integrate_linear_sse",
    "integrate_linear_sme",
    "posterior_states",
    "innovation_process",
    "mean_quadrature",
    "output_autocorrelation",
    "characteristic_functional",
    "run_sme_ensemble",
    "run_sse_ensemble",
]

_CLIP_THRESHOLD = -1e-12


class DegenerateWeightError(RuntimeError):
    """Raised when a trajectory weight collapses to zero or below.

    Signals an integrator step-size failure: the linear-equation density
    must stay positive along any path.
    """


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with n_steps steps."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        if self.n_steps < 1 or self.n_steps >= 2**31:
            raise ValueError("n_steps must be in [1, 2^31)")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def times(self) -> np.ndarray:
        """Grid points t_0 = 0 ... t_n = horizon, length n_steps + 1."""
        return np.arange(self.n_steps + 1) * self.dt

    def index_of(self, t: float) -> int:
        """Index of a grid point, validated to lie on the grid."""
        j = int(round(t / self.dt))
        if not (0 <= j <= self.n_steps) or abs(j * self.dt - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"time {t} is not a grid point")
        return j


@dataclass(frozen=True)
class WienerPath:
    """Increments of d independent Wiener processes on a grid."""

    grid: TimeGrid
    increments: np.ndarray  # (n_steps, d), Normal(0, dt) under Q
    seed: int = 0
    stream_id: int = 0

    @property
    def n_channels(self) -> int:
        return self.increments.shape[1]


@dataclass
class Trajectory:
    """One integrated path: states, weight, and cumulated output.

    ``states`` has shape (n_steps+1, dim) for state-vector paths and
    (n_steps+1, dim, dim) for state-matrix paths.  ``weight_path`` holds
    the squared norm (vector case) or the trace (matrix case), and
    ``output_path`` the cumulated observed-channel Wiener record W1(t_j).
    """

    grid: TimeGrid
    kind: str
    states: np.ndarray
    weight_path: np.ndarray
    output_path: np.ndarray
    increments: np.ndarray | None = None
    seed: int = 0
    stream_id: int = 0


@dataclass
class Ensemble:
    """Per-trajectory summaries of an ensemble run (stream order).

    Full per-step paths are only materialized when ``trajectories`` is set;
    large ensembles carry reductions (final weights, Fourier sums of the
    output increments, checkpoint snapshots, innovation accumulators).
    """

    grid: TimeGrid
    master_seed: int
    n_traj: int
    kind: str
    final_weights: np.ndarray
    mu_grid: np.ndarray | None = None
    fourier: np.ndarray | None = None          # (N, n_mu) sum_j e^{i mu t_j} dW1_j
    group_ids: np.ndarray | None = None        # (N,) sub-ensemble labels
    resampled: bool = False
    checkpoint_times: tuple = ()
    checkpoint_weights: np.ndarray | None = None   # (N, n_chk)
    checkpoint_states: np.ndarray | None = None    # (N, n_chk, d, d)
    innovation_sq: np.ndarray | None = None    # (N,) sum_j dWhat_j^2
    innovation_lag: np.ndarray | None = None   # (N,) sum_j dWhat_j dWhat_{j+1}
    n_innovation_terms: int = 0
    trajectories: list | None = None


class CharFuncEstimate(NamedTuple):
    value: complex
    se_real: float
    se_imag: float


class AutocorrelationValue(NamedTuple):
    delta_coefficient: float
    regular: float


def sample_wiener(grid: TimeGrid, n_channels: int, seed: int,
                  stream_id: int) -> WienerPath:
    """Deterministic Wiener increments for one stream.

    Increments are i.i.d. Normal(0, dt) under the reference measure and a
    pure function of (seed, stream_id, step, channel).
    """
    inc = rng.wiener_increments(seed, stream_id, grid.n_steps, n_channels, grid.dt)
    return WienerPath(grid=grid, increments=inc, seed=seed, stream_id=stream_id)


# ---------------------------------------------------------------------------
# precomputed step coefficients


class _StepCoefficients:
    """Per-grid-point scalars shared by the integrators.

    alpha_j = exp(i theta) * conj(h(t_j)) multiplies the observed operator
    in every output-related expression; f_obs_j is the observed channel's
    wave at the left grid points.
    """

    def __init__(self, m: ModelSpec, grid: TimeGrid):
        t = grid.times()[:-1]
        self.alpha = np.exp(1j * m.theta) * np.conj(m.local_oscillator(t))
        self.f_obs = m.observed.wave(t)
        self.waves = [ch.wave(t) for ch in m.channels]


def _validate_state(rho: np.ndarray, dim: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError("rho0 has wrong shape")
    if abs(np.trace(rho) - 1.0) > 1e-9 or np.max(np.abs(rho - dagger(rho))) > 1e-9:
        raise ValueError("rho0 is not a state (needs unit trace, Hermitian)")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-9:
        raise ValueError("rho0 is not a state (negative eigenvalue)")
    return rho


def _clip_negative_2x2(v: np.ndarray) -> None:
    """Zero out eigenvalues below the clip threshold, in place.

    ``v`` holds row-major vectorized Hermitian 2x2 matrices, shape (4, B).
    Trace is not renormalized: it carries the output-law density.
    """
    a = v[0].real
    c = v[3].real
    b = v[1]
    mid = 0.5 * (a + c)
    s = np.sqrt(0.25 * (a - c) ** 2 + np.abs(b) ** 2)
    lam_min = mid - s
    mask = lam_min < _CLIP_THRESHOLD
    if not np.any(mask):
        return
    lam_min = lam_min[mask]
    lam_max = (mid + s)[mask]
    denom = lam_min - lam_max
    factor = lam_min / denom  # sigma' = sigma - lam_min * (sigma - lam_max I)/denom
    for idx, diag in ((0, a), (3, c)):
        v[idx, mask] = diag[mask] - factor * (diag[mask] - lam_max)
    v[1, mask] = v[1, mask] * (1.0 - factor)
    v[2, mask] = np.conj(v[1, mask])


def _clip_negative_generic(v: np.ndarray, dim: int) -> None:
    mats = v.T.reshape(-1, dim, dim)
    eigvals, eigvecs = np.linalg.eigh(mats)
    if np.min(eigvals) >= _CLIP_THRESHOLD:
        return
    clipped = np.where(eigvals < _CLIP_THRESHOLD, 0.0, eigvals)
    fixed = np.einsum("bik,bk,bjk->bij", eigvecs, clipped, np.conj(eigvecs))
    v[:] = fixed.reshape(-1, dim * dim).T


def _symmetrize(v: np.ndarray, dim: int) -> None:
    """v <- (v + v^dagger)/2 on vectorized matrices, shape (dim^2, B)."""
    m = v.reshape(dim, dim, -1)
    sym = 0.5 * (m + np.conj(m.transpose(1, 0, 2)))
    v[:] = sym.reshape(dim * dim, -1)


# ---------------------------------------------------------------------------
# linear state-vector equation


def _build_ell(m: ModelSpec, ell: Sequence[Callable] | None):
    """Fictitious-quadrature phases: channel 1 is fixed by (theta, h)."""
    def ell1(t):
        return np.exp(-1j * m.theta) * m.local_oscillator(t)

    if ell is None:
        out = [ell1] + [(lambda t: np.ones_like(np.asarray(t, dtype=complex)))
                        for _ in range(m.n_channels - 1)]
        return out
    if len(ell) != m.n_channels:
        raise ValueError("need one unit-modulus phase function per channel")
    sample = np.linspace(0.0, 1.0, 7)
    for k, fn in enumerate(ell):
        if np.max(np.abs(np.abs(np.asarray(fn(sample), dtype=complex)) - 1.0)) > 1e-9:
            raise ValueError(f"ell[{k}] is not unit modulus")
    return list(ell)


def integrate_linear_sse(m: ModelSpec, r: np.ndarray, path: WienerPath,
                         ell: Sequence[Callable] | None = None) -> Trajectory:
    """Euler-Maruyama path of the linear state-vector equation.

    d phi = {sum_k [conj(l_k)(Rk + f_k) dW_k
             - 1/2 (Rk + f_k)^dag (Rk + f_k) dt]
             - i [H0 + (i/2) sum_k (conj(f_k) Rk - f_k Rk^dag)] dt} phi

    with l_1 = exp(-i theta) h and, by default, l_k = 1 for the unobserved
    channels.  Records the squared norm (the density of the fictitious
    complete observation) and the observed-channel record W1.

    Parameters
    ----------
    m : ModelSpec
    r : array_like
        Normalized initial state vector.
    path : WienerPath
        Must carry one noise channel per model channel.
    ell : sequence of callables, optional
        Unit-modulus phase functions, one per channel; overrides the
        default fictitious quadratures.
    """
    r = np.asarray(r, dtype=complex)
    if r.shape != (m.dim,):
        raise ValueError("initial vector has wrong shape")
    if abs(np.linalg.norm(r) - 1.0) > 1e-9:
        raise ValueError("initial vector must be normalized")
    if path.n_channels != m.n_channels:
        raise ValueError("path channel count does not match model")
    ell_fns = _build_ell(m, ell)
    grid = path.grid
    n, dt = grid.n_steps, grid.dt
    t_left = grid.times()[:-1]

    # Drift D(t) = K - sum_k f_k(t) Rk^dag - 1/2 sum_k |f_k(t)|^2; noise
    # operators N_k(t) = conj(l_k(t)) (Rk + f_k(t)).
    k_matrix = -1j * m.hamiltonian.astype(complex)
    for ch in m.channels:
        k_matrix = k_matrix - 0.5 * (dagger(ch.op) @ ch.op)
    waves = [ch.wave(t_left) for ch in m.channels]
    ells = [np.asarray(fn(t_left), dtype=complex) for fn in ell_fns]

    states = np.empty((n + 1, m.dim), dtype=complex)
    states[0] = r
    w1 = np.empty(n + 1)
    w1[0] = 0.0
    phi = r.copy()
    eye = np.eye(m.dim, dtype=complex)
    for j in range(n):
        drift = k_matrix.copy()
        for k, ch in enumerate(m.channels):
            f = waves[k][j]
            if f != 0.0:
                drift = drift - f * dagger(ch.op) - 0.5 * abs(f) ** 2 * eye
        new = phi + dt * (drift @ phi)
        for k, ch in enumerate(m.channels):
            f = waves[k][j]
            op = np.conj(ells[k][j]) * (ch.op + f * eye)
            new = new + path.increments[j, k] * (op @ phi)
        phi = new
        states[j + 1] = phi
        w1[j + 1] = w1[j] + path.increments[j, 0]
    norms = np.einsum("ji,ji->j", states, np.conj(states)).real
    return Trajectory(grid=grid, kind="sse", states=states, weight_path=norms,
                      output_path=w1, increments=path.increments,
                      seed=path.seed, stream_id=path.stream_id)


# ---------------------------------------------------------------------------
# linear state-matrix equation


class _SmeStepper:
    """Assembles the per-step update matrices of the state-matrix equation.

    The Euler step in vectorized form is
        v <- (1 + dt L(t_j)) v + dW1_j S(t_j) v,
    with S(t) = alpha(t) left(R1) + conj(alpha(t)) right(R1^dag)
    + 2 Re(alpha(t) f1(t)),  alpha(t) = e^{i theta} conj(h(t)).
    When all waves are constant on the horizon both matrices are hoisted
    out of the step loop.
    """

    def __init__(self, m: ModelSpec, grid: TimeGrid):
        self.m = m
        self.grid = grid
        self.ev = _LiouvillianEvaluator(m)
        self.coeff = _StepCoefficients(m, grid)
        r1 = m.observed.op
        self.left_r1 = left_mult(r1)
        self.right_r1d = right_mult(dagger(r1))
        self.eye = np.eye(m.dim**2, dtype=complex)
        self.static_step = self.eye + grid.dt * self.ev.static
        self.time_dependent = bool(self.ev.drives)
        self._wave_values = [w(grid.times()[:-1]) for w, _, _ in self.ev.drives]
        self.constant = (self.ev.constant_on(grid.horizon)
                         and m.local_oscillator.frequency == 0.0
                         and m.local_oscillator.window_end >= grid.horizon)
        if self.constant:
            self._a0, self._s0 = self._assemble(0)

    def _assemble(self, j: int):
        a = self.static_step
        if self.time_dependent:
            a = a.copy()
            for (wave, gp, gm), vals in zip(self.ev.drives, self._wave_values):
                f = vals[j]
                if f != 0.0:
                    a += self.grid.dt * (np.conj(f) * gp - f * gm)
        alpha = self.coeff.alpha[j]
        s = alpha * self.left_r1 + np.conj(alpha) * self.right_r1d
        scal = 2.0 * (alpha * self.coeff.f_obs[j]).real
        if scal != 0.0:
            s = s + scal * self.eye
        return a, s

    def step_matrices(self, j: int):
        if self.constant:
            return self._a0, self._s0
        return self._assemble(j)


def integrate_linear_sme(m: ModelSpec, rho0: np.ndarray,
                         path: WienerPath) -> Trajectory:
    """Euler-Maruyama path of the linear state-matrix equation.

    d sigma = L(t)[sigma] dt + {e^{i theta} conj(h(t)) (R1 + f1(t)) sigma
              + sigma e^{-i theta} h(t) (R1^dag + conj(f1(t)))} dW1,

    driven by the observed channel's noise only.  Each step the state is
    re-symmetrized and eigenvalues below -1e-12 are clipped; the trace is
    never renormalized (it is the physical-law density).
    """
    rho0 = _validate_state(rho0, m.dim)
    grid = path.grid
    n = grid.n_steps
    stepper = _SmeStepper(m, grid)
    d2 = m.dim**2
    v = vec(rho0).reshape(d2, 1).copy()
    states = np.empty((n + 1, m.dim, m.dim), dtype=complex)
    states[0] = rho0
    weights = np.empty(n + 1)
    weights[0] = 1.0
    w1 = np.zeros(n + 1)
    trace_idx = np.arange(m.dim) * (m.dim + 1)
    for j in range(n):
        a, s = stepper.step_matrices(j)
        dw = path.increments[j, 0]
        v = a @ v + dw * (s @ v)
        _symmetrize(v, m.dim)
        if m.dim == 2:
            _clip_negative_2x2(v)
        else:
            _clip_negative_generic(v, m.dim)
        states[j + 1] = unvec(v[:, 0], m.dim)
        weights[j + 1] = np.sum(v[trace_idx, 0]).real
        w1[j + 1] = w1[j] + dw
    return Trajectory(grid=grid, kind="sme", states=states, weight_path=weights,
                      output_path=w1, increments=path.increments,
                      seed=path.seed, stream_id=path.stream_id)


def posterior_states(traj: Trajectory):
    """Normalized conditional states and the density path.

    Returns (rho_path, density_path) with rho_t = sigma_t / Tr(sigma_t).
    """
    if traj.kind == "sme":
        densities = traj.weight_path
        if np.min(densities) <= 0.0:
            raise DegenerateWeightError(
                "nonpositive density along the path; decrease the step size")
        rhos = traj.states / densities[:, None, None]
        return rhos, densities.copy()
    # state-vector path: outer products of the normalized vectors
    norms2 = traj.weight_path
    if np.min(norms2) <= 0.0:
        raise DegenerateWeightError("state norm collapsed along the path")
    psi = traj.states / np.sqrt(norms2)[:, None]
    rhos = np.einsum("ji,jk->jik", psi, np.conj(psi))
    return rhos, norms2.copy()


def innovation_process(m: ModelSpec, traj: Trajectory) -> np.ndarray:
    """Output minus its predictable drift, on the trajectory's grid.

    What1(t_j) = W1(t_j) - sum_{i<j} 2 Re[e^{i theta} conj(h(t_i))
                 (Tr{R1 rho_i} + f1(t_i))] dt  (left-point rule).

    Under the physical probability this is a standard Wiener process.
    """
    rhos, _ = posterior_states(traj)
    coeff = _StepCoefficients(m, traj.grid)
    r1 = m.observed.op
    expect = np.einsum("ik,jki->j", r1, rhos[:-1])
    drift = 2.0 * (coeff.alpha * (expect + coeff.f_obs)).real
    out = np.empty_like(traj.output_path)
    out[0] = traj.output_path[0]
    out[1:] = traj.output_path[1:] - np.cumsum(drift) * traj.grid.dt
    return out


# ---------------------------------------------------------------------------
# deterministic output moments


def _observed_coupling(m: ModelSpec, t):
    """Z(t) = e^{i theta} conj(h(t)) (R1 + f1(t))."""
    alpha = np.exp(1j * m.theta) * np.conj(m.local_oscillator(t))
    return alpha * (m.observed.op + m.observed.wave(t) * np.eye(m.dim))


def mean_quadrature(m: ModelSpec, t: float, rho0: np.ndarray,
                    dt: float = 1e-3) -> float:
    """Mean of the cumulated output at time t for initial state rho0.

    Evaluates 2 Re int_0^t e^{i theta} conj(h(s)) Tr{(R1 + f1(s)) eta_s} ds
    with eta_s the reduced state, by a left-point sum on a step-dt grid
    (matching the trajectory discretization).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return 0.0
    n = max(1, int(round(t / dt)))
    grid = TimeGrid(horizon=t, n_steps=n)
    coeff = _StepCoefficients(m, grid)
    r1 = m.observed.op
    eta = vec(_validate_state(rho0, m.dim))
    total = 0.0
    for j, step in enumerate(cf4_step_matrices(m, 0.0, grid.dt, n)):
        expect = np.trace(r1 @ unvec(eta, m.dim))
        total += 2.0 * (coeff.alpha[j] * (expect + coeff.f_obs[j])).real
        eta = step @ eta
    return total * grid.dt


def output_autocorrelation(m: ModelSpec, t: float, s: float,
                           rho0: np.ndarray) -> AutocorrelationValue:
    """Second moment of the output current at a pair of times.

    The moment is delta(t-s) plus a regular part
    2 Re Tr{Z(t2) Y(t2,t1)[Z(t1) eta_{t1} + eta_{t1} Z(t1)^dag]} with
    t2 = max(t, s), t1 = min(t, s); the delta term is reported symbolically
    through its coefficient (1 exactly at t = s, else 0).
    """
    if t < 0 or s < 0:
        raise ValueError("times must be nonnegative")
    t1, t2 = (t, s) if t <= s else (s, t)
    eta1 = propagate(m, 0.0, t1, _validate_state(rho0, m.dim))
    z1 = _observed_coupling(m, t1)
    seed_matrix = z1 @ eta1 + eta1 @ dagger(z1)
    moved = propagate(m, t1, t2, seed_matrix)
    z2 = _observed_coupling(m, t2)
    regular = 2.0 * np.trace(z2 @ moved).real
    return AutocorrelationValue(1.0 if t == s else 0.0, float(regular))


def characteristic_functional(ens: Ensemble, k) -> CharFuncEstimate:
    """Estimate E^phys[exp(i int k dW1)] over a stored ensemble.

    ``k`` is piecewise constant on the grid: an array of n_steps values or
    a callable evaluated at the left grid points.  The estimator is the
    Q-mean of Tr(sigma_T) * exp(i sum_j k_j dW1_j); standard errors of the
    real and imaginary parts are attached.
    """
    if ens.trajectories is None or len(ens.trajectories) == 0:
        raise ValueError("ensemble does not carry stored trajectories")
    n = ens.grid.n_steps
    if callable(k):
        kvals = np.asarray(k(ens.grid.times()[:-1]), dtype=float)
    else:
        kvals = np.asarray(k, dtype=float)
    if kvals.shape != (n,):
        raise ValueError("k must supply one value per step")
    samples = np.empty(len(ens.trajectories), dtype=complex)
    for i, traj in enumerate(ens.trajectories):
        phase = np.dot(kvals, np.diff(traj.output_path))
        samples[i] = traj.weight_path[-1] * np.exp(1j * phase)
    n_tr = samples.size
    value = np.mean(samples)
    se_re = np.std(samples.real, ddof=1) / math.sqrt(n_tr)
    se_im = np.std(samples.imag, ddof=1) / math.sqrt(n_tr)
    return CharFuncEstimate(complex(value), float(se_re), float(se_im))


# ---------------------------------------------------------------------------
# ensemble runner


def _systematic_resample(weights: np.ndarray, u: float) -> np.ndarray:
    """Ancestor indices of a systematic resampling with offset u in (0,1)."""
    n = weights.size
    cum = np.cumsum(weights / np.sum(weights))
    cum[-1] = 1.0
    positions = (u + np.arange(n)) / n
    return np.searchsorted(cum, positions)


_NOISE_CHUNK = 512
_NOISE_BUDGET = 4_000_000   # max prefetched doubles per noise buffer
_BLOCK_TARGET = 4096


def _noise_chunk(b: int, n_channels: int) -> int:
    return max(1, min(_NOISE_CHUNK, _NOISE_BUDGET // max(1, b * n_channels)))


def _run_sme_block(m: ModelSpec, grid: TimeGrid, rho0: np.ndarray, seed: int,
                   streams: np.ndarray, group_bounds, *, mu_grid, chk_indices,
                   collect_states: bool, innovation: bool,
                   resample_stride: int | None, ess_fraction: float):
    """Integrate one block of trajectories; returns per-trajectory summaries.

    ``group_bounds`` lists the local boundaries of the independent
    sub-ensembles contained in this block; resampling never crosses them,
    and its offsets are keyed by each group's first global stream id, so
    results do not depend on how groups are packed into blocks.
    """
    b = streams.size
    n, dt = grid.n_steps, grid.dt
    d = m.dim
    d2 = d * d
    stepper = _SmeStepper(m, grid)
    sqrt_dt = math.sqrt(dt)

    v = np.tile(vec(rho0).reshape(d2, 1), (1, b))
    trace_idx = np.arange(d) * (d + 1)
    r1_row = vec(m.observed.op.T)

    resampled = False
    n_mu = 0 if mu_grid is None else len(mu_grid)
    if n_mu:
        fourier = np.zeros((n_mu, b), dtype=complex)
        phase = np.ones(n_mu, dtype=complex)
        rot = np.exp(1j * np.asarray(mu_grid) * dt)
    chk_weights = np.empty((b, len(chk_indices))) if chk_indices else None
    chk_states = (np.empty((b, len(chk_indices), d, d), dtype=complex)
                  if (chk_indices and collect_states) else None)
    if innovation:
        isq = np.zeros(b)
        ilag = np.zeros(b)
        prev = np.zeros(b)
    chk_pos = {j: i for i, j in enumerate(chk_indices)}
    groups = list(zip(group_bounds[:-1], group_bounds[1:]))

    chunk = _noise_chunk(b, 1)
    noise = None
    for j in range(n):
        if j % chunk == 0:
            hi = min(j + chunk, n)
            noise = rng.normals(seed, streams, np.arange(j, hi), 1)[:, :, 0]
        dw = noise[:, j % chunk] * sqrt_dt
        a, s = stepper.step_matrices(j)
        if n_mu:
            fourier += phase[:, None] * dw[None, :]
            phase = phase * rot
        if innovation:
            trace = np.sum(v[trace_idx], axis=0).real
            expect = (r1_row @ v) / trace
            drift = 2.0 * (stepper.coeff.alpha[j]
                           * (expect + stepper.coeff.f_obs[j])).real
            dhw = dw - drift * dt
            isq += dhw * dhw
            if j > 0:
                ilag += prev * dhw
            prev = dhw
        v = a @ v + dw[None, :] * (s @ v)
        _symmetrize(v, d)
        if d == 2:
            _clip_negative_2x2(v)
        else:
            _clip_negative_generic(v, d)
        if (j + 1) in chk_pos:
            i = chk_pos[j + 1]
            chk_weights[:, i] = np.sum(v[trace_idx], axis=0).real
            if chk_states is not None:
                chk_states[:, i] = v.T.reshape(b, d, d)
        if resample_stride and (j + 1) % resample_stride == 0 and (j + 1) < n:
            w = np.sum(v[trace_idx], axis=0).real
            for lo, hi_g in groups:
                wg = w[lo:hi_g]
                ng = hi_g - lo
                ess = np.sum(wg) ** 2 / np.sum(wg * wg)
                if ess >= ess_fraction * ng:
                    continue
                u = rng.uniform(seed, int(streams[lo]), j, rng.DOMAIN_RESAMPLE)
                anc = lo + _systematic_resample(wg, u)
                mean_w = np.mean(wg)
                v[:, lo:hi_g] = v[:, anc] * (mean_w / w[anc])[None, :]
                if n_mu:
                    fourier[:, lo:hi_g] = fourier[:, anc]
                resampled = True
    final_weights = np.sum(v[trace_idx], axis=0).real
    out = {"final_weights": final_weights, "resampled": resampled}
    if n_mu:
        out["fourier"] = fourier.T.copy()
    if chk_weights is not None:
        out["chk_weights"] = chk_weights
    if chk_states is not None:
        out["chk_states"] = chk_states
    if innovation:
        out["innovation_sq"] = isq
        out["innovation_lag"] = ilag
    return out


def run_sme_ensemble(m: ModelSpec, grid: TimeGrid, rho0: np.ndarray,
                     n_traj: int, master_seed: int, *,
                     mu_grid=None, checkpoint_times=(), collect_states=False,
                     innovation=False, keep_paths=False, n_groups: int = 1,
                     resample_interval: float | None = None,
                     ess_fraction: float = 0.5, threads: int = 1) -> Ensemble:
    """Run n_traj independent state-matrix trajectories and reduce them.

    Work is split into blocks with boundaries fixed by (n_traj, n_groups)
    alone, and per-trajectory summaries are written back in stream order, so
    the result is independent of the worker count.  When
    ``resample_interval`` is set, systematic resampling against the running
    density is applied inside each of the ``n_groups`` independent
    sub-ensembles whenever the effective sample size drops below
    ``ess_fraction`` of the group size; statistical errors should then be
    estimated from the spread across groups.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    rho0 = _validate_state(rho0, m.dim)
    if keep_paths:
        if resample_interval is not None:
            raise ValueError("cannot keep full paths of a resampled ensemble")
        trajectories = [
            integrate_linear_sme(m, rho0, sample_wiener(grid, 1, master_seed, i))
            for i in range(n_traj)
        ]
        ens = _reduce_trajectories(m, grid, master_seed, trajectories, mu_grid,
                                   checkpoint_times, collect_states, innovation)
        return ens
    if innovation and resample_interval is not None:
        raise ValueError("innovation statistics require an unresampled ensemble")
    chk_indices = tuple(grid.index_of(t) for t in checkpoint_times)
    resample_stride = None
    if resample_interval is not None:
        resample_stride = max(1, int(round(resample_interval / grid.dt)))

    # Pack whole groups into blocks of ~_BLOCK_TARGET trajectories.  The
    # block structure depends only on (n_traj, n_groups), never on the
    # worker count, so outputs are scheduling independent.
    n_groups = max(1, min(n_groups, n_traj))
    bounds = np.linspace(0, n_traj, n_groups + 1).astype(int)
    group_edges = [(bounds[g], bounds[g + 1]) for g in range(n_groups)
                   if bounds[g + 1] > bounds[g]]
    blocks = []
    cur = [group_edges[0]]
    for ge in group_edges[1:]:
        if ge[1] - cur[0][0] > _BLOCK_TARGET:
            blocks.append(cur)
            cur = [ge]
        else:
            cur.append(ge)
    blocks.append(cur)

    ens = Ensemble(grid=grid, master_seed=master_seed, n_traj=n_traj, kind="sme",
                   final_weights=np.empty(n_traj),
                   mu_grid=None if mu_grid is None else np.asarray(mu_grid, dtype=float),
                   checkpoint_times=tuple(checkpoint_times))
    if mu_grid is not None:
        ens.fourier = np.empty((n_traj, len(mu_grid)), dtype=complex)
    if chk_indices:
        ens.checkpoint_weights = np.empty((n_traj, len(chk_indices)))
        if collect_states:
            ens.checkpoint_states = np.empty((n_traj, len(chk_indices), m.dim, m.dim),
                                             dtype=complex)
    if innovation:
        ens.innovation_sq = np.empty(n_traj)
        ens.innovation_lag = np.empty(n_traj)
        ens.n_innovation_terms = grid.n_steps
    ens.group_ids = np.empty(n_traj, dtype=int)
    for g, (lo, hi) in enumerate(group_edges):
        ens.group_ids[lo:hi] = g

    def work(block):
        lo, hi = block[0][0], block[-1][1]
        streams = np.arange(lo, hi, dtype=np.uint64)
        group_bounds = [ge[0] - lo for ge in block] + [hi - lo]
        return lo, hi, _run_sme_block(
            m, grid, rho0, master_seed, streams, group_bounds, mu_grid=mu_grid,
            chk_indices=chk_indices, collect_states=collect_states,
            innovation=innovation, resample_stride=resample_stride,
            ess_fraction=ess_fraction)

    if threads > 1 and len(blocks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    for lo, hi, res in results:
        ens.final_weights[lo:hi] = res["final_weights"]
        ens.resampled = ens.resampled or res["resampled"]
        if mu_grid is not None:
            ens.fourier[lo:hi] = res["fourier"]
        if chk_indices:
            ens.checkpoint_weights[lo:hi] = res["chk_weights"]
            if collect_states:
                ens.checkpoint_states[lo:hi] = res["chk_states"]
        if innovation:
            ens.innovation_sq[lo:hi] = res["innovation_sq"]
            ens.innovation_lag[lo:hi] = res["innovation_lag"]
    return ens


def _reduce_trajectories(m, grid, master_seed, trajectories, mu_grid,
                         checkpoint_times, collect_states, innovation) -> Ensemble:
    """Build the summary view of a list of fully stored trajectories."""
    n_traj = len(trajectories)
    ens = Ensemble(grid=grid, master_seed=master_seed, n_traj=n_traj, kind="sme",
                   final_weights=np.array([t.weight_path[-1] for t in trajectories]),
                   checkpoint_times=tuple(checkpoint_times),
                   trajectories=trajectories)
    ens.group_ids = np.zeros(n_traj, dtype=int)
    if mu_grid is not None:
        mu = np.asarray(mu_grid, dtype=float)
        t_left = grid.times()[:-1]
        phases = np.exp(1j * np.outer(mu, t_left))
        ens.mu_grid = mu
        ens.fourier = np.stack(
            [phases @ np.diff(t.output_path) for t in trajectories])
    if checkpoint_times:
        idx = [grid.index_of(t) for t in checkpoint_times]
        ens.checkpoint_weights = np.stack(
            [t.weight_path[idx] for t in trajectories])
        if collect_states:
            ens.checkpoint_states = np.stack(
                [t.states[idx] for t in trajectories])
    if innovation:
        sq = np.empty(n_traj)
        lag = np.empty(n_traj)
        for i, t in enumerate(trajectories):
            dhw = np.diff(innovation_process(m, t))
            sq[i] = np.sum(dhw * dhw)
            lag[i] = np.sum(dhw[:-1] * dhw[1:])
        ens.innovation_sq = sq
        ens.innovation_lag = lag
        ens.n_innovation_terms = grid.n_steps
    return ens


def run_sse_ensemble(m: ModelSpec, grid: TimeGrid, r: np.ndarray,
                     n_traj: int, master_seed: int, *,
                     checkpoint_times=(), threads: int = 1) -> Ensemble:
    """Run n_traj state-vector trajectories; collects squared-norm weights."""
    r = np.asarray(r, dtype=complex)
    if abs(np.linalg.norm(r) - 1.0) > 1e-9:
        raise ValueError("initial vector must be normalized")
    chk_indices = tuple(grid.index_of(t) for t in checkpoint_times)
    n, dt = grid.n_steps, grid.dt
    d = m.dim
    n_ch = m.n_channels
    t_left = grid.times()[:-1]
    sqrt_dt = math.sqrt(dt)

    k_matrix = -1j * m.hamiltonian.astype(complex)
    for ch in m.channels:
        k_matrix = k_matrix - 0.5 * (dagger(ch.op) @ ch.op)
    waves = np.stack([ch.wave(t_left) for ch in m.channels])
    ell1 = np.exp(-1j * m.theta) * m.local_oscillator(t_left)
    ells = np.ones((n_ch, n), dtype=complex)
    ells[0] = ell1
    eye = np.eye(d, dtype=complex)

    def work(block):
        lo, hi = block
        streams = np.arange(lo, hi, dtype=np.uint64)
        b = streams.size
        phi = np.tile(r.reshape(d, 1), (1, b))
        chk = np.empty((b, len(chk_indices))) if chk_indices else None
        chk_pos = {j: i for i, j in enumerate(chk_indices)}
        noise = None
        chunk = _noise_chunk(b, n_ch)
        for j in range(n):
            if j % chunk == 0:
                top = min(j + chunk, n)
                noise = rng.normals(master_seed, streams, np.arange(j, top), n_ch)
            z = noise[:, j % chunk, :]
            drift = k_matrix.copy()
            for k, ch in enumerate(m.channels):
                f = waves[k, j]
                if f != 0.0:
                    drift = drift - f * dagger(ch.op) - 0.5 * abs(f) ** 2 * eye
            new = phi + dt * (drift @ phi)
            for k, ch in enumerate(m.channels):
                op = np.conj(ells[k, j]) * (ch.op + waves[k, j] * eye)
                new = new + (z[:, k] * sqrt_dt)[None, :] * (op @ phi)
            phi = new
            if (j + 1) in chk_pos:
                chk[:, chk_pos[j + 1]] = np.sum(np.abs(phi) ** 2, axis=0)
        final = np.sum(np.abs(phi) ** 2, axis=0)
        return lo, hi, final, chk

    block_size = 8192
    blocks = [(lo, min(lo + block_size, n_traj))
              for lo in range(0, n_traj, block_size)]
    if threads > 1 and len(blocks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    ens = Ensemble(grid=grid, master_seed=master_seed, n_traj=n_traj, kind="sse",
                   final_weights=np.empty(n_traj),
                   checkpoint_times=tuple(checkpoint_times))
    if chk_indices:
        ens.checkpoint_weights = np.empty((n_traj, len(chk_indices)))
    for lo, hi, final, chk in results:
        ens.final_weights[lo:hi] = final
        if chk_indices:
            ens.checkpoint_weights[lo:hi] = chk
    return ens
