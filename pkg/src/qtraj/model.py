"""Declarative description of the monitored open system.

A model consists of a free Hamiltonian, a list of coupling channels (each a
fixed system operator plus a coherent wave feeding that channel), a detection
phase ``theta`` and a unit-modulus local-oscillator wave.  The first channel
is the observed one: its quadrature, interfered with the local oscillator,
is the measured output.

``build_two_level_model`` instantiates the driven two-level atom used by all
closed-form spectra: a detected and an undetected radiative decay channel, an
optional thermal pair, an optional dephasing channel, and a monochromatic
laser feeding the undetected (forward) channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import as_matrix, dagger, require_hermitian

__all__ = [
    "ParameterError",
    "WaveSpec",
    "Channel",
    "ModelSpec",
    "TwoLevelParams",
    "build_two_level_model",
    "effective_drift",
    "drive_hamiltonian",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SIGMA_MINUS",
    "SIGMA_PLUS",
]

# Basis order (excited, ground): sigma_z|e> = +|e>, sigma_minus|e> = |g>.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


class ParameterError(ValueError):
    """Raised for physically inadmissible model parameters."""


@dataclass(frozen=True)
class WaveSpec:
    """A coherent wave: either identically zero or monochromatic.

    A monochromatic wave evaluates to ``amplitude * exp(-1j*frequency*t)``
    for t in [0, window_end] and to 0 outside.  The closed enumeration (no
    arbitrary callables) keeps model configurations serializable.
    """

    kind: str = "zero"
    amplitude: complex = 0.0
    frequency: float = 0.0
    window_end: float = math.inf

    def __post_init__(self):
        if self.kind not in ("zero", "monochromatic"):
            raise ParameterError(f"unknown wave kind {self.kind!r}")
        if self.window_end <= 0:
            raise ParameterError("wave window_end must be positive")
        if self.kind == "monochromatic" and not (
            np.isfinite(self.amplitude) and np.isfinite(self.frequency)
        ):
            raise ParameterError("monochromatic wave needs finite amplitude and frequency")

    @staticmethod
    def zero() -> "WaveSpec":
        return WaveSpec(kind="zero")

    @staticmethod
    def monochromatic(amplitude: complex, frequency: float,
                      window_end: float = math.inf) -> "WaveSpec":
        return WaveSpec(kind="monochromatic", amplitude=complex(amplitude),
                        frequency=float(frequency), window_end=float(window_end))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    def __call__(self, t):
        """Evaluate the wave at scalar or array times."""
        t = np.asarray(t, dtype=float)
        if self.is_zero:
            return np.zeros(t.shape, dtype=complex) if t.ndim else 0.0 + 0.0j
        inside = (t >= 0.0) & (t <= self.window_end)
        val = self.amplitude * np.exp(-1j * self.frequency * t) * inside
        return val if t.ndim else complex(val)


@dataclass(frozen=True)
class Channel:
    """One coupling channel: system operator plus the wave feeding it."""

    op: np.ndarray
    wave: WaveSpec = field(default_factory=WaveSpec.zero)


@dataclass(frozen=True)
class ModelSpec:
    """Monitored open system: Hamiltonian, channels, detection setup.

    ``channels[0]`` is the observed channel.  ``theta`` is the detection
    phase and ``local_oscillator`` the unit-modulus local-oscillator wave
    interfering with the observed channel.
    """

    dim: int
    hamiltonian: np.ndarray
    channels: tuple[Channel, ...]
    theta: float = 0.0
    local_oscillator: WaveSpec = field(
        default_factory=lambda: WaveSpec.monochromatic(1.0, 0.0))

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError("dim must be a positive integer")
        h0 = require_hermitian(self.hamiltonian, tol=1e-12, name="hamiltonian")
        if h0.shape != (self.dim, self.dim):
            raise ParameterError(
                f"hamiltonian shape {h0.shape} does not match dim {self.dim}")
        if len(self.channels) < 1:
            raise ParameterError("at least one channel is required")
        ops = []
        for k, ch in enumerate(self.channels):
            op = as_matrix(ch.op, square=True)
            if op.shape != (self.dim, self.dim):
                raise ParameterError(
                    f"channel {k + 1} operator shape {op.shape} does not match dim {self.dim}")
            ops.append(Channel(op, ch.wave))
        if not (-math.pi < self.theta <= math.pi):
            raise ParameterError("theta must lie in (-pi, pi]")
        lo = self.local_oscillator
        if lo.is_zero or abs(abs(lo.amplitude) - 1.0) > 1e-12:
            raise ParameterError("local oscillator must have unit modulus")
        object.__setattr__(self, "hamiltonian", h0)
        object.__setattr__(self, "channels", tuple(ops))

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def observed(self) -> Channel:
        return self.channels[0]


@dataclass(frozen=True)
class TwoLevelParams:
    """Physical parameters of the laser-driven two-level atom.

    gamma     natural line width (rate units)
    p         detected fraction of the fluorescence, 0 < p < 1
    nbar      thermal occupation of the bath, >= 0
    kd        dephasing strength, >= 0
    omega     Rabi frequency of the stimulating laser, >= 0
    delta_nu  detuning: resonance frequency minus laser frequency
    nu        laser carrier frequency (>= 0; figures use rate units
              where the carrier is irrelevant and 0 is allowed)
    nu_lo     local-oscillator frequency, heterodyne only
    """

    gamma: float = 1.0
    p: float = 0.8
    nbar: float = 0.0
    kd: float = 0.0
    omega: float = 0.0
    delta_nu: float = 0.0
    nu: float = 0.0
    nu_lo: float | None = None

    def __post_init__(self):
        if not (self.gamma > 0):
            raise ParameterError("gamma must be positive")
        if not (0.0 < self.p < 1.0):
            raise ParameterError("p must lie strictly between 0 and 1")
        if self.nbar < 0 or self.kd < 0 or self.omega < 0:
            raise ParameterError("nbar, kd and omega must be nonnegative")
        if self.nu < 0:
            raise ParameterError("nu must be nonnegative")

    @property
    def nu0(self) -> float:
        """Atomic resonance frequency nu + delta_nu."""
        return self.nu + self.delta_nu


def build_two_level_model(params: TwoLevelParams, detection: str = "homodyne",
                          theta: float = 0.0,
                          window_end: float = math.inf) -> ModelSpec:
    """Instantiate the monitored two-level atom.

    Channels, in order: detected decay sqrt(gamma*p)*sigma_minus (observed),
    forward decay sqrt(gamma*(1-p))*sigma_minus fed by the monochromatic
    laser wave, thermal absorption/emission pair scaled by sqrt(gamma*nbar),
    and dephasing sqrt(gamma*kd)*sigma_z.  The laser wave on the forward
    channel is (i*Omega / (2*sqrt(gamma*(1-p)))) * exp(-i*nu*t).

    In homodyne detection the local oscillator is phase locked to the laser,
    h(t) = exp(-i*nu*t), with any residual phase shift absorbed into
    ``theta``.  In heterodyne detection h(t) = exp(-i*nu_lo*t) with
    nu_lo != nu.

    Parameters
    ----------
    params : TwoLevelParams
    detection : {"homodyne", "heterodyne"}
    theta : float
        Detection phase in (-pi, pi].
    window_end : float
        End of the laser/local-oscillator window (default: open ended).
    """
    g = params.gamma
    channels = [
        Channel(math.sqrt(g * params.p) * SIGMA_MINUS),
        Channel(
            math.sqrt(g * (1.0 - params.p)) * SIGMA_MINUS,
            WaveSpec.monochromatic(
                1j * params.omega / (2.0 * math.sqrt(g * (1.0 - params.p))),
                params.nu, window_end),
        ),
        Channel(math.sqrt(g * params.nbar) * SIGMA_MINUS),
        Channel(math.sqrt(g * params.nbar) * SIGMA_PLUS),
        Channel(math.sqrt(g * params.kd) * SIGMA_Z),
    ]
    if detection == "homodyne":
        lo_freq = params.nu
    elif detection == "heterodyne":
        if params.nu_lo is None:
            raise ParameterError("heterodyne detection requires nu_lo")
        if params.nu_lo == params.nu:
            raise ParameterError("heterodyne detection requires nu_lo != nu")
        lo_freq = params.nu_lo
    else:
        raise ParameterError(f"unknown detection kind {detection!r}")
    return ModelSpec(
        dim=2,
        hamiltonian=0.5 * params.nu0 * SIGMA_Z,
        channels=tuple(channels),
        theta=theta,
        local_oscillator=WaveSpec.monochromatic(1.0, lo_freq, window_end),
    )


def effective_drift(m: ModelSpec) -> np.ndarray:
    """Non-Hermitian drift -i*H0 - (1/2) sum_k Rk^dag Rk."""
    k = -1j * m.hamiltonian.astype(complex)
    for ch in m.channels:
        k = k - 0.5 * (dagger(ch.op) @ ch.op)
    return k


def drive_hamiltonian(m: ModelSpec, t: float) -> np.ndarray:
    """Hermitian drive i*sum_k(conj(f_k(t))*Rk - f_k(t)*Rk^dag) at time t."""
    h = np.zeros((m.dim, m.dim), dtype=complex)
    for ch in m.channels:
        if ch.wave.is_zero:
            continue
        f = ch.wave(t)
        h += 1j * (np.conj(f) * ch.op - f * dagger(ch.op))
    return h
