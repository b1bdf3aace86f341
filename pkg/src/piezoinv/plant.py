"""Fixed-step simulator of a friction-dominated linear positioning stage.

The stage model is a second-order system driven by voltage with
direction-dependent viscous friction acting on a delayed velocity,
direction-dependent Coulomb friction, and stiction at rest:

    dv/dt = -a1(sgn v_d) * v_d - a2(sgn v) * sgn(v) + a3 * u,   v_d = v(t - tau)

Integration is explicit Euler with a velocity zero-crossing clamp: the
sign discontinuity of the Coulomb term defeats high-order schemes, so a
small fixed step is used instead.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

__all__ = [
    "FrictionParams",
    "PlantConfig",
    "PlantState",
    "Trajectory",
    "Pulse",
    "Sinusoid",
    "FourierSum",
    "SignalSpec",
    "NOMINAL_PARAMS",
    "initial_state",
    "step",
    "simulate",
    "steady_state_velocity",
]


@dataclass(frozen=True)
class FrictionParams:
    """Direction-dependent stage coefficients.

    a1p/a1n are viscous coefficients (1/s) for positive/negative delayed
    velocity, a2p/a2n the Coulomb decelerations (m/s^2) for positive/negative
    motion, a3 the voltage gain (m/(s^2 V)) and tau the viscous delay (s).
    Mass and raw force constants are absorbed; they never appear separately.
    """

    a1p: float
    a1n: float
    a2p: float
    a2n: float
    a3: float = 6.0
    tau: float = 0.0035

    def __post_init__(self):
        for name in ("a1p", "a1n", "a2p", "a2n", "a3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"FrictionParams.{name} must be finite and > 0, got {value}")
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise ValueError(f"FrictionParams.tau must be finite and >= 0, got {self.tau}")

    def viscous(self, direction: float) -> float:
        """Viscous coefficient for the sign of the delayed velocity."""
        return self.a1p if direction > 0 else self.a1n

    def coulomb(self, direction: float) -> float:
        """Coulomb deceleration for the sign of the (incipient) motion."""
        return self.a2p if direction > 0 else self.a2n

    def breakaway(self, u: float) -> float:
        """Drive magnitude (in m/s^2) needed to start motion under voltage u.

        The Coulomb coefficient of the direction the net drive would
        initiate is used; at u = 0 the smaller side is returned, which is
        conservative and irrelevant since there is no drive.
        """
        if u > 0:
            return self.a2p
        if u < 0:
            return self.a2n
        return min(self.a2p, self.a2n)

    def scaled_friction(self, factor: float) -> "FrictionParams":
        """Copy with all friction coefficients (a1*, a2*) multiplied by factor."""
        return replace(
            self,
            a1p=self.a1p * factor,
            a1n=self.a1n * factor,
            a2p=self.a2p * factor,
            a2n=self.a2n * factor,
        )


#: Coefficients identified for the stage from the voltage-pulse experiments.
NOMINAL_PARAMS = FrictionParams(
    a1p=104.0154, a1n=117.1441, a2p=3.1023, a2n=6.8216, a3=6.0, tau=0.0035
)


@dataclass(frozen=True)
class PlantConfig:
    """Simulation setup: stage coefficients, step size, initial condition.

    drive_saturation, when set, replaces the linear drive a3*u with the
    smoothly saturating a3 * s * tanh(u / s); it models actuator gain
    roll-off and is used by the model-mismatch tracking benchmark.
    """

    params: FrictionParams
    dt: float = 0.0005
    stiction_velocity_eps: float = 1e-6
    x0: float = 0.0
    v0: float = 0.0
    drive_saturation: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be finite and > 0, got {self.dt}")
        if not (math.isfinite(self.stiction_velocity_eps) and self.stiction_velocity_eps > 0):
            raise ValueError("stiction_velocity_eps must be finite and > 0")
        if not (math.isfinite(self.x0) and math.isfinite(self.v0)):
            raise ValueError("initial state must be finite")
        if self.drive_saturation is not None and not self.drive_saturation > 0:
            raise ValueError("drive_saturation must be > 0 when set")


@dataclass(frozen=True)
class DelayLine:
    """Immutable tap of recent velocity samples with linear interpolation.

    samples[-1] is the current velocity, samples[-1-k] the velocity k steps
    ago. The delayed value for a non-integer lag tau/dt is interpolated
    between the two bracketing samples.
    """

    samples: tuple
    lag: int
    frac: float

    @classmethod
    def filled(cls, tau: float, dt: float, value: float) -> "DelayLine":
        """Constant pre-history: every past sample equals the initial value."""
        ratio = tau / dt
        lag = int(math.floor(ratio + 1e-12))
        frac = ratio - lag
        if frac < 1e-12:
            frac = 0.0
        return cls(samples=(value,) * (lag + 2), lag=lag, frac=frac)

    def delayed(self) -> float:
        """Velocity tau seconds before the current sample."""
        newest = self.samples[-1 - self.lag]
        if self.frac == 0.0:
            return newest
        older = self.samples[-2 - self.lag]
        return (1.0 - self.frac) * newest + self.frac * older

    def push(self, value: float) -> "DelayLine":
        return DelayLine(self.samples[1:] + (value,), self.lag, self.frac)


@dataclass(frozen=True)
class PlantState:
    """Instantaneous stage state: position, velocity, delayed-velocity history."""

    x: float
    v: float
    history: DelayLine


def initial_state(cfg: PlantConfig) -> PlantState:
    return PlantState(
        x=cfg.x0,
        v=cfg.v0,
        history=DelayLine.filled(cfg.params.tau, cfg.dt, cfg.v0),
    )


def _effective_drive(cfg: PlantConfig, u: float) -> float:
    """Drive acceleration a3*u, optionally through the smooth saturation."""
    if cfg.drive_saturation is not None:
        s = cfg.drive_saturation
        u = s * math.tanh(u / s)
    return cfg.params.a3 * u


def step(state: PlantState, u: float, cfg: PlantConfig) -> PlantState:
    """Advance the stage one step of cfg.dt under input voltage u.

    Velocity is advanced first, then position from the new velocity. The
    viscous coefficient is selected by the sign of the delayed velocity,
    the Coulomb coefficient by the sign of the current motion (or of the
    incipient motion when starting from rest). Stiction: at rest with the
    drive at or below breakaway the velocity is held at exactly zero, and
    a velocity that would cross zero under sub-breakaway drive is clamped
    to zero within the step.
    """
    if not math.isfinite(u):
        raise ValueError(f"non-finite input voltage: {u}")
    if not (math.isfinite(state.x) and math.isfinite(state.v)):
        raise ValueError(f"non-finite plant state: x={state.x}, v={state.v}")

    p = cfg.params
    eps = cfg.stiction_velocity_eps
    v = state.v
    drive = _effective_drive(cfg, u)
    sub_breakaway = abs(drive) <= p.breakaway(u)

    if abs(v) < eps and sub_breakaway:
        v_new = 0.0
    else:
        v_delayed = state.history.delayed()
        a1 = p.viscous(v_delayed)
        motion = v if abs(v) >= eps else u  # incipient direction at rest
        sgn = math.copysign(1.0, motion) if motion != 0.0 else 0.0
        coulomb = p.coulomb(sgn) if sgn != 0.0 else 0.0
        accel = -a1 * v_delayed - coulomb * sgn + drive
        v_new = v + cfg.dt * accel
        if sub_breakaway and (v * v_new < 0.0 or abs(v_new) < eps):
            v_new = 0.0

    x_new = state.x + cfg.dt * v_new
    return PlantState(x=x_new, v=v_new, history=state.history.push(v_new))


# ---------------------------------------------------------------------------
# Excitation signals


@dataclass(frozen=True)
class Pulse:
    """Constant voltage held for a fixed duration, zero afterwards."""

    amplitude: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be > 0")

    def value(self, t):
        return np.where(np.asarray(t) < self.duration, self.amplitude, 0.0)[()]

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))[()]

    def second_derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))[()]


@dataclass(frozen=True)
class Sinusoid:
    """amplitude * sin(omega*t + phase) + offset."""

    amplitude: float
    omega: float
    phase: float = 0.0
    offset: float = 0.0

    def value(self, t):
        return self.amplitude * np.sin(self.omega * np.asarray(t) + self.phase) + self.offset

    def derivative(self, t):
        return self.amplitude * self.omega * np.cos(self.omega * np.asarray(t) + self.phase)

    def second_derivative(self, t):
        w = self.omega
        return -self.amplitude * w * w * np.sin(w * np.asarray(t) + self.phase)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


@dataclass(frozen=True)
class FourierSum:
    """Sum of cosine terms: sum_i coef_i * cos(omega_i * t) + offset."""

    terms: tuple  # of (coef, omega) pairs
    offset: float = 0.0

    def __post_init__(self):
        if len(self.terms) < 1:
            raise ValueError("fourier-sum needs at least one term")

    def value(self, t):
        t = np.asarray(t)
        out = sum(c * np.cos(w * t) for c, w in self.terms)
        return out + self.offset

    def derivative(self, t):
        t = np.asarray(t)
        return sum(-c * w * np.sin(w * t) for c, w in self.terms)

    def second_derivative(self, t):
        t = np.asarray(t)
        return sum(-c * w * w * np.cos(w * t) for c, w in self.terms)

    @property
    def period(self) -> float:
        # longest component period; exact for harmonically related terms
        return 2.0 * math.pi / min(w for _, w in self.terms)


SignalSpec = Union[Pulse, Sinusoid, FourierSum]


# ---------------------------------------------------------------------------
# Trajectories


@dataclass
class Trajectory:
    """Uniformly sampled record of a run: voltage, position, velocity, accel.

    Time is derived from the sample index (t[i] = i * dt), never stored, so
    long records cannot accumulate floating-point drift in the time axis.
    """

    dt: float
    u: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        n = len(self.u)
        if n < 1:
            raise ValueError("trajectory must contain at least one sample")
        if not (len(self.x) == len(self.v) == len(self.a) == n):
            raise ValueError("trajectory columns must have equal length")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError("trajectory dt must be finite and > 0")

    def __len__(self) -> int:
        return len(self.u)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.u)) * self.dt

    def window(self, t_start: float, t_stop: float | None = None) -> "Trajectory":
        """Sub-trajectory covering [t_start, t_stop] (inclusive ends)."""
        i0 = max(0, int(math.ceil(t_start / self.dt - 1e-9)))
        i1 = len(self) if t_stop is None else min(len(self), int(math.floor(t_stop / self.dt + 1e-9)) + 1)
        if i1 - i0 < 1:
            raise ValueError("empty trajectory window")
        return Trajectory(self.dt, self.u[i0:i1], self.x[i0:i1], self.v[i0:i1], self.a[i0:i1])

    def to_csv(self, path) -> None:
        """Write `t,u,x,v,a` rows with 12 significant digits."""
        with open(path, "w", newline="") as fh:
            fh.write("t,u,x,v,a\n")
            for i in range(len(self)):
                fh.write(
                    f"{i * self.dt:.12g},{self.u[i]:.12g},{self.x[i]:.12g},"
                    f"{self.v[i]:.12g},{self.a[i]:.12g}\n"
                )

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["t", "u", "x", "v", "a"]:
                raise ValueError(f"unexpected trajectory header: {header}")
            rows = [[float(cell) for cell in row] for row in reader if row]
        data = np.array(rows)
        if len(data) < 2:
            raise ValueError("trajectory CSV needs at least two rows to infer dt")
        dt = data[1, 0] - data[0, 0]
        return cls(dt=dt, u=data[:, 1], x=data[:, 2], v=data[:, 3], a=data[:, 4])


def simulate(cfg: PlantConfig, signal: SignalSpec, duration: float) -> Trajectory:
    """Run the stage under the given signal for `duration` seconds.

    Samples cover t = 0 .. duration inclusive. The recorded acceleration is
    the effective per-step value (v[i+1] - v[i]) / dt, which equals the
    model right-hand side except on steps where the stiction clamp acted.
    """
    if duration < cfg.dt:
        raise ValueError(f"duration {duration} shorter than one step {cfg.dt}")
    n = int(round(duration / cfg.dt))
    state = initial_state(cfg)
    u_arr = np.empty(n + 1)
    x_arr = np.empty(n + 1)
    v_arr = np.empty(n + 1)
    for i in range(n + 1):
        u_i = float(signal.value(i * cfg.dt))
        u_arr[i] = u_i
        x_arr[i] = state.x
        v_arr[i] = state.v
        state = step(state, u_i, cfg)
    # one extra state beyond the horizon supplies the final effective accel
    v_next = state.v
    a_arr = np.empty(n + 1)
    a_arr[:-1] = np.diff(v_arr) / cfg.dt
    a_arr[-1] = (v_next - v_arr[-1]) / cfg.dt
    return Trajectory(dt=cfg.dt, u=u_arr, x=x_arr, v=v_arr, a=a_arr)


def steady_state_velocity(params: FrictionParams, u: float) -> float:
    """Terminal velocity under constant voltage; zero below breakaway.

    The delay tau does not affect the steady state, so the closed form is
    (a3*u - a2p)/a1p for positive drive and (a3*u + a2n)/a1n for negative.
    """
    drive = params.a3 * u
    if u > 0 and drive > params.a2p:
        return (drive - params.a2p) / params.a1p
    if u < 0 and -drive > params.a2n:
        return (drive + params.a2n) / params.a1n
    return 0.0
