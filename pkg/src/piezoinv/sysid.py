"""Pulse-experiment identification of the stage friction coefficients.

Constant-voltage pulses drive the stage to a steady velocity in each
direction. Each pulse yields one linear equation in the four unknown
friction coefficients (the voltage gain a3 is fixed from manufacturer
data and never estimated); the stacked system is solved by least squares.
The viscous delay is estimated separately by cross-correlating a measured
velocity record against the undelayed model response.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .plant import FrictionParams, PlantConfig, Pulse, Trajectory, simulate

__all__ = [
    "PulseMeasurement",
    "RegressionSystem",
    "IdentifiabilityError",
    "SingularRegressionError",
    "DelayEstimationError",
    "SteadyStateError",
    "build_regression",
    "solve_least_squares",
    "extract_steady_velocity",
    "simulate_pulse",
    "measure_pulses",
    "estimate_delay",
    "reference_pulse_measurements",
    "save_measurements_csv",
    "load_measurements_csv",
]

MEASUREMENT_HEADER = ["amplitude_V", "duration_s", "steady_velocity_mps"]


class IdentifiabilityError(ValueError):
    """Raised when a direction lacks enough measurements to be identified."""


class SingularRegressionError(ValueError):
    """Raised when the stacked regression is rank deficient."""


class DelayEstimationError(ValueError):
    """Raised when the delay is undefined (flat signals, no transient)."""


class SteadyStateError(ValueError):
    """Raised when a pulse window has not settled to a steady velocity."""


@dataclass(frozen=True)
class PulseMeasurement:
    """One pulse experiment: applied amplitude and observed steady velocity."""

    amplitude: float
    duration: float
    steady_velocity: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("pulse duration must be > 0")
        v, u = self.steady_velocity, self.amplitude
        if v != 0.0 and math.copysign(1.0, v) != math.copysign(1.0, u):
            raise ValueError(
                f"steady velocity {v} opposes the applied amplitude {u}"
            )


@dataclass
class RegressionSystem:
    """Stacked pulse equations X @ [a1p, a1n, a2p, a2n] = Y.

    A positive-direction pulse contributes the row [-v, 0, -1, 0] with
    Y = -a3*u; a negative-direction pulse contributes [0, |v|, 0, 1] with
    Y = a3*|u|. Rows are ordered negative-direction pulses first, each
    group by ascending |amplitude|, which is the canonical presentation.
    """

    X: np.ndarray
    Y: np.ndarray
    a3: float


def build_regression(measurements, a3: float = 6.0) -> RegressionSystem:
    """Assemble the least-squares system from pulse measurements.

    Measurements with zero steady velocity (sub-breakaway pulses) carry no
    information about the moving-friction coefficients and are skipped.
    """
    usable = [m for m in measurements if m.steady_velocity != 0.0]
    neg = sorted((m for m in usable if m.amplitude < 0), key=lambda m: abs(m.amplitude))
    pos = sorted((m for m in usable if m.amplitude > 0), key=lambda m: m.amplitude)
    if len(pos) < 2 or len(neg) < 2:
        raise IdentifiabilityError(
            f"need at least 2 moving pulses per direction, got {len(pos)} positive "
            f"and {len(neg)} negative"
        )
    rows, rhs = [], []
    for m in neg:
        rows.append([0.0, abs(m.steady_velocity), 0.0, 1.0])
        rhs.append(a3 * abs(m.amplitude))
    for m in pos:
        rows.append([-m.steady_velocity, 0.0, -1.0, 0.0])
        rhs.append(-a3 * m.amplitude)
    return RegressionSystem(X=np.array(rows), Y=np.array(rhs), a3=a3)


def solve_least_squares(system: RegressionSystem, tau: float = 0.0035) -> FrictionParams:
    """Least-squares friction coefficients from the stacked pulse system.

    Solved through an orthogonal factorization (numpy lstsq / SVD) rather
    than the explicit normal-equations inverse; agrees with the closed-form
    solution to full precision on well-conditioned inputs. a3 and tau are
    passed through, never estimated here.
    """
    X, Y = system.X, system.Y
    if np.linalg.matrix_rank(X) < 4:
        for direction, cols in (("positive", (0, 2)), ("negative", (1, 3))):
            if np.linalg.matrix_rank(X[:, cols]) < 2:
                raise SingularRegressionError(
                    f"{direction}-direction coefficients are unidentifiable "
                    "(need two pulses with distinct steady velocities)"
                )
        raise SingularRegressionError("regression matrix is rank deficient")
    solution = np.linalg.lstsq(X, Y, rcond=None)[0]
    a1p, a1n, a2p, a2n = solution
    return FrictionParams(a1p=a1p, a1n=a1n, a2p=a2p, a2n=a2n, a3=system.a3, tau=tau)


def extract_steady_velocity(
    trajectory: Trajectory, fraction: float = 0.2, drift_tol: float = 0.02
) -> float:
    """Mean velocity over the final `fraction` of a pulse window.

    Guards that the window is actually settled: the means of its two halves
    must agree within drift_tol of the window mean. A min-max range check
    would reject settled but noisy records, so drift of the mean is used as
    the steadiness criterion instead.
    """
    n = len(trajectory)
    start = int(math.floor(n * (1.0 - fraction)))
    window = trajectory.v[start:]
    if len(window) < 4:
        raise SteadyStateError("pulse window too short for steady-state extraction")
    mean = float(np.mean(window))
    half = len(window) // 2
    drift = abs(float(np.mean(window[half:])) - float(np.mean(window[:half])))
    if mean == 0.0:
        if drift > 0.0:
            raise SteadyStateError("window mean is zero but velocity still drifts")
        return 0.0
    if drift > drift_tol * abs(mean):
        raise SteadyStateError(
            f"velocity not settled: half-window drift {drift:.3e} exceeds "
            f"{drift_tol:.0%} of mean {mean:.3e}"
        )
    return mean


def simulate_pulse(cfg: PlantConfig, amplitude: float, duration: float = 0.4) -> Trajectory:
    """Stage response over exactly the pulse window [0, duration].

    The voltage is held for the whole window (the pulse's falling edge is
    outside the record), matching how steady velocities are read off.
    """
    return simulate(cfg, Pulse(amplitude=amplitude, duration=2.0 * duration), duration)


def measure_pulses(
    cfg: PlantConfig,
    amplitudes,
    duration: float = 0.4,
    noise_sigma: float = 0.0,
    seed: int = 0,
    smoothing_window: int = 5,
) -> list[PulseMeasurement]:
    """Simulate one pulse per amplitude and read off the steady velocities.

    With noise_sigma > 0 the measurement path mimics the hardware protocol:
    Gaussian noise is added to the recorded position and the velocity is
    recovered by numerical differentiation before extraction.
    """
    from .dataset import differentiate  # plumbing shared with data collection
    from .rng import SplitMix64

    rng = SplitMix64(seed)
    out = []
    for amp in amplitudes:
        traj = simulate_pulse(cfg, amp, duration)
        if noise_sigma > 0.0:
            noisy_x = traj.x + np.array([rng.normal(noise_sigma) for _ in range(len(traj))])
            v, a = differentiate(noisy_x, traj.dt, smoothing_window)
            traj = Trajectory(dt=traj.dt, u=traj.u, x=noisy_x, v=v, a=a)
        out.append(
            PulseMeasurement(
                amplitude=amp,
                duration=duration,
                steady_velocity=extract_steady_velocity(traj),
            )
        )
    return out


def estimate_delay(measured: Trajectory, modeled: Trajectory, window: float = 0.05) -> float:
    """Delay of `measured` relative to `modeled`, from velocity cross-correlation.

    Returns the lag (seconds, positive when measured lags modeled) that
    maximizes the normalized cross-correlation over integer sample lags in
    [-window, window], refined to sub-sample resolution by fitting a
    parabola through the peak and its neighbours.
    """
    if measured.dt != modeled.dt:
        raise ValueError("trajectories must share the same dt")
    if len(measured) != len(modeled):
        raise ValueError("trajectories must have the same length")
    a = measured.v - np.mean(measured.v)
    b = modeled.v - np.mean(modeled.v)
    if np.max(np.abs(a)) == 0.0 or np.max(np.abs(b)) == 0.0:
        raise DelayEstimationError("flat velocity signal: delay is undefined")
    dt = measured.dt
    max_lag = int(round(window / dt))
    n = len(a)
    if max_lag >= n:
        raise DelayEstimationError("correlation window longer than the record")

    def corr(k: int) -> float:
        # measured[i] vs modeled[i - k] over the overlapping region
        if k >= 0:
            seg_a, seg_b = a[k:], b[: n - k]
        else:
            seg_a, seg_b = a[: n + k], b[-k:]
        return float(np.dot(seg_a, seg_b)) / len(seg_a)

    lags = np.arange(-max_lag, max_lag + 1)
    scores = np.array([corr(int(k)) for k in lags])
    best = int(np.argmax(scores))
    lag = float(lags[best])
    if 0 < best < len(lags) - 1:
        y0, y1, y2 = scores[best - 1], scores[best], scores[best + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0.0:  # proper local maximum
            lag += 0.5 * (y0 - y2) / denom
    return lag * dt


# ---------------------------------------------------------------------------
# Measurement CSV format and the shipped reference pulse set


def save_measurements_csv(measurements, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEASUREMENT_HEADER)
        for m in measurements:
            writer.writerow(
                [f"{m.amplitude:.12g}", f"{m.duration:.12g}", f"{m.steady_velocity:.12g}"]
            )


def load_measurements_csv(path) -> list[PulseMeasurement]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != MEASUREMENT_HEADER:
            raise ValueError(f"unexpected measurement header: {header}")
        return [
            PulseMeasurement(float(row[0]), float(row[1]), float(row[2]))
            for row in reader
            if row
        ]


def reference_pulse_measurements() -> list[PulseMeasurement]:
    """The ten measured stage pulses shipped with the package."""
    path = resources.files("piezoinv.fixtures").joinpath("pulse_measurements.csv")
    with resources.as_file(path) as p:
        return load_measurements_csv(p)
