"""
Rank-one control of diagonal systems x_n' = -lambda_n x_n + conj(b_n) u(t).

Steering x0 to x1 in time tau is the moment problem

    conj(b_n) * integral_0^tau u(t) exp(-lambda_n (tau - t)) dt = x1_n - exp(-lambda_n tau) x0_n,

solved with minimal L^2 norm in the span of exp(-conj(lambda_m)(tau - t)).
Exponential Gram matrices are badly conditioned, so they are assembled and
factorised with mpmath.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence

import mpmath
import numpy as np
from scipy.integrate import trapezoid

from pwinterp.biortho import BiorthogonalFamily
from pwinterp.config import get_settings
from pwinterp.errors import (
    ControlError,
    GramNotPositiveDefiniteError,
    QuadratureNotConvergedError,
    UncontrollableModeError,
    UnstableEigenvalueError,
)
from pwinterp.interp import InterpolationProblem, NormStudy, norm_stability_study
from pwinterp.io_formats import read_signal_file, read_system_file, signal_text, system_text
from pwinterp.mcphail import WeightedPair, mq_check, pw_weight_adaptation
from pwinterp.multiplier import build_multiplier
from pwinterp.pwcore import gauss_legendre
from pwinterp.seqlab import ComplexSequence, HalfPlane

logger = logging.getLogger(__name__)

SIGNAL_SAMPLES = 201


@dataclass(frozen=True, eq=False)
class DiagonalSystem:
    """
    Modes with eigenvalues lambda_n (Re > 0) and control coefficients b_n.

    The modal basis is taken orthonormal.
    """

    eigenvalues: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        eigenvalues = np.atleast_1d(np.asarray(self.eigenvalues, dtype=complex))
        b = np.atleast_1d(np.asarray(self.b, dtype=complex))
        if eigenvalues.shape != b.shape:
            raise ControlError(f"{len(eigenvalues)} eigenvalues but {len(b)} control coefficients")
        unstable = np.flatnonzero(eigenvalues.real <= 0)
        if unstable.size:
            n = int(unstable[0])
            raise UnstableEigenvalueError(f"eigenvalue {n} = {eigenvalues[n]} has nonpositive real part")
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "b", b)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def alpha(self) -> float:
        """Stability margin min Re lambda_n."""
        return float(self.eigenvalues.real.min())

    def with_b(self, b) -> "DiagonalSystem":
        return DiagonalSystem(self.eigenvalues, b)

    def to_text(self) -> str:
        return system_text(self.eigenvalues, self.b)

    @classmethod
    def from_file(cls, path: Path) -> "DiagonalSystem":
        eigenvalues, b = read_system_file(path)
        return cls(eigenvalues, b)


def ladder_system(N: int, b=1.0) -> DiagonalSystem:
    """lambda_n = n for 1 <= n <= N."""
    eigenvalues = np.arange(1, N + 1, dtype=float)
    return DiagonalSystem(eigenvalues, np.broadcast_to(np.asarray(b, dtype=complex), (N,)))


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Steer x0 to x1; `horizon` None means infinite time."""

    x0: np.ndarray
    x1: np.ndarray
    horizon: Optional[float] = None

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=complex))
        x1 = np.atleast_1d(np.asarray(self.x1, dtype=complex))
        if x0.shape != x1.shape:
            raise ControlError("x0 and x1 must have the same length")
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(x1))):
            raise ControlError("modal vectors must be finite")
        if self.horizon is not None and not self.horizon > 0:
            raise ControlError(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x1", x1)


class ControlSignal:
    """
    u on [0, tau], exact when built from exponential coefficients.

    Signals read from a file are evaluated by linear interpolation.
    """

    def __init__(self, grid: np.ndarray, values: np.ndarray, norm: float,
                 coefficients: Optional[np.ndarray] = None, exponents: Optional[np.ndarray] = None,
                 gram_condition: float = math.nan, regularized: bool = False,
                 moment_residual: float = math.nan):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0) or grid[0] != 0.0:
            raise ControlError("signal grid must increase strictly from 0")
        self.grid = grid
        self.values = np.asarray(values, dtype=complex)
        self.norm = float(norm)
        self.coefficients = coefficients
        self.exponents = exponents
        self.gram_condition = gram_condition
        self.regularized = regularized
        self.moment_residual = moment_residual

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.coefficients is None:
            return np.interp(t, self.grid, self.values.real) + 1j * np.interp(t, self.grid, self.values.imag)
        return _exponential_sum(self.coefficients, self.exponents, self.horizon, t)

    def to_text(self) -> str:
        return signal_text(self.grid, self.values)

    @classmethod
    def zero(cls, horizon: float, samples: int = SIGNAL_SAMPLES) -> "ControlSignal":
        grid = np.linspace(0.0, horizon, samples)
        return cls(grid, np.zeros(samples, dtype=complex), 0.0)

    @classmethod
    def from_file(cls, path: Path) -> "ControlSignal":
        grid, values = read_signal_file(path)
        norm = math.sqrt(trapezoid(np.abs(values) ** 2, grid))
        return cls(grid, values, norm)


def _exponential_sum(coefficients, exponents, horizon: float, t) -> np.ndarray:
    """sum_m c_m exp(-conj(lambda_m)(tau - t)), summed at the Gram precision."""
    t = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t).ravel()
    out = np.empty(flat.shape, dtype=complex)
    with mpmath.workdps(get_settings().gram_digits):
        c = [mpmath.mpc(v) for v in coefficients]
        rates = [mpmath.conj(mpmath.mpc(v)) for v in exponents]
        for j, tj in enumerate(flat):
            lag = mpmath.mpf(horizon) - mpmath.mpf(float(tj))
            out[j] = complex(mpmath.fsum(cm * mpmath.exp(-r * lag) for cm, r in zip(c, rates)))
    return out.reshape(t.shape) if t.ndim else out[0]


def gram_matrix(sys: DiagonalSystem, horizon: float, modes: Optional[Sequence[int]] = None) -> mpmath.matrix:
    """G[n, m] = (1 - exp(-(lambda_n + conj(lambda_m)) tau)) / (lambda_n + conj(lambda_m))."""
    modes = range(len(sys)) if modes is None else modes
    lam = [mpmath.mpc(sys.eigenvalues[n]) for n in modes]
    tau = mpmath.mpf(horizon)
    size = len(lam)
    G = mpmath.matrix(size, size)
    for i in range(size):
        for j in range(size):
            s = lam[i] + mpmath.conj(lam[j])
            G[i, j] = (1 - mpmath.exp(-s * tau)) / s
    return G


def _condition(G: mpmath.matrix) -> float:
    eigenvalues = mpmath.eigh(G, eigvals_only=True)
    values = sorted(float(mpmath.re(eigenvalues[i])) for i in range(G.rows))
    if values[0] <= 0:
        return math.inf
    return values[-1] / values[0]


def gram_condition(sys: DiagonalSystem, horizon: float) -> float:
    with mpmath.workdps(get_settings().gram_digits):
        return _condition(gram_matrix(sys, horizon))


class GramFactor:
    """The (possibly ridged) Gram matrix at `gram_digits`, checked positive definite by Cholesky."""

    def __init__(self, sys: DiagonalSystem, horizon: float, modes: Sequence[int]):
        settings = get_settings()
        self.digits = settings.gram_digits
        self.modes = list(modes)
        with mpmath.workdps(self.digits):
            self.gram = gram_matrix(sys, horizon, self.modes)
            self.condition = _condition(self.gram)
            self.regularized = self.condition > settings.ridge_condition_limit
            matrix = self.gram
            if self.regularized:
                trace = mpmath.fsum(mpmath.re(self.gram[i, i]) for i in range(len(self.modes)))
                ridge = settings.ridge_factor * trace
                matrix = self.gram + ridge * mpmath.eye(len(self.modes))
                logger.warning(
                    f"Gram condition {self.condition:.3e} exceeds {settings.ridge_condition_limit:.1e}; "
                    f"added ridge {float(ridge):.3e}"
                )
            self.matrix = matrix
            try:
                mpmath.cholesky(matrix)
            except (ValueError, ZeroDivisionError) as e:
                raise GramNotPositiveDefiniteError(f"Gram matrix is not positive definite ({e})")
        logger.debug(f"Gram factor for {len(self.modes)} modes, condition {self.condition:.3e}")

    def solve(self, rhs: Sequence[complex]) -> mpmath.matrix:
        """Solve the (ridged) Gram system for one right-hand side."""
        with mpmath.workdps(self.digits):
            return mpmath.lu_solve(self.matrix, mpmath.matrix([mpmath.mpc(v) for v in rhs]))

    def quadratic(self, c: mpmath.matrix) -> float:
        """c^H G c with the unregularised Gram matrix."""
        with mpmath.workdps(self.digits):
            Gc = self.gram * c
            return float(mpmath.re(mpmath.fsum(mpmath.conj(c[i]) * Gc[i] for i in range(len(self.modes)))))

    def residual(self, c: mpmath.matrix, rhs: Sequence[complex]) -> float:
        """||G c - rhs|| / ||rhs||."""
        with mpmath.workdps(self.digits):
            Gc = self.gram * c
            diff = math.sqrt(sum(abs(complex(Gc[i] - mpmath.mpc(rhs[i]))) ** 2 for i in range(len(rhs))))
        scale = math.sqrt(sum(abs(complex(v)) ** 2 for v in rhs))
        return diff / scale if scale > 0 else diff


def moments(sys: DiagonalSystem, prob: ControlProblem, horizon: float) -> Dict[int, complex]:
    """
    Target moments m_n = (x1_n - exp(-lambda_n tau) x0_n) / conj(b_n) per controlled mode.

    Modes with b_n = 0 and nothing to steer are left out.

    Raises:
        UncontrollableModeError: b_n = 0 but the mode must move
    """
    if len(prob.x0) != len(sys):
        raise ControlError(f"modal vectors have length {len(prob.x0)}, the system has {len(sys)} modes")
    target = prob.x1 - np.exp(-sys.eigenvalues * horizon) * prob.x0
    result = {}
    for n in range(len(sys)):
        if sys.b[n] == 0:
            if target[n] != 0:
                raise UncontrollableModeError(f"mode {n} has b_n = 0 but a nonzero target", index=n)
            continue
        result[n] = complex(target[n] / np.conj(sys.b[n]))
    return result


def _signal(sys: DiagonalSystem, factor: GramFactor, rhs: List[complex], horizon: float,
            samples: int) -> ControlSignal:
    grid = np.linspace(0.0, horizon, samples)
    if not factor.modes or not any(rhs):
        return ControlSignal(grid, np.zeros(samples, dtype=complex), 0.0, gram_condition=factor.condition,
                             regularized=factor.regularized, moment_residual=0.0)
    c = factor.solve(rhs)
    coefficients = np.array([complex(c[i]) for i in range(len(factor.modes))])
    exponents = sys.eigenvalues[factor.modes]
    norm = math.sqrt(max(factor.quadratic(c), 0.0))
    return ControlSignal(
        grid,
        _exponential_sum(coefficients, exponents, horizon, grid),
        norm,
        coefficients=coefficients,
        exponents=exponents,
        gram_condition=factor.condition,
        regularized=factor.regularized,
        moment_residual=factor.residual(c, rhs),
    )


def min_norm_control(sys: DiagonalSystem, prob: ControlProblem, samples: int = SIGNAL_SAMPLES) -> ControlSignal:
    """
    Minimal-norm u steering prob.x0 to prob.x1 in time prob.horizon.

    Raises:
        UncontrollableModeError: see moments
        GramNotPositiveDefiniteError: Cholesky failed
    """
    if prob.horizon is None:
        raise ControlError("infinite-horizon synthesis is not supported; give a finite horizon")
    targets = moments(sys, prob, prob.horizon)
    modes = sorted(targets)
    factor = GramFactor(sys, prob.horizon, modes)
    signal = _signal(sys, factor, [targets[n] for n in modes], prob.horizon, samples)
    logger.info(
        f"Minimal-norm control over {len(modes)} modes, tau={prob.horizon:g}: ||u|| = {signal.norm:.10g}, "
        f"Gram condition {signal.gram_condition:.3e}"
    )
    return signal


class Trajectory(NamedTuple):
    times: np.ndarray
    states: np.ndarray
    endpoint: np.ndarray
    change: float
    panels: int


def _propagate(sys: DiagonalSystem, u, x0: np.ndarray, horizon: float, panels: int):
    order = get_settings().quad_order
    nodes, weights = gauss_legendre(order)
    edges = np.linspace(0.0, horizon, panels + 1)
    h = horizon / panels
    lam = sys.eigenvalues
    decay = np.exp(-lam * h)
    states = np.empty((panels + 1, len(sys)), dtype=complex)
    states[0] = x0
    r = edges[:-1, None] + 0.5 * h * (nodes + 1.0)
    values = np.asarray(u(r.ravel()), dtype=complex).reshape(r.shape)
    for k in range(panels):
        lag = edges[k + 1] - r[k]
        kernel = np.exp(-np.outer(lam, lag))
        increment = np.conj(sys.b) * (kernel @ (0.5 * h * weights * values[k]))
        states[k + 1] = decay * states[k] + increment
    return edges, states


def simulate(sys: DiagonalSystem, u: Optional[ControlSignal], x0, horizon: Optional[float] = None) -> Trajectory:
    """
    Modal trajectories under u, exact free decay per panel plus Gauss quadrature of the forcing.

    Panels double from the configured start until the endpoint changes by
    at most `simulation_tolerance`.

    Raises:
        QuadratureNotConvergedError: panel cap reached
    """
    settings = get_settings()
    horizon = u.horizon if horizon is None else horizon
    u = ControlSignal.zero(horizon) if u is None else u
    x0 = np.atleast_1d(np.asarray(x0, dtype=complex))
    panels = settings.simulation_initial_panels
    times, states = _propagate(sys, u, x0, horizon, panels)
    while True:
        panels *= 2
        finer_times, finer_states = _propagate(sys, u, x0, horizon, panels)
        change = float(np.max(np.abs(finer_states[-1] - states[-1])))
        if change <= settings.simulation_tolerance:
            logger.debug(f"Simulation converged with {panels} panels (change {change:.2e})")
            return Trajectory(finer_times, finer_states, finer_states[-1], change, panels)
        if panels * 2 > settings.simulation_max_panels:
            raise QuadratureNotConvergedError(
                f"simulation endpoint still changes by {change:.3e} with {panels} panels",
                last_value=finer_states[-1],
                previous_value=states[-1],
            )
        times, states = finer_times, finer_states


class OscillationReport(NamedTuple):
    signals: List[ControlSignal]
    norms: np.ndarray
    gram_condition: float
    regularized: bool


def simple_oscillation_controls(sys: DiagonalSystem, horizon: float,
                                samples: int = SIGNAL_SAMPLES) -> OscillationReport:
    """Controls u_n steering 0 to the n-th basis vector, all from one factorisation."""
    zero = np.flatnonzero(sys.b == 0)
    if zero.size:
        n = int(zero[0])
        raise UncontrollableModeError(f"mode {n} has b_n = 0 and cannot be reached", index=n)
    modes = list(range(len(sys)))
    factor = GramFactor(sys, horizon, modes)
    signals = []
    for n in modes:
        rhs = [0j] * len(modes)
        rhs[n] = complex(1.0 / np.conj(sys.b[n]))
        signals.append(_signal(sys, factor, rhs, horizon, samples))
    norms = np.array([s.norm for s in signals])
    logger.info(
        f"Simple-oscillation controls for {len(modes)} modes, tau={horizon:g}: "
        f"max ||u_n|| = {norms.max():.6g}"
    )
    return OscillationReport(signals, norms, factor.condition, factor.regularized)


def interpolation_weights(sys: DiagonalSystem, horizon: float) -> np.ndarray:
    """omega_n = exp(-(tau/2) Re lambda_n) |b_n|."""
    return np.exp(-0.5 * horizon * sys.eigenvalues.real) * np.abs(sys.b)


def to_interpolation_problem(sys: DiagonalSystem, horizon: float, epsilon: float = 0.5,
                             data=None) -> InterpolationProblem:
    """
    Weighted problem on the nodes i lambda_n in PW^2 of type tau/2.

    Raises:
        UncontrollableModeError: b_n = 0 gives a zero weight
    """
    zero = np.flatnonzero(sys.b == 0)
    if zero.size:
        n = int(zero[0])
        raise UncontrollableModeError(f"mode {n} has b_n = 0 and no interpolation weight", index=n)
    nodes = ComplexSequence(1j * sys.eigenvalues, None, "control-nodes")
    data = np.zeros(len(sys), dtype=complex) if data is None else data
    return InterpolationProblem(nodes, data, 2.0, 0.5 * horizon, epsilon, interpolation_weights(sys, horizon))


def to_hardy_pair(sys: DiagonalSystem) -> WeightedPair:
    """(i Lambda, |b_n|) in the upper half-plane."""
    nodes = ComplexSequence(1j * sys.eigenvalues, None, "control-nodes")
    return WeightedPair(nodes, np.abs(sys.b), 2.0, HalfPlane(0.0, "upper"))


class ControllabilityReport(NamedTuple):
    infinite_time_constant: float
    finite_time_constant: float
    offsets: List[float]
    condition_profile: List[tuple]
    norm_study: Optional[NormStudy]


def controllability_report(sys: DiagonalSystem, horizon: float, offsets_fractions=(0.0, 0.25, 0.5, 0.75),
                           family: Optional[BiorthogonalFamily] = None, epsilon: float = 0.5,
                           trials: int = 20, seed: int = 0) -> ControllabilityReport:
    """
    Necessary-condition constants plus the Gram conditioning trend.

    (a) the (M_2) constant of (i Lambda, |b_n|) in the upper half-plane;
    (b) the largest (M_2) constant of the tau/2-weighted problem adapted to
        the half-planes Im z > a for a = f * alpha over the given fractions;
    (c) Gram condition numbers at tau/2, tau and 2 tau.
    A family on the nodes i lambda_n adds the norm study of the weighted problem.
    """
    infinite = mq_check(to_hardy_pair(sys)).constant
    prob = to_interpolation_problem(sys, horizon, epsilon)
    offsets = [float(f * sys.alpha) for f in offsets_fractions]
    finite = 0.0
    for a in offsets:
        adapted = pw_weight_adaptation(prob.nodes, prob.weights, prob.tau, a, 2.0)
        if adapted.upper is not None:
            finite = max(finite, mq_check(adapted.upper).constant)
    profile = [(t, gram_condition(sys, t)) for t in (0.5 * horizon, horizon, 2.0 * horizon)]
    study = None
    if family is not None:
        study = norm_stability_study(
            prob.nodes, family, build_multiplier(epsilon), trials, 2.0, prob.tau, seed,
            weights=prob.weights,
        )
    logger.info(
        f"Controllability report tau={horizon:g}: infinite-time {infinite:.6g}, finite-time {finite:.6g}"
    )
    return ControllabilityReport(infinite, finite, offsets, profile, study)
