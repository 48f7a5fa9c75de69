"""
Band-limited functions represented on the Fourier side.

A PWFunction is f(z) = integral of phi(t) exp(-itz) over its support, a
subinterval of [-tau, tau]. Evaluation anywhere in the complex plane uses
composite Gauss-Legendre quadrature with panel doubling. Norms on
horizontal lines use truncated real-line quadrature with an adaptive
truncation radius. Real-line pairings add a fitted far-field tail, since
products of two such functions may decay only like 1/x^2.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import mpmath
import numpy as np
from numpy.polynomial import legendre

from pwinterp.config import get_settings
from pwinterp.errors import (
    ConfigValidationError,
    QuadratureNotConvergedError,
    TruncationInsufficientError,
)
from pwinterp.io_formats import read_spectrum_file, spectrum_text

logger = logging.getLogger(__name__)

# phase advance per panel resolved by the initial panel count
_PHASE_PER_PANEL = 8.0
_MAX_BLOCK_ENTRIES = 2**22


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_edges(lo: float, hi: float, panels: int, graded: bool = False) -> np.ndarray:
    """Panel boundaries, clustered toward both ends when graded."""
    s = np.linspace(-1.0, 1.0, panels + 1)
    if graded:
        s = np.sin(0.5 * np.pi * s)
    return lo + 0.5 * (hi - lo) * (s + 1.0)


def panel_rule(lo: float, hi: float, panels: int, order: int,
               graded: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [lo, hi]."""
    edges = panel_edges(lo, hi, panels, graded)
    x, w = gauss_legendre(order)
    width = np.diff(edges)[:, None]
    nodes = edges[:-1, None] + 0.5 * width * (x + 1.0)
    weights = 0.5 * width * w
    return nodes.ravel(), weights.ravel()


class LegendrePanels:
    """Piecewise polynomial through samples taken at the Gauss nodes of each panel."""

    def __init__(self, edges: np.ndarray, order: int, samples: np.ndarray):
        self.edges = np.asarray(edges, dtype=float)
        self.order = order
        panels = len(self.edges) - 1
        values = np.asarray(samples, dtype=complex).reshape(panels, order)
        x, w = gauss_legendre(order)
        vander = legendre.legvander(x, order - 1)
        scale = (2.0 * np.arange(order) + 1.0) / 2.0
        # Gauss projection is exact for polynomials of degree < order
        self.coeffs = (values * w) @ vander * scale

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.edges) - 2)
        left, width = self.edges[idx], np.diff(self.edges)[idx]
        s = 2.0 * (t - left) / width - 1.0
        values = (legendre.legvander(s, self.order - 1) * self.coeffs[idx]).sum(axis=-1)
        inside = (t >= self.edges[0]) & (t <= self.edges[-1])
        return np.where(inside, values, 0.0)


@dataclass(frozen=True, eq=False)
class PWFunction:
    """
    A function of exponential type at most `bandwidth`, given by its spectral density.

    Attributes:
        bandwidth: tau > 0
        density: vectorised phi(t)
        support: (lo, hi) inside [-tau, tau]; defaults to the whole interval
        graded: cluster quadrature panels toward the support ends
        label: free text
    """

    bandwidth: float
    density: Callable[[np.ndarray], np.ndarray]
    support: Optional[Tuple[float, float]] = None
    graded: bool = False
    label: str = ""

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ConfigValidationError(f"bandwidth must be positive, got {self.bandwidth}")
        support = self.support or (-self.bandwidth, self.bandwidth)
        lo, hi = float(support[0]), float(support[1])
        slack = 1e-12 * self.bandwidth
        if not (-self.bandwidth - slack <= lo < hi <= self.bandwidth + slack):
            raise ConfigValidationError(f"support {support} is not inside [-tau, tau]")
        object.__setattr__(self, "support", (lo, hi))

    def __call__(self, z) -> np.ndarray:
        return evaluate(self, z)

    @property
    def nodes(self) -> np.ndarray:
        """Nodes of the base composite rule (`quad_initial_panels` panels)."""
        settings = get_settings()
        return panel_rule(*self.support, settings.quad_initial_panels, settings.quad_order,
                          self.graded)[0]

    @property
    def weights(self) -> np.ndarray:
        """Positive weights of the base rule; they sum to the support length, 2 tau by default."""
        settings = get_settings()
        return panel_rule(*self.support, settings.quad_initial_panels, settings.quad_order,
                          self.graded)[1]

    def spectrum(self, panels: int, order: Optional[int] = None):
        """(nodes, weights, density samples) of the composite rule with the given panel count."""
        order = order or get_settings().quad_order
        nodes, weights = panel_rule(*self.support, panels, order, self.graded)
        return nodes, weights, np.asarray(self.density(nodes), dtype=complex)

    def scaled(self, factor: complex) -> "PWFunction":
        density = self.density
        return PWFunction(self.bandwidth, lambda t: factor * density(t), self.support,
                          self.graded, f"{factor}*{self.label}")

    def to_spectrum_text(self, panels: int = 16, order: Optional[int] = None) -> str:
        order = order or get_settings().quad_order
        nodes, _, values = self.spectrum(panels, order)
        return spectrum_text(self.bandwidth, self.support, panels, order, self.graded, nodes, values)


def synthesize(phi, tau: float, support: Optional[Tuple[float, float]] = None,
               graded: bool = False, order: Optional[int] = None, label: str = "") -> PWFunction:
    """
    Build a PWFunction from a density.

    Args:
        phi: a vectorised callable, or samples at the Gauss nodes of equal
            panels covering the support (panel count inferred from the length)
        tau: bandwidth
    """
    if callable(phi):
        return PWFunction(tau, phi, support, graded, label)
    order = order or get_settings().quad_order
    samples = np.asarray(phi, dtype=complex).ravel()
    if samples.size % order:
        raise ConfigValidationError(f"{samples.size} samples do not fill panels of order {order}")
    lo, hi = support or (-tau, tau)
    edges = panel_edges(lo, hi, samples.size // order, graded)
    return PWFunction(tau, LegendrePanels(edges, order, samples), (lo, hi), graded, label)


def from_spectrum_file(path: Path, label: Optional[str] = None) -> PWFunction:
    header = read_spectrum_file(path)
    edges = panel_edges(*header["support"], header["panels"], header["graded"])
    density = LegendrePanels(edges, header["order"], header["values"])
    return PWFunction(header["bandwidth"], density, header["support"], header["graded"],
                      label or Path(path).stem)


def _quadrature(f: PWFunction, z: np.ndarray, panels: int, order: int):
    nodes, weights, phi = f.spectrum(panels, order)
    kernel = np.exp(-1j * np.outer(z, nodes))
    weighted = weights * phi
    return kernel @ weighted, np.abs(kernel) @ np.abs(weighted)


def _initial_panels(f: PWFunction, z: np.ndarray) -> int:
    settings = get_settings()
    lo, hi = f.support
    phase = (hi - lo) * float(np.max(np.abs(z.real), initial=0.0))
    return max(settings.quad_initial_panels, int(math.ceil(phase / _PHASE_PER_PANEL)))


def evaluate(f: PWFunction, z, rtol: Optional[float] = None) -> np.ndarray:
    """
    Quadrature value of the integral of phi(t) exp(-itz) dt.

    Panels double until successive values agree to `rtol` relative to the
    larger of the value and the L1 size of the integrand. The panel cap is
    the larger of `quad_max_panels` and 64 times the initial count.

    Raises:
        QuadratureNotConvergedError: cap reached; carries the last two values
    """
    settings = get_settings()
    rtol = settings.quad_rtol if rtol is None else rtol
    order = settings.quad_order
    z = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(z).ravel()
    out = np.empty(flat.shape, dtype=complex)
    by_frequency = np.argsort(np.abs(flat.real), kind="stable")

    start = 0
    while start < len(flat):
        probe = by_frequency[start:start + 512]
        initial = _initial_panels(f, flat[probe])
        block = int(np.clip(_MAX_BLOCK_ENTRIES // (4 * initial * order), 1, 512))
        idx = by_frequency[start:start + block]
        out[idx] = _refine(f, flat[idx], _initial_panels(f, flat[idx]), order, rtol, settings)
        start += block
    return out.reshape(z.shape) if z.ndim else out[0]


def _refine(f, z, panels, order, rtol, settings) -> np.ndarray:
    cap = max(settings.quad_max_panels, 64 * panels)
    previous, _ = _quadrature(f, z, panels, order)
    while True:
        panels *= 2
        current, scale = _quadrature(f, z, panels, order)
        if np.all(np.abs(current - previous) <= rtol * np.maximum(np.abs(current), scale)):
            return current
        if panels * 2 > cap:
            raise QuadratureNotConvergedError(
                f"quadrature for '{f.label}' did not converge with {panels} panels",
                last_value=current,
                previous_value=previous,
            )
        logger.debug(f"Refining '{f.label}' to {panels * 2} panels")
        previous = current


def integrate_density(f: PWFunction, rtol: Optional[float] = None) -> complex:
    """Integral of the density over its support (the value at z = 0)."""
    return complex(evaluate(f, 0.0, rtol))


# Kernels


def kernel_eval(lam: complex, z, tau: float):
    """sin(tau (z - conj(lam))) / (tau (z - conj(lam))), equal to 1 at z = conj(lam)."""
    return np.sinc(tau * (np.asarray(z, dtype=complex) - np.conj(lam)) / np.pi)


class ReproducingKernel:
    """k_lambda as a callable with a bandwidth, so line norms apply to it."""

    def __init__(self, lam: complex, tau: float):
        self.lam = complex(lam)
        self.bandwidth = float(tau)

    def __call__(self, z) -> np.ndarray:
        return kernel_eval(self.lam, z, self.bandwidth)


def kernel_norm_estimate(lam: complex, tau: float, p: float) -> float:
    """(1 + |Im lambda|)^(-1/p) exp(tau |Im lambda|)."""
    y = abs(complex(lam).imag)
    return (1.0 + y) ** (-1.0 / p) * math.exp(tau * y)


# Line norms


class LineNorm(NamedTuple):
    height: float
    exponent: float
    value: float  # integral of |f(x + iy)|^p
    truncation_radius: float
    tail_estimate: float

    @property
    def norm(self) -> float:
        return self.value ** (1.0 / self.exponent)


def line_rule(lo: float, hi: float, bandwidth: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss panels of width at most min(1, 2/bandwidth) on [lo, hi]."""
    width = min(1.0, 2.0 / bandwidth)
    panels = max(1, int(math.ceil((hi - lo) / width - 1e-9)))
    return panel_rule(lo, hi, panels, get_settings().quad_order)


def _tail_estimate(x: np.ndarray, values: np.ndarray, radius: float, p: float) -> np.ndarray:
    """Bound for the integral of |f|^p beyond the radius, assuming |f(x)| <= A/|x|."""
    band = (np.abs(x) >= 0.5 * radius) & (np.abs(x) <= radius)
    decay = np.abs(values[band]) * np.abs(x[band])[:, None]
    amplitude = decay.max(axis=0)
    return 2.0 * amplitude**p * radius ** (1.0 - p) / (p - 1.0)


def line_integrals(evaluator: Callable, bandwidth: float, y: float, p: float,
                   radius: Optional[float] = None, min_radius: float = 0.0):
    """
    Integrals of |F_j(x + iy)|^p over x for every column of a matrix-valued evaluator.

    The radius doubles until every column's tail estimate is below
    `line_tail_fraction` of its integral; a fixed `radius` disables the
    tail test. `min_radius` raises the starting radius so mass sitting
    far out is not mistaken for a tail.

    Returns:
        (integrals, radius, tails)

    Raises:
        TruncationInsufficientError: the maximal radius still leaves a large tail
    """
    settings = get_settings()
    fixed = radius is not None
    R = float(radius if fixed else settings.line_initial_radius)
    while not fixed and R < min_radius:
        R *= 2
    x, w = line_rule(-R, R, bandwidth)
    values = np.asarray(evaluator(x + 1j * y))
    squeeze = values.ndim == 1
    values = values.reshape(len(x), -1)
    integrals = w @ np.abs(values) ** p
    while True:
        tails = _tail_estimate(x, values, R, p)
        if fixed or np.all(tails <= settings.line_tail_fraction * integrals):
            break
        if 2 * R > settings.line_max_radius:
            worst = int(np.argmax(tails - settings.line_tail_fraction * integrals))
            raise TruncationInsufficientError(
                f"tail {tails[worst]:.3e} exceeds {settings.line_tail_fraction:.0%} of "
                f"{integrals[worst]:.3e} at radius {R:g}",
                tail=float(tails[worst]),
                radius=R,
            )
        xr, wr = line_rule(R, 2 * R, bandwidth)
        new_x = np.concatenate([-xr[::-1], xr])
        new_w = np.concatenate([wr[::-1], wr])
        new_values = np.asarray(evaluator(new_x + 1j * y)).reshape(len(new_x), -1)
        integrals = integrals + new_w @ np.abs(new_values) ** p
        x = np.concatenate([x, new_x])
        values = np.concatenate([values, new_values])
        R *= 2
        logger.debug(f"Line integral at height {y:g} extended to radius {R:g}")
    if squeeze:
        return float(integrals[0]), R, float(tails[0])
    return integrals, R, tails


def line_norm(f: Callable, y: float = 0.0, p: float = 2.0, radius: Optional[float] = None,
              min_radius: float = 0.0) -> LineNorm:
    """
    Integral of |f(x + iy)|^p dx for any vectorised callable with a `bandwidth`.

    Raises:
        ConfigValidationError: p outside (1, inf)
        TruncationInsufficientError: see line_integrals
    """
    if not 1 < p < math.inf:
        raise ConfigValidationError(f"p must lie in (1, inf), got {p}")
    value, R, tail = line_integrals(f, f.bandwidth, y, p, radius, min_radius)
    return LineNorm(float(y), float(p), float(value), float(R), float(tail))


class PlancherelPolya(NamedTuple):
    lhs: float
    rhs: float
    passed: bool


def plancherel_polya_check(f: Callable, y: float, p: float = 2.0) -> PlancherelPolya:
    """Compare the line integral at height y with exp(p tau |y|) times the real-line one."""
    lhs = line_norm(f, y, p).value
    rhs = math.exp(p * f.bandwidth * abs(y)) * line_norm(f, 0.0, p).value
    return PlancherelPolya(lhs, rhs, lhs <= rhs * (1.0 + 1e-6))


def pointwise_bound_check(f: Callable, z, p: float = 2.0, norm: Optional[float] = None) -> float:
    """max |f(z)| / (||f||_p (1 + |Im z|)^(-1/p) exp(tau |Im z|)) over the grid."""
    z = np.asarray(z, dtype=complex).ravel()
    norm = line_norm(f, 0.0, p).norm if norm is None else norm
    y = np.abs(z.imag)
    envelope = norm * (1.0 + y) ** (-1.0 / p) * np.exp(f.bandwidth * y)
    return float(np.max(np.abs(f(z)) / envelope))


def kernel_norm(lam: complex, tau: float, q: float) -> float:
    """True L^q norm of k_lambda on the real line."""
    return line_norm(ReproducingKernel(lam, tau), 0.0, q).norm


def kernel_norm_profile(lams: Sequence[complex], tau: float, p: float) -> List[tuple]:
    """(lambda, ||k_lambda||_q, estimate, ratio) with q the conjugate exponent of p."""
    q = p / (p - 1.0)
    rows = []
    for lam in lams:
        true = kernel_norm(lam, tau, q)
        estimate = kernel_norm_estimate(lam, tau, p)
        rows.append((complex(lam), true, estimate, true / estimate))
    return rows


# Real-line pairings

# powers of 1/x in the far-field model of a product of two band-limited functions
_TAIL_POWERS = (2, 3, 4, 5)


def _spectral_edges(f: Callable) -> Tuple[float, float]:
    support = getattr(f, "support", None)
    if support is None:
        return -f.bandwidth, f.bandwidth
    return float(support[0]), float(support[1])


def pairing_frequencies(f: Callable, g: Callable) -> np.ndarray:
    """
    Frequencies of the oscillations in f(x) conj(g(x)) for large |x|.

    Both factors behave like sums of exp(-iex)/x^n over their spectral edges e,
    which assumes densities smooth inside their supports.
    """
    omegas = np.array([a - b for a in _spectral_edges(f) for b in _spectral_edges(g)])
    omegas = np.sort(omegas)
    keep = np.concatenate([[True], np.diff(omegas) > 1e-9 * max(1.0, np.abs(omegas).max())])
    return omegas[keep]


def _tail_integral(power: int, omega: float, radius: float) -> complex:
    """Integral of exp(-i omega x) (radius/x)^power over |x| > radius."""
    if abs(omega) < 1e-12:
        return radius * (1.0 + (-1) ** power) / (power - 1.0)
    z = 1j * omega * radius
    total = mpmath.expint(power, z) + (-1) ** power * mpmath.expint(power, -z)
    return radius * complex(total)


def _asymptotic_tail(x: np.ndarray, h: np.ndarray, radius: float,
                     omegas: np.ndarray) -> np.ndarray:
    """Tail beyond the radius of every column of h, fitted on the band radius/2 <= |x| <= radius."""
    band = (np.abs(x) >= 0.5 * radius) & (np.abs(x) <= radius)
    xb = x[band]
    columns, tails = [], []
    for omega in omegas:
        for power in _TAIL_POWERS:
            columns.append(np.exp(-1j * omega * xb) * (radius / xb) ** power)
            tails.append(_tail_integral(power, omega, radius))
    coeffs, *_ = np.linalg.lstsq(np.column_stack(columns), h[band], rcond=None)
    return np.asarray(tails) @ coeffs


def line_pairing(f: Callable, evaluator: Callable, bandwidth: float, omegas: np.ndarray,
                 atol) -> Tuple[np.ndarray, float, np.ndarray]:
    """
    Integrals of f(x) conj(G_j(x)) over the real line for every column of G.

    The integral over [-R, R] is completed by a fitted far-field tail. The
    radius doubles until successive completed values agree to `atol`.

    Returns:
        (integrals, radius, last change)

    Raises:
        TruncationInsufficientError: no agreement within `pairing_max_radius`
    """
    settings = get_settings()
    atol = np.asarray(atol, dtype=float)
    R = float(settings.line_initial_radius)
    x, w = line_rule(-R, R, bandwidth)
    h = np.asarray(f(x))[:, None] * np.conj(np.asarray(evaluator(x)).reshape(len(x), -1))
    direct = w @ h
    estimate = direct + _asymptotic_tail(x, h, R, omegas)
    while True:
        xr, wr = line_rule(R, 2 * R, bandwidth)
        new_x = np.concatenate([-xr[::-1], xr])
        new_w = np.concatenate([wr[::-1], wr])
        new_h = (np.asarray(f(new_x))[:, None]
                 * np.conj(np.asarray(evaluator(new_x)).reshape(len(new_x), -1)))
        direct = direct + new_w @ new_h
        x = np.concatenate([x, new_x])
        h = np.concatenate([h, new_h])
        R *= 2
        refined = direct + _asymptotic_tail(x, h, R, omegas)
        change = np.abs(refined - estimate)
        if np.all(change <= atol):
            return refined, R, change
        if 2 * R > settings.pairing_max_radius:
            worst = int(np.argmax(change - atol))
            raise TruncationInsufficientError(
                f"real-line pairing still moves by {change[worst]:.3e} at radius {R:g} "
                f"(tolerance {np.broadcast_to(atol, change.shape)[worst]:.3e})",
                tail=float(change[worst]),
                radius=R,
            )
        logger.debug(f"Real-line pairing extended to radius {R:g}")
        estimate = refined


def inner_product(f: Callable, g: Callable, bandwidth: Optional[float] = None,
                  atol: Optional[float] = None) -> complex:
    """
    Integral of f(x) conj(g(x)) over the real line.

    The default tolerance is `pairing_rtol` times ||f||_2 ||g||_2.

    Raises:
        TruncationInsufficientError: see line_pairing
    """
    bandwidth = bandwidth or max(f.bandwidth, g.bandwidth)
    if atol is None:
        scale = line_norm(f, 0.0, 2.0).norm * line_norm(g, 0.0, 2.0).norm
        atol = get_settings().pairing_rtol * scale
    value, _, _ = line_pairing(f, g, bandwidth, pairing_frequencies(f, g), atol)
    return complex(value[0])


def reproduce(f: Callable, lam, atol: Optional[float] = None):
    """
    (tau/pi) <f, k_lambda> for one point or an array of points.

    This equals f(lambda) for f of type tau in L^2. The tolerance applies to
    the returned values and defaults to `pairing_rtol` times ||f||_2.

    Raises:
        TruncationInsufficientError: see line_pairing
    """
    tau = f.bandwidth
    lams = np.asarray(lam, dtype=complex)
    flat = np.atleast_1d(lams).ravel()
    if atol is None:
        atol = get_settings().pairing_rtol * line_norm(f, 0.0, 2.0).norm
    kernel = ReproducingKernel(0.0, tau)
    values, R, _ = line_pairing(
        f,
        lambda x: kernel_eval(flat[None, :], np.asarray(x)[:, None], tau),
        tau,
        pairing_frequencies(f, kernel),
        atol * math.pi / tau,
    )
    logger.debug(f"Reproduced {len(flat)} values of '{getattr(f, 'label', '')}' at radius {R:g}")
    values = tau / math.pi * values
    return values.reshape(lams.shape) if lams.ndim else complex(values[0])


# Metamorphic transforms


def translate(f: PWFunction, a: float) -> PWFunction:
    """g(z) = f(z + a), by modulating the density."""
    density = f.density
    return PWFunction(f.bandwidth, lambda t: density(t) * np.exp(-1j * a * t), f.support,
                      f.graded, f"{f.label}(z+{a:g})")


def shift_spectrum(f: PWFunction, s: float) -> PWFunction:
    """Density moved by s; the result equals exp(-isz) f(z)."""
    density = f.density
    lo, hi = f.support[0] + s, f.support[1] + s
    bandwidth = max(abs(lo), abs(hi))
    return PWFunction(bandwidth, lambda t: density(np.asarray(t) - s), (lo, hi), f.graded,
                      f"{f.label}[shift {s:g}]")
