"""
The bandwidth-enlarging multiplier H_eps = c * F(phi_eps).

phi_eps is the standard smooth bump exp(-1/(1 - (2t/eps)^2)) on
(-eps/2, eps/2); c = 1/integral(phi_eps) so that H_eps(0) = 1.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from pwinterp.config import get_settings
from pwinterp.errors import ConfigValidationError, QuadratureNotConvergedError
from pwinterp.pwcore import PWFunction, evaluate, integrate_density

logger = logging.getLogger(__name__)

# distinct arguments are evaluated once; repeated differences z - lambda are common
_DEDUP_DECIMALS = 12
_MATRIX_ROWS = 1024


def bump_density(epsilon: float):
    """Vectorised phi_eps, zero outside (-eps/2, eps/2)."""
    half = 0.5 * epsilon

    def phi(t):
        s = np.asarray(t, dtype=float) / half
        inside = np.abs(s) < 1.0
        out = np.zeros(s.shape)
        out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
        return out

    return phi


@dataclass(frozen=True, eq=False)
class BumpMultiplier:
    """
    H_eps with H_eps(0) = 1.

    Attributes:
        epsilon: support parameter; the spectrum lives in (-eps/2, eps/2)
        normalization: c with c * integral(phi_eps) = 1
        spectrum: quadrature representation of phi_eps
    """

    epsilon: float
    normalization: float
    spectrum: PWFunction

    @property
    def bandwidth(self) -> float:
        return self.spectrum.bandwidth

    def __call__(self, z) -> np.ndarray:
        return multiplier_eval(self, z)


def build_multiplier(epsilon: float) -> BumpMultiplier:
    """
    Build H_eps.

    Raises:
        ConfigValidationError: epsilon <= 0
    """
    if not epsilon > 0:
        raise ConfigValidationError(f"epsilon must be positive, got {epsilon}")
    half = 0.5 * epsilon
    spectrum = PWFunction(half, bump_density(epsilon), (-half, half), graded=True,
                          label=f"bump(eps={epsilon:g})")
    mass = integrate_density(spectrum, rtol=1e-3 * get_settings().quad_rtol).real
    multiplier = BumpMultiplier(float(epsilon), 1.0 / mass, spectrum)
    logger.info(f"Built multiplier eps={epsilon:g}: integral {mass:.12g}, c = {1.0 / mass:.12g}")
    return multiplier


def multiplier_eval(H: BumpMultiplier, z):
    """c times the quadrature value of the bump transform at z."""
    z = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(z).ravel()
    unique, inverse = np.unique(np.round(flat, _DEDUP_DECIMALS), return_inverse=True)
    values = H.normalization * np.atleast_1d(evaluate(H.spectrum, unique))
    out = values[inverse.ravel()]
    return out.reshape(z.shape) if z.ndim else out[0]


def multiplier_matrix(H: BumpMultiplier, z, shifts, rtol: Optional[float] = None) -> np.ndarray:
    """
    Matrix [H(z_j - s_k)] from one shared quadrature rule per block of rows.

    exp(-it(z - s)) factors as exp(-itz) exp(its), so each block is a
    product of two exponential tables. Panels double until successive
    blocks agree to `rtol`.

    Raises:
        QuadratureNotConvergedError: panel cap reached
    """
    settings = get_settings()
    rtol = settings.quad_rtol if rtol is None else rtol
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    shifts = np.atleast_1d(np.asarray(shifts, dtype=complex)).ravel()
    out = np.empty((len(z), len(shifts)), dtype=complex)
    for start in range(0, len(z), _MATRIX_ROWS):
        block = slice(start, start + _MATRIX_ROWS)
        out[block] = _multiplier_block(H, z[block], shifts, rtol, settings)
    return H.normalization * out


def _multiplier_block(H, z, shifts, rtol, settings) -> np.ndarray:
    order = settings.quad_order
    span = float(np.max(np.abs(z.real), initial=0.0) + np.max(np.abs(shifts.real), initial=0.0))
    panels = max(settings.quad_initial_panels, int(math.ceil(H.epsilon * span / 8.0)))
    cap = max(settings.quad_max_panels, 64 * panels)

    def table(panels):
        t, w, phi = H.spectrum.spectrum(panels, order)
        left = np.exp(-1j * np.outer(z, t))
        right = np.exp(1j * np.outer(t, shifts))
        weighted = (w * phi)[:, None]
        return left @ (weighted * right), np.abs(left) @ (np.abs(weighted) * np.abs(right))

    previous, _ = table(panels)
    while True:
        panels *= 2
        current, scale = table(panels)
        if np.all(np.abs(current - previous) <= rtol * np.maximum(np.abs(current), scale)):
            return current
        if panels * 2 > cap:
            raise QuadratureNotConvergedError(
                f"multiplier matrix did not converge with {panels} panels",
                last_value=current,
                previous_value=previous,
            )
        logger.debug(f"Refining multiplier block to {panels * 2} panels")
        previous = current


def rectangle_grid(radius: float, height: float, nx: int, ny: int) -> np.ndarray:
    """nx * ny points on [-radius, radius] x [-height, height]; ny = 1 gives the real axis."""
    x = np.linspace(-radius, radius, nx)
    y = np.linspace(-height, height, ny) if ny > 1 else np.zeros(1)
    return (x[None, :] + 1j * y[:, None]).ravel()


class DecayCertificate(NamedTuple):
    constant: float
    refined_constant: float
    relative_change: float
    stable: bool


def decay_constant(H: BumpMultiplier, z) -> float:
    """max |H(z)| (1 + |z|) exp(-eps |Im z|) over the points."""
    z = np.asarray(z, dtype=complex).ravel()
    weights = (1.0 + np.abs(z)) * np.exp(-H.epsilon * np.abs(z.imag))
    return float(np.max(np.abs(H(z)) * weights))


def decay_certificate(H: BumpMultiplier, radius: float, height: float = 0.0,
                      nx: int = 201, ny: Optional[int] = None, stability: float = 0.05) -> DecayCertificate:
    """
    Decay constant on a rectangle grid and on its doubled refinement.

    The certificate is stable when the two constants differ by at most
    `stability` relative.
    """
    ny = ny if ny is not None else (13 if height > 0 else 1)
    coarse = decay_constant(H, rectangle_grid(radius, height, nx, ny))
    fine = decay_constant(H, rectangle_grid(radius, height, 2 * nx - 1, 2 * ny - 1 if ny > 1 else 1))
    change = abs(fine - coarse) / max(fine, coarse)
    certificate = DecayCertificate(coarse, fine, change, change <= stability)
    logger.info(
        f"Decay certificate eps={H.epsilon:g} on [{-radius:g},{radius:g}]x[{-height:g},{height:g}]: "
        f"{coarse:.6g} -> {fine:.6g} ({'stable' if certificate.stable else 'unstable'})"
    )
    return certificate


def real_axis_decay(H: BumpMultiplier, radius: float = 1000.0, points: int = 4001) -> float:
    """sup |H(x)| (1 + |x|) over a uniform real grid."""
    x = np.linspace(-radius, radius, points)
    return float(np.max(np.abs(H(x)) * (1.0 + np.abs(x))))
