"""
Biorthogonal families f_n with f_n(lambda_k) = delta_nk.

Symmetric real node families (lambda_0 = 0, lambda_{-n} = -lambda_n) get a
generating function S(z) = z prod_{n <= N} (1 - z^2/mu_n^2) T(z), where the
tail T continues the nodes as mu_n = n + delta beyond the truncation:

    T(z) = prod_{k >= 0} (1 - z^2/(a + k)^2) = Gamma(a)^2 / (Gamma(a - z) Gamma(a + z))

with a = tail_start + delta. Other families are supplied explicitly.
"""
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import loggamma

from pwinterp.config import get_settings
from pwinterp.errors import (
    BiorthogonalityError,
    GeneratingRangeError,
    InterpolationError,
    MultipleZeroError,
    SequenceError,
)
from pwinterp.io_formats import read_family_manifest
from pwinterp.pwcore import from_spectrum_file, line_integrals
from pwinterp.seqlab import ComplexSequence

logger = logging.getLogger(__name__)

MAX_IMAG = 100.0
MAX_LOG = 700.0


def log_reciprocal_gamma(w) -> np.ndarray:
    """log(1/Gamma(w)), using reflection left of Re w = 1/2 so poles give zeros."""
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape, dtype=complex)
    right = w.real >= 0.5
    out[right] = -loggamma(w[right])
    left = ~right
    with np.errstate(divide="ignore"):
        out[left] = loggamma(1.0 - w[left]) + np.log(np.sin(np.pi * w[left])) - math.log(math.pi)
    return out


class GeneratingFunction:
    """
    S(z) for a symmetric real truncation with an exact gamma-function tail.

    Args:
        nodes: symmetric real sequence containing 0
        tail_start: first tail index; defaults to N + 1 with N positive nodes
        tail_offset: delta of the tail nodes n + delta; defaults to mu_N - N
    """

    def __init__(self, nodes: ComplexSequence, tail_start: Optional[float] = None,
                 tail_offset: Optional[float] = None):
        points = nodes.points
        if np.any(np.abs(points.imag) > 0):
            raise SequenceError("a generating function needs real nodes; supply a family manifest instead")
        re = np.sort(points.real)
        tol = get_settings().duplicate_tolerance
        if not np.any(np.abs(re) <= tol) or not np.allclose(re, -re[::-1], rtol=0.0, atol=tol):
            raise SequenceError(
                "a generating function needs a symmetric node family containing 0; "
                "supply a family manifest instead"
            )
        self.nodes = nodes
        self.positive = re[re > tol]
        N = len(self.positive)
        self.tail_offset = float(self.positive[-1] - N) if tail_offset is None and N else float(tail_offset or 0.0)
        self.tail_start = float(N + 1 if tail_start is None else tail_start)
        self.tail_base = self.tail_start + self.tail_offset
        if N and self.tail_base <= self.positive[-1]:
            raise SequenceError(
                f"tail nodes start at {self.tail_base:g}, not beyond the last node {self.positive[-1]:g}"
            )
        logger.debug(f"Generating function: {N} positive nodes, tail from {self.tail_base:g}")

    def _check_range(self, z: np.ndarray) -> None:
        if np.any(np.abs(z.imag) > MAX_IMAG):
            raise GeneratingRangeError(f"|Im z| above {MAX_IMAG:g} is outside the supported range")

    def log_tail(self, z: np.ndarray) -> np.ndarray:
        a = self.tail_base
        return (2.0 * loggamma(a) + log_reciprocal_gamma(a - z) + log_reciprocal_gamma(a + z))

    def log_factors(self, z: np.ndarray) -> np.ndarray:
        """Matrix of log(1 - z^2/mu_k^2); -inf where z hits a node."""
        with np.errstate(divide="ignore"):
            return np.log(1.0 - (z[:, None] / self.positive[None, :]) ** 2)

    def _exp(self, log_values: np.ndarray) -> np.ndarray:
        if np.any(log_values.real > MAX_LOG):
            raise GeneratingRangeError("generating function overflows at the requested points")
        return np.exp(log_values)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(z).ravel()
        self._check_range(flat)
        total = self.log_factors(flat).sum(axis=1) + self.log_tail(flat)
        values = flat * self._exp(total)
        return values.reshape(z.shape) if z.ndim else values[0]

    def deflated(self, z: np.ndarray, positions: Sequence[int]) -> np.ndarray:
        """
        S(z)/(z - lambda_n) for the node at each position, exact at z = lambda_n.

        Returns:
            Matrix of shape (len(z), len(positions))
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        self._check_range(z)
        logs = self.log_factors(z)
        tail = self.log_tail(z)
        total = logs.sum(axis=1) + tail
        out = np.empty((len(z), len(positions)), dtype=complex)
        for col, position in enumerate(positions):
            lam = self.nodes.points[position].real
            if lam == 0.0 or abs(lam) <= get_settings().duplicate_tolerance:
                out[:, col] = self._exp(total)
                continue
            j = int(np.argmin(np.abs(self.positive - abs(lam))))
            mu = self.positive[j]
            with np.errstate(invalid="ignore"):
                rest = total - logs[:, j]
            hit = ~np.isfinite(logs[:, j])
            if hit.any():
                rest[hit] = np.delete(logs[hit], j, axis=1).sum(axis=1) + tail[hit]
            factor = -(1.0 + z / mu) / mu if lam > 0 else (1.0 - z / mu) / mu
            out[:, col] = z * self._exp(rest) * factor
        return out

    def derivative_at_nodes(self) -> np.ndarray:
        """S'(lambda_n) for every node, in sequence order."""
        positions = np.arange(len(self.nodes))
        return np.array([
            self.deflated(self.nodes.points[k:k + 1], [k])[0, 0] for k in positions
        ])


def generating_eval(S: GeneratingFunction, z: complex) -> complex:
    """S(z) for a single point; odd in z for symmetric node families."""
    return complex(S(complex(z)))


class BiorthogonalFamily:
    """
    Functions f_n with f_n(lambda_k) = delta_nk.

    `evaluate(z, indices)` returns the matrix [f_n(z_j)]; individual members
    are available as callables through indexing.
    """

    def __init__(self, mode: str, nodes: ComplexSequence, bandwidth: float,
                 generating: Optional[GeneratingFunction] = None,
                 members: Optional[List[Callable]] = None,
                 scale: Optional[np.ndarray] = None):
        self.mode = mode
        self.nodes = nodes
        self.bandwidth = float(bandwidth)
        self.generating = generating
        self.members = members
        self.scale = np.ones(len(nodes)) if scale is None else np.asarray(scale, dtype=complex)
        self.norms: Dict[float, np.ndarray] = {}
        if generating is not None:
            self._derivatives = generating.derivative_at_nodes()
            threshold = get_settings().multiple_zero_threshold
            small = np.flatnonzero(np.abs(self._derivatives) < threshold)
            if small.size:
                n = int(small[0])
                raise MultipleZeroError(
                    f"|S'(lambda_{n})| = {abs(self._derivatives[n]):.3e} is below {threshold:g}", index=n
                )
        elif members is None or len(members) != len(nodes):
            raise InterpolationError("a supplied family needs exactly one function per node")

    def __len__(self) -> int:
        return len(self.nodes)

    def evaluate(self, z, indices: Optional[Sequence[int]] = None) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        indices = np.arange(len(self)) if indices is None else np.asarray(indices, dtype=int)
        if self.generating is not None:
            values = self.generating.deflated(z, indices) / self._derivatives[indices]
        else:
            values = np.column_stack([np.asarray(self.members[n](z), dtype=complex) for n in indices])
        return values * self.scale[indices]

    def __getitem__(self, n: int) -> Callable:
        family = self

        def member(z):
            z = np.asarray(z, dtype=complex)
            values = family.evaluate(z, [n])[:, 0]
            return values.reshape(z.shape) if z.ndim else values[0]

        member.bandwidth = self.bandwidth
        return member

    def rescaled(self, factors) -> "BiorthogonalFamily":
        """Copy with f_n multiplied by factors[n]; no longer biorthogonal unless all factors are 1."""
        clone = object.__new__(BiorthogonalFamily)
        clone.__dict__.update(self.__dict__)
        clone.scale = self.scale * np.asarray(factors, dtype=complex)
        clone.norms = {}
        return clone

    def measure_norms(self, p: float, tau: Optional[float] = None) -> np.ndarray:
        """||g_n||_p with g_n = f_n (1 + |Im lambda_n|)^(-1/p) exp(tau |Im lambda_n|)."""
        tau = self.bandwidth if tau is None else tau
        y = np.abs(self.nodes.points.imag)
        normalisation = (1.0 + y) ** (-1.0 / p) * np.exp(tau * y)
        radius = 2.0 * float(np.max(np.abs(self.nodes.points.real), initial=0.0)) + 8.0
        integrals, _, _ = line_integrals(
            lambda z: self.evaluate(z) * normalisation, self.bandwidth, 0.0, p, min_radius=radius
        )
        norms = np.atleast_1d(integrals) ** (1.0 / p)
        self.norms[p] = norms
        return norms


def biorthogonal_from_S(S: GeneratingFunction) -> BiorthogonalFamily:
    """
    f_n(z) = S(z) / (S'(lambda_n)(z - lambda_n)).

    Raises:
        MultipleZeroError: |S'(lambda_n)| below the configured threshold
    """
    # unit density of zeros gives exponential type pi
    family = BiorthogonalFamily("generated", S.nodes, math.pi, generating=S)
    logger.info(f"Built generated biorthogonal family on {len(S.nodes)} nodes")
    return family


class SincMember:
    """sinc(tau (z - lambda)/pi)."""

    def __init__(self, lam: complex, tau: float):
        self.lam = complex(lam)
        self.bandwidth = float(tau)

    def __call__(self, z):
        return np.sinc(self.bandwidth * (np.asarray(z, dtype=complex) - self.lam) / np.pi)


def sinc_family(nodes: ComplexSequence, tau: float = math.pi) -> BiorthogonalFamily:
    """Shifted sinc functions, biorthogonal on lattices of spacing pi/tau."""
    members = [SincMember(lam, tau) for lam in nodes.points]
    return BiorthogonalFamily("user-supplied", nodes, tau, members=members)


def load_family(manifest: Path, nodes: ComplexSequence) -> BiorthogonalFamily:
    """
    Read a user-supplied family: one spectrum CSV per node index.

    Raises:
        InterpolationError: indices missing or outside the node range
    """
    entries = read_family_manifest(manifest)
    expected = set(range(len(nodes)))
    if set(entries) != expected:
        missing = sorted(expected - set(entries))
        extra = sorted(set(entries) - expected)
        raise InterpolationError(f"family manifest does not match the nodes (missing {missing}, extra {extra})")
    members = [from_spectrum_file(entries[n], label=f"f_{n}") for n in range(len(nodes))]
    bandwidth = max(member.bandwidth for member in members)
    logger.info(f"Loaded supplied family of {len(members)} functions from {manifest}")
    return BiorthogonalFamily("user-supplied", nodes, bandwidth, members=members)


def biorthogonality_matrix(fam: BiorthogonalFamily, indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """M[k, n] = f_n(lambda_k) over the chosen node positions."""
    indices = np.arange(len(fam)) if indices is None else np.asarray(indices, dtype=int)
    return fam.evaluate(fam.nodes.points[indices], indices)


def validate_family(fam: BiorthogonalFamily, tol: Optional[float] = None,
                    indices: Optional[Sequence[int]] = None) -> float:
    """
    Largest deviation of the biorthogonality matrix from the identity.

    Raises:
        BiorthogonalityError: deviation above tol
    """
    tol = get_settings().biorthogonality_tolerance if tol is None else tol
    matrix = biorthogonality_matrix(fam, indices)
    deviation = float(np.max(np.abs(matrix - np.eye(len(matrix)))))
    if deviation > tol:
        raise BiorthogonalityError(f"family deviates from biorthogonality by {deviation:.3e} > {tol:g}")
    logger.debug(f"Family on {len(matrix)} nodes is biorthogonal to {deviation:.2e}")
    return deviation


class WeakInterpolationReport(NamedTuple):
    sup_norm: float
    argmax: int
    norms: np.ndarray


def weak_interpolation_report(fam: BiorthogonalFamily, tau: float, p: float) -> WeakInterpolationReport:
    """Supremum over the truncation of the normalised norms ||g_n||_p."""
    norms = fam.measure_norms(p, tau)
    k = int(np.argmax(norms))
    logger.info(f"Weak interpolation: sup ||g_n||_{p:g} = {norms[k]:.6g} at node {k}")
    return WeakInterpolationReport(float(norms[k]), k, norms)


def weak_interpolation_trend(families: Sequence[BiorthogonalFamily], tau: float, p: float) -> List[tuple]:
    """(truncation size, sup norm) for a sequence of growing truncations."""
    return [(len(fam), weak_interpolation_report(fam, tau, p).sup_norm) for fam in families]
