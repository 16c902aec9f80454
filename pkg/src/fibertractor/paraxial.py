"""Paraxial estimate of mode-coupling coefficients for a spherical bead in
a square hard-wall waveguide.

The bead is replaced by a thin phase screen for the transmitted field and
by a first-order (Born) volume integral for the reflected field; both are
projected onto the guided modes.  Lengths are in units of the vacuum
wavelength unless ``wavelength`` is set otherwise.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DomainError, TwoModeModelInvalid
from .scatter import GeneralFourPortParams, ScatterMatrix, SimpleFourPortParams, build_general_four_port

DEFAULT_ORDERS = tuple((m, 1) for m in range(1, 8))
DEFAULT_PAIR = ((1, 1), (3, 1))
DEFAULT_RESOLUTION = (96, 192)
MAX_TWO_MODE_LOSS = 0.5
WEAK_CONTRAST = 0.5


@dataclass(frozen=True)
class WaveguideSpec:
    a: float
    n0: float = 1.0
    wavelength: float = 1.0
    mode_orders: tuple = DEFAULT_ORDERS

    def __post_init__(self):
        if self.a <= 0 or self.n0 <= 0 or self.wavelength <= 0:
            raise DomainError("waveguide side, index and wavelength must be positive")
        object.__setattr__(self, "mode_orders", tuple(tuple(int(v) for v in o) for o in self.mode_orders))

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength


@dataclass(frozen=True)
class BeadSpec:
    radius: float
    index: float
    center: tuple | None = None  # None puts the bead on the guide axis

    def __post_init__(self):
        if self.radius < 0:
            raise DomainError(f"radius must be non-negative, got {self.radius}")

    def center_in(self, spec: WaveguideSpec) -> tuple[float, float]:
        if self.center is None:
            return spec.a / 2, spec.a / 2
        return float(self.center[0]), float(self.center[1])

    def check_inside(self, spec: WaveguideSpec):
        for c in self.center_in(spec):
            if c - self.radius < 0 or c + self.radius > spec.a:
                raise DomainError(
                    f"bead of radius {self.radius} at {self.center_in(spec)} leaves the guide [0, {spec.a}]^2")


@dataclass(frozen=True)
class ModeSet:
    """Guided hard-wall modes ``(2/a) sin(mx pi x/a) sin(my pi y/a)``."""

    a: float
    orders: tuple
    beta: np.ndarray

    def __len__(self):
        return len(self.orders)

    def index(self, order) -> int:
        return self.orders.index(tuple(order))

    def values(self, x, y) -> np.ndarray:
        """Mode functions at points ``(x, y)``; shape ``(n_modes, *x.shape)``."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        mx = np.array([o[0] for o in self.orders]).reshape((-1,) + (1,) * x.ndim)
        my = np.array([o[1] for o in self.orders]).reshape((-1,) + (1,) * x.ndim)
        return (2 / self.a) * np.sin(mx * np.pi * x / self.a) * np.sin(my * np.pi * y / self.a)


def guided_modes(spec: WaveguideSpec) -> ModeSet:
    """Keep the requested orders that propagate (real, positive beta)."""
    kn = spec.n0 * spec.k0
    orders, beta = [], []
    for mx, my in spec.mode_orders:
        b2 = kn**2 - (mx * np.pi / spec.a) ** 2 - (my * np.pi / spec.a) ** 2
        if b2 > 0:
            orders.append((mx, my))
            beta.append(np.sqrt(b2))
    if not orders:
        raise DomainError(f"no guided modes for a={spec.a}, n0={spec.n0}")
    return ModeSet(spec.a, tuple(orders), np.array(beta))


def chord_length(bead: BeadSpec, spec: WaveguideSpec, x, y) -> np.ndarray:
    x0, y0 = bead.center_in(spec)
    rho2 = (np.asarray(x) - x0) ** 2 + (np.asarray(y) - y0) ** 2
    return 2 * np.sqrt(np.maximum(bead.radius**2 - rho2, 0.0))


def accumulated_phase(bead: BeadSpec, spec: WaveguideSpec, x, y) -> np.ndarray:
    """Phase picked up by a paraxial ray crossing the bead at ``(x, y)``.

    ``(k0 / 2 n0) (n**2 - n0**2) L`` with ``L`` the chord length through the
    sphere; this tends to ``k0 (n - n0) L`` for weak contrast.
    """
    return spec.k0 / (2 * spec.n0) * (bead.index**2 - spec.n0**2) * chord_length(bead, spec, x, y)


def _disk_quadrature(bead: BeadSpec, spec: WaveguideSpec, resolution):
    """Nodes and weights covering the bead's transverse disk.

    Radius ``rho = R sin(alpha)`` makes the chord length ``2 R cos(alpha)``
    smooth, so Gauss-Legendre in alpha and the periodic trapezoid rule in
    the azimuth both converge spectrally.
    """
    n_r, n_t = resolution
    xg, wg = np.polynomial.legendre.leggauss(n_r)
    alpha = np.pi / 4 * (xg + 1)
    w_alpha = np.pi / 4 * wg
    theta = 2 * np.pi * np.arange(n_t) / n_t
    R = bead.radius
    x0, y0 = bead.center_in(spec)
    rho = R * np.sin(alpha)[:, None]
    x = x0 + rho * np.cos(theta)[None, :]
    y = y0 + rho * np.sin(theta)[None, :]
    w = (R**2 * np.sin(alpha) * np.cos(alpha) * w_alpha)[:, None] * (2 * np.pi / n_t) * np.ones(n_t)
    half_chord = R * np.cos(alpha)[:, None] * np.ones(n_t)
    return x.ravel(), y.ravel(), w.ravel(), half_chord.ravel()


def transmission_coeffs(bead: BeadSpec, spec: WaveguideSpec, modes: ModeSet | None = None,
                        resolution=DEFAULT_RESOLUTION) -> np.ndarray:
    """Overlaps ``<u_m | exp(i phi) | u_n>`` of the phase-screened modes."""
    bead.check_inside(spec)
    modes = modes or guided_modes(spec)
    t = np.eye(len(modes), dtype=complex)
    if bead.radius == 0 or bead.index == spec.n0:
        return t
    x, y, w, hc = _disk_quadrature(bead, spec, resolution)
    u = modes.values(x, y)
    phase = spec.k0 / (2 * spec.n0) * (bead.index**2 - spec.n0**2) * 2 * hc
    kernel = w * np.expm1(1j * phase)
    return t + (u * kernel) @ u.T


def reflection_coeffs(bead: BeadSpec, spec: WaveguideSpec, modes: ModeSet | None = None,
                      resolution=DEFAULT_RESOLUTION) -> np.ndarray:
    """First-order backscattering amplitudes between guided modes.

    ``r_mn = i k0^2 / (2 sqrt(beta_m beta_n)) (n^2 - n0^2)
    * int d^2r u_m u_n int dz exp(i (beta_m + beta_n) z)``, the z integral
    running along the chord through the bead.
    """
    bead.check_inside(spec)
    modes = modes or guided_modes(spec)
    n = len(modes)
    if bead.radius == 0 or bead.index == spec.n0:
        return np.zeros((n, n), dtype=complex)
    if abs(bead.index - spec.n0) > WEAK_CONTRAST:
        warnings.warn(
            f"index contrast {abs(bead.index - spec.n0):.3g} exceeds {WEAK_CONTRAST}; "
            "the Born reflection estimate is unreliable", RuntimeWarning, stacklevel=2)
    x, y, w, hc = _disk_quadrature(bead, spec, resolution)
    u = modes.values(x, y)
    K = modes.beta[:, None] + modes.beta[None, :]
    # int_{-h}^{h} exp(iKz) dz = 2 sin(K h) / K
    zint = 2 * np.sin(K[:, :, None] * hc[None, None, :]) / K[:, :, None]
    overlap = np.einsum("mp,np,mnp->mn", u * w, u, zint)
    pref = 1j * spec.k0**2 / (2 * np.sqrt(np.outer(modes.beta, modes.beta)))
    return pref * (bead.index**2 - spec.n0**2) * overlap


def distorted_mode(bead: BeadSpec, spec: WaveguideSpec, order, x, y) -> np.ndarray:
    """Mode ``order`` right after the phase screen, at points ``(x, y)``."""
    modes = ModeSet(spec.a, (tuple(order),), np.zeros(1))
    return modes.values(x, y)[0] * np.exp(1j * accumulated_phase(bead, spec, x, y))


def reflected_mode(bead: BeadSpec, spec: WaveguideSpec, order, x, y) -> np.ndarray:
    """Local first-order reflected field of mode ``order`` (before projection)."""
    modes = guided_modes(WaveguideSpec(spec.a, spec.n0, spec.wavelength, (tuple(order),)))
    beta = modes.beta[0]
    L = chord_length(bead, spec, x, y)
    zint = np.sin(beta * L) / beta
    pref = 1j * spec.k0**2 / (2 * beta) * (bead.index**2 - spec.n0**2)
    return pref * modes.values(x, y)[0] * zint


@dataclass(frozen=True)
class CouplingEstimate:
    """Transmission and reflection overlaps over the retained modes."""

    orders: tuple
    t_matrix: np.ndarray
    r_matrix: np.ndarray
    pair: tuple = DEFAULT_PAIR

    def coefficient(self, kind: str, m, n) -> complex:
        mat = self.t_matrix if kind == "t" else self.r_matrix
        return complex(mat[self.orders.index(tuple(m)), self.orders.index(tuple(n))])

    @property
    def loss_fraction(self) -> float:
        """Power of the first pair mode not accounted for by self-transmission,
        cross-transmission and cross-reflection within the pair."""
        m1, m2 = self.pair
        kept = (abs(self.coefficient("t", m1, m1)) ** 2 + abs(self.coefficient("t", m1, m2)) ** 2
                + abs(self.coefficient("r", m1, m2)) ** 2)
        return float(min(max(1.0 - kept, 0.0), 1.0))


def estimate_coupling(bead: BeadSpec, spec: WaveguideSpec, pair=DEFAULT_PAIR,
                      resolution=DEFAULT_RESOLUTION) -> CouplingEstimate:
    modes = guided_modes(spec)
    for o in pair:
        if tuple(o) not in modes.orders:
            raise DomainError(f"target mode {o} is not among the guided modes {modes.orders}")
    t = transmission_coeffs(bead, spec, modes, resolution)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore" if abs(bead.index - spec.n0) <= WEAK_CONTRAST else "default")
        r = reflection_coeffs(bead, spec, modes, resolution)
    return CouplingEstimate(modes.orders, t, r, tuple(tuple(o) for o in pair))


class TwoModeEstimate(NamedTuple):
    params: SimpleFourPortParams
    t: float
    loss_fraction: float
    renormalized: bool

    def scatter_matrix(self) -> ScatterMatrix:
        """Symmetric bead with the measured self-transmission, tagged lossy
        unless the estimate was renormalized."""
        p = self.params
        if self.renormalized:
            return build_general_four_port(GeneralFourPortParams.from_simple(p))[0]
        g = GeneralFourPortParams.from_simple(p)
        g = GeneralFourPortParams(**{**g.__dict__, "t11": self.t, "t22": self.t})
        m, _ = build_general_four_port(g)
        return ScatterMatrix(m.entries, loss_fraction=self.loss_fraction, source=g)


def to_scatter_params(est: CouplingEstimate, renormalize: bool = False) -> TwoModeEstimate:
    """Reduce an estimate to the two-mode bead model.

    Raises :class:`TwoModeModelInvalid` when more than half of the power
    leaves the target pair.
    """
    m1, m2 = est.pair
    t11 = est.coefficient("t", m1, m1)
    t12c = est.coefficient("t", m1, m2)
    t, t12, r12 = abs(t11), abs(t12c), abs(est.coefficient("r", m1, m2))
    phi = float(np.angle(t12c) - np.angle(t11)) if t12 > 0 else 0.0
    kept = t * t + t12 * t12 + r12 * r12
    loss = max(0.0, 1.0 - kept)
    if loss > MAX_TWO_MODE_LOSS:
        raise TwoModeModelInvalid(
            f"two-mode model invalid: {loss:.3f} of the power leaves modes {m1} and {m2}")
    if renormalize:
        scale = 1 / np.sqrt(kept)
        t, t12, r12 = t * scale, min(t12 * scale, 1.0), r12 * scale
        p = SimpleFourPortParams(t12, min(r12, np.sqrt(max(0.0, 1 - t12 * t12))), phi)
        return TwoModeEstimate(p, float(t), 0.0, True)
    return TwoModeEstimate(SimpleFourPortParams(t12, r12, phi), float(t), float(loss), False)
