"""Longitudinal optical forces from photon-momentum balance.

Forces are expressed in units of ``c n eps0 hbar k1 / 2`` times the squared
amplitude units, i.e. the physical prefactor is divided out.  A bead
gains the momentum flux entering it from both sides minus the flux
leaving it on both sides:

    F = sum_i (k_i / k1) (|A_i|^2 + |B_i|^2 - |C_i|^2 - |D_i|^2)

Positive values push along the injection direction, negative values are
tractor forces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import FieldState
from .exceptions import DomainError
from .scatter import ModePair, SimpleFourPortParams

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ForceResult:
    """Per-bead forces normalized by the total injected power."""

    forces: np.ndarray
    total_flux_balance: float

    @property
    def total(self) -> float:
        return float(self.forces.sum())


def _balance(A, B, C, D, k):
    """Vectorized momentum balance; amplitude arrays end in a mode axis of 2."""
    w = np.asarray(k, dtype=float) / k[0]
    net = np.abs(A) ** 2 + np.abs(B) ** 2 - np.abs(C) ** 2 - np.abs(D) ** 2
    return net @ w


def particle_force(amplitudes, modes: ModePair) -> float:
    """Force on one bead.

    ``amplitudes`` is ``(A1, A2, B1, B2, C1, C2, D1, D2)``, e.g. from
    :meth:`FieldState.bead`.  No normalization by injected power is applied.
    """
    a = np.asarray(amplitudes, dtype=complex).reshape(4, 2)
    return float(_balance(a[0], a[1], a[2], a[3], modes.k))


def chain_forces(state: FieldState) -> ForceResult:
    """Per-bead forces and the boundary momentum balance of a solved chain."""
    k = state.modes.k
    power = state.injection.power
    forces = _balance(state.A, state.B, state.C, state.D, k) / power
    flux = _balance(state.A[0], state.B[0], state.C[-1], state.D[-1], k) / power
    return ForceResult(np.asarray(forces, dtype=float), float(flux))


def closed_form_2p(t: float, phi: float, A1: complex, A2: complex, modes: ModePair) -> float:
    """Force on a single forward-only bead with self-transmission ``t``.

    The interference term carries the sign implied by the forward block
    ``[[t, -exp(-i phi) s], [exp(i phi) s, t]]``; this is the ``r12 = 0``
    limit of :func:`closed_form_4p`.
    """
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"t must lie in [0, 1], got {t}")
    s = np.sqrt(1.0 - t * t)
    A1, A2 = complex(A1), complex(A2)
    interference = 2.0 * (np.exp(-1j * phi) * A1.conjugate() * A2).real
    dk = (modes.k2 - modes.k1) / modes.k1
    return float(dk * ((t * t - 1.0) * (abs(A1) ** 2 - abs(A2) ** 2) - t * s * interference))


def closed_form_4p(p: SimpleFourPortParams, A1: complex, A2: complex, modes: ModePair) -> float:
    """Force on a single bead with cross-mode transmission and reflection."""
    k1, k2 = 1.0, modes.k2 / modes.k1
    t, t12, r12 = p.t, p.t12, p.r12
    A1, A2 = complex(A1), complex(A2)
    interference = 2.0 * (A1 * A2.conjugate() * np.exp(1j * p.phi)).real
    return float(
        abs(A1) ** 2 * (k1 * (r12**2 + t12**2) + k2 * (r12**2 - t12**2))
        + abs(A2) ** 2 * (k1 * (r12**2 - t12**2) + k2 * (r12**2 + t12**2))
        + t12 * t * (k1 - k2) * interference
    )


def tractor_threshold(modes) -> float:
    """Largest ``r12**2 / t12**2`` that still gives a single-bead tractor
    force under higher-mode injection.

    Accepts a :class:`ModePair` or a ``(k1, k2)`` pair; ``k1 == k2`` is
    allowed and gives 0.
    """
    k1, k2 = (modes.k1, modes.k2) if isinstance(modes, ModePair) else map(float, modes)
    if not (k1 >= k2 > 0):
        raise DomainError(f"need k1 >= k2 > 0, got k1={k1}, k2={k2}")
    return (k1 - k2) / (k1 + k2)


def to_newtons(force: float, power: float, n_eff: float) -> float:
    """Convert a power-normalized force to newtons.

    ``power`` is the injected power in watts and ``n_eff`` the effective
    index of the fundamental mode (``k1 = n_eff * 2 pi / wavelength``): a
    photon of energy E in that mode carries momentum ``n_eff E / c``.
    """
    return force * power * n_eff / SPEED_OF_LIGHT
