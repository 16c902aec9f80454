"""Per-bead scattering matrices and free propagation in a two-mode guide.

Every 4x4 scattering matrix uses the amplitude ordering

    (A1, A2, D1, D2)  ->  (C1, C2, B1, B2)

i.e. forward inputs arriving from the left (A) and backward inputs arriving
from the right (D) are mapped onto forward outputs leaving to the right (C)
and backward outputs leaving to the left (B).  Index 1 is the fundamental
mode (larger longitudinal wavenumber k1), index 2 the higher-order mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .exceptions import DomainError

USER_UNITARITY_TOL = 1e-10
BUILD_UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class ModePair:
    """Longitudinal wavenumbers of the two guided modes.

    Lengths throughout the package are measured in units of 1/k1 when the
    default ``k1=1`` is used.
    """

    k1: float = 1.0
    k2: float = 0.9
    n_medium: float = 1.0

    def __post_init__(self):
        if not (self.k1 > self.k2 > 0):
            raise DomainError(f"need k1 > k2 > 0, got k1={self.k1}, k2={self.k2}")
        if self.n_medium <= 0:
            raise DomainError(f"n_medium must be positive, got {self.n_medium}")

    @property
    def beat_period(self) -> float:
        """Distance over which the relative phase of the two modes winds by 2*pi."""
        return 2 * np.pi / (self.k1 - self.k2)

    @property
    def fast_period(self) -> float:
        """Period of the interference between counter-propagating fields."""
        return np.pi / (self.k1 + self.k2)

    @property
    def k(self) -> np.ndarray:
        return np.array([self.k1, self.k2])


def _check_unit_interval(name, value):
    if not (0.0 <= value <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class SimpleFourPortParams:
    """Symmetric bead with equal self-transmission t in both modes and only
    cross-mode reflection.  ``t`` follows from unitarity."""

    t12: float
    r12: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        _check_unit_interval("t12", self.t12)
        _check_unit_interval("r12", self.r12)
        if self.t12**2 + self.r12**2 > 1.0 + 1e-15:
            raise DomainError(
                f"t12**2 + r12**2 must not exceed 1, got {self.t12**2 + self.r12**2:.17g}"
            )

    @property
    def t(self) -> float:
        return float(np.sqrt(max(0.0, 1.0 - self.t12**2 - self.r12**2)))

    @classmethod
    def from_transmission(cls, t: float, phi: float = 0.0) -> "SimpleFourPortParams":
        """Forward-only bead with self-transmission ``t`` (``r12 = 0``)."""
        _check_unit_interval("t", t)
        return cls(t12=float(np.sqrt(1.0 - t * t)), r12=0.0, phi=phi)


@dataclass(frozen=True)
class GeneralFourPortParams:
    """All amplitudes and phases of the general symmetric 4-port bead.

    ``tij`` / ``phiij`` describe forward scattering from mode i into mode j,
    ``rij`` / ``psiij`` reflection from mode i into mode j.  The defaults give
    a transparent bead.
    """

    t11: float = 1.0
    t12: float = 0.0
    t21: float = 0.0
    t22: float = 1.0
    r11: float = 0.0
    r12: float = 0.0
    r21: float = 0.0
    r22: float = 0.0
    phi11: float = 0.0
    phi12: float = 0.0
    phi21: float = 0.0
    phi22: float = 0.0
    psi11: float = 0.0
    psi12: float = 0.0
    psi21: float = 0.0
    psi22: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if f.name[0] in "tr":
                _check_unit_interval(f.name, getattr(self, f.name))

    @classmethod
    def from_simple(cls, p: SimpleFourPortParams) -> "GeneralFourPortParams":
        # phase branches that reproduce the simplified matrix exactly
        return cls(
            t11=p.t, t22=p.t, t12=p.t12, t21=p.t12, r12=p.r12, r21=p.r12,
            phi12=p.phi, phi21=np.pi - p.phi,
            psi12=p.phi + np.pi / 2, psi21=np.pi / 2 - p.phi,
        )


@dataclass(frozen=True)
class ScatterMatrix:
    """Immutable 4x4 scattering matrix of one bead.

    ``loss_fraction`` is non-zero only for matrices explicitly tagged as
    lossy; untagged matrices are expected to be unitary.
    """

    entries: np.ndarray
    loss_fraction: float = 0.0
    source: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.shape != (4, 4):
            raise DomainError(f"scattering matrix must be 4x4, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def forward_block(self) -> np.ndarray:
        return self.entries[:2, :2]

    @property
    def deviation(self) -> float:
        return check_unitarity(self)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __matmul__(self, other):
        other = other.entries if isinstance(other, ScatterMatrix) else other
        return self.entries @ other


def check_unitarity(M) -> float:
    """Return ``||M^H M - I||`` in the max-row-sum norm."""
    m = np.asarray(M.entries if isinstance(M, ScatterMatrix) else M, dtype=complex)
    g = m.conj().T @ m - np.eye(m.shape[0])
    return float(np.abs(g).sum(axis=1).max())


def build_two_port(t: float, phi: float = 0.0) -> ScatterMatrix:
    """Forward-only mode-mixing bead, embedded in the 4-port basis.

    The forward block is ``[[t, -exp(-i phi) s], [exp(i phi) s, t]]`` with
    ``s = sqrt(1 - t**2)``; the backward block is the same matrix and there
    is no reflection.
    """
    _check_unit_interval("t", t)
    return build_four_port(SimpleFourPortParams.from_transmission(t, phi))


def build_four_port(p: SimpleFourPortParams) -> ScatterMatrix:
    t, t12, r12 = p.t, p.t12, p.r12
    e = np.exp(1j * p.phi)
    ec = e.conjugate()
    m = np.array(
        [
            [t, -ec * t12, 0.0, 1j * ec * r12],
            [e * t12, t, 1j * e * r12, 0.0],
            [0.0, 1j * ec * r12, t, -ec * t12],
            [1j * e * r12, 0.0, e * t12, t],
        ],
        dtype=complex,
    )
    return ScatterMatrix(m, source=p)


def build_general_four_port(p: GeneralFourPortParams) -> tuple[ScatterMatrix, float]:
    """Assemble the general symmetric 4-port matrix.

    Returns the matrix together with its unitarity deviation.  Nothing is
    rejected here; a caller that wants to keep a non-unitary matrix should
    re-tag it with a ``loss_fraction``.
    """
    def c(amp, phase):
        return amp * np.exp(1j * phase)

    T11, T12 = c(p.t11, p.phi11), c(p.t12, p.phi12)
    T21, T22 = c(p.t21, p.phi21), c(p.t22, p.phi22)
    R11, R12 = c(p.r11, p.psi11), c(p.r12, p.psi12)
    R21, R22 = c(p.r21, p.psi21), c(p.r22, p.psi22)
    m = np.array(
        [
            [T11, T21, R11, R21],
            [T12, T22, R12, R22],
            [R11, R21, T11, T21],
            [R12, R22, T12, T22],
        ],
        dtype=complex,
    )
    sm = ScatterMatrix(m, source=p)
    return sm, check_unitarity(sm)


def as_scatter_matrix(bead) -> ScatterMatrix:
    """Coerce bead parameters (or an existing matrix) to a ScatterMatrix."""
    if isinstance(bead, ScatterMatrix):
        return bead
    if isinstance(bead, SimpleFourPortParams):
        return build_four_port(bead)
    if isinstance(bead, GeneralFourPortParams):
        return build_general_four_port(bead)[0]
    return ScatterMatrix(np.asarray(bead, dtype=complex))


def propagation_matrix(d: float, modes: ModePair) -> np.ndarray:
    """Free propagation over distance ``d`` in the scattering basis order.

    Returns ``diag(exp(i k1 d), exp(i k2 d), exp(-i k1 d), exp(-i k2 d))``.
    """
    if d < 0:
        raise DomainError(f"propagation distance must be non-negative, got {d}")
    f1, f2 = np.exp(1j * modes.k1 * d), np.exp(1j * modes.k2 * d)
    return np.diag([f1, f2, f1.conjugate(), f2.conjugate()])
