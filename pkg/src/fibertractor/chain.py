"""Steady-state fields for a chain of beads along the guide.

Transfer matrices use the interleaved ordering

    (A1, B1, A2, B2)  ->  (C1, D1, C2, D2)

mapping all amplitudes on the left of a bead onto all amplitudes on its
right, so a chain is composed by plain matrix multiplication.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .exceptions import ConvergenceError, DomainError, SingularTransferError
from .scatter import (
    GeneralFourPortParams,
    ModePair,
    ScatterMatrix,
    SimpleFourPortParams,
    as_scatter_matrix,
)

COND_LIMIT = 1e12
BOUNDARY_RESIDUAL_TOL = 1e-10

Bead = Union[SimpleFourPortParams, GeneralFourPortParams, ScatterMatrix]


@dataclass(frozen=True)
class Injection:
    """Amplitudes injected from the left (A) and from the right (D)."""

    A1: complex = 0.0
    A2: complex = 1.0
    D1: complex = 0.0
    D2: complex = 0.0

    def __post_init__(self):
        if self.power == 0:
            raise DomainError("at least one injected amplitude must be non-zero")

    @property
    def left(self) -> np.ndarray:
        return np.array([self.A1, self.A2], dtype=complex)

    @property
    def right(self) -> np.ndarray:
        return np.array([self.D1, self.D2], dtype=complex)

    @property
    def power(self) -> float:
        return float(sum(abs(complex(a)) ** 2 for a in (self.A1, self.A2, self.D1, self.D2)))

    def scaled(self, factor: complex) -> "Injection":
        return Injection(*(factor * complex(a) for a in (self.A1, self.A2, self.D1, self.D2)))


@dataclass(frozen=True)
class ChainConfig:
    """Beads ordered along the injection direction and the gaps between them."""

    beads: tuple
    gaps: tuple
    modes: ModePair = field(default_factory=ModePair)

    def __post_init__(self):
        beads = tuple(self.beads)
        gaps = tuple(float(g) for g in self.gaps)
        if not beads:
            raise DomainError("a chain needs at least one bead")
        if len(gaps) != len(beads) - 1:
            raise DomainError(f"{len(beads)} beads need {len(beads) - 1} gaps, got {len(gaps)}")
        if any(g < 0 for g in gaps):
            raise DomainError(f"gaps must be non-negative, got {gaps}")
        object.__setattr__(self, "beads", beads)
        object.__setattr__(self, "gaps", gaps)

    @classmethod
    def identical(cls, bead: Bead, n: int, gap: float | Sequence[float] = 0.0,
                  modes: ModePair | None = None) -> "ChainConfig":
        gaps = [gap] * (n - 1) if np.isscalar(gap) else list(gap)
        return cls((bead,) * n, tuple(gaps), modes or ModePair())

    @property
    def n_beads(self) -> int:
        return len(self.beads)

    def scatter_matrices(self) -> list[ScatterMatrix]:
        return [as_scatter_matrix(b) for b in self.beads]


@dataclass(frozen=True)
class FieldState:
    """Solved amplitudes of a chain.

    ``A``, ``B``, ``C``, ``D`` have shape ``(N, 2)``: per bead, per mode.
    ``segments`` has shape ``(N + 1, 4)`` with columns (fwd1, fwd2, bwd1,
    bwd2); row 0 is the injection plane left of bead 1 and row ``s`` the
    plane immediately right of bead ``s``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    modes: ModePair
    injection: Injection

    @property
    def n_beads(self) -> int:
        return self.A.shape[0]

    @property
    def segments(self) -> np.ndarray:
        seg = np.empty((self.n_beads + 1, 4), dtype=complex)
        seg[0, :2], seg[0, 2:] = self.A[0], self.B[0]
        seg[1:, :2], seg[1:, 2:] = self.C, self.D
        return seg

    def bead(self, j: int) -> tuple:
        """(A1, A2, B1, B2, C1, C2, D1, D2) of bead ``j`` (0-based)."""
        return (*self.A[j], *self.B[j], *self.C[j], *self.D[j])

    def bead_inputs(self, j: int) -> np.ndarray:
        return np.concatenate([self.A[j], self.D[j]])

    def bead_outputs(self, j: int) -> np.ndarray:
        return np.concatenate([self.C[j], self.B[j]])


def to_transfer(M) -> np.ndarray:
    """Rearrange a scattering matrix into transfer form.

    With the scattering relation split into 2x2 blocks,
    ``C = Sff A + Sfb D`` and ``B = Sbf A + Sbb D``, solving the second for
    ``D`` gives the right-plane amplitudes in terms of the left-plane ones.
    """
    S = np.asarray(as_scatter_matrix(M).entries)
    Sff, Sfb, Sbf, Sbb = S[:2, :2], S[:2, 2:], S[2:, :2], S[2:, 2:]
    cond = float(_cond2(Sbb))
    if not cond <= COND_LIMIT:
        cond = np.inf if np.isnan(cond) else cond
        raise SingularTransferError(
            f"backward block is not invertible (condition number {cond:.3g})", cond)
    det = Sbb[0, 0] * Sbb[1, 1] - Sbb[0, 1] * Sbb[1, 0]
    Sbb_inv = np.array([[Sbb[1, 1], -Sbb[0, 1]], [-Sbb[1, 0], Sbb[0, 0]]]) / det
    # block layout (forward, backward) written straight into interleaved order
    T = np.empty((4, 4), dtype=complex)
    fwd, bwd = slice(0, 4, 2), slice(1, 4, 2)
    T[fwd, fwd] = Sff - Sfb @ Sbb_inv @ Sbf
    T[fwd, bwd] = Sfb @ Sbb_inv
    T[bwd, fwd] = -Sbb_inv @ Sbf
    T[bwd, bwd] = Sbb_inv
    return T


def transfer_closed_form(p: SimpleFourPortParams) -> np.ndarray:
    """Closed-form transfer matrix of a simplified bead, in the reflection
    phase convention where backward amplitudes carry the opposite sign.

    Equals ``U @ to_transfer(build_four_port(p)) @ U`` with
    ``U = diag(1, -1, 1, -1)``; forces and all |amplitude|**2 are identical
    in both conventions.
    """
    t, t12, r, q = p.t, p.t12, p.r12, 1.0 - p.r12**2
    if q <= 0:
        raise SingularTransferError("r12 = 1 has no transfer form", np.inf)
    e = np.exp(1j * p.phi)
    ec = e.conjugate()
    m = np.array([
        [t, 1j * r * t12, -t12 * ec, -1j * r * t * ec],
        [1j * r * t12, t, 1j * r * t * ec, t12 * ec],
        [t12 * e, -1j * e * r * t, t, -1j * r * t12],
        [1j * r * t * e, -t12 * e, -1j * r * t12, t],
    ], dtype=complex)
    return m / q


def _propagation_transfer(gaps: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Batched diagonal propagators in transfer ordering, shape (..., 4)."""
    g = gaps[..., None]
    f1, f2 = np.exp(1j * k[0] * g), np.exp(1j * k[1] * g)
    return np.concatenate([f1, f1.conj(), f2, f2.conj()], axis=-1)


def _cond2(m: np.ndarray) -> np.ndarray:
    """2-norm condition numbers of a stack of 2x2 matrices."""
    fro = (np.abs(m) ** 2).sum(axis=(-2, -1))
    det = np.abs(m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0])
    disc = np.sqrt(np.maximum(fro * fro - 4 * det * det, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return (fro + disc) / (2 * det)


def _solve_batch(transfers: np.ndarray, gaps: np.ndarray, k: np.ndarray,
                 left: np.ndarray, right: np.ndarray):
    """Solve many chains at once.

    ``transfers`` has shape (N, 4, 4), ``gaps`` shape (M, N-1).  Returns
    left- and right-plane vectors ``x`` and ``y`` of shape (M, N, 4), in
    transfer ordering.
    """
    n = transfers.shape[0]
    m = gaps.shape[0]
    props = _propagation_transfer(gaps, k)  # (M, N-1, 4)

    total = np.broadcast_to(transfers[0], (m, 4, 4)).copy()
    for j in range(1, n):
        total = transfers[j] @ (props[:, j - 1, :, None] * total)

    # rows D1, D2 of the total transfer fix the unknown left B1, B2
    a_idx, b_idx = [0, 2], [1, 3]
    Tdb = total[:, b_idx][:, :, b_idx]
    Tda = total[:, b_idx][:, :, a_idx]
    cond = _cond2(Tdb)
    bad = ~(cond <= COND_LIMIT)
    if bad.any():
        worst = float(np.nanmax(np.where(np.isnan(cond), np.inf, cond)))
        raise SingularTransferError(
            f"chain boundary-value system is singular (condition number {worst:.3g})", worst)
    rhs = right[None, :] - (Tda @ left)
    det = Tdb[:, 0, 0] * Tdb[:, 1, 1] - Tdb[:, 0, 1] * Tdb[:, 1, 0]
    b_left = np.stack([
        Tdb[:, 1, 1] * rhs[:, 0] - Tdb[:, 0, 1] * rhs[:, 1],
        Tdb[:, 0, 0] * rhs[:, 1] - Tdb[:, 1, 0] * rhs[:, 0],
    ], axis=-1) / det[:, None]

    x = np.empty((m, n, 4), dtype=complex)
    y = np.empty((m, n, 4), dtype=complex)
    x[:, 0, a_idx] = left
    x[:, 0, b_idx] = b_left
    for j in range(n):
        y[:, j] = (transfers[j] @ x[:, j, :, None])[..., 0]
        if j + 1 < n:
            x[:, j + 1] = props[:, j] * y[:, j]

    scale = max(np.abs(left).max(), np.abs(right).max(), 1.0)
    residual = np.abs(y[:, -1, b_idx] - right[None, :]).max() / scale
    if residual > BOUNDARY_RESIDUAL_TOL:
        raise SingularTransferError(
            f"right boundary condition violated after reconstruction (residual {residual:.3g})")
    return x, y


def _split(x: np.ndarray, y: np.ndarray):
    """Per-bead (A, B, C, D) arrays from transfer-ordered plane vectors."""
    return x[..., [0, 2]], x[..., [1, 3]], y[..., [0, 2]], y[..., [1, 3]]


def solve_chain(cfg: ChainConfig, inj: Injection | None = None) -> FieldState:
    """Steady-state amplitudes of every bead for the given injection."""
    inj = inj or Injection()
    transfers = np.stack([to_transfer(s) for s in cfg.scatter_matrices()])
    gaps = np.asarray(cfg.gaps, dtype=float)[None, :]
    x, y = _solve_batch(transfers, gaps, cfg.modes.k, inj.left, inj.right)
    A, B, C, D = (arr[0] for arr in _split(x, y))
    return FieldState(A, B, C, D, cfg.modes, inj)


def fabry_perot_oracle(cfg: ChainConfig, inj: Injection | None = None,
                       max_bounces: int = 10_000, tol: float = 1e-15) -> tuple[FieldState, int]:
    """Two-bead fields by explicitly summing the multiple-reflection series.

    Each bounce sends the pending light rightwards through bead 1 and bead
    2 and returns whatever bead 2 reflects to bead 1.  Summation stops once
    the returned amplitude drops below ``tol`` relative to the injection.
    Returns the field state and the number of bounces used.
    """
    inj = inj or Injection()
    if cfg.n_beads != 2:
        raise DomainError("the multiple-reflection oracle handles exactly two beads")
    S1, S2 = (np.asarray(s.entries) for s in cfg.scatter_matrices())
    k = cfg.modes.k
    fwd = np.exp(1j * k * cfg.gaps[0])

    ins = np.zeros((2, 4), dtype=complex)
    outs = np.zeros((2, 4), dtype=complex)
    pending1 = np.concatenate([inj.left, [0, 0]])
    pending2_back = inj.right.copy()
    scale = np.sqrt(inj.power)

    for bounce in range(1, max_bounces + 1):
        out1 = S1 @ pending1
        ins[0] += pending1
        outs[0] += out1
        in2 = np.concatenate([fwd * out1[:2], pending2_back])
        out2 = S2 @ in2
        ins[1] += in2
        outs[1] += out2
        pending1 = np.concatenate([[0, 0], fwd * out2[2:]])
        pending2_back = np.zeros(2, dtype=complex)
        if np.abs(pending1).max() <= tol * scale:
            A, D = ins[:, :2].copy(), ins[:, 2:].copy()
            C, B = outs[:, :2].copy(), outs[:, 2:].copy()
            return FieldState(A, B, C, D, cfg.modes, inj), bounce
    raise ConvergenceError(
        f"reflection series not converged after {max_bounces} bounces "
        f"(last increment {np.abs(pending1).max():.3g})")
