"""Pinching channels: energy pinching, Schur pinching, coarse two-block pinching.

Includes the mixture-of-energy-conserving-unitaries realization and the
quantitative pinching inequality / relative-entropy loss checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from thermoflux.core import (
    DensityMatrix,
    DimensionMismatchError,
    HamiltonianOperator,
    ThermalContext,
    _check_cap,
    _entries,
    relative_entropy,
)
from thermoflux.schur import SchurBasis, build_schur_basis

PROJ_TOL = 1e-10


@dataclass(frozen=True)
class ProjectorFamily:
    """A complete family of mutually orthogonal Hermitian projectors."""

    dim: int
    projectors: tuple
    labels: tuple = None  # optional (diagram rows or None, energy Fraction) per projector

    def __post_init__(self):
        projs = tuple(np.asarray(p, dtype=complex) for p in self.projectors)
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for p in projs:
            if p.shape != (self.dim, self.dim):
                raise DimensionMismatchError("projector shape mismatch")
            if np.max(np.abs(p - p.conj().T)) > PROJ_TOL:
                raise ValueError("projector not Hermitian")
            if np.max(np.abs(p @ p - p)) > PROJ_TOL:
                raise ValueError("projector not idempotent")
            total += p
        if np.max(np.abs(total - np.eye(self.dim))) > PROJ_TOL:
            raise ValueError("projector family incomplete")
        for i in range(len(projs)):
            for j in range(i + 1, len(projs)):
                if np.max(np.abs(projs[i] @ projs[j])) > PROJ_TOL:
                    raise ValueError("projectors not mutually orthogonal")
        object.__setattr__(self, "projectors", projs)

    def __len__(self) -> int:
        return len(self.projectors)

    def commutes_with(self, h: np.ndarray, tol: float = PROJ_TOL) -> bool:
        return all(np.max(np.abs(p @ h - h @ p)) <= tol for p in self.projectors)


@dataclass(frozen=True)
class PinchingChannel:
    family: ProjectorFamily
    kind: str  # energy | schur | coarse

    @property
    def dim(self) -> int:
        return self.family.dim

    def __call__(self, rho):
        return apply(self, rho)


def apply(channel: PinchingChannel, rho):
    """sum_j Pi_j rho Pi_j; trace preserving."""
    r = _entries(rho)
    if r.shape[0] != channel.dim:
        raise DimensionMismatchError(f"state dim {r.shape[0]} vs channel dim {channel.dim}")
    out = np.zeros_like(r, dtype=complex)
    for p in channel.family.projectors:
        out += p @ r @ p
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out)
    return out


def energy_pinching(ctx: ThermalContext, n: int) -> PinchingChannel:
    """One diagonal projector per distinct total energy of H^{x n} (exact grouping)."""
    ham = HamiltonianOperator(ctx, n)
    dim = ham.dim
    groups = ham.energy_groups()
    projs = []
    labels = []
    for e in sorted(groups):
        p = np.zeros((dim, dim))
        idx = groups[e]
        p[idx, idx] = 1.0
        projs.append(p)
        labels.append((None, e))
    return PinchingChannel(
        family=ProjectorFamily(dim=dim, projectors=tuple(projs), labels=tuple(labels)),
        kind="energy",
    )


def schur_pinching(ctx: ThermalContext, n: int, basis: SchurBasis = None) -> PinchingChannel:
    """Pinching onto the energy eigenspaces of H_lambda (x) I within each Schur block."""
    if basis is None:
        basis = build_schur_basis(n, ctx.dim)
    if basis.n != n or basis.d != ctx.dim:
        raise DimensionMismatchError("basis does not match (n, d)")
    dim = basis.dim
    projs = []
    labels = []
    for b in basis.blocks:
        energies = b.energy_labels(ctx)
        for e in sorted(set(energies)):
            p = np.zeros((dim, dim))
            for i, ei in enumerate(energies):
                if ei == e:
                    for t in range(b.sym_dim):
                        v = b.copies[:, i, t]
                        p += np.outer(v, v)
            projs.append(p)
            labels.append((b.diagram.rows, e))
    bound = (n + 1) ** (2 * (ctx.dim - 1))
    if len(projs) > bound:
        raise RuntimeError(f"projector count {len(projs)} exceeds bound {bound}")
    return PinchingChannel(
        family=ProjectorFamily(dim=dim, projectors=tuple(projs), labels=tuple(labels)),
        kind="schur",
    )


def coarse_pinching(d_cut: int, dim: int) -> PinchingChannel:
    """Two-block pinching {Pi_{d_cut}, I - Pi_{d_cut}} for truncation experiments."""
    if not (1 <= d_cut < dim):
        raise ValueError(f"need 1 <= d_cut < dim, got d_cut={d_cut}, dim={dim}")
    p1 = np.zeros((dim, dim))
    p1[np.arange(d_cut), np.arange(d_cut)] = 1.0
    p2 = np.eye(dim) - p1
    return PinchingChannel(
        family=ProjectorFamily(dim=dim, projectors=(p1, p2)), kind="coarse"
    )


def mixture_realization(channel: PinchingChannel) -> list:
    """Unitaries U_k = sum_j exp(2 pi i j k / J) Pi_j whose uniform mixture is the pinching."""
    projs = channel.family.projectors
    J = len(projs)
    out = []
    for k in range(1, J + 1):
        u = np.zeros((channel.dim, channel.dim), dtype=complex)
        for j, p in enumerate(projs, start=1):
            u += np.exp(2j * np.pi * j * k / J) * p
        out.append(u)
    return out


def pinching_inequality_check(channel: PinchingChannel, rho_tensor_k, multiplier: float):
    """min eigenvalue of P(rho^k) - rho^k / multiplier; passes iff >= -1e-9."""
    r = _entries(rho_tensor_k)
    pinched = apply(channel, r)
    mineig = float(np.linalg.eigvalsh(pinched - r / multiplier).min())
    return mineig, mineig >= -1e-9


def relative_entropy_loss(channel: PinchingChannel, rho_tensor_k, k: int) -> float:
    """(1/k) D(rho^k || P(rho^k)) — the per-copy pinching loss."""
    r = _entries(rho_tensor_k)
    return relative_entropy(r, apply(channel, r)) / k


def choi_matrix(channel: PinchingChannel) -> np.ndarray:
    """Choi matrix (unnormalized); PSD iff the channel is completely positive."""
    d = channel.dim
    # Choi = sum_j (I (x) P_j) |Omega><Omega| (I (x) P_j), |Omega> = sum_a |a>|a>
    omega = np.eye(d).reshape(d * d)
    choi = np.zeros((d * d, d * d), dtype=complex)
    for p in channel.family.projectors:
        v = (np.kron(np.eye(d), p) @ omega).reshape(d * d, 1)
        choi += v @ v.conj().T
    return choi


def schur_pinched_distribution(ctx: ThermalContext, k: int, rho, basis: SchurBasis = None):
    """Diagonal of rho^{x k} in the Schur eigenbasis, with per-letter exact energies.

    Returns (probs, energies): the classical super-letter statistics that the
    Schur-pinched k-copy block presents to the downstream type machinery.
    Letter order: blocks in diagram order, Weyl index major, multiplicity minor.
    """
    if basis is None:
        basis = build_schur_basis(k, ctx.dim)
    from thermoflux.core import tensor_power

    rk = _entries(tensor_power(rho, k))
    probs = []
    energies = []
    for b in basis.blocks:
        labels = b.energy_labels(ctx)
        for i in range(b.weyl_dim):
            for t in range(b.sym_dim):
                v = b.copies[:, i, t]
                probs.append(float((v.conj() @ rk @ v).real))
                energies.append(labels[i])
    probs = np.clip(np.array(probs), 0.0, None)
    probs = probs / probs.sum()
    return probs, tuple(energies)
