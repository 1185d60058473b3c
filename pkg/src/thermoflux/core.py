"""Dense complex linear algebra and entropic functionals for small multi-qudit systems.

States are immutable dense matrices, energies are exact rationals (so degeneracy
grouping is never tolerance-based), and every entropic quantity is in nats.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_TOL = 1e-10
KERNEL_TOL = 1e-12
SUPPORT_TOL = 1e-9
DEFAULT_DIM_CAP = 4096


class DimensionMismatchError(ValueError):
    pass


class DimensionCapError(ValueError):
    pass


class SupportViolationError(ValueError):
    """Raised when D(rho||sigma) = +inf: rho has mass outside supp(sigma)."""


def dim_cap() -> int:
    """Dense-dimension cap; override with THERMOFLUX_DIM_CAP."""
    return int(os.environ.get("THERMOFLUX_DIM_CAP", DEFAULT_DIM_CAP))


def _check_cap(dim: int) -> None:
    cap = dim_cap()
    if dim > cap:
        raise DimensionCapError(f"dimension {dim} exceeds cap {cap}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _validate_state(entries: np.ndarray, *, subnormalized: bool) -> np.ndarray:
    entries = np.asarray(entries, dtype=complex)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {entries.shape}")
    herm_dev = np.max(np.abs(entries - entries.conj().T))
    if herm_dev > HERMITIAN_TOL:
        raise ValueError(f"matrix not Hermitian: max |A - A^dag| = {herm_dev:g}")
    evals = np.linalg.eigvalsh(entries)
    if evals.min() < -PSD_TOL:
        raise ValueError(f"matrix not PSD: min eigenvalue {evals.min():g}")
    tr = float(entries.trace().real)
    if subnormalized:
        if not (0.0 < tr <= 1.0 + TRACE_TOL):
            raise ValueError(f"subnormalized trace must be in (0,1], got {tr:g}")
    else:
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace must be 1, got {tr:.12g}")
    return _frozen(entries)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian PSD trace-1 complex matrix."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _validate_state(self.entries, subnormalized=False))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_diagonal(cls, probs) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probs, dtype=complex)))

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal().real.copy()


@dataclass(frozen=True)
class SubnormalizedState:
    """Hermitian PSD matrix with trace in (0, 1]."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _validate_state(self.entries, subnormalized=True))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(self.entries.trace().real)

    def normalized(self) -> DensityMatrix:
        return DensityMatrix(self.entries / self.trace)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not x.is_integer():
            raise ValueError(
                f"energy {x!r} is not an exact rational; pass Fraction or int "
                "(exact energies keep degeneracy grouping exact)"
            )
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as exact rational energy")


@dataclass(frozen=True)
class ThermalContext:
    """Single-system Hamiltonian spectrum (exact rationals, sorted) plus beta.

    Derived quantities: partition function Z, E_max, Gibbs probabilities.
    """

    levels: tuple
    beta: float

    def __post_init__(self):
        levels = tuple(_as_fraction(e) for e in self.levels)
        if not levels:
            raise ValueError("at least one energy level required")
        if any(levels[i] > levels[i + 1] for i in range(len(levels) - 1)):
            raise ValueError("levels must be sorted non-decreasing")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be a finite non-negative real, got {self.beta}")
        object.__setattr__(self, "levels", levels)

    @property
    def dim(self) -> int:
        return len(self.levels)

    @property
    def e_max(self) -> Fraction:
        return self.levels[-1]

    @property
    def partition_function(self) -> float:
        return float(np.sum(np.exp(-self.beta * np.array([float(e) for e in self.levels]))))

    def gibbs_probabilities(self) -> np.ndarray:
        w = np.exp(-self.beta * np.array([float(e) for e in self.levels]))
        return w / w.sum()

    def continuity_constant(self, k: int = 1) -> float:
        """Lipschitz constant of D(.||tau^k) in trace distance: 1 + k(beta*E_max + ln Z)/sqrt(2)."""
        return 1.0 + k * (self.beta * float(self.e_max) + math.log(self.partition_function)) / math.sqrt(2.0)


@dataclass(frozen=True)
class HamiltonianOperator:
    """Non-interacting n-copy Hamiltonian H^{x n}."""

    context: ThermalContext
    copies: int = 1

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError("copies must be >= 1")
        _check_cap(self.context.dim ** self.copies)

    @property
    def dim(self) -> int:
        return self.context.dim ** self.copies

    def exact_levels(self) -> list:
        """Spectrum as exact rationals, ordered by the computational basis index."""
        d, n = self.context.dim, self.copies
        out = []
        for digits in itertools.product(range(d), repeat=n):
            out.append(sum((self.context.levels[i] for i in digits), Fraction(0)))
        return out

    def matrix(self) -> np.ndarray:
        return np.diag(np.array([float(e) for e in self.exact_levels()]))

    def energy_groups(self) -> dict:
        """Map total energy (exact Fraction) -> list of computational basis indices."""
        groups: dict = {}
        for idx, e in enumerate(self.exact_levels()):
            groups.setdefault(e, []).append(idx)
        return groups


def thermal_state(ctx: ThermalContext, copies: int = 1) -> DensityMatrix:
    """Gibbs state e^{-beta H}/Z, optionally for n non-interacting copies."""
    p = ctx.gibbs_probabilities()
    if copies == 1:
        return DensityMatrix.from_diagonal(p)
    _check_cap(ctx.dim ** copies)
    pn = p
    for _ in range(copies - 1):
        pn = np.kron(pn, p)
    return DensityMatrix.from_diagonal(pn)


def _entries(rho) -> np.ndarray:
    if isinstance(rho, (DensityMatrix, SubnormalizedState)):
        return rho.entries
    return np.asarray(rho, dtype=complex)


def _xlogx(vals: np.ndarray) -> np.ndarray:
    out = np.zeros_like(vals)
    pos = vals > KERNEL_TOL
    out[pos] = vals[pos] * np.log(vals[pos])
    return out


def relative_entropy(rho, sigma) -> float:
    """Umegaki relative entropy D(rho||sigma) = Tr[rho ln rho - rho ln sigma], in nats.

    Raises SupportViolationError when rho has mass >= 1e-9 outside supp(sigma)
    (the D = +inf case).
    """
    r = _entries(rho)
    s = _entries(sigma)
    if r.shape != s.shape:
        raise DimensionMismatchError(f"shape mismatch {r.shape} vs {s.shape}")
    rvals, rvecs = np.linalg.eigh(r)
    svals, svecs = np.linalg.eigh(s)
    # mass of rho in the kernel of sigma
    kernel = svals <= KERNEL_TOL
    if np.any(kernel):
        kvecs = svecs[:, kernel]
        mass = float(np.einsum("ij,jk,ki->", kvecs.conj().T, r, kvecs).real)
        if mass >= SUPPORT_TOL:
            raise SupportViolationError(
                f"rho has mass {mass:g} outside supp(sigma); D = +inf"
            )
    term1 = float(np.sum(_xlogx(np.clip(rvals, 0.0, None))))
    # Tr[rho ln sigma] over the support of sigma
    supp = ~kernel
    logs = np.log(svals[supp])
    overlaps = np.einsum("ij,jk->ik", r, svecs[:, supp])  # rho |v_i>
    weights = np.einsum("ji,jk->ik", svecs[:, supp].conj(), overlaps).diagonal().real
    term2 = float(np.dot(weights, logs))
    return term1 - term2


def lindblad_relative_entropy(rho, sigma) -> float:
    """Lindblad extension D_L = Tr[rho ln rho - rho ln sigma] + Tr sigma - Tr rho."""
    r = _entries(rho)
    s = _entries(sigma)
    return relative_entropy(r, s) + float(s.trace().real) - float(r.trace().real)


def fidelity_to_pure(rho, psi) -> float:
    """Squared-overlap fidelity <psi|rho|psi> against a pure target."""
    r = _entries(rho)
    v = np.asarray(psi, dtype=complex).ravel()
    if v.shape[0] != r.shape[0]:
        raise DimensionMismatchError(f"vector dim {v.shape[0]} vs matrix dim {r.shape[0]}")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"target vector not normalized: |psi| = {nrm:.12g}")
    return float((v.conj() @ r @ v).real)


def tensor_power(rho, n: int):
    """n-fold Kronecker power."""
    r = _entries(rho)
    _check_cap(r.shape[0] ** n)
    out = r
    for _ in range(n - 1):
        out = np.kron(out, r)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out)
    if isinstance(rho, SubnormalizedState):
        return SubnormalizedState(out)
    return out


def partial_trace(rho, dims, keep):
    """Trace out all subsystems not listed in keep.

    dims: tuple of subsystem dimensions; keep: iterable of subsystem indices.
    """
    r = _entries(rho)
    dims = tuple(int(d) for d in dims)
    if int(np.prod(dims)) != r.shape[0]:
        raise DimensionMismatchError(f"prod(dims)={np.prod(dims)} vs matrix dim {r.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    ns = len(dims)
    if any(k < 0 or k >= ns for k in keep):
        raise DimensionMismatchError(f"keep indices {keep} out of range for {ns} subsystems")
    t = r.reshape(dims + dims)
    # contract traced subsystems pairwise
    traced = [i for i in range(ns) if i not in keep]
    for count, i in enumerate(traced):
        axis1 = i - count
        axis2 = axis1 + (ns - count)
        t = np.trace(t, axis1=axis1, axis2=axis2)
    dkeep = int(np.prod([dims[k] for k in keep])) if keep else 1
    out = t.reshape(dkeep, dkeep)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out)
    if isinstance(rho, SubnormalizedState):
        return SubnormalizedState(out)
    return out


def trace_distance(rho, sigma) -> float:
    """(1/2)||rho - sigma||_1 ... returned as the full l1 norm of the difference.

    Note: the continuity bound uses the unhalved trace norm ||rho1 - rho2||_1.
    """
    diff = _entries(rho) - _entries(sigma)
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
