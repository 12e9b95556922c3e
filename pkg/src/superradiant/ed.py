"""Exact diagonalization on a truncated Fock space.

Basis ordering: mode 1 occupation slowest, then further modes, then spins
(spin 1 slowest).  Spin index 0 is the sigma_z = +1 ("up") state.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import landau
from .model import Family, ModelError, ModelSpec, PhysicalParams, physical_from_reduced

DEFAULT_CAP = 2000
FAMILY_CODES = {f: k for k, f in enumerate(Family)}
MAGIC = 0x5350545F45440001  # arbitrary tag for matrix dumps
DUMP_VERSION = 1


class DimensionError(ModelError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class HilbertSpec:
    n_max: int | tuple[int, ...]
    N: int = 1
    M: int = 1
    cap: int = DEFAULT_CAP

    @property
    def cutoffs(self) -> tuple[int, ...]:
        if isinstance(self.n_max, (int, np.integer)):
            return (int(self.n_max),) * self.M
        if len(self.n_max) != self.M:
            raise ModelError("one cutoff per mode expected")
        return tuple(int(n) for n in self.n_max)

    @property
    def boson_dims(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.cutoffs)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.boson_dims)) * 2**self.N

    def check(self) -> None:
        if min(self.cutoffs) < 0:
            raise ModelError("n_max must be nonnegative")
        if self.dimension > self.cap:
            raise DimensionError(f"dimension {self.dimension} exceeds cap {self.cap}")


# ---------------------------------------------------------------- operators

_SX = sp.csr_matrix([[0.0, 1.0], [1.0, 0.0]])
_SZ = sp.csr_matrix([[1.0, 0.0], [0.0, -1.0]])
_SP = sp.csr_matrix([[0.0, 1.0], [0.0, 0.0]])  # |up><down|
_SM = _SP.T.tocsr()


def _annihilation(n_max: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1, format="csr")


class _Ops:
    """Embeds single-site operators into the full product space."""

    def __init__(self, h: HilbertSpec):
        self.dims = list(h.boson_dims) + [2] * h.N
        self.M = h.M

    def embed(self, site: int, op) -> sp.csr_matrix:
        out = sp.identity(1, format="csr")
        for k, d in enumerate(self.dims):
            out = sp.kron(out, op if k == site else sp.identity(d, format="csr"), format="csr")
        return out

    def a(self, nu: int):
        return self.embed(nu, _annihilation(self.dims[nu] - 1))

    def spin(self, i: int, op):
        return self.embed(self.M + i, op)


def build_hamiltonian(family: Family | str, p: PhysicalParams, h: HilbertSpec) -> np.ndarray:
    """Dense real symmetric Hamiltonian matrix."""
    family = Family(family)
    p.check()
    h.check()
    if (p.N, p.M) != (h.N, h.M):
        raise ModelError("parameter shapes do not match the Hilbert space")
    ops = _Ops(h)
    dim = h.dimension
    H = sp.csr_matrix((dim, dim))
    a = [ops.a(nu) for nu in range(h.M)]
    x = [an + an.T for an in a]
    for nu in range(h.M):
        H = H + p.omega[nu] * (a[nu].T @ a[nu])
    scale = 1.0 if family is Family.XYZ else 1.0 / math.sqrt(p.N)
    g = np.asarray(p.g)
    lam = np.asarray(p.lam) if p.lam else np.ones(p.N)
    for i in range(p.N):
        H = H + p.Delta[i] * ops.spin(i, _SZ)
        if family in (Family.ANISO, Family.TC):
            sp_i, sm_i = ops.spin(i, _SP), ops.spin(i, _SM)
            ad = a[0].T
            rot = ad @ sm_i + a[0] @ sp_i
            counter = a[0] @ sm_i + ad @ sp_i
            li = 0.0 if family is Family.TC else lam[i]
            H = H + scale * g[i, 0] * (rot + li * counter)
        else:
            sx = ops.spin(i, _SX)
            for nu in range(h.M):
                H = H + scale * g[i, nu] * (x[nu] @ sx)
            if family is Family.BIASED and p.e:
                H = H + p.e[i] * sx
            if family is Family.TWO_PHOTON and p.g_prime:
                sq = a[0] @ a[0]
                H = H + (p.g_prime / p.N) * ((sq + sq.T) @ sx)
    if family is Family.XYZ:
        paulis = (_SX, None, _SZ)
        for k, J in enumerate(p.J):
            if not J:
                continue
            if k == 1:
                # sigma_y sigma_y = -(sigma+ - sigma-)(sigma+ - sigma-) is real
                d0 = ops.spin(0, _SP) - ops.spin(0, _SM)
                d1 = ops.spin(1, _SP) - ops.spin(1, _SM)
                H = H - J * (d0 @ d1)
            else:
                H = H + J * (ops.spin(0, paulis[k]) @ ops.spin(1, paulis[k]))
    out = H.toarray()
    return 0.5 * (out + out.T)


def hamiltonian_for(spec: ModelSpec, C: float, n_max: int, omega: float = 1.0, cap: int = DEFAULT_CAP):
    """Build (H, HilbertSpec, PhysicalParams) from a reduced spec at macroscopicity C."""
    p = physical_from_reduced(spec.family, spec.params, C, omega)
    h = HilbertSpec(n_max, p.N, p.M, cap)
    return build_hamiltonian(spec.family, p, h), h, p


def parity_diagonal(h: HilbertSpec) -> np.ndarray:
    """(-1)^(total photons + number of up spins) on the product basis."""
    grids = np.meshgrid(*[np.arange(d) for d in h.boson_dims], *[np.array([1, 0])] * h.N, indexing="ij")
    total = sum(grids).ravel()
    return np.where(total % 2 == 0, 1.0, -1.0)


def default_n_max(spec: ModelSpec, C: float) -> int:
    """Poisson tail estimate with a 12 sigma margin around the mean-field photon number."""
    res = landau.minimize_global(spec)
    n = C * res.total / (spec.params.N if spec.family is Family.XYZ else 1)
    return max(40, int(math.ceil(n + 12.0 * math.sqrt(n))))


def photon_scale(spec: ModelSpec, C: float) -> float:
    """Factor converting u^2 into a photon number at macroscopicity C."""
    return C / spec.params.N if spec.family is Family.XYZ else C


def mean_field_energy(spec: ModelSpec, C: float, omega: float = 1.0) -> float:
    """Energy of the best product coherent state (an upper bound on E_0)."""
    res = landau.minimize_global(spec)
    return photon_scale(spec, C) * omega * res.phi_min


# ---------------------------------------------------------------- spectra


@dataclass
class SpectrumResult:
    energies: np.ndarray
    states: np.ndarray  # columns
    photon_number: np.ndarray  # (k, M)
    parity: np.ndarray  # (k,)
    distribution: np.ndarray  # ground state, shape boson_dims + (2**N,)
    Z_beta: float | None = None


def eigensolve_lowest(matrix: np.ndarray, k: int = 1, h: HilbertSpec | None = None, rtol: float = 1e-8) -> SpectrumResult:
    """Lowest k eigenpairs by dense symmetric (LAPACK) reduction."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ModelError("square matrix expected")
    if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ModelError("matrix is not symmetric")
    n = m.shape[0]
    k = min(k, n)
    kk = min(k + 1, n)  # one extra level to see clusters straddling the cut
    try:
        w, v = scipy.linalg.eigh(m, subset_by_index=[0, kk - 1], driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(str(exc)) from exc
    norm = float(np.abs(m).sum(axis=1).max()) or 1.0
    res = np.linalg.norm(m @ v - v * w, axis=0)
    if np.any(res > rtol * norm):
        raise ConvergenceError(f"eigenpair residual {res.max():.3e} above tolerance")
    if h is None:
        h = HilbertSpec(n // 2 - 1, 1, 1, cap=max(n, DEFAULT_CAP))
    if h.dimension == n:
        v = _parity_resolve(w, v, parity_diagonal(h), 1e-10 * norm)
    w, v = w[:k], v[:, :k]
    obs = [observables(v[:, j], h) for j in range(k)]
    return SpectrumResult(
        energies=w,
        states=v,
        photon_number=np.array([o[0] for o in obs]),
        parity=np.array([o[1] for o in obs]),
        distribution=obs[0][2],
    )


def _parity_resolve(w, v, par, tol):
    """Rotate numerically degenerate clusters onto parity eigenstates, +1 first.

    Tunnel splittings deep in the superradiant phase fall below double
    precision, so the solver returns arbitrary mixtures of the two parity
    sectors.  The even state comes first, continuing the weak-coupling
    ground state without level crossings.
    """
    v = v.copy()
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            blk = v[:, start:stop]
            pm = blk.T @ (par[:, None] * blk)
            ev, rot = np.linalg.eigh(0.5 * (pm + pm.T))
            v[:, start:stop] = blk @ rot[:, ::-1]
        start = stop
    return v


def observables(state: np.ndarray, h: HilbertSpec):
    """(photon numbers per mode, parity expectation, joint distribution P(n..., spins))."""
    psi = np.asarray(state)
    nrm = float(np.vdot(psi, psi).real)
    if abs(nrm - 1.0) > 1e-8:
        raise ModelError(f"state norm {math.sqrt(nrm):.10f} deviates from 1")
    prob = (np.abs(psi) ** 2).reshape(*h.boson_dims, 2**h.N)
    photons = []
    for nu, d in enumerate(h.boson_dims):
        axes = tuple(k for k in range(prob.ndim) if k != nu)
        photons.append(float(np.arange(d) @ prob.sum(axis=axes)))
    parity = float(parity_diagonal(h) @ prob.ravel())
    return np.array(photons), parity, prob


def log_partition_function(matrix_or_energies, beta: float) -> float:
    """log Tr exp(-beta H) using the ground-shift factorization."""
    e = np.asarray(matrix_or_energies, dtype=float)
    if e.ndim == 2:
        e = scipy.linalg.eigvalsh(e)
    e0 = float(e.min())
    return -beta * e0 + math.log(float(np.sum(np.exp(-beta * (e - e0)))))


def partition_function(matrix_or_energies, beta: float) -> float:
    return math.exp(log_partition_function(matrix_or_energies, beta))


# ---------------------------------------------------------------- truncation


@dataclass(frozen=True)
class TruncationReport:
    schedule: tuple[int, ...]
    values: tuple[float, ...]
    converged: bool
    n_max: int


def truncation_study(
    family: Family | str,
    p: PhysicalParams,
    observable: Callable[[SpectrumResult], float],
    schedule: Sequence[int],
    rtol: float = 1e-6,
    cap: int = DEFAULT_CAP,
    strict: bool = True,
) -> TruncationReport:
    """Evaluate an observable along increasing cutoffs until two successive values agree."""
    vals: list[float] = []
    used: list[int] = []
    for n in schedule:
        h = HilbertSpec(n, p.N, p.M, cap)
        res = eigensolve_lowest(build_hamiltonian(family, p, h), 1, h)
        vals.append(float(observable(res)))
        used.append(n)
        if len(vals) > 1 and abs(vals[-1] - vals[-2]) <= rtol * max(abs(vals[-1]), 1e-300):
            return TruncationReport(tuple(used), tuple(vals), True, used[-2])
        if len(vals) > 1 and vals[-1] == vals[-2]:
            return TruncationReport(tuple(used), tuple(vals), True, used[-2])
    if strict:
        raise ConvergenceError(f"observable not converged up to n_max={used[-1] if used else None}")
    return TruncationReport(tuple(used), tuple(vals), False, used[-1] if used else 0)


def photon_number_observable(res: SpectrumResult) -> float:
    return float(res.photon_number[0].sum())


# ---------------------------------------------------------------- matrix dumps

_HEADER = struct.Struct("<8q")


def dump_matrix(path, matrix: np.ndarray, family: Family | str, h: HilbertSpec) -> None:
    """Write header (magic, version, rows, cols, family code, n_max, N, M) then row-major doubles."""
    m = np.ascontiguousarray(matrix, dtype="<f8")
    head = _HEADER.pack(MAGIC, DUMP_VERSION, m.shape[0], m.shape[1], FAMILY_CODES[Family(family)], max(h.cutoffs), h.N, h.M)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(m.tobytes(order="C"))


def load_matrix(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, rows, cols, code, n_max, N, M = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != DUMP_VERSION:
        raise ModelError("not a matrix dump")
    m = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(rows, cols)
    return m.copy(), list(Family)[code], HilbertSpec(n_max, N, M, cap=max(rows, DEFAULT_CAP))
