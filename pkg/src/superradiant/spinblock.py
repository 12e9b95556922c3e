"""Effective spin Hamiltonians and the small dense linear algebra they need.

The two-qubit XYZ model reduces, in mean field, to the 4x4 real symmetric
operator

    h(u) = sum_j (2 gamma_j u sigma_jx + delta_j sigma_jz)
           + sum_alpha epsilon_alpha sigma_1alpha sigma_2alpha

in the product basis |uu>, |ud>, |du>, |dd> (u = sigma_z eigenvalue +1).
Its lowest eigenvalue is found with a batched cyclic Jacobi solver so that
whole u-grids are diagonalized in one call.  The module also carries the
product-state (cat) variational ground state used for the Rabi/Dicke models.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .model import Family, ModelError, ModelSpec

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
I2 = np.eye(2)
# sigma_y (x) sigma_y is real
SYSY = np.array(
    [[0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]]
)
SXSX = np.kron(SX, SX)
SZSZ = np.kron(SZ, SZ)
SX1 = np.kron(SX, I2)
SX2 = np.kron(I2, SX)
SZ1 = np.kron(SZ, I2)
SZ2 = np.kron(I2, SZ)

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 60


class DegenerateCubicWarning(RuntimeWarning):
    pass


def xyz_parts(
    gamma: Sequence[float], delta: Sequence[float], epsilon: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Split h(u) = h0 + u * v into its u-independent and linear parts."""
    g1, g2 = (float(x) for x in gamma)
    d1, d2 = (float(x) for x in delta)
    ex, ey, ez = (float(x) for x in epsilon)
    h0 = d1 * SZ1 + d2 * SZ2 + ex * SXSX + ey * SYSY + ez * SZSZ
    v = 2.0 * g1 * SX1 + 2.0 * g2 * SX2
    return h0, v


def build_h_xyz(u, gamma, delta, epsilon) -> np.ndarray:
    """h(u) as a (4, 4) array, or (..., 4, 4) for array-valued ``u``."""
    h0, v = xyz_parts(gamma, delta, epsilon)
    u = np.asarray(u, dtype=float)
    return h0 + u[..., None, None] * v


def h_from_spec(spec: ModelSpec, u) -> np.ndarray:
    r = spec.params
    return build_h_xyz(u, r.gamma[:, 0], r.delta_i, r.epsilon_alpha)


def jacobi_eigh(m: np.ndarray, vectors: bool = False):
    """Cyclic Jacobi diagonalization of real symmetric matrices.

    Accepts a single (n, n) matrix or a stack (..., n, n).  Returns the
    eigenvalues sorted ascending (and the matching eigenvectors as columns
    when ``vectors`` is true).  Row-cyclic sweep order; stops once the
    off-diagonal Frobenius norm is below 1e-14 times the matrix norm.
    """
    a = np.array(m, dtype=float, copy=True)
    single = a.ndim == 2
    if single:
        a = a[None]
    shape = a.shape
    n = shape[-1]
    a = a.reshape(-1, n, n)
    v = np.broadcast_to(np.eye(n), a.shape).copy() if vectors else None
    scale = np.sqrt(np.sum(a * a, axis=(1, 2)))
    scale = np.where(scale > 0, scale, 1.0)
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    mask = ~np.eye(n, dtype=bool)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.where(mask, a * a, 0.0), axis=(1, 2)))
        if np.all(off < JACOBI_TOL * scale):
            break
        for p, q in pairs:
            apq = a[:, p, q]
            # entries this small cannot move the spectrum; skipping them keeps theta finite
            active = np.abs(apq) > 1e-30 * scale
            if not np.any(active):
                continue
            safe = np.where(active, apq, 1.0)
            theta = (a[:, q, q] - a[:, p, p]) / (2.0 * safe)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cp, cq = a[:, :, p].copy(), a[:, :, q].copy()
            a[:, :, p] = c[:, None] * cp - s[:, None] * cq
            a[:, :, q] = s[:, None] * cp + c[:, None] * cq
            rp, rq = a[:, p, :].copy(), a[:, q, :].copy()
            a[:, p, :] = c[:, None] * rp - s[:, None] * rq
            a[:, q, :] = s[:, None] * rp + c[:, None] * rq
            if v is not None:
                vp, vq = v[:, :, p].copy(), v[:, :, q].copy()
                v[:, :, p] = c[:, None] * vp - s[:, None] * vq
                v[:, :, q] = s[:, None] * vp + c[:, None] * vq
    else:
        raise ArithmeticError("Jacobi iteration did not converge")
    w = np.diagonal(a, axis1=1, axis2=2).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    if v is not None:
        v = np.take_along_axis(v, order[:, None, :], axis=2)
    w = w.reshape(shape[:-1])
    if single:
        w = w[0]
    if not vectors:
        return w
    v = v.reshape(shape)
    if single:
        v = v[0]
    return w, v


def smallest_eigenvalue(m: np.ndarray):
    """Lowest eigenvalue of a symmetric matrix (or of each matrix in a stack)."""
    return jacobi_eigh(m)[..., 0]


def char_poly(m: np.ndarray) -> np.ndarray:
    """Coefficients of det(lambda*I - m), highest power first (Faddeev-LeVerrier)."""
    a = np.asarray(m, dtype=float)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    mk = np.zeros_like(a)
    eye = np.eye(n)
    for k in range(1, n + 1):
        mk = a @ mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ mk) / k
    return coeffs


# ---------------------------------------------------------------- cubic in w = u^2


def _bipoly_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros((p.shape[0] + q.shape[0] - 1, p.shape[1] + q.shape[1] - 1))
    for (i, j), c in np.ndenumerate(p):
        if c != 0.0:
            out[i : i + q.shape[0], j : j + q.shape[1]] += c * q
    return out


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def secular_polynomial(h0: np.ndarray, v: np.ndarray, shift: float) -> np.ndarray:
    """Bivariate coefficients c[i, j] of det(h0 - shift*I + u*v + w*I) in u^i w^j.

    Leibniz expansion over the 24 permutations with exact polynomial
    products; entries are affine in (u, w).
    """
    n = h0.shape[0]
    a0 = h0 - shift * np.eye(n)
    total = np.zeros((n + 1, n + 1))
    for perm in itertools.permutations(range(n)):
        prod = np.ones((1, 1))
        for row, col in enumerate(perm):
            entry = np.zeros((2, 2))
            entry[0, 0] = a0[row, col]
            entry[1, 0] = v[row, col]
            entry[0, 1] = 1.0 if row == col else 0.0
            prod = _bipoly_mul(prod, entry)
        total[: prod.shape[0], : prod.shape[1]] += _perm_sign(perm) * prod
    return total


@dataclass(frozen=True)
class CriticalityCubic:
    """Cubic Q(w) with w * Q(w) = det(h(sqrt(w)) - (lambda0 - w) I)."""

    coeffs: np.ndarray  # highest power first, length 4
    lambda0: float
    odd_residual: float  # size of the odd-in-u coefficients (should vanish)

    def __call__(self, w):
        return np.polyval(self.coeffs, w)


def criticality_cubic(gamma, delta, epsilon) -> CriticalityCubic:
    h0, v = xyz_parts(gamma, delta, epsilon)
    lam0 = float(smallest_eigenvalue(h0))
    c = secular_polynomial(h0, v, lam0)
    quartic = np.zeros(5)  # ascending powers of w
    odd = 0.0
    for (i, j), val in np.ndenumerate(c):
        if i + j > 4:
            continue  # total degree is at most 4
        if i % 2:
            odd = max(odd, abs(val))
            continue
        quartic[i // 2 + j] += val
    # quartic[0] = det(h0 - lambda0) vanishes; drop it
    cubic = quartic[1:][::-1]
    return CriticalityCubic(coeffs=cubic, lambda0=lam0, odd_residual=odd)


def criticality_cubic_for(spec: ModelSpec) -> CriticalityCubic:
    r = spec.params
    return criticality_cubic(r.gamma[:, 0], r.delta_i, r.epsilon_alpha)


def cubic_discriminant(coeffs: Sequence[float]) -> float:
    """Discriminant of a w^3 + b w^2 + c w + d.

    Positive: three distinct real roots; zero: repeated root; negative: one
    real root.  A vanishing leading coefficient falls back to the quadratic
    discriminant c^2 - 4 b d and emits :class:`DegenerateCubicWarning`.
    """
    a, b, c, d = (float(x) for x in coeffs)
    scale = max(abs(a), abs(b), abs(c), abs(d), 1e-300)
    if abs(a) <= 1e-14 * scale:
        warnings.warn("leading cubic coefficient vanishes", DegenerateCubicWarning, stacklevel=2)
        return c * c - 4.0 * b * d
    return 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d


# ---------------------------------------------------------------- variational states


@dataclass(frozen=True)
class VariationalState:
    alpha_min: float
    thetas: tuple[float, ...]
    parity_sector: int
    spin_z: float
    u_min: float


def spin_angles(u_min: float, gamma, delta) -> np.ndarray:
    """Angles of the spin product state, tan(theta) = b / (delta + sqrt(delta^2 + b^2)).

    Written as half of atan2(b, delta) so that negative spin energies stay
    well defined.
    """
    b = 2.0 * u_min * np.asarray(gamma, dtype=float)
    return 0.5 * np.arctan2(b, np.asarray(delta, dtype=float))


def variational_state(spec: ModelSpec, min_result, C: float | None = None) -> VariationalState:
    fam = spec.family
    r = spec.params
    product_form = fam is Family.DQR or (
        fam is Family.ANISO and all(x == 1.0 for x in r.lambda_i)
    )
    if not product_form:
        raise ModelError(f"no product-form variational state for {fam.value}")
    C = r.C if C is None else C
    if C is None:
        raise ModelError("variational state needs a finite C")
    u = float(min_result.minima[0][0])
    gamma = r.gamma[:, 0]
    delta = r.delta
    thetas = spin_angles(u, gamma, delta)
    spin_z = -float(np.mean(delta / np.sqrt(delta**2 + 4.0 * gamma**2 * u * u)))
    return VariationalState(
        alpha_min=math.sqrt(C) * u,
        thetas=tuple(float(t) for t in thetas),
        parity_sector=(-1) ** (r.N + 1),
        spin_z=spin_z,
        u_min=u,
    )


def photon_distribution_variational(vs: VariationalState, n_max: int | None = None):
    """Photon distribution of the single-spin cat state.

    Returns ``(n, p_e, p_g)``: probabilities of n photons with the spin up
    (odd n only) or down (even n only).
    """
    if len(vs.thetas) != 1:
        raise ModelError("photon distribution is defined for a single spin")
    a = vs.alpha_min**2
    if not a > 0:
        raise ModelError("cat state undefined in the normal phase (u_min = 0)")
    if n_max is None:
        n_max = int(math.ceil(a + 12.0 * math.sqrt(a) + 20))
    theta = vs.thetas[0]
    n = np.arange(n_max + 1)
    log_poisson = -a + n * math.log(a) - gammaln(n + 1)
    odd = n % 2 == 1
    with np.errstate(divide="ignore"):
        log_e = np.log(2.0 * math.sin(theta) ** 2) + log_poisson
        log_g = np.log(2.0 * math.cos(theta) ** 2) + log_poisson
    p_e = np.where(odd, np.exp(log_e), 0.0)
    p_g = np.where(~odd, np.exp(log_g), 0.0)
    return n, p_e, p_g


def cat_norm(alpha: float, thetas: Sequence[float]) -> float:
    """Norm of the unnormalized two-branch cat, with <a|-a> = exp(-2|a|^2)."""
    overlap_b = math.exp(-2.0 * alpha * alpha)
    # spin overlap of (sin t, -cos t) with (sin t, cos t) is -cos(2t)
    overlap_s = float(np.prod([-math.cos(2 * t) for t in thetas]))
    return math.sqrt(max(0.0, 1.0 - overlap_b * overlap_s))
