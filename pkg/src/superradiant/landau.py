"""Mean-field Landau potentials, their gradients, and global minimization.

All potentials are per spin and per reference spin energy, as functions of
the rescaled coherent amplitude(s) u (and v).  For the product-form families
every spin i sees an effective field of magnitude r_i(u) and

    phi(u) = |u|^2 - (1/N) sum_i ln[2 cosh(bD r_i(u))] / bD,

with bD = beta*Delta; at bD = inf the logarithm is replaced by r_i.  The
two-qubit XYZ potential is u^2 plus the lowest eigenvalue of a 4x4 block.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from . import spinblock
from .model import Family, ModelError, ModelSpec, require_valid

LN2 = math.log(2.0)
DEGENERACY_TOL = 1e-13  # mirror-image minima agree to rounding; second-order gaps scale as (t - t_c)^2


def ln2cosh(x):
    """ln(2 cosh x) without overflow."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax))


def _free(r, bD):
    if math.isinf(bD):
        return r
    return ln2cosh(bD * r) / bD


def _tanh(r, bD):
    if math.isinf(bD):
        return np.ones_like(r)
    return np.tanh(bD * r)


def _as_points(spec: ModelSpec, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    k = spec.arity
    if k == 1 and (u.ndim == 0 or u.shape[-1] != 1):
        u = u[..., None]
    if u.shape[-1] != k:
        raise ModelError(f"{spec.family.value} potential takes {k} coordinates, got {u.shape[-1]}")
    if not np.all(np.isfinite(u)):
        raise ModelError("order-parameter coordinates must be finite")
    return u


def _fields(spec: ModelSpec, u: np.ndarray):
    """Field magnitudes r (..., N) and d(r^2)/du (..., N, arity)."""
    r = spec.params
    fam = spec.family
    delta = r.delta
    g = r.gamma
    if fam is Family.DQR:
        x = u[..., 0:1]
        q = 2.0 * g[:, 0] * x
        r2 = delta**2 + q**2
        dr2 = (2.0 * q * 2.0 * g[:, 0])[..., None]
    elif fam is Family.BIASED:
        x = u[..., 0:1]
        q = np.asarray(r.epsilon_bias_i) + 2.0 * g[:, 0] * x
        r2 = delta**2 + q**2
        dr2 = (2.0 * q * 2.0 * g[:, 0])[..., None]
    elif fam in (Family.ANISO, Family.TC):
        lam = np.asarray(r.lambda_i)
        cu = (g[:, 0] * (1.0 + lam)) ** 2
        cv = (g[:, 0] * (1.0 - lam)) ** 2
        x, y = u[..., 0:1], u[..., 1:2]
        r2 = delta**2 + cu * x**2 + cv * y**2
        dr2 = np.stack([2.0 * cu * x, 2.0 * cv * y], axis=-1)
    elif fam is Family.TWO_PHOTON:
        gp = r.gamma_prime
        x, y = u[..., 0:1], u[..., 1:2]
        q = 2.0 * g[:, 0] * x + 2.0 * gp * (x**2 - y**2)
        r2 = delta**2 + q**2
        dr2 = np.stack([2.0 * q * (2.0 * g[:, 0] + 4.0 * gp * x), 2.0 * q * (-4.0 * gp * y)], axis=-1)
    elif fam is Family.MULTIMODE:
        s = u @ g.T  # (..., N)
        r2 = delta**2 + 4.0 * s**2
        dr2 = 8.0 * s[..., None] * g
    else:
        raise ModelError(f"no product-form fields for {fam.value}")
    return np.sqrt(r2), dr2


def _xyz_levels(spec: ModelSpec, x: np.ndarray, vectors: bool = False):
    return spinblock.jacobi_eigh(spinblock.h_from_spec(spec, x), vectors=vectors)


def phi(spec: ModelSpec, u):
    """Landau potential at ``u`` (scalar for arity 1, or (..., arity) arrays)."""
    pts = _as_points(spec, u)
    bD = spec.params.beta_Delta
    sq = np.sum(pts**2, axis=-1)
    if spec.family is Family.XYZ:
        levels = _xyz_levels(spec, pts[..., 0])
        if math.isinf(bD):
            val = sq + levels[..., 0]
        else:
            e0 = levels[..., 0]
            val = sq + e0 - np.log(np.sum(np.exp(-bD * (levels - e0[..., None])), axis=-1)) / bD
    else:
        rr, _ = _fields(spec, pts)
        val = sq - np.mean(_free(rr, bD), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def grad_phi(spec: ModelSpec, u):
    """Gradient of :func:`phi`; same shape as the (broadcast) input points.

    XYZ uses the Hellmann-Feynman form (Boltzmann-weighted at finite bD).
    Where a field magnitude vanishes the right-sided derivative is returned.
    """
    pts = _as_points(spec, u)
    bD = spec.params.beta_Delta
    if spec.family is Family.XYZ:
        w, vec = _xyz_levels(spec, pts[..., 0], vectors=True)
        _, v = spinblock.xyz_parts(spec.params.gamma[:, 0], spec.params.delta_i, spec.params.epsilon_alpha)
        expect = np.einsum("...ik,ij,...jk->...k", vec, v, vec)
        if math.isinf(bD):
            d = expect[..., 0]
        else:
            p = np.exp(-bD * (w - w[..., :1]))
            d = np.sum(p * expect, axis=-1) / np.sum(p, axis=-1)
        out = 2.0 * pts + d[..., None]
    else:
        rr, dr2 = _fields(spec, pts)
        zero = rr == 0.0
        safe = np.where(zero, 1.0, rr)
        dr = dr2 / (2.0 * safe[..., None])
        if np.any(zero):
            # one-sided: r ~ sqrt(c) |x| near a vanishing field
            h = 1e-7
            rr_h, _ = _fields(spec, pts + h)
            dr = np.where(zero[..., None], ((rr_h - rr) / h)[..., None], dr)
        out = 2.0 * pts - np.mean(_tanh(rr, bD)[..., None] * dr, axis=-2)
    if spec.arity == 1 and np.ndim(u) == 0:
        return float(out[..., 0])
    return out


def origin_curvature(spec: ModelSpec, axis: int = 0) -> float:
    """Second derivative of phi at the origin along coordinate ``axis``.

    Product families use the closed form; XYZ uses second-order perturbation
    theory on h(0) (finite differences if the ground level is degenerate).
    """
    r = spec.params
    bD = r.beta_Delta
    fam = spec.family
    if fam is Family.XYZ:
        w, vec = spinblock.jacobi_eigh(spinblock.h_from_spec(spec, 0.0), vectors=True)
        _, v = spinblock.xyz_parts(r.gamma[:, 0], r.delta_i, r.epsilon_alpha)
        if math.isinf(bD):
            if w[1] - w[0] < 1e-9:
                h = 1e-4
                return (phi(spec, h) + phi(spec, -h) - 2 * phi(spec, 0.0)) / h**2
            coup = vec[:, 0] @ v @ vec[:, 1:]
            return 2.0 - 2.0 * float(np.sum(coup**2 / (w[1:] - w[0])))
        h = 1e-4
        return (phi(spec, h) + phi(spec, -h) - 2 * phi(spec, 0.0)) / h**2
    delta = np.abs(r.delta)
    g = r.gamma
    if fam in (Family.DQR, Family.BIASED, Family.TWO_PHOTON):
        coef = 4.0 * g[:, 0] ** 2
        if fam is Family.BIASED and any(r.epsilon_bias_i):
            raise ModelError("biased potential has no extremum at the origin")
    elif fam in (Family.ANISO, Family.TC):
        lam = np.asarray(r.lambda_i)
        coef = (g[:, 0] * (1.0 + lam)) ** 2 if axis == 0 else (g[:, 0] * (1.0 - lam)) ** 2
    elif fam is Family.MULTIMODE:
        coef = 4.0 * g[:, axis] ** 2
    else:
        raise ModelError(fam.value)
    if np.any(delta == 0.0):
        return -math.inf if np.any(coef[delta == 0.0] > 0) else 2.0
    return 2.0 - float(np.mean(_tanh(delta, bD) * coef / delta))


# ---------------------------------------------------------------- minimization


@dataclass(frozen=True)
class ScanBudget:
    points: int = 2001
    tol: float = 1e-10
    max_iter: int = 500
    reduce: bool = True


@dataclass(frozen=True)
class MinResult:
    minima: tuple[tuple[float, ...], ...]
    phi_min: float
    order_parameter: tuple[float, ...]
    degenerate: str | None = None
    multiplicity: int = 1
    converged: bool = True
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def total(self) -> float:
        return float(sum(self.order_parameter))

    @property
    def u(self) -> np.ndarray:
        return np.asarray(self.minima[0])


def scan_radius(spec: ModelSpec) -> float:
    """Half-width of the search box; provably contains every global minimum."""
    r = spec.params
    fam = spec.family
    bD = r.beta_Delta
    heat = 0.0 if math.isinf(bD) else LN2 / bD
    g = np.abs(r.gamma)
    base = 1.0 + 2.0 * float(np.sum(g))
    if fam is Family.XYZ:
        slope = float(np.sum(g[:, 0]))
        heat = 0.0 if math.isinf(bD) else 2.0 * math.log(4.0) / bD
        bound = slope + math.sqrt(slope**2 + heat)
    else:
        if fam in (Family.DQR, Family.BIASED, Family.TWO_PHOTON):
            s = 2.0 * g[:, 0]
        elif fam in (Family.ANISO, Family.TC):
            lam = np.abs(np.asarray(r.lambda_i))
            s = g[:, 0] * (1.0 + lam)
        else:
            s = 2.0 * np.sqrt(np.sum(g**2, axis=1))
        slope = float(np.mean(s)) / 2.0
        extra = float(np.mean(np.abs(r.epsilon_bias_i))) + heat
        quad = 1.0 - 2.0 * abs(r.gamma_prime)
        bound = (slope + math.sqrt(slope**2 + quad * extra)) / quad
    return max(base, 1.05 * bound + 1e-3)


def _refine_1d(f, df, lo, hi, x0, tol):
    """Locate the minimum inside [lo, hi] starting from grid point x0."""
    if df is not None:
        dlo, dhi = df(lo), df(hi)
        if dlo < 0.0 < dhi:
            return optimize.brentq(df, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol, "maxiter": 500})
    return float(res.x) if f(res.x) <= f(x0) else x0


def _minimize_1d(f_vec, df, radius, points, tol, even, smooth=True):
    """Dense scan on [-R, R] (or [0, R] for even f) followed by local refinement."""
    if even:
        grid = np.linspace(0.0, radius, points // 2 + 1)
    else:
        grid = np.linspace(-radius, radius, points)
    vals = f_vec(grid)
    f = lambda x: float(f_vec(np.array([x]))[0])
    cand = []
    for k in range(len(grid)):
        left = vals[k - 1] if k > 0 else math.inf
        right = vals[k + 1] if k + 1 < len(grid) else math.inf
        if vals[k] <= left and vals[k] <= right:
            cand.append(k)
    found = []
    for k in cand:
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        x0 = grid[k]
        if even and k == 0:
            # origin is an extremum; leave it only if it is not a local minimum
            h = max(1e-9, 1e-9 * radius)
            if df is not None and df(h) < 0.0:
                j = 1
                while j < len(grid) - 1 and df(grid[j]) < 0.0:
                    j += 1
                x = _refine_1d(f, df, h, grid[j], grid[j], tol)
                found.append(x)
            found.append(0.0)
            continue
        found.append(_refine_1d(f, df if smooth else None, lo, hi, x0, tol))
    xs = np.array(found)
    fx = f_vec(xs)
    best = float(np.min(fx))
    keep = []
    for x, v in sorted(zip(xs, fx), key=lambda t: (t[1], abs(t[0]))):
        if v <= best + DEGENERACY_TOL and all(abs(x - y) > 1e-6 for y in keep):
            keep.append(float(x))
    return keep, best


def _origin_flat(spec: ModelSpec, axis: int = 0) -> bool:
    return origin_curvature(spec, axis) < 0.0


def _finish(spec, minima, phi_min, order_parameter, degenerate=None, notes=()):
    minima = sorted(minima, key=lambda m: (0 if m[0] >= 0 else 1, [abs(x) for x in m]))
    return MinResult(
        minima=tuple(tuple(float(x) for x in m) for m in minima),
        phi_min=float(phi_min),
        order_parameter=tuple(float(x) for x in order_parameter),
        degenerate=degenerate if degenerate else (("sign" if len(minima) > 1 else None)),
        multiplicity=len(minima),
        notes=tuple(notes),
    )


def _line(spec: ModelSpec, axis: int):
    k = spec.arity

    def embed(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (k,))
        out[..., axis] = x
        return out

    f = lambda x: phi(spec, embed(x))

    def df(x):
        return float(np.asarray(grad_phi(spec, embed(np.array([x]))))[0, axis])

    return f, df, embed


def _minimize_line(spec, axis, budget, even, radius):
    f, df, embed = _line(spec, axis)
    smooth = spec.family is not Family.XYZ
    xs, best = _minimize_1d(f, df, radius, budget.points, budget.tol, even, smooth)
    if even:
        xs = xs + [-x for x in xs if x > 0]
    return [tuple(embed(np.array(x))) for x in xs], best


def _minimize_full(spec: ModelSpec, budget: ScanBudget) -> MinResult:
    k = spec.arity
    if k > 2:
        raise ModelError("full scans are limited to two coordinates")
    if k == 1:
        return minimize_global(spec, ScanBudget(budget.points, budget.tol, budget.max_iter, True))
    radius = scan_radius(spec)
    axis = np.linspace(-radius, radius, budget.points)
    uu, vv = np.meshgrid(axis, axis, indexing="ij")
    vals = phi(spec, np.stack([uu, vv], axis=-1))
    padded = np.pad(vals, 1, constant_values=np.inf)
    local = np.ones_like(vals, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                local &= vals <= padded[1 + di : 1 + di + vals.shape[0], 1 + dj : 1 + dj + vals.shape[1]]
    idx = np.argwhere(local)
    f = lambda x: phi(spec, x)
    g = lambda x: np.asarray(grad_phi(spec, x))
    pitch = axis[1] - axis[0]
    found = []
    for i, j in idx:
        x0 = np.array([axis[i], axis[j]])
        if np.linalg.norm(g(x0)) < 1e-12:
            hess = np.array([(g(x0 + 1e-5 * e) - g(x0 - 1e-5 * e)) / 2e-5 for e in np.eye(2)])
            ev, evec = np.linalg.eigh(0.5 * (hess + hess.T))
            if ev[0] < 0:
                x0 = x0 + 0.5 * pitch * evec[:, 0]
            else:
                found.append(x0)
                continue
        res = optimize.minimize(f, x0, jac=g, method="BFGS", options={"gtol": 1e-13, "maxiter": budget.max_iter})
        found.append(res.x if res.fun <= f(x0) else x0)
    xs = np.array(found)
    fx = np.array([f(x) for x in xs])
    best = float(fx.min())
    keep = []
    for x, v in sorted(zip(xs, fx), key=lambda t: (t[1], float(np.linalg.norm(t[0])))):
        if v <= best + DEGENERACY_TOL and all(np.linalg.norm(x - y) > 1e-6 for y in keep):
            keep.append(x)
    op = _order_parameter(spec, keep[0])
    degenerate = "rotational" if spec.family is Family.TC and op[0] > 1e-12 else None
    return _finish(spec, keep, best, op, degenerate)


def _minimize_aniso_quadrant(spec: ModelSpec, budget: ScanBudget) -> MinResult:
    """Anisotropic couplings of mixed sign.

    In p = u^2, q = v^2 the potential is p + q minus a mean of concave
    functions of a_i p + b_i q, hence convex on the quadrant; one bounded
    descent finds the global minimum.
    """
    r = spec.params
    g = r.gamma[:, 0]
    lam = np.asarray(r.lambda_i)
    a = g**2 * (1 + lam) ** 2
    b = g**2 * (1 - lam) ** 2
    d2 = np.square(r.delta)
    bD = r.beta_Delta

    def fg(x):
        rr = np.sqrt(d2 + a * x[0] + b * x[1])
        f = x[0] + x[1] - float(np.mean(_free(rr, bD)))
        dF = _tanh(rr, bD) / (2.0 * np.maximum(rr, 1e-300))
        return f, np.array([1.0 - np.mean(a * dF), 1.0 - np.mean(b * dF)])

    hi = scan_radius(spec) ** 2
    best = None
    for x0 in ([0.0, 0.0], [hi / 4, 0.0], [0.0, hi / 4], [hi / 8, hi / 8]):
        res = optimize.minimize(fg, np.array(x0), jac=True, method="L-BFGS-B", bounds=[(0, hi), (0, hi)],
                                options={"ftol": 1e-16, "gtol": 1e-14, "maxiter": budget.max_iter})
        if best is None or res.fun < best.fun:
            best = res
    p, q = (float(max(0.0, x)) for x in best.x)
    u0 = np.array([math.sqrt(p), math.sqrt(q)])
    if p > 0 and q > 0:
        pol = optimize.minimize(lambda x: phi(spec, x), u0, jac=lambda x: np.asarray(grad_phi(spec, x)),
                                method="BFGS", options={"gtol": 1e-13})
        if pol.fun <= phi(spec, u0):
            u0 = np.abs(pol.x)
    pts = []
    for su in (1, -1):
        for sv in (1, -1):
            x = u0 * np.array([su, sv])
            if all(np.linalg.norm(x - y) > 1e-12 for y in pts):
                pts.append(x)
    best_phi = float(phi(spec, u0))
    return _finish(spec, pts, best_phi, _order_parameter(spec, u0), "sign" if len(pts) > 1 else None)


def _order_parameter(spec: ModelSpec, u) -> tuple[float, ...]:
    u = np.asarray(u, dtype=float)
    if spec.family is Family.MULTIMODE:
        return tuple(float(x) for x in u**2)
    return (float(np.sum(u**2)),)


def collinear_reduction(spec: ModelSpec) -> tuple[ModelSpec, np.ndarray]:
    """Single-mode DQR spec along the coupling direction, plus the unit vector.

    Requires couplings shared by all spins (identical rows of gamma_i_nu).
    """
    g = spec.params.gamma
    if not np.allclose(g, g[0:1, :], rtol=0, atol=0):
        raise ModelError("collinear reduction needs couplings shared by all spins")
    vec = g[0]
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ModelError("zero coupling vector")
    eff = ModelSpec(
        Family.DQR,
        spec.params.__class__(
            gamma_i_nu=tuple((norm,) for _ in range(spec.params.N)),
            delta_i=spec.params.delta_i,
            beta_Delta=spec.params.beta_Delta,
            C=spec.params.C,
            Delta_ref=spec.params.Delta_ref,
            mean_rule=spec.params.mean_rule,
        ),
    )
    return eff, vec / norm


def minimize_global(spec: ModelSpec, budget: ScanBudget = ScanBudget()) -> MinResult:
    """Global minimum of phi with all degenerate minimizers.

    With ``budget.reduce`` the symmetry reductions are used: the two-photon
    potential is minimized on v = 0, the anisotropic one on each axis, the
    Tavis-Cummings one radially and the multimode one along the coupling
    vector.  Otherwise a dense grid over the full box is refined.
    """
    require_valid(spec)
    fam = spec.family
    r = spec.params
    if not budget.reduce and spec.arity == 2:
        return _minimize_full(spec, budget)
    if fam is Family.MULTIMODE:
        g = r.gamma
        if np.all(g == 0.0):
            pts = [np.zeros(spec.arity)]
            return _finish(spec, pts, phi(spec, pts[0]), _order_parameter(spec, pts[0]))
        try:
            eff, unit = collinear_reduction(spec)
        except ModelError:
            return _minimize_full(spec, budget)
        res = minimize_global(eff, budget)
        pts = [unit * m[0] for m in res.minima]
        op = _order_parameter(spec, pts[0])
        return _finish(spec, pts, phi(spec, pts[0]), op, res.degenerate)
    radius = scan_radius(spec)
    if fam in (Family.DQR, Family.XYZ):
        pts, best = _minimize_line(spec, 0, budget, True, radius)
    elif fam is Family.BIASED:
        pts, best = _minimize_line(spec, 0, budget, spec.unbiased, radius)
    elif fam is Family.TWO_PHOTON:
        pts, best = _minimize_line(spec, 0, budget, r.gamma_prime == 0.0, radius)
    elif fam is Family.TC:
        pts, best = _minimize_line(spec, 0, budget, True, radius)
        pts = [p for p in pts if p[0] >= 0.0]
        op = _order_parameter(spec, pts[0])
        return _finish(spec, pts, best, op, "rotational" if op[0] > 1e-12 else None)
    elif fam is Family.ANISO:
        lam = np.asarray(r.lambda_i)
        if not (np.all(lam >= 0) or np.all(lam <= 0)):
            return _minimize_aniso_quadrant(spec, budget)
        pu, bu = _minimize_line(spec, 0, budget, True, radius)
        pv, bv = _minimize_line(spec, 1, budget, True, radius)
        best = min(bu, bv)
        pts = []
        for group, b in ((pu, bu), (pv, bv)):
            if b <= best + DEGENERACY_TOL:
                pts += [p for p in group if all(np.linalg.norm(np.subtract(p, q)) > 1e-6 for q in pts)]
    else:
        raise ModelError(fam.value)
    op = _order_parameter(spec, pts[0])
    return _finish(spec, pts, best, op)


def order_parameter(spec: ModelSpec, budget: ScanBudget = ScanBudget()) -> float:
    """u_min^2 summed over modes (omega <a^dag a> / (N Delta))."""
    return minimize_global(spec, budget).total


def radial_derivative(spec: ModelSpec, u, h: float = 1e-6) -> float:
    """d/dt phi(u; t * couplings) at t = 1 by central differences.

    Dipole couplings scale as t; the two-photon coupling, quadratic in the
    order parameter, scales as t^2.
    """

    def at(t):
        s = spec.with_gamma(spec.params.gamma * t)
        if spec.family is Family.TWO_PHOTON:
            s = s.with_params(gamma_prime=spec.params.gamma_prime * t * t)
        return phi(s, u)

    return (at(1 + h) - at(1 - h)) / (2 * h)


__all__ = [
    "phi",
    "grad_phi",
    "origin_curvature",
    "ScanBudget",
    "MinResult",
    "minimize_global",
    "order_parameter",
    "scan_radius",
    "collinear_reduction",
    "radial_derivative",
    "ln2cosh",
]
