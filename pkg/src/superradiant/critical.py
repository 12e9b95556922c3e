"""Critical lines, transition searches along coupling rays, and phase grids."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import landau, spinblock
from .landau import ScanBudget
from .model import Family, ModelError, ModelSpec, ReducedParams, require_valid

JUMP_THRESHOLD = 1e-4
SUPERRADIANT_EPS = 1e-10
# offsets on the superradiant side used to extrapolate the order parameter to t_c
JUMP_OFFSETS = (1e-4, 1e-5)


@dataclass(frozen=True)
class Ray:
    """Straight line origin + t * direction in the space of dipole couplings.

    Both vectors are flattened ``gamma_i_nu`` entries.  Other parameters
    (including a two-photon coupling) stay fixed along the ray.
    """

    direction: tuple[float, ...]
    origin: tuple[float, ...] | None = None

    def at(self, spec: ModelSpec, t: float) -> ModelSpec:
        d = np.asarray(self.direction, dtype=float)
        o = np.zeros_like(d) if self.origin is None else np.asarray(self.origin, dtype=float)
        return spec.with_gamma(o + t * d)


@dataclass(frozen=True)
class TransitionRecord:
    t_c: float
    order: str  # "none", "first" or "second"
    jump: float
    method: str  # "analytic", "scan" or "discriminant"
    ray: Ray | None = None
    cross_check: float | None = None  # |t_scan - t_discriminant| when both ran

    def __post_init__(self) -> None:
        if self.order == "first" and not self.jump >= JUMP_THRESHOLD:
            raise ValueError("first-order record needs a jump above threshold")
        if self.order == "second" and not self.jump < JUMP_THRESHOLD:
            raise ValueError("second-order record needs a jump below threshold")


# ---------------------------------------------------------------- closed forms


def critical_line_dqr(beta_Delta: float) -> float:
    """gamma_c solving tanh(beta*Delta) = 1/(2 gamma_c^2); inf when tanh underflows."""
    if not beta_Delta > 0:
        raise ModelError("beta_Delta must be positive")
    th = 1.0 if math.isinf(beta_Delta) else math.tanh(beta_Delta)
    if th == 0.0:
        return math.inf
    return 1.0 / math.sqrt(2.0 * th)


def critical_condition_aniso(params: ReducedParams, branch: str = "u") -> float:
    """Indicator sum_i tanh(bD|delta_i|) gamma_i^2 (1 +- lambda_i)^2 / (N |delta_i|) - 2.

    Nonnegative means the origin has become unstable along that axis.
    """
    g = params.gamma[:, 0]
    lam = np.asarray(params.lambda_i)
    d = np.abs(params.delta)
    sign = 1.0 if branch == "u" else -1.0
    bD = params.beta_Delta
    th = np.ones_like(d) if math.isinf(bD) else np.tanh(bD * d)
    return float(np.mean(th * g**2 * (1.0 + sign * lam) ** 2 / d) - 2.0)


def critical_line_twophoton(gamma_prime: float) -> tuple[float, float]:
    """Zero-temperature critical (gamma_c, jump) on 2 gamma^2 + 4 gamma'^2 = 1."""
    if abs(gamma_prime) >= 0.5:
        raise ModelError("two-photon stability requires |gamma_prime| < 1/2")
    gc = math.sqrt((1.0 - 4.0 * gamma_prime**2) / 2.0)
    return gc, (2.0 * gamma_prime / gc) ** 2


def critical_line_multimode(params: ReducedParams) -> float:
    """Critical Euclidean norm of the (spin-shared) coupling vector."""
    d = np.abs(params.delta)
    bD = params.beta_Delta
    th = np.ones_like(d) if math.isinf(bD) else np.tanh(bD * d)
    s = float(np.mean(th / d))
    return math.inf if s == 0.0 else 1.0 / math.sqrt(2.0 * s)


@dataclass(frozen=True)
class MultimodeReduction:
    effective: ModelSpec
    unit: np.ndarray
    norm: float

    def lift(self, u_eff: float) -> np.ndarray:
        return self.unit * u_eff


def multimode_reduce(spec: ModelSpec) -> MultimodeReduction:
    eff, unit = landau.collinear_reduction(spec)
    return MultimodeReduction(eff, unit, float(np.linalg.norm(spec.params.gamma[0])))


def multimode_order_parameters(gamma: Sequence[float], gamma_c: float = math.sqrt(0.5)) -> np.ndarray:
    """Per-mode u_nu^2 = gamma_nu^2/4 (1/gamma_c^4 - 1/gamma^4), identical qubits at bD = inf."""
    g = np.asarray(gamma, dtype=float)
    g2 = float(np.sum(g**2))
    if g2 <= gamma_c**2:
        return np.zeros_like(g)
    return g**2 / 4.0 * (1.0 / gamma_c**4 - 1.0 / g2**2)


def xyz_isotropic_closed_form(epsilon: float, delta: float) -> TransitionRecord:
    """Transition of the identical-qubit XYZ model with isotropic exchange.

    For epsilon > |delta|/2 the ground level at small u is the u-independent
    singlet (-3 epsilon), and the triplet branch epsilon - 2 sqrt(delta^2 +
    4 gamma^2 u^2) takes over at a first-order point where its minimum value
    -4 gamma^2 - delta^2/(4 gamma^2) + epsilon reaches -3 epsilon:
        gamma_c^2 = (epsilon + sqrt(epsilon^2 - delta^2/4)) / 2,
        jump      = 4 gamma_c^2 - delta^2 / (4 gamma_c^2).
    For epsilon < |delta|/2 the transition is continuous at gamma_c^2 = |delta|/4.
    Both meet on gamma^2 = epsilon/2 = |delta|/4.
    """
    a = abs(delta)
    if epsilon > a / 2.0:
        g2 = 0.5 * (epsilon + math.sqrt(epsilon**2 - delta**2 / 4.0))
        jump = 4.0 * g2 - delta**2 / (4.0 * g2)
        order = "first" if jump >= JUMP_THRESHOLD else "second"
        return TransitionRecord(math.sqrt(g2), order, jump if order == "first" else 0.0, "analytic")
    return TransitionRecord(math.sqrt(a / 4.0), "second", 0.0, "analytic")


# ---------------------------------------------------------------- numerical scans


def has_origin_extremum(spec: ModelSpec) -> bool:
    if spec.family is Family.BIASED:
        return not any(spec.params.epsilon_bias_i)
    return True


def is_superradiant(spec: ModelSpec, budget: ScanBudget = ScanBudget()) -> bool:
    return landau.minimize_global(spec, budget).total > SUPERRADIANT_EPS


def _jump(spec, ray, t_c, side, budget):
    vals = []
    for h in JUMP_OFFSETS:
        t = t_c + side * h * max(1.0, abs(t_c))
        vals.append(landau.minimize_global(ray.at(spec, t), budget).total)
    (h1, y1), (h2, y2) = zip(JUMP_OFFSETS, vals)
    # linear extrapolation back to the critical point
    return max(0.0, y2 - (y1 - y2) * h2 / (h1 - h2))


def scan_transitions(
    spec: ModelSpec,
    ray: Ray,
    t_range: tuple[float, float],
    step: float = 1e-2,
    tol: float = 1e-9,
    budget: ScanBudget = ScanBudget(),
) -> list[TransitionRecord]:
    """Every normal/superradiant switch along the ray, bisected to ``tol``."""
    require_valid(ray.at(spec, t_range[0]))
    lo, hi = t_range
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    ts = np.linspace(lo, hi, n)
    state = [is_superradiant(ray.at(spec, t), budget) for t in ts]
    out = []
    for k in range(n - 1):
        if state[k] == state[k + 1]:
            continue
        a, b = ts[k], ts[k + 1]
        sa = state[k]
        while b - a > tol:
            m = 0.5 * (a + b)
            if is_superradiant(ray.at(spec, m), budget) == sa:
                a = m
            else:
                b = m
        t_c = 0.5 * (a + b)
        side = 1.0 if not sa else -1.0
        jump = _jump(spec, ray, b if side > 0 else a, side, budget)
        order = "first" if jump >= JUMP_THRESHOLD else "second"
        out.append(TransitionRecord(float(t_c), order, float(jump), "scan", ray))
    return out


def critical_scan(
    spec: ModelSpec,
    ray: Ray,
    t_range: tuple[float, float],
    step: float = 1e-2,
    tol: float = 1e-9,
    budget: ScanBudget = ScanBudget(),
    cross_check: bool = True,
) -> TransitionRecord:
    """First transition along the ray, or an order="none" record.

    For the XYZ family the result is cross-checked against the discriminant
    method and the distance between the two recorded in ``cross_check``.
    """
    if not has_origin_extremum(spec):
        return TransitionRecord(math.nan, "none", 0.0, "scan", ray)
    found = scan_transitions(spec, ray, t_range, step, tol, budget)
    if not found:
        return TransitionRecord(math.nan, "none", 0.0, "scan", ray)
    rec = found[0]
    if cross_check and spec.family is Family.XYZ:
        disc = discriminant_transitions(spec, ray, t_range, step)
        if disc:
            nearest = min(disc, key=lambda d: abs(d.t_c - rec.t_c))
            rec = TransitionRecord(rec.t_c, rec.order, rec.jump, rec.method, ray, float(abs(nearest.t_c - rec.t_c)))
    return rec


# ---------------------------------------------------------------- discriminant method (XYZ)


def _xyz_args(spec: ModelSpec):
    r = spec.params
    return r.gamma[:, 0], r.delta_i, r.epsilon_alpha


def _physical(spec: ModelSpec, w: float, lam0: float, tol: float = 1e-7) -> bool:
    """True when the lowest level of h(sqrt w) really meets lambda0 - w."""
    lam = float(spinblock.smallest_eigenvalue(spinblock.h_from_spec(spec, math.sqrt(w))))
    return abs(lam - (lam0 - w)) <= tol * max(1.0, abs(lam0) + w)


def _positive_roots(coeffs) -> np.ndarray:
    roots = np.roots(np.trim_zeros(np.asarray(coeffs, float), "f"))
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    real = roots[np.abs(roots.imag) <= 1e-6 * scale].real
    return np.sort(real[real > 1e-9])


def discriminant_transitions(
    spec: ModelSpec, ray: Ray, t_range: tuple[float, float], step: float = 1e-2
) -> list[TransitionRecord]:
    """Transitions of the XYZ model from the cubic in w = u^2.

    Second-order points are zeros of Q(0) (the curvature of phi at the
    origin); first-order points are zeros of the discriminant with a positive
    double root on the lowest level.  A candidate is accepted only if no
    simple positive root on the lowest level remains, i.e. phi(u) >= phi(0)
    holds with contact only.
    """
    if spec.family is not Family.XYZ:
        raise ModelError("discriminant method applies to TwoQubitXYZ only")

    def cubic(t):
        return spinblock.criticality_cubic(*_xyz_args(ray.at(spec, t)))

    def disc(t):
        return spinblock.cubic_discriminant(cubic(t).coeffs)

    def q0(t):
        return float(cubic(t).coeffs[-1])

    lo, hi = t_range
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    ts = np.linspace(lo, hi, n)
    out = []
    for kind, fn in (("second", q0), ("first", disc)):
        vals = np.array([fn(t) for t in ts])
        for k in range(n - 1):
            if vals[k] == 0.0 or np.sign(vals[k]) == np.sign(vals[k + 1]):
                continue
            t_c = optimize.brentq(fn, ts[k], ts[k + 1], xtol=1e-14, rtol=1e-15)
            rec = _validate_candidate(ray.at(spec, t_c), float(t_c), kind, ray)
            if rec is not None:
                out.append(rec)
    out.sort(key=lambda r: r.t_c)
    return out


def _validate_candidate(spec_t: ModelSpec, t_c: float, kind: str, ray: Ray) -> TransitionRecord | None:
    cub = spinblock.criticality_cubic(*_xyz_args(spec_t))
    coeffs = cub.coeffs
    lam0 = cub.lambda0
    double = None
    if kind == "first":
        # double root: a root of Q' where Q also (nearly) vanishes
        dq = np.polyder(coeffs)
        cands = [w for w in _positive_roots(dq) if abs(np.polyval(coeffs, w)) <= 1e-6 * max(1.0, np.max(np.abs(coeffs)))]
        cands = [w for w in cands if _physical(spec_t, w, lam0, 1e-6)]
        if not cands:
            return None
        double = cands[0]
        if coeffs[-1] < 0:
            return None  # origin itself is not a local minimum
    simple = [w for w in _positive_roots(coeffs) if double is None or abs(w - double) > 1e-4 * max(1.0, double)]
    if any(_physical(spec_t, w, lam0) for w in simple):
        return None
    if kind == "second":
        return TransitionRecord(t_c, "second", 0.0, "discriminant", ray)
    if double < JUMP_THRESHOLD:
        return TransitionRecord(t_c, "second", 0.0, "discriminant", ray)
    return TransitionRecord(t_c, "first", float(double), "discriminant", ray)


# ---------------------------------------------------------------- phase grids


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


def set_param(spec: ModelSpec, name: str, value: float) -> ModelSpec:
    """Return ``spec`` with one named reduced parameter replaced.

    Names: gamma (all dipole couplings), gamma_<i> (spin i, 1-based),
    gamma_mode_<nu>, gamma_prime, beta_Delta, lambda, epsilon (isotropic
    exchange), epsilon_x/_y/_z, epsilon_bias, delta, delta_<i>.
    """
    r = spec.params
    g = r.gamma.copy()
    if name == "gamma":
        return spec.with_gamma(np.full_like(g, value))
    if name.startswith("gamma_mode_"):
        g[:, int(name.rsplit("_", 1)[1]) - 1] = value
        return spec.with_gamma(g)
    if name.startswith("gamma_") and name[6:].isdigit():
        g[int(name[6:]) - 1, :] = value
        return spec.with_gamma(g)
    if name == "gamma_prime":
        return spec.with_params(gamma_prime=float(value))
    if name == "beta_Delta":
        return spec.with_params(beta_Delta=float(value))
    if name == "lambda":
        return spec.with_params(lambda_i=(float(value),) * r.N)
    if name == "epsilon":
        return spec.with_params(epsilon_alpha=(float(value),) * 3)
    if name in ("epsilon_x", "epsilon_y", "epsilon_z"):
        eps = list(r.epsilon_alpha)
        eps["xyz".index(name[-1])] = float(value)
        return spec.with_params(epsilon_alpha=tuple(eps))
    if name == "epsilon_bias":
        return spec.with_params(epsilon_bias_i=(float(value),) * r.N)
    if name == "delta":
        return spec.with_params(delta_i=(float(value),) * r.N)
    if name.startswith("delta_") and name[6:].isdigit():
        d = list(r.delta_i)
        d[int(name[6:]) - 1] = float(value)
        return spec.with_params(delta_i=tuple(d))
    raise ModelError(f"unknown parameter name {name!r}")


@dataclass
class PhaseGrid:
    axes: tuple[Axis, Axis]
    order_parameter: np.ndarray
    phi_min: np.ndarray
    phase: np.ndarray = field(init=False)
    edge: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.phase = np.where(self.order_parameter > SUPERRADIANT_EPS, "superradiant", "normal")
        self.edge = classify_edges(self.order_parameter)

    def rows(self):
        a0, a1 = self.axes
        for i, x in enumerate(a0.values):
            for j, y in enumerate(a1.values):
                yield (x, y, self.order_parameter[i, j], self.phase[i, j], self.phi_min[i, j], self.edge[i, j])


def classify_edges(op: np.ndarray, threshold: float = JUMP_THRESHOLD) -> np.ndarray:
    """Label superradiant cells bordering the normal region as first/second order.

    The order parameter is extrapolated one cell back towards the normal
    neighbour from the edge cell and the next cell inward; a finite intercept
    means a jump.
    """
    sr = op > SUPERRADIANT_EPS
    edge = np.full(op.shape, "", dtype=object)
    ni, nj = op.shape
    for i in range(ni):
        for j in range(nj):
            if not sr[i, j]:
                continue
            votes = []
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if not (0 <= a < ni and 0 <= b < nj) or sr[a, b]:
                    continue
                c, d = i - di, j - dj
                if 0 <= c < ni and 0 <= d < nj and sr[c, d]:
                    intercept = op[i, j] - (op[c, d] - op[i, j])
                else:
                    intercept = op[i, j]
                votes.append(intercept > max(threshold, 0.5 * op[i, j]))
            if votes:
                edge[i, j] = "first" if any(votes) else "second"
    return edge


def _grid_row(args):
    spec_dict, axes, i, budget = args
    spec = ModelSpec.from_dict(spec_dict)
    a0, a1 = axes
    x = a0.values[i]
    row_op, row_phi = [], []
    for y in a1.values:
        s = set_param(set_param(spec, a0.name, x), a1.name, y)
        res = landau.minimize_global(s, budget)
        row_op.append(res.total)
        row_phi.append(res.phi_min)
    return row_op, row_phi


def default_workers() -> int:
    env = os.environ.get("SUPERRADIANT_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def phase_diagram(
    spec: ModelSpec,
    axes: tuple[Axis, Axis],
    budget: ScanBudget = ScanBudget(),
    workers: int = 1,
) -> PhaseGrid:
    """Order parameter on a rectangular grid of two named parameters."""
    jobs = [(spec.to_dict(), axes, i, budget) for i in range(axes[0].count)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_grid_row, jobs))
    else:
        rows = [_grid_row(j) for j in jobs]
    op = np.array([r[0] for r in rows], dtype=float).reshape(axes[0].count, axes[1].count)
    ph = np.array([r[1] for r in rows], dtype=float).reshape(axes[0].count, axes[1].count)
    return PhaseGrid(axes, op, ph)


def order_parameter_curve(spec: ModelSpec, name: str, values, budget: ScanBudget = ScanBudget()):
    """(value, u_min^2, phi_min) along one named parameter."""
    out = []
    for v in values:
        res = landau.minimize_global(set_param(spec, name, float(v)), budget)
        out.append((float(v), res.total, res.phi_min))
    return out
