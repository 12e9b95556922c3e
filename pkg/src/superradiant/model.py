"""Model families, physical/reduced parameters and their validation.

Every evaluator in the package consumes a :class:`ModelSpec`, which holds the
model family tag plus the dimensionless parameters (:class:`ReducedParams`).
Physical parameters (:class:`PhysicalParams`) are only needed by the exact
diagonalization and partition-function code, and are mapped to reduced ones
by :func:`reduce`.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Any, Iterable, Sequence

import numpy as np

INF = math.inf


class Family(str, enum.Enum):
    DQR = "DQR"
    ANISO = "AnisoInhomogeneous"
    TC = "TavisCummings"
    BIASED = "Biased"
    TWO_PHOTON = "TwoPhoton"
    XYZ = "TwoQubitXYZ"
    MULTIMODE = "Multimode"


class MeanRule(str, enum.Enum):
    ARITHMETIC_ABS = "arithmetic_abs"
    RMS = "rms"


class ModelError(ValueError):
    """Raised for parameter sets that cannot be reduced or evaluated."""


# families whose Landau potential is even under u -> -u
UNBIASED = frozenset(
    {Family.DQR, Family.ANISO, Family.TC, Family.XYZ, Family.MULTIMODE}
)

ARITY_1 = frozenset({Family.DQR, Family.BIASED, Family.XYZ})
ARITY_2 = frozenset({Family.ANISO, Family.TC, Family.TWO_PHOTON})


def _tuple(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


def _matrix(values: Any) -> tuple[tuple[float, ...], ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim == 1:
        arr = arr[:, None]
    return tuple(tuple(float(x) for x in row) for row in arr)


def _parse_beta(value: Any) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return INF
        return float(value)
    return float(value)


def _dump_beta(value: float) -> Any:
    return "inf" if math.isinf(value) else value


@dataclass(frozen=True)
class PhysicalParams:
    """Hamiltonian parameters in energy units.

    ``g`` has shape (N, M): dipole coupling of spin i to mode nu.  For every
    family except the two-qubit XYZ model the Hamiltonian carries these
    couplings divided by sqrt(N) (and the two-photon coupling divided by N).
    """

    omega: tuple[float, ...]
    Delta: tuple[float, ...]
    g: tuple[tuple[float, ...], ...]
    lam: tuple[float, ...] = ()
    e: tuple[float, ...] = ()
    g_prime: float = 0.0
    J: tuple[float, float, float] = (0.0, 0.0, 0.0)
    beta: float = INF

    @classmethod
    def make(
        cls,
        omega: float | Sequence[float],
        Delta: float | Sequence[float],
        g: Any,
        *,
        lam: float | Sequence[float] | None = None,
        e: float | Sequence[float] | None = None,
        g_prime: float = 0.0,
        J: Sequence[float] = (0.0, 0.0, 0.0),
        beta: float | str = INF,
    ) -> "PhysicalParams":
        omega_t = _tuple(np.atleast_1d(omega))
        delta_t = _tuple(np.atleast_1d(Delta))
        n = len(delta_t)
        g_arr = np.asarray(g, dtype=float)
        if g_arr.ndim == 0:
            g_arr = np.full((n, len(omega_t)), float(g_arr))
        elif g_arr.ndim == 1 and len(omega_t) == 1:
            g_arr = g_arr[:, None]
        elif g_arr.ndim == 1:
            # one coupling per mode, homogeneous over spins
            g_arr = np.tile(g_arr, (n, 1))
        lam_t = _tuple(np.broadcast_to(1.0 if lam is None else lam, (n,)))
        e_t = _tuple(np.broadcast_to(0.0 if e is None else e, (n,)))
        return cls(
            omega=omega_t,
            Delta=delta_t,
            g=_matrix(g_arr),
            lam=lam_t,
            e=e_t,
            g_prime=float(g_prime),
            J=tuple(float(x) for x in J),  # type: ignore[arg-type]
            beta=_parse_beta(beta),
        )

    @property
    def N(self) -> int:
        return len(self.Delta)

    @property
    def M(self) -> int:
        return len(self.omega)

    def check(self) -> None:
        if self.M < 1 or self.N < 1:
            raise ModelError("need at least one mode and one spin")
        if any(not w > 0 for w in self.omega):
            raise ModelError("boson energies must be positive")
        if np.shape(self.g) != (self.N, self.M):
            raise ModelError(f"g must have shape (N, M) = ({self.N}, {self.M})")
        if self.g_prime != 0.0 and abs(self.g_prime) / min(self.omega) >= 0.5:
            raise ModelError("two-photon stability requires |g'|/omega < 1/2")
        if not (self.beta > 0):
            raise ModelError("beta must be positive or infinite")


@dataclass(frozen=True)
class ReducedParams:
    """Dimensionless parameters consumed by all Landau-potential evaluators.

    ``gamma_i_nu`` has shape (N, M).  ``C`` is N*Delta_ref/omega (first mode)
    and is only meaningful for finite-size comparisons.
    """

    gamma_i_nu: tuple[tuple[float, ...], ...]
    delta_i: tuple[float, ...]
    lambda_i: tuple[float, ...] = ()
    epsilon_bias_i: tuple[float, ...] = ()
    gamma_prime: float = 0.0
    epsilon_alpha: tuple[float, float, float] = (0.0, 0.0, 0.0)
    beta_Delta: float = INF
    C: float | None = None
    Delta_ref: float = 1.0
    mean_rule: str = MeanRule.ARITHMETIC_ABS.value

    def __post_init__(self) -> None:
        n = len(self.delta_i)
        if not self.lambda_i:
            object.__setattr__(self, "lambda_i", (1.0,) * n)
        if not self.epsilon_bias_i:
            object.__setattr__(self, "epsilon_bias_i", (0.0,) * n)

    @property
    def N(self) -> int:
        return len(self.delta_i)

    @property
    def M(self) -> int:
        return len(self.gamma_i_nu[0]) if self.gamma_i_nu else 0

    @property
    def gamma(self) -> np.ndarray:
        return np.asarray(self.gamma_i_nu, dtype=float)

    @property
    def delta(self) -> np.ndarray:
        return np.asarray(self.delta_i, dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {
            "gamma_i_nu": [list(r) for r in self.gamma_i_nu],
            "delta_i": list(self.delta_i),
            "lambda_i": list(self.lambda_i),
            "epsilon_bias_i": list(self.epsilon_bias_i),
            "gamma_prime": self.gamma_prime,
            "epsilon_alpha": list(self.epsilon_alpha),
            "beta_Delta": _dump_beta(self.beta_Delta),
            "C": self.C,
            "Delta_ref": self.Delta_ref,
            "mean_rule": self.mean_rule,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ReducedParams":
        return cls(
            gamma_i_nu=_matrix(d["gamma_i_nu"]),
            delta_i=_tuple(d["delta_i"]),
            lambda_i=_tuple(d.get("lambda_i", ())),
            epsilon_bias_i=_tuple(d.get("epsilon_bias_i", ())),
            gamma_prime=float(d.get("gamma_prime", 0.0)),
            epsilon_alpha=tuple(float(x) for x in d.get("epsilon_alpha", (0, 0, 0))),  # type: ignore[arg-type]
            beta_Delta=_parse_beta(d.get("beta_Delta", "inf")),
            C=None if d.get("C") is None else float(d["C"]),
            Delta_ref=float(d.get("Delta_ref", 1.0)),
            mean_rule=str(d.get("mean_rule", MeanRule.ARITHMETIC_ABS.value)),
        )


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    params: ReducedParams

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))

    @property
    def arity(self) -> int:
        if self.family in ARITY_1:
            return 1
        if self.family in ARITY_2:
            return 2
        return self.params.M

    @property
    def unbiased(self) -> bool:
        if self.family is Family.BIASED:
            return not any(self.params.epsilon_bias_i)
        return self.family in UNBIASED or (
            self.family is Family.TWO_PHOTON and self.params.gamma_prime == 0.0
        )

    def with_params(self, **changes: Any) -> "ModelSpec":
        return ModelSpec(self.family, replace(self.params, **changes))

    def with_gamma(self, gamma: Any) -> "ModelSpec":
        shape = np.shape(self.params.gamma_i_nu)
        return self.with_params(gamma_i_nu=_matrix(np.reshape(np.asarray(gamma, float), shape)))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family.value, "params": self.params.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelSpec":
        return cls(Family(d["family"]), ReducedParams.from_dict(d["params"]))

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


def make_spec(
    family: Family | str,
    gamma: Any,
    delta: Any = 1.0,
    *,
    lam: Any = None,
    epsilon_bias: Any = None,
    gamma_prime: float = 0.0,
    epsilon_alpha: Sequence[float] = (0.0, 0.0, 0.0),
    beta_Delta: float | str = INF,
    C: float | None = None,
) -> ModelSpec:
    """Build a spec directly from reduced parameters.

    ``gamma`` may be a scalar (broadcast over spins), a length-N vector, or an
    (N, M) matrix; for ``Multimode`` a length-M vector is one coupling per
    mode shared by all spins.
    """
    family = Family(family)
    delta_arr = np.atleast_1d(np.asarray(delta, dtype=float))
    g = np.asarray(gamma, dtype=float)
    if family is Family.XYZ and delta_arr.size == 1:
        delta_arr = np.repeat(delta_arr, 2)
    if family is Family.MULTIMODE:
        if g.ndim == 1:
            g = np.tile(g, (delta_arr.size, 1))
    else:
        if g.ndim == 0:
            g = np.full(delta_arr.size, float(g))
        if g.ndim == 1 and g.size != delta_arr.size and delta_arr.size == 1:
            delta_arr = np.repeat(delta_arr, g.size)
    n = delta_arr.size
    if family is Family.TC:
        lam = 0.0
    lam_t = _tuple(np.broadcast_to(1.0 if lam is None else lam, (n,)))
    eps_t = _tuple(np.broadcast_to(0.0 if epsilon_bias is None else epsilon_bias, (n,)))
    return ModelSpec(
        family,
        ReducedParams(
            gamma_i_nu=_matrix(g),
            delta_i=_tuple(delta_arr),
            lambda_i=lam_t,
            epsilon_bias_i=eps_t,
            gamma_prime=float(gamma_prime),
            epsilon_alpha=tuple(float(x) for x in epsilon_alpha),  # type: ignore[arg-type]
            beta_Delta=_parse_beta(beta_Delta),
            C=C,
        ),
    )


def generalized_mean(values: Sequence[float], rule: MeanRule | str) -> float:
    a = np.abs(np.asarray(values, dtype=float))
    rule = MeanRule(rule)
    if rule is MeanRule.ARITHMETIC_ABS:
        return float(a.mean())
    return float(np.sqrt(np.mean(a**2)))


def reduce(p: PhysicalParams, mean_rule: MeanRule | str = MeanRule.ARITHMETIC_ABS) -> ReducedParams:
    """Map physical parameters to the dimensionless reduced set."""
    p.check()
    delta_ref = generalized_mean(p.Delta, mean_rule)
    if not delta_ref > 0:
        raise ModelError("all spin energies vanish; reference Delta is zero")
    omega = np.asarray(p.omega)
    gamma = np.asarray(p.g) / np.sqrt(delta_ref * omega)[None, :]
    return ReducedParams(
        gamma_i_nu=_matrix(gamma),
        delta_i=_tuple(np.asarray(p.Delta) / delta_ref),
        lambda_i=p.lam,
        epsilon_bias_i=_tuple(np.asarray(p.e) / delta_ref),
        gamma_prime=p.g_prime / p.omega[0],
        epsilon_alpha=tuple(j / delta_ref for j in p.J),  # type: ignore[arg-type]
        beta_Delta=p.beta * delta_ref,
        C=p.N * delta_ref / p.omega[0],
        Delta_ref=delta_ref,
        mean_rule=MeanRule(mean_rule).value,
    )


def physical_from_reduced(
    family: Family | str, r: ReducedParams, C: float | None = None, omega: float = 1.0
) -> PhysicalParams:
    """Inverse of :func:`reduce` for a chosen macroscopicity ``C = N*Delta/omega``.

    All modes get the same boson energy ``omega``.
    """
    C = r.C if C is None else C
    if C is None:
        raise ModelError("a finite C is needed to build physical parameters")
    n = r.N
    delta_ref = C * omega / n
    g = r.gamma * math.sqrt(delta_ref * omega)
    beta = r.beta_Delta / delta_ref
    return PhysicalParams.make(
        omega=[omega] * r.M,
        Delta=r.delta * delta_ref,
        g=g,
        lam=r.lambda_i,
        e=np.asarray(r.epsilon_bias_i) * delta_ref,
        g_prime=r.gamma_prime * omega,
        J=tuple(x * delta_ref for x in r.epsilon_alpha),
        beta=beta,
    )


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code, "message": self.message}


def validate(spec: ModelSpec) -> list[Violation]:
    """Return every violated invariant of ``spec`` (empty list means valid)."""
    out: list[Violation] = []
    r = spec.params
    fam = spec.family
    gamma = np.asarray(r.gamma_i_nu, dtype=float)
    if r.N < 1 or gamma.ndim != 2 or gamma.shape[0] != r.N or gamma.shape[1] < 1:
        out.append(Violation("FamilyShapeMismatch", "gamma_i_nu must have shape (N, M) with N, M >= 1"))
        return out
    if len(r.lambda_i) != r.N or len(r.epsilon_bias_i) != r.N:
        out.append(Violation("FamilyShapeMismatch", "lambda_i and epsilon_bias_i need one entry per spin"))
    numbers = [*gamma.ravel(), *r.delta_i, *r.lambda_i, *r.epsilon_bias_i, r.gamma_prime, *r.epsilon_alpha]
    if not all(math.isfinite(x) for x in numbers):
        out.append(Violation("NonFiniteValue", "reduced parameters must be finite"))
    if not (r.beta_Delta > 0) or math.isnan(r.beta_Delta):
        out.append(Violation("InvalidTemperature", "beta_Delta must be positive or 'inf'"))
    if not (r.Delta_ref > 0):
        out.append(Violation("InvalidReferenceEnergy", "Delta_ref must be positive"))
    if abs(r.gamma_prime) >= 0.5:
        out.append(Violation("StabilityViolation", "two-photon stability requires |gamma_prime| < 1/2"))
    if fam is not Family.MULTIMODE and gamma.shape[1] != 1:
        out.append(Violation("FamilyShapeMismatch", f"{fam.value} is a single-mode family"))
    if fam is Family.MULTIMODE and gamma.shape[1] < 2:
        out.append(Violation("FamilyShapeMismatch", "Multimode requires M >= 2 coupling entries"))
    if fam is Family.XYZ and r.N != 2:
        out.append(Violation("FamilyShapeMismatch", "TwoQubitXYZ requires exactly N = 2 spins"))
    if fam is Family.TC and any(x != 0.0 for x in r.lambda_i):
        out.append(Violation("FamilyShapeMismatch", "TavisCummings requires all lambda_i = 0"))
    if fam is not Family.TWO_PHOTON and r.gamma_prime != 0.0:
        out.append(Violation("FamilyShapeMismatch", "gamma_prime is only defined for TwoPhoton"))
    if fam is not Family.BIASED and any(r.epsilon_bias_i):
        out.append(Violation("FamilyShapeMismatch", "static biases are only defined for Biased"))
    if fam is not Family.XYZ and any(r.epsilon_alpha):
        out.append(Violation("FamilyShapeMismatch", "spin-spin couplings are only defined for TwoQubitXYZ"))
    return out


def require_valid(spec: ModelSpec) -> None:
    bad = validate(spec)
    if bad:
        raise ModelError("; ".join(f"{v.code}: {v.message}" for v in bad))


__all__ = [
    "Family",
    "MeanRule",
    "ModelError",
    "PhysicalParams",
    "ReducedParams",
    "ModelSpec",
    "Violation",
    "make_spec",
    "reduce",
    "physical_from_reduced",
    "generalized_mean",
    "validate",
    "require_valid",
    "INF",
]
