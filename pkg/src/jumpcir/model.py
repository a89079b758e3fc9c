"""Jump-delay CIR/CEV model family and step-size validity checks.

The model is the scalar SDDE

    dx = (k1 - k2*x) dt + k3 * b(x(t - tau)) * x^alpha dW + g(x-) dNtilde,

with delay coefficient b, jump coefficient g against a compensated Poisson
process of intensity ``lam``, and a positive initial segment on [-tau, 0].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

__all__ = [
    "DelayCoefficient",
    "JumpCoefficient",
    "ModelSpec",
    "SchemeConfig",
    "AssumptionBReport",
    "JumpStepReport",
    "validate_assumption_b",
    "validate_jump_step",
    "eval_delay_coeff",
    "eval_jump_coeff",
    "delta_substeps",
    "load_model_file",
]

# relative tolerance for "T is an integer multiple of tau" style checks
_MULTIPLE_RTOL = 1e-12


@dataclass(frozen=True)
class DelayCoefficient:
    """Descriptor for the delay coefficient b: R+ -> R+.

    kind is one of "constant" (b = 1), "power" (b(x) = x**gamma) or
    "custom" (user callable with a declared Holder exponent gamma).
    """

    kind: str
    gamma: float = 1.0
    func: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in ("constant", "power", "custom"):
            raise ValueError(f"unknown delay coefficient kind {self.kind!r}")
        if self.kind in ("power", "custom") and not self.gamma > 0:
            raise ValueError("Holder exponent gamma must be positive")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom delay coefficient needs a callable")

    def __call__(self, x: float) -> float:
        if x < 0:
            raise ValueError(f"delay coefficient is defined on x >= 0, got {x}")
        if self.kind == "constant":
            return 1.0
        if self.kind == "power":
            return float(x) ** self.gamma
        return float(self.func(x))


@dataclass(frozen=True)
class JumpCoefficient:
    """Descriptor for the jump coefficient g: R -> R.

    kind is one of "zero", "linear" (scale*x), "sin" (scale*sin(x)),
    "ratio" (scale*x/(1+x)) or "custom".  lipschitz_L bounds |g'| on x > 0;
    it defaults to |scale| for the built-in non-zero kinds.  positive marks
    coefficients with g > 0 on x > 0, which relaxes the L <= 1 requirement.
    """

    kind: str
    scale: float = 1.0
    lipschitz_L: Optional[float] = None
    positive: Optional[bool] = None
    func: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "sin", "ratio", "custom"):
            raise ValueError(f"unknown jump coefficient kind {self.kind!r}")
        if self.kind == "custom":
            if self.func is None:
                raise ValueError("custom jump coefficient needs a callable")
            if self.lipschitz_L is None:
                raise ValueError("custom jump coefficient needs a declared lipschitz_L")
        if self.lipschitz_L is None:
            default_L = 0.0 if self.kind == "zero" else abs(self.scale)
            object.__setattr__(self, "lipschitz_L", default_L)
        if self.positive is None:
            pos = self.kind in ("linear", "ratio") and self.scale > 0
            object.__setattr__(self, "positive", pos)

    def __call__(self, x: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            return self.scale * x
        if self.kind == "sin":
            return self.scale * math.sin(x)
        if self.kind == "ratio":
            return self.scale * x / (1.0 + x)
        return float(self.func(x))


def _constant_segment(value: float) -> Callable[[float], float]:
    def segment(t: float) -> float:
        return value

    segment.constant_value = value  # type: ignore[attr-defined]
    return segment


@dataclass(frozen=True)
class ModelSpec:
    """Full parameterization of the jump-delay CIR/CEV equation.

    Immutable after construction; safe to share across workers.
    """

    k1: float
    k2: float
    k3: float
    alpha: float
    lam: float
    tau: float
    horizon: float
    delay_coeff: DelayCoefficient = field(default_factory=lambda: DelayCoefficient("constant"))
    jump_coeff: JumpCoefficient = field(default_factory=lambda: JumpCoefficient("zero"))
    initial_segment: Callable[[float], float] = field(default_factory=lambda: _constant_segment(1.0))

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "lam", "tau", "horizon"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        for name in ("k1", "k2", "tau", "horizon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0.5 <= self.alpha < 1.0):
            raise ValueError(f"alpha must lie in [1/2, 1), got {self.alpha}")
        ratio = self.horizon / self.tau
        if abs(ratio - round(ratio)) > _MULTIPLE_RTOL * max(1.0, ratio) or round(ratio) < 1:
            raise ValueError(
                f"horizon {self.horizon} must be a positive integer multiple of tau {self.tau}"
            )
        if self.jump_coeff.kind != "zero":
            if not (self.jump_coeff.lipschitz_L <= 1.0 or self.jump_coeff.positive):
                raise ValueError(
                    "jump coefficient needs lipschitz_L <= 1 or g > 0 on x > 0"
                )
        # spot-check the initial segment for strict positivity
        n_check = 17
        for i in range(n_check + 1):
            t = -self.tau + i * self.tau / n_check
            v = self.initial_segment(min(t, 0.0))
            if not v > 0:
                raise ValueError(f"initial segment must be strictly positive, got {v} at t={t}")

    @property
    def holder_gamma(self) -> float:
        if self.delay_coeff.kind == "constant":
            return 1.0
        return self.delay_coeff.gamma

    @property
    def lipschitz_L(self) -> float:
        return self.jump_coeff.lipschitz_L

    @property
    def jump_positive(self) -> bool:
        return self.jump_coeff.positive

    def eval_initial_segment(self, t: float) -> float:
        if not (-self.tau - 1e-12 * self.tau <= t <= 1e-15):
            raise ValueError(f"initial segment is defined on [-tau, 0], got t={t}")
        v = float(self.initial_segment(min(t, 0.0)))
        if not v > 0:
            raise ValueError(f"initial segment must be strictly positive, got {v} at t={t}")
        return v


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme parameters: implicitness theta, mollification exponent m and
    maximum step size delta (must be tau/l for an integer l >= 2)."""

    delta: float
    theta: float = 0.5
    m: float = 0.25

    def __post_init__(self):
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not (0.0 < self.m <= 0.25):
            raise ValueError(f"m must lie in (0, 1/4], got {self.m}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


def delta_substeps(model: ModelSpec, config: SchemeConfig) -> int:
    """Return the integer l with config.delta == tau / l, or raise."""
    ratio = model.tau / config.delta
    l = round(ratio)
    if l < 2 or abs(ratio - l) > _MULTIPLE_RTOL * ratio:
        raise ValueError(
            f"delta must equal tau/l for an integer l >= 2; got delta={config.delta}, tau={model.tau}"
        )
    return l


@dataclass(frozen=True)
class AssumptionBReport:
    bound: float
    satisfied: bool
    components: tuple[float, float, float]


@dataclass(frozen=True)
class JumpStepReport:
    bound: float
    satisfied: bool


def validate_assumption_b(model: ModelSpec, config: SchemeConfig) -> AssumptionBReport:
    """Step-size condition for nonnegativity of the under-root quantity.

    The bound is the three-way minimum

        (1/(k2(1-theta)+k3^2/4))^2  ^  (...)^4  ^  (4-k3^2)/(4 k2 (1-theta)),

    with the third component +inf at theta = 1.  A non-positive third
    component (k3 >= 2 with theta < 1) makes the condition unsatisfiable and
    is reported, not raised.
    """
    k2, k3, theta = model.k2, model.k3, config.theta
    base = 1.0 / (k2 * (1.0 - theta) + k3 * k3 / 4.0)
    c1 = base * base
    c2 = c1 * c1
    if theta == 1.0:
        c3 = math.inf
    else:
        c3 = (4.0 - k3 * k3) / (4.0 * k2 * (1.0 - theta))
    bound = min(c1, c2, c3)
    satisfied = bound > 0 and config.delta < bound
    return AssumptionBReport(bound=bound, satisfied=satisfied, components=(c1, c2, c3))


def validate_jump_step(model: ModelSpec, config: SchemeConfig) -> JumpStepReport:
    """Positivity condition for the compensated jump update:
    delta < (1/lam) * min(1/L, 1)."""
    L = model.lipschitz_L
    inv_L = math.inf if L == 0 else 1.0 / L
    if model.lam == 0:
        bound = math.inf
    else:
        bound = (1.0 / model.lam) * min(inv_L, 1.0)
    return JumpStepReport(bound=bound, satisfied=config.delta < bound)


def eval_delay_coeff(model: ModelSpec, x: float) -> float:
    """Evaluate b(x); rejects negative x."""
    return model.delay_coeff(x)


def eval_jump_coeff(model: ModelSpec, x: float) -> float:
    """Evaluate g(x)."""
    return model.jump_coeff(x)


# ---------------------------------------------------------------------------
# config file loading (TOML)

def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


class ConfigError(ValueError):
    """Malformed model configuration file."""


def load_model_file(path) -> tuple[ModelSpec, SchemeConfig, int]:
    """Load a model/config TOML file.

    Returns (model, config, delta_exponent) where delta = tau * 2**-exponent.
    Only constant initial segments are expressible in the file format.
    """
    try:
        raw = _load_toml(path)
    except Exception as exc:  # tomllib raises with line info in the message
        raise ConfigError(f"{path}: {exc}") from exc

    def need(key, typ=(int, float)):
        if key not in raw:
            raise ConfigError(f"{path}: missing key {key!r}")
        v = raw[key]
        if not isinstance(v, typ) or isinstance(v, bool):
            raise ConfigError(f"{path}: key {key!r} has wrong type {type(v).__name__}")
        return v

    dc_raw = raw.get("delay_coeff", {"kind": "constant"})
    if not isinstance(dc_raw, dict) or "kind" not in dc_raw:
        raise ConfigError(f"{path}: delay_coeff must be a table with a 'kind' key")
    if dc_raw["kind"] == "custom":
        raise ConfigError(f"{path}: custom delay coefficients are API-only")
    delay = DelayCoefficient(kind=dc_raw["kind"], gamma=float(dc_raw.get("gamma", 1.0)))

    jc_raw = raw.get("jump_coeff", {"kind": "zero"})
    if not isinstance(jc_raw, dict) or "kind" not in jc_raw:
        raise ConfigError(f"{path}: jump_coeff must be a table with a 'kind' key")
    if jc_raw["kind"] == "custom":
        raise ConfigError(f"{path}: custom jump coefficients are API-only")
    jump = JumpCoefficient(
        kind=jc_raw["kind"],
        scale=float(jc_raw.get("delta_scale", 1.0)),
        lipschitz_L=(float(jc_raw["lipschitz_L"]) if "lipschitz_L" in jc_raw else None),
        positive=(bool(jc_raw["positive"]) if "positive" in jc_raw else None),
    )

    seg_raw = raw.get("initial_segment", {"kind": "constant", "value": 1.0})
    if not isinstance(seg_raw, dict) or seg_raw.get("kind") != "constant":
        raise ConfigError(f"{path}: initial_segment supports only kind='constant' in files")
    segment = _constant_segment(float(seg_raw.get("value", 1.0)))

    try:
        model = ModelSpec(
            k1=float(need("k1")),
            k2=float(need("k2")),
            k3=float(need("k3")),
            alpha=float(need("alpha")),
            lam=float(need("lambda")),
            tau=float(need("tau")),
            horizon=float(need("horizon")),
            delay_coeff=delay,
            jump_coeff=jump,
            initial_segment=segment,
        )
        exponent = int(need("delta_exponent", int))
        config = SchemeConfig(
            delta=model.tau * 2.0 ** (-exponent),
            theta=float(raw.get("theta", 0.5)),
            m=float(raw.get("m", 0.25)),
        )
        delta_substeps(model, config)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return model, config, exponent
