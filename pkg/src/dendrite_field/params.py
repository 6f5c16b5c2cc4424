"""Model parameter sets, standing-assumption validation, and config-file I/O.

Config files are flat ``key = value`` text, one entry per line, ``#`` starts a
comment.  Function-valued entries use the spec syntax of
:mod:`dendrite_field.functions`, e.g. ``lambda = shifted_power(alpha=0.2, p=8)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .functions import FunctionSpec, SpecError, QUAD_TOL

__all__ = [
    "SoftParams",
    "HardParams",
    "NetworkParams",
    "ValidationReport",
    "validate_soft",
    "validate_hard",
    "parse_config",
    "format_config",
    "parse_function_spec",
]


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_if_failed(self):
        if self.errors:
            raise ValueError("invalid parameters: " + "; ".join(self.errors))


@dataclass(frozen=True)
class SoftParams:
    """Soft-model parameters; immutable after construction."""

    v_min: float
    L: float
    rho: float
    theta: float
    w: float
    lam: FunctionSpec
    F: FunctionSpec
    H: FunctionSpec
    f0: FunctionSpec

    @property
    def alpha(self) -> float:
        """inf{v >= v_min : lambda(v) > 0}; equals v_min when (S1) fails."""
        return self.lam.positivity_threshold(self.v_min)

    @property
    def gamma(self) -> float:
        """2 rho H(0) w^2, the squared excitation scale of the simplified SDE."""
        return 2.0 * self.rho * float(self.H(0.0)) * self.w**2


@dataclass(frozen=True)
class HardParams:
    """Hard-model parameters; drift is the constant I."""

    v_min: float
    v_max: float
    L: float
    rho: float
    w: float
    I: float
    H: FunctionSpec
    f0: FunctionSpec
    theta: float = 0.0

    @property
    def sigma(self) -> float:
        return self.rho * float(self.H(0.0)) * self.w**2


@dataclass(frozen=True)
class NetworkParams:
    n: int
    p_n: float
    T: float
    seed: int
    allow_self_edges: bool = True

    @property
    def N(self) -> float:
        return self.n * self.p_n

    def w_n(self, w: float) -> float:
        return w / math.sqrt(self.N)


def _check_density(name: str, spec: FunctionSpec, lo: float, hi: float,
                   errors: list[str], tol: float = QUAD_TOL):
    if spec.kind == "atoms":
        return  # weight normalization enforced at construction
    try:
        total = spec.integral(lo, hi)
    except SpecError as exc:
        errors.append(f"{name}: {exc}")
        return
    if abs(total - 1.0) > tol:
        errors.append(f"{name} does not integrate to 1 on [{lo}, {hi}] (got {total:.10f})")


def validate_soft(params: SoftParams,
                  growth_C: float | None = None,
                  growth_p: int | None = None) -> ValidationReport:
    """Check the soft-model standing assumptions at desk scale.

    The (S1) growth constants are never fixed numerically by the theory, so the
    growth check only runs when the caller supplies C and p; it samples
    [v_min, v_min + 100].
    """
    rep = ValidationReport()
    if params.rho <= 0:
        rep.errors.append("rho must be positive")
    if params.L <= 0:
        rep.errors.append("L must be positive")
    if params.w <= 0:
        rep.errors.append("w must be positive")
    if params.theta < 0:
        rep.errors.append("theta must be nonnegative")
    if params.lam.kind == "atoms":
        rep.errors.append("lambda cannot be a discrete law")
    if float(params.F(params.v_min)) < 0:
        rep.errors.append(f"F(v_min) >= 0 violated: F({params.v_min}) = {float(params.F(params.v_min))}")
    _check_density("H", params.H, 0.0, params.L, rep.errors)
    if params.f0.kind == "atoms":
        pass  # atoms allowed for the soft model only
    else:
        lo, hi = _density_window(params.f0, params.v_min)
        _check_density("f0", params.f0, lo, hi, rep.errors)
    if not rep.errors:
        lam_vals = params.lam(np.linspace(params.v_min, params.v_min + 50, 2001))
        if np.any(np.asarray(lam_vals) < 0):
            rep.errors.append("lambda takes negative values")
    if rep.errors:
        return rep

    if params.alpha <= params.v_min:
        rep.warnings.append(
            "alpha = v_min: lambda does not vanish on a neighborhood of v_min ((S1) violated)")
    if params.theta == 0.0 and not _compactly_supported(params.f0):
        rep.warnings.append(
            "theta = 0 with non-compactly-supported f0: (S2) not satisfied")
    if growth_C is not None and growth_p is not None:
        v = np.linspace(params.v_min, params.v_min + 100.0, 5001)
        lam = np.asarray(params.lam(v))
        if np.any(lam > growth_C * (1.0 + (v - params.v_min)) ** growth_p):
            rep.warnings.append(
                f"lambda exceeds C(1+(v-v_min))^p with C={growth_C}, p={growth_p} on the scan window")
        Fv = np.asarray(params.F(v))
        if np.any(Fv > growth_C * (1.0 + (v - params.v_min))):
            rep.warnings.append(
                f"F exceeds C(1+(v-v_min)) with C={growth_C} on the scan window")
    return rep


def validate_hard(params: HardParams) -> ValidationReport:
    rep = ValidationReport()
    if params.I <= 0:
        rep.errors.append("drift constant I must be positive")
    if not (params.v_min < params.v_max):
        rep.errors.append("v_min < v_max required")
    if params.rho <= 0 or params.L <= 0 or params.w < 0:
        rep.errors.append("rho > 0, L > 0, w >= 0 required")
    if params.f0.kind == "atoms":
        rep.errors.append("hard model requires a continuous initial density")
    if rep.errors:
        return rep
    _check_density("H", params.H, 0.0, params.L, rep.errors)
    _check_density("f0", params.f0, params.v_min, params.v_max, rep.errors)
    grid = np.linspace(0.0, params.L, 10_000)
    Hvals = np.asarray(params.H(grid))
    if float(params.H(0.0)) < Hvals.max() - 1e-9:
        rep.errors.append(
            f"H(0) not maximal: H(0) = {float(params.H(0.0))}, max H = {Hvals.max()}")
    if rep.errors:
        return rep
    f_lo = float(params.f0(params.v_min))
    f_hi = float(params.f0(params.v_max))
    if abs(f_lo - f_hi) > QUAD_TOL:
        rep.warnings.append(
            f"f0(v_min) != f0(v_max) ({f_lo} vs {f_hi}): limit excitation rate is only piecewise C^1")
    return rep


def _density_window(spec: FunctionSpec, v_min: float) -> tuple[float, float]:
    try:
        return spec.support()
    except SpecError:
        return (v_min, v_min + 100.0)


def _compactly_supported(spec: FunctionSpec) -> bool:
    try:
        spec.support()
        return True
    except SpecError:
        return False


# --------------------------------------------------------------------- config

_FUN_RE = re.compile(r"^(\w+)\((.*)\)$")

_FUNCTION_KEYS = {"lambda", "F", "H", "f0"}


def parse_function_spec(text: str) -> FunctionSpec:
    m = _FUN_RE.match(text.strip())
    if not m:
        raise SpecError(f"cannot parse function spec {text!r}")
    kind, body = m.group(1), m.group(2).strip()
    kv = {}
    if body:
        for part in _split_args(body):
            if "=" not in part:
                raise SpecError(f"malformed argument {part!r} in {text!r}")
            key, val = part.split("=", 1)
            kv[key.strip()] = val.strip()
    if kind == "shifted_power":
        return FunctionSpec.shifted_power(float(kv["alpha"]), int(kv["p"]))
    if kind == "power":
        return FunctionSpec.power(int(kv["p"]))
    if kind == "affine":
        return FunctionSpec.affine(float(kv["c0"]), float(kv["c1"]))
    if kind == "constant":
        return FunctionSpec.constant(float(kv["c"]))
    if kind == "piecewise_linear":
        knots = []
        for pair in kv["knots"].split(";"):
            x, y = pair.split(",")
            knots.append((float(x), float(y)))
        return FunctionSpec.piecewise_linear(knots)
    if kind == "sine_bump":
        return FunctionSpec.sine_bump(float(kv["lo"]), float(kv["hi"]),
                                      float(kv.get("amplitude", 0.5)))
    if kind == "uniform":
        return FunctionSpec.uniform(float(kv["lo"]), float(kv["hi"]))
    if kind == "atoms":
        pts = [float(x) for x in kv["points"].split(";")]
        wts = [float(x) for x in kv["weights"].split(";")]
        return FunctionSpec.atoms(pts, wts)
    raise SpecError(f"unknown function kind {kind!r}")


def _split_args(body: str) -> list[str]:
    # knots hold ';'-separated pairs, so only split on top-level commas that
    # are followed by an identifier and '='
    parts, cur = [], []
    tokens = body.split(",")
    for tok in tokens:
        if cur and re.match(r"^\s*\w+\s*=", tok):
            parts.append(",".join(cur))
            cur = [tok]
        else:
            cur.append(tok)
    if cur:
        parts.append(",".join(cur))
    return parts


def parse_config(text: str) -> dict:
    """Parse flat key = value config text into a dict.

    Function keys (lambda, F, H, f0) become FunctionSpec; int-looking values
    become int, float-looking become float, 'true'/'false' become bool, the
    rest stay strings.
    """
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in _FUNCTION_KEYS or _FUN_RE.match(val):
            out[key] = parse_function_spec(val)
            continue
        low = val.lower()
        if low in ("true", "false"):
            out[key] = low == "true"
            continue
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


def format_config(entries: dict) -> str:
    lines = []
    for key, val in entries.items():
        if isinstance(val, FunctionSpec):
            lines.append(f"{key} = {val.format()}")
        elif isinstance(val, bool):
            lines.append(f"{key} = {'true' if val else 'false'}")
        elif isinstance(val, float):
            lines.append(f"{key} = {val!r}")
        else:
            lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def soft_params_from_config(cfg: dict) -> SoftParams:
    return SoftParams(
        v_min=float(cfg.get("v_min", 0.0)),
        L=float(cfg.get("L", 1.0)),
        rho=float(cfg.get("rho", 1.0)),
        theta=float(cfg.get("theta", 0.0)),
        w=float(cfg.get("w", 1.0)),
        lam=cfg["lambda"],
        F=cfg["F"],
        H=cfg["H"],
        f0=cfg["f0"],
    )


def hard_params_from_config(cfg: dict) -> HardParams:
    F = cfg.get("F")
    if isinstance(F, FunctionSpec):
        if F.kind != "constant":
            raise SpecError("hard model requires a constant drift F")
        I = F.params["c"]
    else:
        I = float(cfg["I"])
    return HardParams(
        v_min=float(cfg.get("v_min", 0.0)),
        v_max=float(cfg["v_max"]),
        L=float(cfg.get("L", 1.0)),
        rho=float(cfg.get("rho", 1.0)),
        w=float(cfg.get("w", 1.0)),
        I=I,
        H=cfg["H"],
        f0=cfg["f0"],
        theta=float(cfg.get("theta", 0.0)),
    )
