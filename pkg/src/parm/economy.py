"""Market primitives: rider demand, driver supply and preferences.

Locations are indexed ``0..n-1`` and a driver's type is the index of her
preferred location, so types and locations share one index space.  Rider
values are Uniform[0, 1]; demand on the cell ``(i, j)`` at price ``p`` is
``theta[i] * alpha[i, j] * (1 - p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .errors import (
    ConfigError,
    DeltaOutOfRange,
    DimensionMismatch,
    IdioExceedsOutsideOption,
    InvalidEconomy,
    NegativeMass,
    NonStochasticAlpha,
    PriceOutOfRange,
)

#: Marker for a driver type with no supply limit.
UNBOUNDED = math.inf

STOCHASTIC_TOL = 1e-12
SYMMETRY_TOL = 1e-12


def _frozen(a: Any) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DemandCell:
    origin: int
    dest: int
    mass: float


@dataclass(frozen=True, eq=False)
class Economy:
    """Immutable market description.

    ``supply[t]`` is the mass of type-``t`` drivers; ``UNBOUNDED`` (``inf``)
    marks an unconstrained type.  ``idio`` is the per-period utility a driver
    collects whenever she starts a period at her preferred location.
    """

    n: int
    theta: np.ndarray
    alpha: np.ndarray
    supply: np.ndarray
    w: float
    delta: float
    idio: float
    _demand: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "theta", _frozen(self.theta))
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        object.__setattr__(self, "supply", _frozen(self.supply))
        object.__setattr__(self, "w", float(self.w))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "idio", float(self.idio))
        if self.alpha.shape == (self.n, self.n) and self.theta.shape == (self.n,):
            demand = self.theta[:, None] * self.alpha
        else:
            demand = np.zeros((0, 0))
        object.__setattr__(self, "_demand", _frozen(demand))

    @property
    def W(self) -> float:
        """Per-period equivalent of the outside option, ``w * (1 - delta)``."""
        return self.w * (1.0 - self.delta)

    @property
    def demand(self) -> np.ndarray:
        """Rider mass ``theta_i * alpha_ij`` on every cell (price zero)."""
        return self._demand

    @property
    def unbounded(self) -> np.ndarray:
        return np.isinf(self.supply)

    def supply_caps(self) -> np.ndarray:
        """Finite per-type caps; unbounded types are capped at total demand.

        Served riders per period never exceed ``sum(theta)``, and in an optimum
        relocation mass never exceeds serving mass, so the cap cannot bind.
        """
        cap = float(np.sum(self.theta))
        return np.where(np.isinf(self.supply), cap, self.supply)

    def cells(self) -> list[DemandCell]:
        return [
            DemandCell(i, j, float(self._demand[i, j]))
            for i in range(self.n)
            for j in range(self.n)
        ]

    def replace(self, **changes: Any) -> "Economy":
        kwargs = dict(
            n=self.n,
            theta=self.theta,
            alpha=self.alpha,
            supply=self.supply,
            w=self.w,
            delta=self.delta,
            idio=self.idio,
        )
        kwargs.update(changes)
        return validate_economy(Economy(**kwargs))

    def with_idio_frac(self, frac: float) -> "Economy":
        return self.replace(idio=frac * self.W)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Economy):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.supply, other.supply)
            and (self.w, self.delta, self.idio) == (other.w, other.delta, other.idio)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.theta.tobytes(), self.alpha.tobytes(),
                     self.supply.tobytes(), self.w, self.delta, self.idio))


def economy_violations(e: Economy) -> list:
    """Every violated invariant of ``e`` (empty when valid)."""
    out: list = []
    n = e.n
    if n < 1:
        return [DimensionMismatch(f"n must be positive, got {n}")]
    if e.theta.shape != (n,):
        out.append(DimensionMismatch(f"theta has shape {e.theta.shape}, expected ({n},)"))
    if e.alpha.shape != (n, n):
        out.append(DimensionMismatch(f"alpha has shape {e.alpha.shape}, expected ({n}, {n})"))
    if e.supply.shape != (n,):
        out.append(DimensionMismatch(f"supply has shape {e.supply.shape}, expected ({n},)"))
    if out:
        return out

    if np.any(~np.isfinite(e.theta)) or np.any(e.theta < 0):
        out.append(NegativeMass(f"theta must be finite and nonnegative: {e.theta.tolist()}"))
    if np.any(np.isnan(e.supply)) or np.any(e.supply < 0):
        out.append(NegativeMass(f"supply must be nonnegative: {e.supply.tolist()}"))
    if np.any(e.alpha < 0) or np.any(e.alpha > 1) or np.any(np.isnan(e.alpha)):
        out.append(NonStochasticAlpha("alpha entries must lie in [0, 1]"))
    sums = e.alpha.sum(axis=1)
    bad = [i for i in range(n) if abs(sums[i] - 1.0) > STOCHASTIC_TOL]
    if bad:
        detail = ", ".join(f"row {i} sums to {sums[i]!r}" for i in bad)
        out.append(NonStochasticAlpha(detail))
    if not (0.0 < e.delta < 1.0):
        out.append(DeltaOutOfRange(f"delta must lie in (0, 1), got {e.delta}"))
    elif e.idio < 0 or not e.idio / (1.0 - e.delta) < e.w:
        out.append(
            IdioExceedsOutsideOption(
                f"need 0 <= I and I/(1-delta) < w; got I={e.idio}, "
                f"I/(1-delta)={e.idio / (1.0 - e.delta)}, w={e.w}"
            )
        )
    return out


def validate_economy(raw: Economy) -> Economy:
    """Return ``raw`` unchanged if valid, else raise :class:`InvalidEconomy`."""
    violations = economy_violations(raw)
    if violations:
        raise InvalidEconomy(violations)
    return raw


def make_economy(
    theta: Sequence[float],
    alpha: Sequence[Sequence[float]],
    supply: Sequence[float],
    w: float = 40.0,
    delta: float = 0.99,
    idio: float | None = None,
    idio_frac: float | None = None,
) -> Economy:
    """Build and validate an economy; give either ``idio`` or ``idio_frac``."""
    if idio is not None and idio_frac is not None:
        raise ValueError("give idio or idio_frac, not both")
    if idio is None:
        idio = (idio_frac or 0.0) * w * (1.0 - delta)
    e = Economy(n=len(theta), theta=theta, alpha=alpha, supply=supply,
                w=w, delta=delta, idio=idio)
    return validate_economy(e)


def demand_at_price(e: Economy, i: int, j: int, p: float) -> float:
    if not (0.0 <= p <= 1.0):
        raise PriceOutOfRange(f"price {p} outside [0, 1]")
    return float(e.theta[i] * e.alpha[i, j] * (1.0 - p))


def is_symmetric(e: Economy) -> bool:
    """True when every origin has the same demand and every share is equal."""
    th, al = e.theta, e.alpha
    return bool(np.ptp(th) <= SYMMETRY_TOL and np.ptp(al) <= SYMMETRY_TOL)


# configuration files ---------------------------------------------------------

CONFIG_KEYS = ("n", "theta", "alpha", "supply", "w", "delta", "I_frac")


def _as_float(key: str, v: Any) -> float:
    if isinstance(v, bool):
        raise ConfigError(key, f"expected a number, got {v!r}")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {v!r}") from None


def _as_vector(key: str, v: Any, n: int, allow_inf: bool = False) -> list[float]:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(key, f"expected a list of {n} numbers, got {v!r}")
    if len(v) != n:
        raise ConfigError(key, f"expected {n} entries, got {len(v)}")
    out = []
    for k, item in enumerate(v):
        if allow_inf and isinstance(item, str) and item.strip().lower() in ("inf", "unbounded"):
            out.append(UNBOUNDED)
        else:
            out.append(_as_float(f"{key}[{k}]", item))
    return out


def economy_from_dict(d: dict) -> Economy:
    """Parse the config mapping; errors name the offending key."""
    if not isinstance(d, dict):
        raise ConfigError("<root>", "expected a mapping")
    unknown = sorted(set(d) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    for key in CONFIG_KEYS:
        if key not in d:
            raise ConfigError(key, "missing")
    n = d["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError("n", f"expected a positive integer, got {n!r}")
    theta = _as_vector("theta", d["theta"], n)
    alpha_raw = d["alpha"]
    if not isinstance(alpha_raw, (list, tuple)) or len(alpha_raw) != n:
        raise ConfigError("alpha", f"expected {n} rows")
    alpha = [_as_vector(f"alpha[{i}]", row, n) for i, row in enumerate(alpha_raw)]
    supply = _as_vector("supply", d["supply"], n, allow_inf=True)
    w = _as_float("w", d["w"])
    delta = _as_float("delta", d["delta"])
    frac = _as_float("I_frac", d["I_frac"])
    e = Economy(n=n, theta=theta, alpha=alpha, supply=supply, w=w, delta=delta,
                idio=frac * w * (1.0 - delta))
    violations = economy_violations(e)
    if violations:
        raise InvalidEconomy(violations)
    return e


def economy_to_dict(e: Economy) -> dict:
    W = e.W
    return {
        "n": e.n,
        "theta": [float(v) for v in e.theta],
        "alpha": [[float(v) for v in row] for row in e.alpha],
        "supply": ["inf" if math.isinf(s) else float(s) for s in e.supply],
        "w": e.w,
        "delta": e.delta,
        "I_frac": e.idio / W if W > 0 else 0.0,
    }


def load_economy(path: str | Path) -> Economy:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return economy_from_dict(data)
