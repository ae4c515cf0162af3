"""Factors of variation: typed, dot-keyed environment properties that are
sampled or pinned at reset and held fixed for the episode."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from ..core import ContractError
from ..rng import RandomStream


class VariationError(ValueError):
    """Invalid factor key or value, or rejection sampling ran out of retries."""


@dataclass(frozen=True)
class FactorSpec:
    """One factor. ``kind`` is ``"box"`` (uniform in ``[low, high]``),
    ``"discrete"`` (uniform over ``values``) or ``"fixed"`` (always ``default``)."""

    key: str
    kind: str
    default: Any
    low: Any = None
    high: Any = None
    values: tuple = ()
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("box", "discrete", "fixed"):
            raise ContractError(f"unknown factor kind {self.kind!r}")
        if self.kind == "box":
            low = np.asarray(self.low, dtype=float)
            high = np.asarray(self.high, dtype=float)
            if low.shape != high.shape or np.any(low > high):
                raise ContractError(f"bad bounds for factor {self.key}")
            object.__setattr__(self, "low", low)
            object.__setattr__(self, "high", high)
        if self.kind == "discrete" and len(self.values) == 0:
            raise ContractError(f"discrete factor {self.key} has no values")
        self.validate(self.default)

    @property
    def shape(self) -> tuple:
        return np.shape(self.default)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=int))

    def validate(self, value) -> Any:
        """Return ``value`` in canonical form, or raise if it is not allowed."""
        if self.kind == "box":
            v = np.asarray(value, dtype=float)
            if v.shape != self.low.shape:
                raise VariationError(f"{self.key}: expected shape {self.low.shape}, got {v.shape}")
            if not np.all(np.isfinite(v)) or np.any(v < self.low) or np.any(v > self.high):
                raise VariationError(
                    f"{self.key}: value {v.tolist()} outside [{self.low.tolist()}, {self.high.tolist()}]"
                )
            return float(v) if v.ndim == 0 else v
        if self.kind == "discrete":
            if value not in self.values:
                raise VariationError(f"{self.key}: value {value!r} not in {list(self.values)}")
            return value
        if np.any(np.asarray(value) != np.asarray(self.default)):
            raise VariationError(f"{self.key} is fixed at {self.default!r}")
        return self.default

    def sample(self, rng: RandomStream) -> Any:
        if self.kind == "box":
            v = rng.uniform(self.low, self.high)
            return float(v) if np.ndim(v) == 0 else np.asarray(v)
        if self.kind == "discrete":
            return self.values[int(rng.integers(len(self.values)))]
        return self.default

    def bounds_repr(self) -> str:
        if self.kind == "box":
            return f"[{_fmt(self.low)}, {_fmt(self.high)}]"
        if self.kind == "discrete":
            vals = list(self.values)
            if len(vals) > 8:
                return f"{{{vals[0]}, {vals[1]}, ..., {vals[-1]}}} ({len(vals)} values)"
            return "{" + ", ".join(str(v) for v in vals) + "}"
        return "-"


def _fmt(x) -> str:
    x = np.asarray(x)
    if x.ndim == 0:
        return f"{float(x):g}"
    return "(" + ", ".join(f"{float(v):g}" for v in x.ravel()) + ")"


@dataclass(frozen=True)
class Constraint:
    """Rejection predicate over a set of factors.

    It is only enforced when at least one of ``keys`` is randomly sampled;
    if the caller pins all of them, the pinned values win.
    """

    name: str
    keys: tuple
    fn: Callable[[Mapping[str, Any]], bool]


@dataclass
class VariationSpace:
    factors: list
    constraints: list = field(default_factory=list)
    max_retries: int = 100

    def __post_init__(self):
        keys = [f.key for f in self.factors]
        if len(set(keys)) != len(keys):
            raise ContractError("factor keys must be unique")
        self._by_key = {f.key: f for f in self.factors}

    def keys(self) -> list:
        return [f.key for f in self.factors]

    def __getitem__(self, key) -> FactorSpec:
        try:
            return self._by_key[key]
        except KeyError:
            raise VariationError(f"unknown factor {key!r}; known: {self.keys()}") from None

    def __contains__(self, key) -> bool:
        return key in self._by_key

    def defaults(self) -> dict:
        return {f.key: f.default for f in self.factors}

    def flatten(self, values: Mapping[str, Any]) -> np.ndarray:
        """Float64 vector of all factor values in declaration order."""
        return np.concatenate(
            [np.asarray(values[f.key], dtype=float).ravel() for f in self.factors]
        ) if self.factors else np.zeros(0)

    def unflatten(self, flat) -> dict:
        flat = np.asarray(flat, dtype=float)
        out, i = {}, 0
        for f in self.factors:
            chunk = flat[i : i + f.size]
            i += f.size
            if f.kind == "box":
                out[f.key] = float(chunk[0]) if f.shape == () else chunk.reshape(f.shape).copy()
            else:
                # discrete/fixed values are numeric scalars or tuples
                v = chunk.reshape(f.shape)
                out[f.key] = _match_value(f, v)
        if i != flat.size:
            raise VariationError(f"flat variation vector has {flat.size} entries, expected {i}")
        return out

    @property
    def flat_size(self) -> int:
        return sum(f.size for f in self.factors)

    def describe(self) -> list:
        return [
            {"key": f.key, "kind": f.kind, "bounds": f.bounds_repr(),
             "default": _fmt(f.default) if f.kind == "box" else repr(f.default),
             "description": f.description}
            for f in self.factors
        ]


def _match_value(f: FactorSpec, v):
    candidates = f.values if f.kind == "discrete" else (f.default,)
    for c in candidates:
        if np.array_equal(np.asarray(c, dtype=float), v):
            return c
    raise VariationError(f"{f.key}: stored value {v.tolist()} is not an allowed value")


@dataclass
class ResetOptions:
    """``variation``: factor keys to sample (or ``"all"``); ``variation_values``:
    pinned values, which take precedence over sampling."""

    variation: Any = ()
    variation_values: dict = field(default_factory=dict)

    @classmethod
    def coerce(cls, options) -> "ResetOptions":
        if options is None:
            return cls()
        if isinstance(options, ResetOptions):
            return options
        if isinstance(options, Mapping):
            unknown = set(options) - {"variation", "variation_values"}
            if unknown:
                raise VariationError(f"unknown reset option(s) {sorted(unknown)}")
            return cls(options.get("variation", ()), dict(options.get("variation_values", {})))
        raise VariationError(f"cannot interpret reset options {options!r}")

    def requested(self, space: VariationSpace) -> list:
        var = self.variation
        if isinstance(var, str):
            var = [var]
        var = list(var)
        if "all" in var:
            return space.keys()
        for k in var:
            space[k]  # raises on unknown keys
        return var


def sample_variation(space: VariationSpace, rng: RandomStream, options=None,
                     extra_keys: Iterable[str] = ()) -> dict:
    """Draw one value per factor.

    Pinned values win; requested keys (plus ``extra_keys``) are sampled
    uniformly; everything else takes its default. Constraints are enforced by
    resampling the random keys, at most ``space.max_retries`` times.
    """
    opts = ResetOptions.coerce(options)
    fixed = {k: space[k].validate(v) for k, v in opts.variation_values.items()}
    wanted = set(opts.requested(space)) | {space[k].key for k in extra_keys}
    # declaration order, so the draw sequence does not depend on how keys were listed
    random_keys = [k for k in space.keys() if k in wanted and k not in fixed]
    active = [c for c in space.constraints if any(k in random_keys for k in c.keys)]
    for attempt in range(max(1, space.max_retries)):
        values = space.defaults()
        values.update(fixed)
        for k in random_keys:
            values[k] = space[k].sample(rng)
        failed = [c.name for c in active if not c.fn(values)]
        if not failed:
            return values
        if not random_keys:
            break
    raise VariationError(
        f"rejection sampling exhausted after {space.max_retries} tries; "
        f"constraint(s) not satisfied: {', '.join(failed)}"
    )
