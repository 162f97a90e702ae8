"""The cubic reaction f(t, u) = u - beta(t) u^3 and its coefficient beta(t)."""

import math
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np


@dataclass(frozen=True)
class BetaProfile:
    """beta(t) = mean + amplitude * sin(frequency * t)."""

    mean: float = 1.5
    amplitude: float = 0.5
    frequency: float = 1.0

    def __post_init__(self):
        if self.lower <= 0:
            raise ValueError(f"beta must stay positive, got range [{self.lower}, {self.upper}]")

    @classmethod
    def constant(cls, value: float) -> "BetaProfile":
        return cls(mean=value, amplitude=0.0, frequency=0.0)

    @property
    def lower(self) -> float:
        return self.mean - abs(self.amplitude)

    @property
    def upper(self) -> float:
        return self.mean + abs(self.amplitude)

    @property
    def is_constant(self) -> bool:
        return self.amplitude == 0.0 or self.frequency == 0.0

    @property
    def lipschitz(self) -> float:
        return abs(self.amplitude * self.frequency)

    def __call__(self, t: Any) -> Any:
        if self.is_constant:
            return np.full(np.shape(t), self.mean) if np.ndim(t) else self.mean
        return self.mean + self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BetaProfile":
        return cls(
            mean=float(data.get("mean", 1.5)),
            amplitude=float(data.get("amplitude", 0.5)),
            frequency=float(data.get("frequency", 1.0)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean, "amplitude": self.amplitude, "frequency": self.frequency}


@dataclass(frozen=True)
class CubicReaction:
    beta: BetaProfile

    def __call__(self, t: Any, u: Any) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        b = self._beta(t, u)
        return u - b * u**3

    def derivative(self, t: Any, u: Any) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return 1.0 - 3.0 * self._beta(t, u) * u**2

    def _beta(self, t: Any, u: np.ndarray) -> Any:
        b = self.beta(t)
        if np.ndim(b) == 0:
            return b
        # t indexes the leading axis of u
        return np.reshape(b, np.shape(b) + (1,) * (u.ndim - np.ndim(b)))

    def slope_bound(self, radius: float) -> float:
        """sup |f_u| over |u| <= radius and all t."""
        return max(1.0, abs(1.0 - 3.0 * self.beta.upper * radius * radius))

    def comparison_band(self) -> tuple[float, float]:
        """Positive bounded solutions of u' = f(t, u) stay in [1/sqrt(beta_hi), 1/sqrt(beta_lo)]."""
        return 1.0 / math.sqrt(self.beta.upper), 1.0 / math.sqrt(self.beta.lower)
