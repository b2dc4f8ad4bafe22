"""Learning-rate schedules controlling posterior contraction.

The update weight at predictive step i follows a power law C (i+1)^(-beta)
with beta in (0, 1]; the classic default uses the closed form
(2 - 1/i) / (i + 1), equivalent to C = 2, beta = 1 up to the 1/i correction.
The dimension-adapted variants slow contraction on feature spaces where
nonparametric estimation cannot attain the root-n rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ScheduleSpec", "alpha"]

ALPHA_CAP = 0.999

_KINDS = ("default", "type1", "type2", "custom")


@dataclass(frozen=True)
class ScheduleSpec:
    """Named learning-rate law.

    kind "default" ignores (C, beta) and uses (2 - 1/i)/(i + 1); the
    parametric kinds evaluate min(C (i+1)^(-beta), 0.999).  The feature
    dimension d parametrizes type1/type2:

    * type1: C = 10^(-(d-1)/(d+4)), beta = 1/2 + d/(d+4)
    * type2: C = 10^(-2d/(d+4)),    beta = d/(d+4)
    """

    kind: str = "default"
    C: float = 2.0
    beta: float = 1.0
    d: int = 1

    # The documented parametrization has beta in (0, 1], but the type1 formula
    # exceeds 1 for d >= 5 (supremum 3/2 as d grows); constructors accept that.
    MAX_BETA = 1.5

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; expected one of {_KINDS}")
        if not self.C > 0:
            raise ValueError(f"schedule constant C must be positive, got {self.C}")
        if not 0.0 < self.beta <= self.MAX_BETA:
            raise ValueError(
                f"schedule exponent beta must lie in (0, {self.MAX_BETA}], got {self.beta}"
            )
        if self.d < 1:
            raise ValueError(f"feature dimension d must be >= 1, got {self.d}")

    @classmethod
    def default(cls) -> "ScheduleSpec":
        return cls("default", C=2.0, beta=1.0)

    @classmethod
    def type1(cls, d: int) -> "ScheduleSpec":
        d = int(d)
        return cls("type1", C=10.0 ** (-(d - 1) / (d + 4)), beta=0.5 + d / (d + 4), d=d)

    @classmethod
    def type2(cls, d: int) -> "ScheduleSpec":
        d = int(d)
        return cls("type2", C=10.0 ** (-2 * d / (d + 4)), beta=d / (d + 4), d=d)

    @classmethod
    def custom(cls, C: float, beta: float) -> "ScheduleSpec":
        return cls("custom", C=float(C), beta=float(beta))

    @classmethod
    def parse(cls, text: str, d: int | None = None) -> "ScheduleSpec":
        """Parse "default" | "type1[:d=<k>]" | "type2[:d=<k>]" | "custom:C=<r>,beta=<r>".

        type1/type2 need the feature dimension, either inline or via ``d``
        (usually the dataset's feature count).  Custom exponents are
        restricted to the documented (0, 1] range.
        """
        text = text.strip()
        if text == "default":
            return cls.default()
        for kind in ("type1", "type2"):
            if text == kind or text.startswith(kind + ":"):
                if ":" in text:
                    key, _, raw = text.partition(":")[2].partition("=")
                    if key.strip() != "d":
                        raise ValueError(f"cannot parse schedule {text!r}")
                    d = int(raw)
                if d is None:
                    raise ValueError(f"schedule {kind!r} requires the feature dimension d")
                return cls.type1(d) if kind == "type1" else cls.type2(d)
        if text.startswith("custom:"):
            params = {}
            for part in text[len("custom:"):].split(","):
                key, _, raw = part.partition("=")
                params[key.strip()] = float(raw)
            missing = {"C", "beta"} - params.keys()
            if missing:
                raise ValueError(f"custom schedule missing {sorted(missing)}")
            if not 0.0 < params["beta"] <= 1.0:
                raise ValueError(f"custom beta must lie in (0, 1], got {params['beta']}")
            return cls.custom(params["C"], params["beta"])
        raise ValueError(f"cannot parse schedule {text!r}")

    def __str__(self) -> str:
        if self.kind == "default":
            return "default"
        if self.kind in ("type1", "type2"):
            return f"{self.kind}:d={self.d}"
        return f"custom:C={self.C:g},beta={self.beta:g}"


def alpha(spec: ScheduleSpec, i):
    """Update weight at predictive step index i >= 1 (scalar or array)."""
    arr = np.asarray(i)
    if not np.issubdtype(arr.dtype, np.number) or np.any(arr < 1):
        raise ValueError("schedule index i must be >= 1")
    idx = arr.astype(float)
    if spec.kind == "default":
        out = (2.0 - 1.0 / idx) / (idx + 1.0)
    else:
        out = np.minimum(spec.C * (idx + 1.0) ** (-spec.beta), ALPHA_CAP)
    return float(out) if np.ndim(i) == 0 else out
