"""Records for fitted constants of pointwise kernel estimates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ProbeRecord:
    t: float
    fitted_C: float
    worst_location: tuple
    s: float | None = None

    def as_dict(self) -> dict:
        return {"probe_t": self.t, "probe_s": self.s, "fitted_C": self.fitted_C,
                "worst_location": list(self.worst_location)}


@dataclass
class BoundReport:
    """Least max-ratio fits ``C = sup |K| / shape`` for a family of probes."""

    name: str
    records: list[ProbeRecord] = field(default_factory=list)
    ceiling: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def fitted_C(self) -> float:
        return max(r.fitted_C for r in self.records)

    @property
    def passed(self) -> bool:
        ok = all(np.isfinite(r.fitted_C) and r.fitted_C > 0 for r in self.records)
        if self.ceiling is not None:
            ok = ok and self.fitted_C <= self.ceiling
        return bool(ok)

    def stability(self) -> float:
        """max/min of the per-probe constants."""
        cs = [r.fitted_C for r in self.records]
        return max(cs) / min(cs)

    def as_dict(self) -> dict:
        return {"name": self.name, "fitted_C": self.fitted_C, "ceiling": self.ceiling,
                "passed": self.passed, "records": [r.as_dict() for r in self.records],
                **{k: v for k, v in self.extra.items()}}


def fit_constant(values: np.ndarray, shape: np.ndarray, mask: np.ndarray | None = None):
    """Smallest ``C`` with ``|values| <= C * shape`` on ``mask`` and the argmax location.

    Returns ``(C, index_tuple)``; raises if the mask selects nothing.
    """
    values = np.abs(np.asarray(values))
    shape = np.asarray(shape, dtype=float)
    if mask is None:
        mask = np.ones(values.shape, dtype=bool)
    if not np.any(mask):
        raise ValueError("no admissible probe points for the bound fit")
    ratio = np.where(mask, values / np.where(mask, shape, 1.0), -np.inf)
    flat = int(np.argmax(ratio))
    loc = np.unravel_index(flat, ratio.shape)
    return float(ratio.flat[flat]), tuple(int(i) for i in loc)
