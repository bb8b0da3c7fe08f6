"""Nodal clipping onto the admissible box and the complementary split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdmissibleBox:
    """Closed interval ``[lower, kappa]`` imposed on every unknown coefficient.

    ``lower`` is 0 for the method itself; other values only serve to emulate
    an unconstrained problem in tests.
    """

    kappa: float
    lower: float = 0.0

    def __post_init__(self):
        if np.isnan(self.kappa) or np.isnan(self.lower) or self.kappa < self.lower:
            raise ValueError(f"invalid box [{self.lower}, {self.kappa}]")
        if self.lower == 0.0 and self.kappa < 0.0:
            raise ValueError("kappa must be nonnegative")

    @property
    def upper(self) -> float:
        return self.kappa


def clip_plus(v, box: AdmissibleBox, mask=None) -> np.ndarray:
    """Constrained part ``v+``: nodal clip to the box.

    If ``mask`` is given only the selected coefficients are clipped; the rest
    (Dirichlet extension values) pass through unchanged.
    """
    v = np.asarray(v, dtype=float)
    clipped = np.minimum(np.maximum(v, box.lower), box.kappa)
    if mask is None:
        return clipped
    return np.where(mask, clipped, v)


def complement(v, v_plus) -> np.ndarray:
    """Complementary part ``v- = v - v+``."""
    v = np.asarray(v, dtype=float)
    v_plus = np.asarray(v_plus, dtype=float)
    if v.shape != v_plus.shape:
        raise ValueError(f"shape mismatch {v.shape} vs {v_plus.shape}")
    return v - v_plus


def split(v, box: AdmissibleBox, mask=None) -> tuple[np.ndarray, np.ndarray]:
    v_plus = clip_plus(v, box, mask)
    return v_plus, complement(v, v_plus)


def active_sets(v, box: AdmissibleBox) -> tuple[np.ndarray, np.ndarray]:
    """Indices touching the lower bound and the upper bound (ties count as active)."""
    v = np.asarray(v, dtype=float)
    return np.flatnonzero(v <= box.lower), np.flatnonzero(v >= box.kappa)
