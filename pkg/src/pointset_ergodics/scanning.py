"""Scanning functions ``f_phi`` / ``f_{phi,psi}`` and their products.

``f(P) = prod_i sum_p phi_i(p) psi_i(omega(p))``.  A factor without a colour
profile uses ``psi = 1``; the empty product is the constant one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .geometry import TOL_MATCH, PointSet, packing_bound
from .groups import ball_volume

__all__ = [
    "BoxIndicator",
    "BallIndicator",
    "Tent",
    "ColourIndicator",
    "IntervalIndicator",
    "ColourMap",
    "ScanningFunction",
]


# -- spatial profiles --------------------------------------------------------

@dataclass(frozen=True)
class BoxIndicator:
    """Indicator of the open box ``(lo, hi)``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in np.atleast_1d(self.lo)))
        object.__setattr__(self, "hi", tuple(float(v) for v in np.atleast_1d(self.hi)))
        if len(self.lo) != len(self.hi) or any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box needs lo < hi in every coordinate")

    @classmethod
    def unit(cls, d: int, corner=None) -> "BoxIndicator":
        """``(0, 1)^d`` shifted by ``corner``."""
        c = np.zeros(d) if corner is None else np.asarray(corner, dtype=float)
        return cls(tuple(c), tuple(c + 1.0))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def bounds(self):
        return np.array(self.lo), np.array(self.hi)

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.all((pts > self.bounds()[0]) & (pts < self.bounds()[1]), axis=1).astype(float)

    @property
    def sup(self) -> float:
        return 1.0

    @property
    def integral(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))


@dataclass(frozen=True)
class BallIndicator:
    """Indicator of the open ball of ``radius`` about ``center``."""

    radius: float
    center: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def bounds(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (np.linalg.norm(pts - np.array(self.center), axis=1) < self.radius).astype(float)

    @property
    def sup(self) -> float:
        return 1.0

    @property
    def integral(self) -> float:
        return ball_volume(self.radius, self.dim)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class Tent:
    """``height * max(0, 1 - |m - center| / radius)``.

    ``height=None`` normalises the profile to unit integral:
    the integral of the cone is ``vol(B_radius) / (d + 1)``.
    """

    radius: float
    center: tuple
    height: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.height is None:
            d = len(self.center)
            object.__setattr__(self, "height", (d + 1) / ball_volume(self.radius, d))

    @property
    def dim(self) -> int:
        return len(self.center)

    def bounds(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dist = np.linalg.norm(pts - np.array(self.center), axis=1)
        return self.height * np.clip(1.0 - dist / self.radius, 0.0, None)

    @property
    def sup(self) -> float:
        return float(self.height)

    @property
    def integral(self) -> float:
        return float(self.height) * ball_volume(self.radius, self.dim) / (self.dim + 1)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


def _circumball(phi) -> Tuple[np.ndarray, float]:
    if isinstance(phi, BoxIndicator):
        lo, hi = phi.bounds()
        return 0.5 * (lo + hi), 0.5 * float(np.linalg.norm(hi - lo))
    return np.array(phi.center), float(phi.radius)


def _supports_disjoint(a, b) -> bool:
    if isinstance(a, BoxIndicator) and isinstance(b, BoxIndicator):
        (alo, ahi), (blo, bhi) = a.bounds(), b.bounds()
        return bool(np.any((ahi <= blo) | (bhi <= alo)))
    if isinstance(a, BoxIndicator) or isinstance(b, BoxIndicator):
        box, ball = (a, b) if isinstance(a, BoxIndicator) else (b, a)
        lo, hi = box.bounds()
        c = np.array(ball.center)
        nearest = np.clip(c, lo, hi)
        return float(np.linalg.norm(c - nearest)) >= ball.radius
    return float(np.linalg.norm(np.subtract(a.center, b.center))) >= a.radius + b.radius


# -- colour profiles ---------------------------------------------------------

@dataclass(frozen=True)
class ColourIndicator:
    """Indicator of a finite colour subset."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    def __call__(self, colours) -> np.ndarray:
        return np.isin(np.asarray(colours), np.asarray(self.values)).astype(float)

    @property
    def sup(self) -> float:
        return 1.0


@dataclass(frozen=True)
class IntervalIndicator:
    """Indicator of the colour interval ``[lo, hi]``."""

    lo: float
    hi: float

    def __call__(self, colours) -> np.ndarray:
        c = np.asarray(colours, dtype=float)
        return ((c >= self.lo) & (c <= self.hi)).astype(float)

    @property
    def sup(self) -> float:
        return 1.0


@dataclass(frozen=True)
class ColourMap:
    """Bounded continuous colour profile given by a vectorised callable."""

    func: Callable
    bound: float

    def __call__(self, colours) -> np.ndarray:
        return np.asarray(self.func(np.asarray(colours, dtype=float)), dtype=float)

    @property
    def sup(self) -> float:
        return float(self.bound)


# -- scanning function -------------------------------------------------------

ColourLookup = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScanningFunction:
    """Product of ``f_{phi_i, psi_i}`` factors.

    ``factors`` is a sequence of ``(phi, psi)`` pairs with ``psi=None`` for an
    uncoloured factor.
    """

    factors: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple((phi, psi) for phi, psi in self.factors))

    @classmethod
    def f_phi(cls, phi) -> "ScanningFunction":
        return cls(((phi, None),))

    @classmethod
    def f_phi_psi(cls, phi, psi) -> "ScanningFunction":
        return cls(((phi, psi),))

    @classmethod
    def product(cls, *fs) -> "ScanningFunction":
        return cls(tuple(fac for f in fs for fac in f.factors))

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def kind(self) -> str:
        if self.k == 1:
            return "f_phi" if self.factors[0][1] is None else "f_phi_psi"
        return "product"

    @property
    def coloured(self) -> bool:
        return any(psi is not None for _, psi in self.factors)

    @property
    def profiles(self):
        return [phi for phi, _ in self.factors]

    def supports_disjoint(self) -> bool:
        ph = self.profiles
        return all(_supports_disjoint(ph[i], ph[j]) for i in range(len(ph)) for j in range(i + 1, len(ph)))

    def support_bounds(self):
        """Bounding box of the union of the supports."""
        if not self.factors:
            return None
        los, his = zip(*(phi.bounds() for phi in self.profiles))
        return np.min(los, axis=0), np.max(his, axis=0)

    def bound(self, r: float) -> float:
        """Packing bound ``prod_i N(U_i) |phi_i| |psi_i|`` on ``|f|``."""
        out = 1.0
        for phi, psi in self.factors:
            n = packing_bound(phi.diameter, r, phi.dim)
            out *= n * phi.sup * (1.0 if psi is None else psi.sup)
        return out

    def evaluate(self, P: PointSet, colours=None, translation=None, rotation: float = 0.0) -> float:
        """``f(x P)`` (or ``f(x P^omega)``) for one group element."""
        t = np.zeros((1, P.dim)) if translation is None else np.asarray(translation, dtype=float).reshape(1, -1)
        return float(self.evaluate_many(P, colours, t, np.array([rotation]))[0])

    def evaluate_many(self, P: PointSet, colours, translations: np.ndarray,
                      rotations: Optional[np.ndarray] = None) -> np.ndarray:
        """Vectorised ``f(x_j P^omega)`` for group elements ``x_j = (R_j, t_j)``.

        ``colours`` is ``None``, an array aligned with ``P.points``, or a
        callable ``(point_idx, sample_idx) -> colours`` for colourings that
        vary between samples.
        """
        t = np.atleast_2d(np.asarray(translations, dtype=float))
        m = len(t)
        out = np.ones(m)
        if not self.factors:
            return out
        if len(P) == 0:
            return np.zeros(m)
        rot = None if rotations is None or not np.any(rotations) else np.asarray(rotations, dtype=float)
        pts = P.points.astype(float)
        for phi, psi in self.factors:
            c, rad = _circumball(phi)
            if rot is None:
                centres = c - t
            else:
                cs, sn = np.cos(rot), np.sin(rot)
                w = c - t
                centres = np.stack([cs * w[:, 0] + sn * w[:, 1], -sn * w[:, 0] + cs * w[:, 1]], axis=1)
            lists = P.tree.query_ball_point(centres, rad + TOL_MATCH)
            lens = np.fromiter((len(x) for x in lists), dtype=np.intp, count=m)
            owner = np.repeat(np.arange(m), lens)
            idx = np.fromiter((i for x in lists for i in x), dtype=np.intp, count=int(lens.sum()))
            if len(idx) == 0:
                return np.zeros(m)
            p = pts[idx]
            if rot is None:
                y = p + t[owner]
            else:
                cs, sn = np.cos(rot[owner]), np.sin(rot[owner])
                y = np.stack([cs * p[:, 0] - sn * p[:, 1], sn * p[:, 0] + cs * p[:, 1]], axis=1) + t[owner]
            vals = phi(y)
            if psi is not None:
                if colours is None:
                    raise ValueError("coloured scanning function needs colours")
                col = colours(idx, owner) if callable(colours) else np.asarray(colours)[idx]
                vals = vals * psi(col)
            out *= np.bincount(owner, weights=vals, minlength=m)
        return out
