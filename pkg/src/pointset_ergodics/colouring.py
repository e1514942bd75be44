"""Random colourings of point sets.

Colours are drawn from a counter-based hash keyed by ``(seed, trial,
cell)``, where ``cell`` is the grid cell of the point in the colouring's own
frame.  Transporting a point set together with its frame therefore
transports the colouring exactly (translations in integer mode) and the
result is independent of thread count or sampling order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from . import _rng
from .geometry import PointSet
from .groups import GroupElement, act, compose, identity, inverse
from .scanning import ColourIndicator, ColourMap, IntervalIndicator, ScanningFunction

__all__ = [
    "ColourSpace",
    "Marginal",
    "ColourLaw",
    "ColouredPointSet",
    "ColourAverage",
    "point_keys",
    "colours_at",
    "sample_colours",
    "shift_colouring",
    "colour_average",
]

STREAM_IID = 1
STREAM_NOISE = 2


@dataclass(frozen=True)
class ColourSpace:
    """``kind="finite"`` with an ``alphabet`` or ``kind="interval"`` with ``(lo, hi)``."""

    kind: str
    alphabet: tuple = ()
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind == "finite":
            if len(self.alphabet) == 0:
                raise ValueError("finite colour space needs a nonempty alphabet")
        elif self.kind == "interval":
            if not self.hi > self.lo:
                raise ValueError("colour interval must be nondegenerate")
        else:
            raise ValueError(f"unknown colour space kind {self.kind!r}")

    @classmethod
    def finite(cls, alphabet) -> "ColourSpace":
        return cls("finite", tuple(alphabet))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "ColourSpace":
        return cls("interval", (), float(lo), float(hi))


@dataclass(frozen=True)
class Marginal:
    """Single-site colour distribution.

    kinds: ``bernoulli`` (p), ``categorical`` (alphabet, probs),
    ``uniform`` (lo, hi), ``constant`` (value).
    """

    kind: str
    p: float = 0.5
    alphabet: tuple = ()
    probs: tuple = ()
    lo: float = 0.0
    hi: float = 1.0
    value: float = 0

    def __post_init__(self):
        if self.kind == "bernoulli":
            if not 0.0 <= self.p <= 1.0:
                raise ValueError("p must lie in [0, 1]")
        elif self.kind == "categorical":
            if len(self.alphabet) == 0 or len(self.alphabet) != len(self.probs):
                raise ValueError("categorical marginal needs matching alphabet and probs")
            if abs(sum(self.probs) - 1.0) > 1e-9 or min(self.probs) < 0:
                raise ValueError("probs must be a probability vector")
        elif self.kind == "uniform":
            if not self.hi > self.lo:
                raise ValueError("uniform marginal needs lo < hi")
        elif self.kind != "constant":
            raise ValueError(f"unknown marginal kind {self.kind!r}")

    @classmethod
    def bernoulli(cls, p: float) -> "Marginal":
        return cls("bernoulli", p=float(p))

    @classmethod
    def categorical(cls, alphabet, probs) -> "Marginal":
        return cls("categorical", alphabet=tuple(alphabet), probs=tuple(float(x) for x in probs))

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "Marginal":
        return cls("uniform", lo=float(lo), hi=float(hi))

    @classmethod
    def constant(cls, value=0) -> "Marginal":
        return cls("constant", value=value)

    @property
    def space(self) -> ColourSpace:
        if self.kind == "bernoulli":
            return ColourSpace.finite((0, 1))
        if self.kind == "categorical":
            return ColourSpace.finite(self.alphabet)
        if self.kind == "uniform":
            return ColourSpace.interval(self.lo, self.hi)
        return ColourSpace.finite((self.value,))

    def ppf(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF applied to uniforms."""
        u = np.asarray(u, dtype=float)
        if self.kind == "bernoulli":
            return (u < self.p).astype(np.int64)
        if self.kind == "categorical":
            cum = np.cumsum(self.probs)
            pos = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
            return np.asarray(self.alphabet)[pos]
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * u
        return np.full(u.shape, self.value)

    def expectation(self, psi) -> float:
        """``E[psi(colour)]``; ``psi=None`` means the constant one."""
        if psi is None:
            return 1.0
        if self.kind == "bernoulli":
            vals = psi(np.array([0, 1]))
            return float((1 - self.p) * vals[0] + self.p * vals[1])
        if self.kind == "categorical":
            return float(np.dot(self.probs, psi(np.asarray(self.alphabet))))
        if self.kind == "constant":
            return float(psi(np.array([self.value]))[0])
        if isinstance(psi, IntervalIndicator):
            a, b = max(psi.lo, self.lo), min(psi.hi, self.hi)
            return max(0.0, b - a) / (self.hi - self.lo)
        val, _ = integrate.quad(lambda c: float(psi(np.array([c]))[0]), self.lo, self.hi,
                                epsabs=1e-12, epsrel=1e-10, limit=200)
        return val / (self.hi - self.lo)

    def variance(self, psi) -> float:
        m = self.expectation(psi)
        if psi is None:
            return 0.0

        class _Sq:
            def __call__(self, c):
                return psi(c) ** 2

        return max(0.0, self.expectation(_Sq()) - m * m)

    def probability(self, A) -> float:
        """``P(colour in A)`` for a colour profile indicator ``A``."""
        return self.expectation(A)


@dataclass(frozen=True)
class ColourLaw:
    """Colour law with independence range ``range``.

    ``iid``: one independent draw per point (range 0).
    ``moving_average``: noise values on a grid of pitch ``range / 4`` are
    averaged over the open ball of radius ``range / 2`` around each point;
    ``combine="threshold"`` maps the mean to ``1`` when it exceeds one half.
    Sites more than ``range`` apart see disjoint noise and are independent.
    """

    kind: str
    marginal: Marginal
    range: float = 0.0
    combine: str = "mean"

    def __post_init__(self):
        if self.kind not in ("iid", "moving_average"):
            raise ValueError(f"unknown colour law {self.kind!r}")
        if self.kind == "moving_average":
            if not self.range > 0:
                raise ValueError("moving_average needs a positive range")
            if self.combine not in ("mean", "threshold"):
                raise ValueError("combine must be 'mean' or 'threshold'")
        elif self.range != 0.0:
            object.__setattr__(self, "range", 0.0)

    @classmethod
    def iid(cls, marginal: Marginal) -> "ColourLaw":
        return cls("iid", marginal)

    @classmethod
    def moving_average(cls, marginal: Marginal, range: float, combine: str = "mean") -> "ColourLaw":
        return cls("moving_average", marginal, float(range), combine)

    @property
    def is_iid(self) -> bool:
        return self.kind == "iid"

    @property
    def deterministic(self) -> bool:
        return self.marginal.kind == "constant" or (
            self.marginal.kind == "categorical" and len(self.marginal.alphabet) == 1)

    @property
    def space(self) -> ColourSpace:
        if self.kind == "iid":
            return self.marginal.space
        if self.combine == "threshold":
            return ColourSpace.finite((0, 1))
        sp = self.marginal.space
        if sp.kind == "interval":
            return sp
        vals = np.asarray(sp.alphabet, dtype=float)
        return ColourSpace.interval(float(vals.min()), float(max(vals.max(), vals.min() + 1)))


def _integral_in_frame(P: PointSet, frame: Optional[GroupElement]) -> bool:
    # decided for the whole set, so the key scheme never mixes within one colouring
    if P.mode != "int" and P.r < 1.0 - 1e-9:
        return False
    y = P.points if frame is None else act(inverse(frame), P.points)
    y = np.asarray(y, dtype=float)
    return bool(np.all(np.abs(y - np.round(y)) <= 1e-9))


def point_keys(P: PointSet, coords: np.ndarray, frame: Optional[GroupElement] = None) -> np.ndarray:
    """Integer cell of each point in the frame's coordinates.

    A set whose frame coordinates are all integers uses those coordinates,
    whatever its mode, so transporting an integer set keeps its keys.
    Otherwise ``floor(y / cell)`` with cell side ``r / sqrt(d)`` is used, so
    distinct points of an r-discrete set always land in distinct cells.
    """
    y = np.atleast_2d(coords)
    if frame is not None:
        y = act(inverse(frame), y)
    if P.mode == "int" and np.issubdtype(np.asarray(y).dtype, np.integer):
        return np.asarray(y, dtype=np.int64)
    y = np.asarray(y, dtype=float)
    if _integral_in_frame(P, frame):
        return np.round(y).astype(np.int64)
    cell = P.r / math.sqrt(P.dim)
    return np.floor(y / cell + 1e-9).astype(np.int64)


def _moving_average(law: ColourLaw, y: np.ndarray, trial: np.ndarray, seed: int) -> np.ndarray:
    h = law.range / 4.0
    rad = law.range / 2.0
    d = y.shape[1]
    reach = int(math.ceil(rad / h)) + 1
    offs = np.stack(np.meshgrid(*[np.arange(-reach, reach + 1)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    out = np.empty(len(y))
    step = max(1, 200_000 // len(offs))
    for s in range(0, len(y), step):
        yy = y[s:s + step]
        base = np.floor(yy / h).astype(np.int64)
        nodes = base[:, None, :] + offs[None, :, :]
        dist = np.linalg.norm(nodes * h - yy[:, None, :], axis=2)
        inside = dist < rad
        cols = [nodes[:, :, j] for j in range(d)]
        u = _rng.uniforms(seed, STREAM_NOISE, trial[s:s + step, None], *cols)
        vals = law.marginal.ppf(u).astype(float)
        mean = (vals * inside).sum(axis=1) / inside.sum(axis=1)
        out[s:s + step] = mean
    if law.combine == "threshold":
        return (out > 0.5).astype(np.int64)
    return out


def colours_at(P: PointSet, law: ColourLaw, seed: int, indices=None, trial=0,
               frame: Optional[GroupElement] = None) -> np.ndarray:
    """Colours of ``P.points[indices]``; ``trial`` may be an array aligned
    with ``indices`` so one call serves many independent colourings."""
    idx = np.arange(len(P)) if indices is None else np.asarray(indices, dtype=np.intp)
    trial = np.broadcast_to(np.asarray(trial, dtype=np.int64), idx.shape)
    if law.kind == "iid":
        cells = point_keys(P, P.points[idx], frame)
        u = _rng.uniforms(seed, STREAM_IID, trial, *_rng.key_columns(cells))
        return law.marginal.ppf(u)
    y = P.points[idx].astype(float)
    if frame is not None:
        y = act(inverse(frame), y)
    return _moving_average(law, np.atleast_2d(y), trial, seed)


@dataclass(frozen=True, eq=False)
class ColouredPointSet:
    """Point set with one colour per point and the frame its colours are keyed in."""

    base: PointSet
    colours: np.ndarray
    frame: GroupElement = None

    def __post_init__(self):
        c = np.asarray(self.colours)
        if c.shape != (len(self.base),):
            raise ValueError("exactly one colour per point is required")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "colours", c)
        if self.frame is None:
            object.__setattr__(self, "frame", identity(self.base.dim))

    def __len__(self) -> int:
        return len(self.base)

    def colour_of(self, m, tol: float = 1e-9):
        i = int(self.base.find(np.atleast_2d(m), tol)[0])
        if i < 0:
            raise KeyError("point not in the set")
        return self.colours[i]

    def equals(self, other: "ColouredPointSet", tol: float = 1e-9) -> bool:
        """Same points carrying the same colours."""
        if len(self) != len(other):
            return False
        j = other.base.find(self.base.points.astype(float), tol)
        if np.any(j < 0):
            return False
        return bool(np.all(other.colours[j] == self.colours))


def sample_colours(P: PointSet, law: ColourLaw, seed: int, trial: int = 0,
                   frame: Optional[GroupElement] = None) -> ColouredPointSet:
    """One colouring of ``P`` drawn from ``law``."""
    return ColouredPointSet(P, colours_at(P, law, seed, None, trial, frame), frame)


def _move_window(P: PointSet, g: GroupElement):
    if g.rotation == 0.0:
        return P.lo + g.translation, P.hi + g.translation
    corners = np.array([[P.lo[0], P.lo[1]], [P.lo[0], P.hi[1]], [P.hi[0], P.lo[1]], [P.hi[0], P.hi[1]]])
    moved = act(g, corners)
    return moved.min(axis=0), moved.max(axis=0)


def shift_colouring(x: GroupElement, Pw: ColouredPointSet) -> ColouredPointSet:
    """``x P^omega = (x P)^(tau_x omega)``: the point ``x p`` keeps the colour of ``p``."""
    P = Pw.base
    pts = act(x, P.points)
    if P.mode == "int" and not x.is_exact:
        mode = "float"
    else:
        mode = P.mode
    lo, hi = _move_window(P, x)
    moved = PointSet(pts, P.r, lo=lo, hi=hi, mode=mode)
    return ColouredPointSet(moved, Pw.colours, compose(x, Pw.frame))


@dataclass(frozen=True)
class ColourAverage:
    estimate: float
    stderr: float
    exact: bool


def _closed_form(P: PointSet, f: ScanningFunction, law: ColourLaw) -> Optional[float]:
    if not (law.is_iid or law.deterministic):
        return None
    if f.k > 1 and not f.supports_disjoint():
        return None
    out = 1.0
    pts = P.points.astype(float)
    for phi, psi in f.factors:
        out *= float(phi(pts).sum()) * law.marginal.expectation(psi) if len(P) else 0.0
    return out


def colour_average(P: PointSet, f: ScanningFunction, law: ColourLaw, trials: int = 1000,
                   seed: int = 0, exact: bool = True) -> ColourAverage:
    """``E_f(P)``: mean of ``f(P^omega)`` over the colour law.

    Uses ``prod_i sum_p phi_i(p) E[psi_i]`` when the law is iid and the
    supports are disjoint (distinct factors then see distinct, independent
    sites); Monte Carlo over ``trials`` colourings otherwise.
    """
    if exact:
        val = _closed_form(P, f, law)
        if val is not None:
            return ColourAverage(val, 0.0, True)
    if trials < 2:
        raise ValueError("need at least two trials")
    lo_hi = f.support_bounds()
    if lo_hi is None:
        return ColourAverage(1.0, 0.0, True)
    idx = P.query_box(*lo_hi)
    if len(idx) == 0:
        return ColourAverage(0.0, 0.0, True)
    sub = PointSet(P.points[idx], P.r, lo=P.lo, hi=P.hi, mode=P.mode)
    vals = np.empty(trials)
    for t in range(trials):
        cols = colours_at(P, law, seed, idx, t)
        vals[t] = f.evaluate(sub, cols)
    return ColourAverage(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)), False)
