"""Acting groups, Haar volume and averaging windows.

Two groups are supported: translations of R^d and the orientation
preserving Euclidean group E(2) = R^2 x| SO(2).  Elements of E(2) act by
rotation followed by translation; the SO(2) factor of the Haar measure has
total mass one, so volumes are Lebesgue areas of the translation part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .geometry import TOL_MATCH

__all__ = [
    "GroupSpec",
    "GroupElement",
    "Window",
    "TwoSidedBox",
    "act",
    "compose",
    "inverse",
    "identity",
    "rotation_matrix",
    "haar_volume",
    "window_sequence",
    "van_hove_ratio",
    "folner_ratio",
    "shulman_constant",
    "unimodularity_check",
    "UnimodularityResult",
    "ball_volume",
]

TWO_PI = 2.0 * math.pi


def ball_volume(radius: float, d: int) -> float:
    """Lebesgue volume of a Euclidean ball in R^d."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius ** d


@dataclass(frozen=True)
class GroupSpec:
    """``kind`` is ``"translation"`` (any ``dim``) or ``"euclidean2"``."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("translation", "euclidean2"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.kind == "euclidean2" and self.dim != 2:
            raise ValueError("euclidean2 acts on the plane only")
        if self.dim not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")

    @classmethod
    def translation(cls, dim: int) -> "GroupSpec":
        return cls("translation", dim)

    @classmethod
    def euclidean2(cls) -> "GroupSpec":
        return cls("euclidean2", 2)

    @classmethod
    def parse(cls, name: str) -> "GroupSpec":
        """Parse ``"R1"``, ``"R2"``, ``"R3"`` or ``"E2"``."""
        name = name.strip().upper()
        if name == "E2":
            return cls.euclidean2()
        if len(name) == 2 and name[0] == "R" and name[1] in "123":
            return cls.translation(int(name[1]))
        raise ValueError(f"unknown group {name!r}")

    @property
    def has_rotations(self) -> bool:
        return self.kind == "euclidean2"

    @property
    def name(self) -> str:
        return "E2" if self.has_rotations else f"R{self.dim}"


def _quarter_turns(theta: float) -> Optional[int]:
    k = round(theta / (math.pi / 2))
    if abs(theta - k * math.pi / 2) <= TOL_MATCH:
        return k % 4
    return None


_QUARTER = [
    np.array([[1, 0], [0, 1]]),
    np.array([[0, -1], [1, 0]]),
    np.array([[-1, 0], [0, -1]]),
    np.array([[0, 1], [-1, 0]]),
]


def rotation_matrix(theta: float) -> np.ndarray:
    """Rotation by ``theta``; exact integer matrix for quarter turns."""
    k = _quarter_turns(theta)
    if k is not None:
        return _QUARTER[k]
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _wrap(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta < 0:
        theta += TWO_PI
    if TWO_PI - theta <= TOL_MATCH:
        theta = 0.0
    return theta


class GroupElement:
    """``m -> R(rotation) m + translation``."""

    __slots__ = ("translation", "rotation")

    def __init__(self, translation, rotation: float = 0.0):
        t = np.asarray(translation)
        if not np.issubdtype(t.dtype, np.integer):
            t = t.astype(float)
        self.translation = t.reshape(-1)
        self.rotation = _wrap(float(rotation))
        if self.rotation != 0.0 and self.translation.shape[0] != 2:
            raise ValueError("rotations only exist in the plane")

    @property
    def dim(self) -> int:
        return self.translation.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        if self.dim != 2:
            return np.eye(self.dim, dtype=int)
        return rotation_matrix(self.rotation)

    @property
    def is_exact(self) -> bool:
        return (np.issubdtype(self.translation.dtype, np.integer)
                and _quarter_turns(self.rotation) is not None)

    def __call__(self, m) -> np.ndarray:
        return act(self, m)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return compose(self, other)

    def __repr__(self) -> str:
        return f"GroupElement(translation={self.translation.tolist()}, rotation={self.rotation:.6g})"

    def isclose(self, other: "GroupElement", tol: float = TOL_MATCH) -> bool:
        dr = abs(self.rotation - other.rotation)
        dr = min(dr, TWO_PI - dr)
        return dr <= tol and bool(np.allclose(self.translation, other.translation, atol=tol, rtol=0))


def identity(dim: int) -> GroupElement:
    return GroupElement(np.zeros(dim, dtype=int))


def act(g: GroupElement, m) -> np.ndarray:
    """Apply ``g`` to a point or to the rows of an array of points."""
    m = np.asarray(m)
    single = m.ndim == 1
    pts = m.reshape(1, -1) if single else m
    if pts.shape[-1] != g.dim:
        raise ValueError(f"dimension mismatch: element acts on R^{g.dim}, point in R^{pts.shape[-1]}")
    if g.rotation == 0.0:
        out = pts + g.translation
    else:
        out = pts @ g.matrix.T + g.translation
    return out[0] if single else out


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    """``(g h) m = g (h m)``."""
    if g.dim != h.dim:
        raise ValueError("dimension mismatch")
    if g.rotation == 0.0:
        t = g.translation + h.translation
    else:
        t = g.matrix @ h.translation + g.translation
    return GroupElement(t, g.rotation + h.rotation)


def inverse(g: GroupElement) -> GroupElement:
    if g.rotation == 0.0:
        return GroupElement(-g.translation)
    return GroupElement(-(g.matrix.T @ g.translation), -g.rotation)


def element_from_arrays(translations: np.ndarray, rotations: np.ndarray):
    return [GroupElement(t, a) for t, a in zip(translations, rotations)]


@dataclass(frozen=True)
class Window:
    """Centred box ``[-radius, radius]^d`` or closed ball, times SO(2) for E(2).

    For E(2) the base must be a ball so that the window is rotation
    invariant; then D^{-1} = D.
    """

    shape: str
    radius: float
    dim: int
    rotations: bool = False
    n: int = 0

    def __post_init__(self):
        if self.shape not in ("box", "ball"):
            raise ValueError(f"unknown window shape {self.shape!r}")
        if not self.radius > 0:
            raise ValueError("window radius must be positive")
        if self.rotations and (self.dim != 2 or self.shape != "ball"):
            raise ValueError("E(2) windows must be discs times SO(2)")

    @property
    def volume(self) -> float:
        return haar_volume(self)

    @property
    def circumradius(self) -> float:
        """Radius of the smallest centred ball containing the translation part."""
        return self.radius * (math.sqrt(self.dim) if self.shape == "box" else 1.0)

    def bounding_box(self):
        return -self.radius * np.ones(self.dim), self.radius * np.ones(self.dim)

    def contains_translation(self, t, tol: float = TOL_MATCH) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        if self.shape == "box":
            return np.all(np.abs(t) <= self.radius + tol, axis=1)
        return np.sqrt(np.einsum("ij,ij->i", t, t)) <= self.radius + tol

    def contains(self, g: GroupElement, tol: float = TOL_MATCH) -> bool:
        if g.rotation != 0.0 and not self.rotations:
            return False
        return bool(self.contains_translation(g.translation, tol)[0])

    def contains_inverse(self, g: GroupElement, tol: float = TOL_MATCH) -> bool:
        """Membership of ``g`` in D^{-1}.  Both window kinds are symmetric."""
        return self.contains(inverse(g), tol)

    def sample(self, rng: np.random.Generator, size: int):
        """Haar-uniform draws: (translations (size, d), rotations (size,))."""
        d = self.dim
        if self.shape == "box":
            t = rng.uniform(-self.radius, self.radius, size=(size, d))
        else:
            v = rng.standard_normal((size, d))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            t = v * (self.radius * rng.uniform(size=(size, 1)) ** (1.0 / d))
        if self.rotations:
            a = rng.uniform(0.0, TWO_PI, size=size)
        else:
            a = np.zeros(size)
        return t, a


def haar_volume(W: Window) -> float:
    """Haar volume of a window (SO(2) factor normalised to one)."""
    if W.shape == "box":
        return (2.0 * W.radius) ** W.dim
    return ball_volume(W.radius, W.dim)


def window_sequence(shape: str, radii: Sequence[float], dim: int, rotations: bool = False):
    """Increasing list of centred windows with the given radii."""
    radii = [float(x) for x in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("window radii must be strictly increasing")
    return [Window(shape, a, dim, rotations, n=i + 1) for i, a in enumerate(radii)]


@dataclass(frozen=True)
class TwoSidedBox:
    """Compact set K = [lo, hi] (translation part) times an arc of rotations."""

    lo: tuple
    hi: tuple
    arc: float = 0.0

    @classmethod
    def centred(cls, half: float, dim: int, arc: float = 0.0) -> "TwoSidedBox":
        return cls(tuple([-half] * dim), tuple([half] * dim), arc)

    @classmethod
    def identity(cls, dim: int) -> "TwoSidedBox":
        return cls(tuple([0.0] * dim), tuple([0.0] * dim), 0.0)


def _box_vol(lo, hi) -> float:
    return float(np.prod(np.clip(np.asarray(hi) - np.asarray(lo), 0.0, None)))


def _ball_minkowski_vol(half: np.ndarray, a: float) -> float:
    """vol(box + B_a) for a box with half-widths ``half`` (Steiner formula)."""
    d = len(half)
    w = 2.0 * half
    if d == 1:
        return w[0] + 2 * a
    if d == 2:
        return w[0] * w[1] + 2 * (w[0] + w[1]) * a + math.pi * a * a
    faces = w[0] * w[1] + w[1] * w[2] + w[0] * w[2]
    edges = w.sum()
    return w.prod() + 2 * faces * a + math.pi * edges * a * a + 4.0 / 3.0 * math.pi * a ** 3


def _ball_erosion_vol(half: np.ndarray, a: float) -> float:
    """vol{x : x - k in B_a for all k in the box}, by quadrature."""
    d = len(half)
    if d == 1:
        return max(0.0, 2 * (a - half[0]))
    h1 = half[0]
    if d == 2:
        h2 = half[1]

        def slice_len(u):
            s = a * a - (u + h1) ** 2
            return max(0.0, math.sqrt(s) - h2) if s > 0 else 0.0

        top = a - h1
        if top <= 0:
            return 0.0
        val, _ = integrate.quad(slice_len, 0.0, top, epsabs=1e-12, epsrel=1e-10, limit=200)
        return 4.0 * val
    h2, h3 = half[1], half[2]

    def area(u):
        s = a * a - (u + h1) ** 2
        if s <= 0:
            return 0.0
        return _ball_erosion_vol(np.array([h2, h3]), math.sqrt(s)) / 4.0

    top = a - h1
    if top <= 0:
        return 0.0
    val, _ = integrate.quad(area, 0.0, top, epsabs=1e-12, epsrel=1e-9, limit=200)
    return 8.0 * val


def _boundary_volumes(W: Window, K: TwoSidedBox):
    """Volumes of K D, D, the erosion E = {x : K^{-1} x in D}, and intersections."""
    lo = np.asarray(K.lo, dtype=float)
    hi = np.asarray(K.hi, dtype=float)
    if np.any(hi < lo):
        raise ValueError("K must satisfy lo <= hi")
    if W.shape == "box":
        a = W.radius
        kd = (-a + lo, a + hi)
        er = (-a + hi, a + lo)
        d_box = (-a * np.ones(W.dim), a * np.ones(W.dim))
        vol_kd = _box_vol(*kd)
        vol_d = _box_vol(*d_box)
        vol_e = _box_vol(*er)
        vol_kd_d = _box_vol(np.maximum(kd[0], d_box[0]), np.minimum(kd[1], d_box[1]))
        vol_d_e = _box_vol(np.maximum(er[0], d_box[0]), np.minimum(er[1], d_box[1]))
        return vol_kd, vol_d, vol_e, vol_kd_d, vol_d_e
    if not np.allclose(lo, -hi):
        raise ValueError("for ball windows K must be a centred box")
    half = hi
    vol_d = haar_volume(W)
    vol_kd = _ball_minkowski_vol(half, W.radius)
    vol_e = _ball_erosion_vol(half, W.radius)
    return vol_kd, vol_d, vol_e, vol_d, vol_e


def van_hove_ratio(seq, K: TwoSidedBox, n: int) -> float:
    """``vol(boundary^K D_n) / vol(D_n)`` for the n-th window (1-based).

    ``boundary^K D = (K D minus int D) union (K closure(D^c) minus D^c)``.  The
    second part is ``D`` minus the interior of the erosion
    ``E = complement of K D^c``.  The rotation arc of ``K`` acts trivially on
    rotation invariant windows.
    """
    W = seq[n - 1]
    vol_kd, vol_d, vol_e, vol_kd_d, vol_d_e = _boundary_volumes(W, K)
    outer = vol_kd - vol_kd_d
    inner = vol_d - vol_d_e
    return (outer + inner) / vol_d


def folner_ratio(seq, K: TwoSidedBox, n: int) -> float:
    """``vol(K D_n symmetric-difference D_n) / vol(D_n)``."""
    W = seq[n - 1]
    vol_kd, vol_d, _, vol_kd_d, _ = _boundary_volumes(W, K)
    return (vol_kd + vol_d - 2 * vol_kd_d) / vol_d


def shulman_constant(seq, n_max: Optional[int] = None) -> float:
    """``max_n vol(union_{k<n} D_k^{-1} D_n) / vol(D_n)`` over ``n <= n_max``.

    For centred boxes or balls ``D_k^{-1} D_n`` is the window of radius
    ``a_k + a_n``; the union over ``k < n`` is the one with the largest
    ``a_k``.  The first window contributes ratio one by convention.
    """
    n_max = len(seq) if n_max is None else n_max
    best = 1.0
    for n in range(2, n_max + 1):
        W, prev = seq[n - 1], seq[n - 2]
        grown = Window(W.shape, W.radius + prev.radius, W.dim, W.rotations)
        best = max(best, haar_volume(grown) / haar_volume(W))
    return best


@dataclass(frozen=True)
class UnimodularityResult:
    max_relative_gap: float
    max_z: float
    gaps: tuple
    stderrs: tuple
    # one discrepancy for all trials: summed volume gaps over their pooled stderr
    combined_z: float = 0.0


def unimodularity_check(spec: GroupSpec, trials: int = 5, seed: int = 0,
                        samples: int = 100_000) -> UnimodularityResult:
    """Compare vol(S) and vol(S^{-1}) for random product sets S in T.

    For translations ``S^{-1} = -S`` has the same Lebesgue volume exactly.
    For E(2), S = box x arc and both volumes are estimated by Monte Carlo
    over a common bounding region; the gap is reported with its standard
    error.
    """
    rng = np.random.default_rng(seed)
    gaps, errs, zs = [], [], []
    diff_sum, var_sum = 0.0, 0.0
    for _ in range(trials):
        lo = rng.uniform(-2.0, 1.0, size=spec.dim)
        hi = lo + rng.uniform(0.0, 2.0, size=spec.dim)
        if not spec.has_rotations:
            v = _box_vol(lo, hi)
            v_inv = _box_vol(-hi, -lo)
            gaps.append(0.0 if v == v_inv else abs(v - v_inv) / max(v, v_inv))
            errs.append(0.0)
            zs.append(0.0)
            continue
        a0 = rng.uniform(0.0, TWO_PI)
        arc = rng.uniform(0.0, TWO_PI)
        # both S and S^{-1} lie in |t| <= max corner norm
        bound = float(np.max(np.abs(np.concatenate([lo, hi])))) * math.sqrt(2.0)
        t = rng.uniform(-bound, bound, size=(samples, 2))
        th = rng.uniform(0.0, TWO_PI, size=samples)

        def in_s(tt, aa):
            da = np.mod(aa - a0, TWO_PI)
            return np.all((tt >= lo) & (tt <= hi), axis=1) & (da <= arc)

        c, s = np.cos(th), np.sin(th)
        # g^{-1} = (-R(-th) t, -th)
        inv_t = -np.stack([c * t[:, 0] + s * t[:, 1], -s * t[:, 0] + c * t[:, 1]], axis=1)
        x1 = in_s(t, th).astype(float)
        x2 = in_s(inv_t, np.mod(-th, TWO_PI)).astype(float)
        region = (2 * bound) ** 2
        v1, v2 = x1.mean() * region, x2.mean() * region
        diff = (x1 - x2) * region
        se = diff.std(ddof=1) / math.sqrt(samples)
        denom = max(v1, v2)
        gaps.append(0.0 if denom == 0 else abs(v1 - v2) / denom)
        errs.append(0.0 if denom == 0 else se / denom)
        zs.append(0.0 if se == 0 else abs(v1 - v2) / se)
        diff_sum += v1 - v2
        var_sum += se * se
    comb = 0.0 if var_sum == 0 else abs(diff_sum) / math.sqrt(var_sum)
    return UnimodularityResult(max(gaps), max(zs), tuple(gaps), tuple(errs), comb)
