"""Index-set geometry: lexicographic order, spheres of influence, cone
constants, truncated integration domains and sampling windows.

Spatio-temporal points are stored time first, so lexicographic order
compares time before space.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConditionViolated, UnsupportedShape, ValidationError

__all__ = [
    "lex_less", "in_V", "in_V_h", "sup_norm", "set_distance",
    "SphereOfInfluence", "LexHalfspace", "LightCone", "RotatedHalfspace",
    "cone_constant_b", "psi", "psi_inverse", "ConeDomain",
    "truncated_cone_domain", "complement_cone_domain", "eta_cone_domain",
    "SamplingWindow", "ball_volume", "sphere_area",
]


def lex_less(y, z):
    """``y <_lex z``: the first differing coordinate of ``y`` is smaller."""
    y = np.asarray(y)
    z = np.asarray(z)
    diff = np.nonzero(y != z)[0]
    return bool(diff.size) and bool(y[diff[0]] < z[diff[0]])


def sup_norm(x):
    return float(np.max(np.abs(np.asarray(x, dtype=float))))


def in_V(t, s):
    """Membership ``s in V_t = {s : s <_lex t}``."""
    return lex_less(s, t)


def in_V_h(t, s, h):
    """Membership ``s in V_t^h = V_t and ||t - s||_inf >= h``."""
    return lex_less(s, t) and sup_norm(np.subtract(t, s)) >= h


def set_distance(a, b):
    """``min ||x - y||_inf`` over finite point sets ``a`` and ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return float(np.min(np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=-1)))


def ball_volume(m, c=1.0):
    """Lebesgue volume of the Euclidean ball of radius ``c`` in R^m."""
    return (math.sqrt(math.pi) * c) ** m / math.gamma(m / 2 + 1)


def sphere_area(m, r=1.0):
    """Surface measure of the sphere of radius ``r`` in R^m (2 points for m=1)."""
    return m * ball_volume(m) * r ** (m - 1)


class SphereOfInfluence:
    """Translation-invariant set ``A_t = t + A_0``."""

    dim = None
    shape = None
    #: divisor inside psi; the ambient dimension of the index set
    psi_dim = None

    def contains0(self, x):
        """Membership of ``x`` in ``A_0`` (vectorized over leading axes)."""
        raise NotImplementedError

    def contains(self, t, s):
        """Exact membership ``s in A_t``."""
        return self.contains0(np.asarray(s, dtype=float) - np.asarray(t, dtype=float))

    def cone_constant_b(self):
        raise NotImplementedError

    def describe(self):
        return {"shape": self.shape}


class LexHalfspace(SphereOfInfluence):
    """``A_0 = V_0 u {0}``; violates the separation condition."""

    shape = "lex-halfspace"

    def __init__(self, dim):
        self.dim = self.psi_dim = int(dim)

    def contains0(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return lex_less(x, np.zeros_like(x)) or not np.any(x)
        return np.array([self.contains0(r) for r in x.reshape(-1, x.shape[-1])]).reshape(x.shape[:-1])

    def cone_constant_b(self):
        raise ConditionViolated("the lexicographic halfspace has sup alpha'x/|x| = 0")


class LightCone(SphereOfInfluence):
    """Light cone ``A_0 = {(s, xi) : s <= 0, |xi| <= c |s|}``.

    Parameters
    ----------
    c : float
        Cone slope (> 0).
    m : int
        Number of spatial coordinates when ``spacetime`` is true, else the
        total dimension of the index set.
    spacetime : bool
        Whether the first coordinate is time appended to ``m`` space axes.
    alpha : array_like, optional
        Separating vector; defaults to the positive time axis.
    """

    shape = "c-cone"

    def __init__(self, c, m=1, spacetime=True, alpha=None):
        if not (c > 0 and math.isfinite(c)):
            raise ValidationError("cone slope c must be positive and finite")
        self.c = float(c)
        self.spacetime = bool(spacetime)
        self.dim = int(m) + 1 if spacetime else int(m)
        self.m_space = self.dim - 1
        if self.dim not in (1, 2, 3, 4) or self.m_space > 3:
            raise ValidationError("supported spatial dimensions are 0..3")
        self.psi_dim = self.dim
        a = np.zeros(self.dim)
        a[0] = 1.0
        self.alpha = a if alpha is None else np.asarray(alpha, dtype=float)
        if self.alpha.shape != (self.dim,):
            raise ValidationError("alpha has the wrong dimension")

    def contains0(self, x):
        x = np.asarray(x, dtype=float)
        s = x[..., 0]
        xi2 = np.sum(x[..., 1:] ** 2, axis=-1)
        return (s <= 0) & (xi2 <= self.c ** 2 * s * s)

    def cone_constant_b(self):
        # Angle between alpha and the cone axis -e_1, minus the half-angle.
        na = np.linalg.norm(self.alpha)
        if na == 0:
            raise ConditionViolated("alpha must be nonzero")
        theta = math.acos(max(-1.0, min(1.0, -self.alpha[0] / na)))
        phi = math.atan(self.c) if self.m_space > 0 else 0.0
        b = math.cos(max(0.0, theta - phi))
        if not b < 0:
            raise ConditionViolated(f"alpha does not separate the cone (b = {b:.6g})")
        return b

    def describe(self):
        return {"shape": self.shape, "c": self.c, "m": self.m_space,
                "spacetime": self.spacetime}


class RotatedHalfspace(SphereOfInfluence):
    """Halfspace ``A_0 = {x : alpha'x <= 0}``.

    Its separation constant is 0, so the bound machinery rejects it; the
    rotation mapping it into the lexicographic halfspace is exposed for
    kernels via :meth:`rotation_matrix`.
    """

    shape = "rotated-halfspace"

    def __init__(self, normal):
        self.normal = np.asarray(normal, dtype=float)
        if self.normal.ndim != 1 or not np.any(self.normal):
            raise ValidationError("normal must be a nonzero vector")
        self.dim = self.psi_dim = self.normal.size

    def contains0(self, x):
        return np.asarray(x, dtype=float) @ self.normal <= 0

    def cone_constant_b(self):
        raise ConditionViolated("a halfspace has sup alpha'x/|x| = 0")

    def rotation_matrix(self):
        """Orthogonal ``O`` with ``O alpha / |alpha| = e_1`` (Householder)."""
        a = self.normal / np.linalg.norm(self.normal)
        e1 = np.zeros_like(a)
        e1[0] = 1.0
        v = a - e1
        nv = v @ v
        if nv < 1e-30:
            return np.eye(a.size)
        return np.eye(a.size) - 2.0 * np.outer(v, v) / nv

    def describe(self):
        return {"shape": self.shape, "alpha": self.normal.tolist()}


def cone_constant_b(A0):
    """``b = sup_{x in A_0, |x|=1} alpha'x/|alpha|`` (closed form)."""
    return A0.cone_constant_b()


def psi(A0, h, factor=1.0):
    """Truncation radius ``psi(h) = -b h factor / sqrt(dim)``.

    ``factor`` is 1 for mixed moving averages and 1/2 for ambit fields.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValidationError("h must be nonnegative")
    b = cone_constant_b(A0)
    return (-b * factor / math.sqrt(A0.psi_dim) * h)[()]


def psi_inverse(A0, r, factor=1.0):
    """Inverse of :func:`psi`."""
    b = cone_constant_b(A0)
    return np.asarray(r, dtype=float)[()] * math.sqrt(A0.psi_dim) / (-b * factor)


@dataclass(frozen=True)
class ConeDomain:
    """Region ``{(-u, xi) : u_min <= u < u_max, |xi| <= c u}`` of a light cone.

    ``exact`` is false when the region is an outer bound of the intended set.
    """

    c: float
    m: int
    u_min: float = 0.0
    u_max: float = math.inf
    exact: bool = True

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        u = -x[..., 0]
        xi2 = np.sum(x[..., 1:] ** 2, axis=-1)
        return (u >= self.u_min) & (u < self.u_max) & (xi2 <= self.c ** 2 * u * u)


def _require_cone(A0):
    if not isinstance(A0, LightCone):
        raise UnsupportedShape(f"no cone parameterization for shape {A0.shape!r}")


def truncated_cone_domain(A0, psi_val):
    """Descriptor of ``A_0 cap V_0^psi``.

    Exact for ``c <= 1``; for ``c > 1`` the outer bound ``u >= psi / c`` is
    returned and flagged with ``exact=False``.
    """
    _require_cone(A0)
    if psi_val < 0:
        raise ValidationError("psi must be nonnegative")
    if A0.c <= 1 or psi_val == 0 or A0.m_space == 0:
        return ConeDomain(A0.c, A0.m_space, float(psi_val), math.inf, True)
    return ConeDomain(A0.c, A0.m_space, float(psi_val) / A0.c, math.inf, False)


def complement_cone_domain(A0, psi_val):
    """Descriptor containing ``A_0 \\ V_0^psi``: ``u < psi`` (exact for c <= 1)."""
    _require_cone(A0)
    return ConeDomain(A0.c, A0.m_space, 0.0, float(psi_val),
                      A0.c <= 1 or A0.m_space == 0)


def eta_cone_domain(A0, h):
    """Descriptor containing ``A_0 cap ((-h/2, h/2)^dim)^c``."""
    _require_cone(A0)
    if A0.c <= 1 or h == 0 or A0.m_space == 0:
        return ConeDomain(A0.c, A0.m_space, 0.5 * h, math.inf, True)
    return ConeDomain(A0.c, A0.m_space, 0.5 * h / A0.c, math.inf, False)


class SamplingWindow:
    """Finite set of lattice points: the cube ``E_n = (0, n]^m`` or a list.

    Parameters
    ----------
    n : int, optional
        Side length of the cube.
    m : int
        Lattice dimension.
    points : array_like, optional
        Explicit ``(k, m)`` integer points instead of a cube.
    """

    def __init__(self, n=None, m=1, points=None):
        self.m = int(m)
        if points is not None:
            self.kind = "points"
            self.n = None
            p = np.asarray(points, dtype=np.int64)
            if p.ndim != 2 or p.shape[1] != self.m or p.shape[0] == 0:
                raise ValidationError("points must have shape (k, m) with k > 0")
            self._points = p
        else:
            if n is None or int(n) < 1:
                raise ValidationError("cube side n must be >= 1")
            self.kind = "cube"
            self.n = int(n)
            self._points = None

    @property
    def size(self):
        return self.n ** self.m if self.kind == "cube" else self._points.shape[0]

    @property
    def points(self):
        if self._points is None:
            grids = np.indices((self.n,) * self.m).reshape(self.m, -1).T
            self._points = grids + 1
        return self._points

    @property
    def shape(self):
        return (self.n,) * self.m if self.kind == "cube" else (self.size,)

    def boundary_mask(self):
        """Points with a nearest neighbour outside the window."""
        p = self.points
        if self.kind == "cube":
            return np.any((p == 1) | (p == self.n), axis=1)
        keys = {tuple(r) for r in p.tolist()}
        out = np.zeros(p.shape[0], dtype=bool)
        for i, r in enumerate(p.tolist()):
            for d in range(self.m):
                for step in (-1, 1):
                    q = list(r)
                    q[d] += step
                    if tuple(q) not in keys:
                        out[i] = True
        return out

    @property
    def boundary_size(self):
        if self.kind == "cube":
            return self.n ** self.m - max(self.n - 2, 0) ** self.m
        return int(self.boundary_mask().sum())

    def subwindow(self, k):
        """``E_{n-k}``; used for sample autocovariances at lags with sup norm ``k``."""
        if self.kind != "cube":
            raise ValidationError("subwindows are defined for cubes only")
        if k >= self.n:
            raise ValidationError("lag exceeds the window")
        return SamplingWindow(self.n - k, self.m)

    def bounds(self):
        p = self.points
        return p.min(axis=0), p.max(axis=0)

    def describe(self):
        if self.kind == "cube":
            return {"kind": "cube", "n": self.n, "m": self.m}
        return {"kind": "points", "m": self.m, "size": self.size}
