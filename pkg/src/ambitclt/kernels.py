"""Kernel functions ``f(A, s)`` and ambit-field model containers.

Kernels are evaluated at the lag ``t - s``.  Cone-supported kernels live on
the reflected light cone ``{(u, xi) : u >= 0, |xi| <= c u}`` (time lag
first) and are described by a profile ``g(A, u, r)`` with ``r = |xi|``.
"""

import csv
import math

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .exceptions import ParameterOutOfRange, ValidationError
from .geometry import LightCone, RotatedHalfspace, ball_volume
from .levy import CharacteristicQuadruplet, MixingLaw

__all__ = [
    "KernelModel", "ConeKernel", "MSTOUKernel", "ExpBoundedKernel",
    "GeometricMAKernel", "TabulatedKernel", "RotatedKernel",
    "ConstantVolatility", "MMAFVolatility", "PDependentVolatility",
    "IIDCellVolatility", "AmbitModel", "lp_norm",
]


class KernelModel:
    """Deterministic kernel with support and integrability metadata.

    Attributes
    ----------
    kind : str
    dim : int
        Dimension of the index set on which the kernel lives.
    support : SphereOfInfluence or None
        ``None`` stands for all of R^dim.
    mixing : MixingLaw or None
        Law of the mixing parameter; ``None`` for kernels not depending on it.
    lp_tags : tuple of float
        Exponents ``p`` for which the kernel is claimed to be in L^p.
    """

    kind = "abstract"
    dim = 1
    support = None
    mixing = None
    lp_tags = (1.0, 2.0)
    discrete = False

    def evaluate(self, A, lag):
        """``f(A, lag)``; exactly 0 outside the support."""
        raise NotImplementedError

    def __call__(self, A, lag):
        return self.evaluate(A, lag)

    def mixing_or_unit(self):
        return self.mixing if self.mixing is not None else MixingLaw.degenerate(1.0)

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}


class ConeKernel(KernelModel):
    """Kernel supported on the reflected light cone with slope ``c``.

    Parameters
    ----------
    profile : callable
        ``profile(A, u, r)`` for time lag ``u >= 0`` and spatial radius
        ``0 <= r <= c u``; must broadcast over array inputs.
    c : float
    m : int
        Number of spatial dimensions.
    mixing : MixingLaw, optional
    spatially_constant : bool
        Whether the profile ignores ``r``; enables the ball-volume reduction.
    decay_scale : callable, optional
        Typical length of the profile in ``u`` as a function of ``A``.
    """

    kind = "cone"

    def __init__(self, profile, c, m=1, mixing=None, spatially_constant=False,
                 decay_scale=None, lp_tags=(1.0, 2.0)):
        self.cone = LightCone(c, m)
        self.support = self.cone
        self.c = float(c)
        self.m = int(m)
        self.dim = self.m + 1
        self.mixing = mixing
        self._profile = profile
        self.spatially_constant = bool(spatially_constant)
        self._decay = decay_scale
        self.lp_tags = tuple(lp_tags)

    def profile(self, A, u, r=0.0):
        return self._profile(A, u, r)

    def decay_scale(self, A):
        if self._decay is None:
            return np.ones_like(np.asarray(A, dtype=float))
        return self._decay(A)

    def evaluate(self, A, lag):
        lag = np.asarray(lag, dtype=float)
        u = lag[..., 0]
        r = np.sqrt(np.sum(lag[..., 1:] ** 2, axis=-1))
        inside = (u >= 0) & (r * r <= self.c ** 2 * u * u)
        A = np.asarray(1.0 if A is None else A, dtype=float)
        val = self.profile(A, np.where(inside, u, 0.0), np.where(inside, r, 0.0))
        return np.where(inside, val, 0.0)[()]

    def describe(self):
        return {"kind": self.kind, "c": self.c, "m": self.m,
                "mixing": None if self.mixing is None else
                {"kind": self.mixing.kind, **self.mixing.params()}}


class MSTOUKernel(ConeKernel):
    """Mixed spatio-temporal OU kernel ``exp(-lambda u)`` on the light cone.

    The mixing law of ``lambda`` must satisfy ``E[lambda^{-(m+1)}] < inf``,
    which for Gamma(alpha, beta) mixing means ``alpha > m + 1``.
    """

    kind = "mstou-exp"

    def __init__(self, c=1.0, m=1, mixing=None):
        mixing = MixingLaw.degenerate(1.0) if mixing is None else mixing
        if mixing.kind == "gamma" and not mixing.alpha > m + 1:
            raise ParameterOutOfRange(
                f"MSTOU with Gamma mixing needs alpha > m + 1 = {m + 1}, got {mixing.alpha}")
        if not math.isfinite(mixing.inverse_moment(m + 1)):
            raise ParameterOutOfRange("mixing law has E[lambda^-(m+1)] = inf")
        super().__init__(self._exp_profile, c, m, mixing, spatially_constant=True,
                         decay_scale=lambda lam: 1.0 / np.asarray(lam, dtype=float),
                         lp_tags=(math.inf,))

    @staticmethod
    def _exp_profile(lam, u, r=0.0):
        return np.exp(-np.asarray(lam, dtype=float) * u)

    def lp_integral(self, p):
        """``int int f^p = V_m(c) m! E[lambda^{-(m+1)}] / p^{m+1}``."""
        m = self.m
        return (ball_volume(m, self.c) * math.factorial(m)
                * self.mixing.inverse_moment(m + 1) / p ** (m + 1))


class ExpBoundedKernel(KernelModel):
    """Kernel with ``f(t)^2 <= M exp(-K |t|)`` on R^dim.

    Parameters
    ----------
    M, K : float
        Envelope constants.
    dim : int
    evaluator : callable, optional
        ``evaluator(lag) -> values``; defaults to the envelope itself,
        ``sqrt(M) exp(-K |t| / 2)``.
    check_points : int
        Number of random points on which the envelope is verified.
    """

    kind = "exp-bounded"

    def __init__(self, M=1.0, K=1.0, dim=1, evaluator=None, check_points=512):
        if M <= 0 or K <= 0:
            raise ValidationError("M and K must be positive")
        self.M, self.K, self.dim = float(M), float(K), int(dim)
        self._ev = evaluator
        self.lp_tags = (math.inf,)
        if evaluator is not None and check_points:
            rng = np.random.default_rng(12345)
            pts = rng.standard_normal((check_points, self.dim))
            pts *= (rng.random(check_points) * 30.0 / self.K)[:, None] / np.maximum(
                np.linalg.norm(pts, axis=1), 1e-300)[:, None]
            f = np.asarray(evaluator(pts), dtype=float)
            env = self.M * np.exp(-self.K * np.linalg.norm(pts, axis=1))
            if np.any(f * f > env * (1 + 1e-9) + 1e-300):
                raise ValidationError("evaluator violates the exponential envelope")

    def evaluate(self, A, lag):
        lag = np.asarray(lag, dtype=float)
        if self._ev is not None:
            return np.asarray(self._ev(lag), dtype=float)[()]
        return (math.sqrt(self.M) * np.exp(-0.5 * self.K * np.linalg.norm(lag, axis=-1)))[()]

    def decay_scale(self, A=None):
        return 2.0 / self.K

    def describe(self):
        return {"kind": self.kind, "M": self.M, "K": self.K, "dim": self.dim}


class GeometricMAKernel(KernelModel):
    """Sequence kernel ``a_j = (1 - r) r^j`` for ``j >= 0``; ``r = 1/2`` gives
    ``2^{-j-1}``."""

    kind = "geometric-ma"
    discrete = True
    lp_tags = (math.inf,)

    def __init__(self, ratio=0.5, terms=64):
        if not 0 < ratio < 1:
            raise ValidationError("ratio must lie in (0, 1)")
        self.ratio = float(ratio)
        self.terms = int(terms)
        self.dim = 1

    def evaluate(self, A, lag):
        j = np.asarray(lag)
        jf = np.floor(j)
        ok = (j >= 0) & (jf == j)
        return np.where(ok, (1 - self.ratio) * self.ratio ** np.where(ok, j, 0), 0.0)[()]

    def coefficients(self, terms=None):
        j = np.arange(self.terms if terms is None else terms)
        return (1 - self.ratio) * self.ratio ** j

    def lp_integral(self, p):
        r = self.ratio
        return (1 - r) ** p / (1 - r ** p)

    def describe(self):
        return {"kind": self.kind, "ratio": self.ratio}


class TabulatedKernel(KernelModel):
    """Kernel given on a rectilinear grid, multilinearly interpolated and
    zero outside the grid box."""

    kind = "tabulated"

    def __init__(self, axes, values):
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        self.values = np.array(values, dtype=float)
        self.values.setflags(write=False)
        self.dim = len(self.axes)
        if self.values.shape != tuple(a.size for a in self.axes):
            raise ValidationError("values shape does not match the axes")
        for a in self.axes:
            if a.size < 2 or np.any(np.diff(a) <= 0):
                raise ValidationError("axes must be strictly increasing with >= 2 nodes")
        self._interp = RegularGridInterpolator(self.axes, self.values, method="linear",
                                               bounds_error=False, fill_value=0.0)
        self.lp_tags = (math.inf,)

    @classmethod
    def from_csv(cls, path):
        """Read ``coords..., value`` rows forming a full grid."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        try:
            data = np.array([[float(x) for x in r] for r in rows])
        except ValueError:
            data = np.array([[float(x) for x in r] for r in rows[1:]])
        coords, vals = data[:, :-1], data[:, -1]
        axes = [np.unique(coords[:, k]) for k in range(coords.shape[1])]
        grid = np.full(tuple(a.size for a in axes), np.nan)
        idx = tuple(np.searchsorted(a, coords[:, k]) for k, a in enumerate(axes))
        grid[idx] = vals
        if np.isnan(grid).any():
            raise ValidationError("tabulated kernel CSV does not cover a full grid")
        return cls(axes, grid)

    def evaluate(self, A, lag):
        lag = np.asarray(lag, dtype=float)
        shp = lag.shape[:-1]
        out = self._interp(lag.reshape(-1, self.dim))
        return out.reshape(shp)[()]

    def describe(self):
        return {"kind": self.kind, "dim": self.dim,
                "shape": list(self.values.shape)}


class RotatedKernel(KernelModel):
    """Kernel composed with a fixed orthogonal map, ``f(A, O^T x)``.

    Built from a :class:`RotatedHalfspace`, it maps a halfspace sphere of
    influence onto the lexicographic one; the matrix is formed once here.
    """

    kind = "rotated"

    def __init__(self, base, halfspace):
        if not isinstance(halfspace, RotatedHalfspace):
            raise ValidationError("rotation requires a rotated-halfspace shape")
        self.base = base
        self.O = halfspace.rotation_matrix()
        self.dim = base.dim
        self.mixing = base.mixing
        self.lp_tags = base.lp_tags

    def evaluate(self, A, lag):
        return self.base.evaluate(A, np.asarray(lag, dtype=float) @ self.O)


# -- volatility models -----------------------------------------------------

class ConstantVolatility:
    """``sigma == value``."""

    kind = "constant"

    def __init__(self, value=1.0):
        self.value = float(value)

    def mean(self):
        return self.value

    def second_moment(self):
        return self.value ** 2

    def describe(self):
        return {"kind": self.kind, "value": self.value}


class MMAFVolatility:
    """Volatility given by a mixed moving average ``sigma = int j dLambda^sigma``."""

    kind = "mmaf"

    def __init__(self, j, quad):
        if not isinstance(quad, CharacteristicQuadruplet):
            raise ValidationError("volatility basis must be a CharacteristicQuadruplet")
        self.j = j
        self.quad = quad

    def mean(self, engine=None):
        from .moments import mmaf_mean
        return mmaf_mean(self.j, self.quad, engine)

    def variance(self, engine=None):
        from .moments import mmaf_cov
        return mmaf_cov(self.j, self.quad, np.zeros(self.j.dim), engine)

    def second_moment(self, engine=None):
        return self.variance(engine) + self.mean(engine) ** 2

    def describe(self):
        return {"kind": self.kind, "j": self.j.describe()}


class PDependentVolatility:
    """Stationary p-dependent volatility field.

    Parameters
    ----------
    p : int
        Values at sup-distance greater than ``p`` are independent.
    sampler : callable
        ``sampler(rng, points) -> values`` realizing the field on a point set
        (rows time first); must honour the p-dependence.
    mean, second_moment : float
        ``E[sigma]`` and ``E[sigma^2]``.
    rho : callable, optional
        Vectorized ``rho(x, y)`` covariance of the field at points ``x, y``;
        required for ambit covariances with a non-centred basis.
    """

    kind = "p-dependent"

    def __init__(self, p, sampler, mean, second_moment, rho=None):
        if int(p) < 0:
            raise ValidationError("p must be a nonnegative integer")
        self.p = int(p)
        self.sampler = sampler
        self._mean = float(mean)
        self._second = float(second_moment)
        self.rho = rho

    def mean(self):
        return self._mean

    def second_moment(self):
        return self._second

    def describe(self):
        return {"kind": self.kind, "p": self.p}


class IIDCellVolatility(PDependentVolatility):
    """i.i.d. values on unit lattice cells ``floor(x)``; 1-dependent.

    Parameters
    ----------
    dist : scipy frozen distribution
        Marginal law of the cell values.
    """

    def __init__(self, dist):
        self.dist = dist
        var = float(dist.var())

        def rho(x, y):
            same = np.all(np.floor(x) == np.floor(y), axis=-1)
            return np.where(same, var, 0.0)

        super().__init__(1, self._sample, dist.mean(), var + dist.mean() ** 2, rho)

    def _sample(self, rng, points):
        cells = np.floor(np.asarray(points, dtype=float)).astype(np.int64)
        if cells.shape[0] == 0:
            return np.zeros(0)
        lo = cells.min(axis=0)
        span = cells.max(axis=0) - lo + 1
        table = self.dist.rvs(size=int(np.prod(span)), random_state=rng)
        flat = np.ravel_multi_index(tuple((cells - lo).T), tuple(span))
        return np.asarray(table)[flat]

    def describe(self):
        return {"kind": self.kind, "p": self.p, "law": self.dist.dist.name}


class AmbitModel:
    """Ambit field ``Y = int l(t - s) sigma_s Lambda(ds)`` over a light cone.

    Parameters
    ----------
    l : ConeKernel
        Deterministic weight.
    volatility : ConstantVolatility, MMAFVolatility or PDependentVolatility
    quad : CharacteristicQuadruplet
        Driving basis, independent of the volatility.
    """

    def __init__(self, l, volatility, quad):
        if not isinstance(l, ConeKernel):
            raise ValidationError("the ambit weight must be a cone kernel")
        self.l = l
        self.volatility = volatility
        self.quad = quad
        self.cone = l.cone
        self.dim = l.dim

    def describe(self):
        return {"l": self.l.describe(), "volatility": self.volatility.describe()}


def lp_norm(kernel, p, mixing=None, engine=None):
    """``(int_S int |f(A, s)|^p ds pi(dA))^{1/p}``.

    Closed forms are used for MSTOU and geometric kernels; other kernels go
    through quadrature, which also cross-checks the integrability tag.
    """
    from .moments import kernel_power_integral
    if p <= 0:
        raise ValidationError("p must be positive")
    if isinstance(kernel, MSTOUKernel) and (mixing is None or mixing is kernel.mixing):
        return kernel.lp_integral(p) ** (1.0 / p)
    if isinstance(kernel, GeometricMAKernel):
        return kernel.lp_integral(p) ** (1.0 / p)
    if mixing is not None and isinstance(kernel, ConeKernel):
        kernel = ConeKernel(kernel._profile, kernel.c, kernel.m, mixing,
                            kernel.spatially_constant, kernel._decay, kernel.lp_tags)
    return kernel_power_integral(kernel, p, engine=engine).value ** (1.0 / p)
