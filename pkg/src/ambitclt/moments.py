"""Means, autocovariances and long-run variances of mixed moving average
and ambit fields.

Cone integrals are computed in ``(u, r)`` coordinates (time lag, spatial
radius).  For spatially constant profiles the radial integral is the ball
volume ``V_m(c) u^m`` and the covariance integrand carries the volume of
the intersection of two balls.
"""

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exceptions import (DoubleIntegralBudgetExceeded, MomentUnavailable,
                         NotSummable, ValidationError)
from .geometry import ConeDomain, ball_volume, sphere_area
from .kernels import (ConeKernel, ConstantVolatility,
                      GeometricMAKernel, MMAFVolatility, MSTOUKernel,
                      PDependentVolatility, TabulatedKernel)
from .levy import check_moment_condition
from .quadrature import QuadratureEngine, QuadResult

__all__ = [
    "DiscreteNoise", "cone_power_integral", "box_power_integral",
    "kernel_power_integral", "lens_volume", "mmaf_mean", "mmaf_cov",
    "mstou_cov", "mstou_variance", "mstou_mean", "geometric_ma_mean",
    "geometric_ma_cov", "geometric_ma_series_cov", "geometric_ma_long_run_variance",
    "ambit_mean", "ambit_cov", "CovarianceTable", "covariance_table",
    "LongRunVariance", "long_run_variance", "mstou_cov_tail_bound",
    "theta_cov_tail_bound", "lattice_shell_size",
]


def _engine(engine):
    return engine if engine is not None else QuadratureEngine()


@dataclass(frozen=True)
class DiscreteNoise:
    """i.i.d. noise for sequence kernels, e.g. Bernoulli(p) innovations.

    Exposes ``mu_lambda`` (mean) and ``sigma_lambda`` (variance) so that it
    can stand in for a Levy basis on unit cells.
    """

    kind: str = "bernoulli"
    p: float = 0.5

    @property
    def mu_lambda(self):
        return self.p

    @property
    def sigma_lambda(self):
        return self.p * (1 - self.p)

    def sample(self, rng, size):
        return (rng.random(size) < self.p).astype(float)


# -- kernel integrals ------------------------------------------------------

def cone_power_integral(kernel, power, domain=None, engine=None, absolute=True):
    """``E_pi int_domain |f(A, s)|^power ds`` for a cone kernel.

    Parameters
    ----------
    kernel : ConeKernel
    power : float
    domain : ConeDomain, optional
        Sub-region ``u_min <= u < u_max`` of the cone; the full cone by default.
    absolute : bool
        Integrate ``|f|^power`` (default) or the signed ``f^power``.
    """
    if not isinstance(kernel, ConeKernel):
        raise ValidationError("cone_power_integral needs a cone kernel")
    eng = _engine(engine)
    dom = domain or ConeDomain(kernel.c, kernel.m)
    m, c = kernel.m, kernel.c
    mix = kernel.mixing_or_unit()
    vm = ball_volume(m, c)

    def powf(g):
        return np.abs(g) ** power if absolute else g ** power

    def ev(level):
        lam, wl = mix.nodes(eng, level, inverse_power=m + 1)
        if math.isinf(dom.u_max):
            u, wu = eng.halfline_nodes(dom.u_min, kernel.decay_scale(lam), level)
        else:
            if dom.u_max <= dom.u_min:
                return 0.0
            u, wu = eng.finite_nodes(dom.u_min, dom.u_max, level, panels=4)
            u = np.broadcast_to(u, (lam.size, u.shape[-1]))
            wu = np.broadcast_to(wu, u.shape)
        A = lam[:, None]
        if kernel.spatially_constant or m == 0:
            vals = powf(kernel.profile(A, u, 0.0)) * vm * u ** m
        else:
            t, wt = eng.unit_nodes(level, panels=2)
            r = c * u[..., None] * t
            g = kernel.profile(A[..., None], u[..., None], r)
            vals = np.sum(powf(g) * sphere_area(m, 1.0) * r ** (m - 1)
                          * (c * u[..., None]) * wt, axis=-1)
        return np.sum(wl[:, None] * wu * vals)

    return eng.refine(ev, "cone integral")


def _axis_nodes(seg, eng, level, scale, breaks=None):
    a, b = seg
    if math.isinf(b) and not math.isinf(a):
        u, w = eng.halfline_nodes(a, scale, level, x_lo=-30.0)
        return u, w
    if math.isinf(a) and not math.isinf(b):
        u, w = eng.halfline_nodes(-b, scale, level, x_lo=-30.0)
        return -u[::-1], w[::-1]
    if breaks is not None:
        pts = np.unique(np.concatenate([[a, b], breaks[(breaks > a) & (breaks < b)]]))
        us, ws = [], []
        for lo, hi in zip(pts[:-1], pts[1:]):
            u, w = eng.finite_nodes(lo, hi, level, panels=1)
            us.append(u)
            ws.append(w)
        return np.concatenate(us), np.concatenate(ws)
    return eng.finite_nodes(a, b, level, panels=4)


def _tensor_integral(fn, segments, eng, level, scale, breaks=None, exclude=None,
                     chunk=2_000_000):
    """Sum of tensor-product rules over all combinations of axis segments."""
    total = 0.0
    dim = len(segments)
    for combo in itertools.product(*[range(len(s)) for s in segments]):
        if exclude is not None and exclude(combo):
            continue
        nodes = [_axis_nodes(segments[k][combo[k]], eng, level, scale,
                             None if breaks is None else breaks[k]) for k in range(dim)]
        grids = np.meshgrid(*[n[0] for n in nodes], indexing="ij")
        wgrid = np.ones_like(grids[0])
        for k, n in enumerate(nodes):
            shp = [1] * dim
            shp[k] = -1
            wgrid = wgrid * n[1].reshape(shp)
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        wf = wgrid.ravel()
        for i in range(0, pts.shape[0], chunk):
            total += float(np.sum(fn(pts[i:i + chunk]) * wf[i:i + chunk]))
    return total


def _full_space_setup(kernel):
    if isinstance(kernel, TabulatedKernel):
        los = [a[0] for a in kernel.axes]
        his = [a[-1] for a in kernel.axes]
        return los, his, list(kernel.axes), 1.0
    scale = kernel.decay_scale() if hasattr(kernel, "decay_scale") else 1.0
    return None, None, None, scale


def box_power_integral(kernel, power, h=0.0, engine=None, absolute=True):
    """``int_{R^dim} |f|^power`` restricted to the complement of the open
    cube ``(-h/2, h/2)^dim`` (all of R^dim for ``h = 0``)."""
    eng = _engine(engine)
    dim = kernel.dim
    los, his, breaks, scale = _full_space_setup(kernel)
    half = 0.5 * h

    def segs(k):
        inner = [(-half, 0.0), (0.0, half)] if half > 0 else []
        outer = [(-math.inf, -half), (half, math.inf)]
        out = inner + outer
        if los is not None:
            clipped = []
            for a, b in out:
                a2, b2 = max(a, los[k]), min(b, his[k])
                clipped.append((a2, b2) if b2 > a2 else None)
            out = clipped
        return out

    segments = [segs(k) for k in range(dim)]
    n_inner = 2 if half > 0 else 0

    def exclude(combo):
        if any(segments[k][i] is None for k, i in enumerate(combo)):
            return True
        return n_inner > 0 and all(i < n_inner for i in combo)

    def fn(pts):
        g = kernel.evaluate(None, pts)
        return np.abs(g) ** power if absolute else g ** power

    segments_ok = [[s if s is not None else (0.0, 0.0) for s in seg] for seg in segments]

    def ev(level):
        return _tensor_integral(fn, segments_ok, eng, level, scale, breaks, exclude)

    return eng.refine(ev, "box integral")


def kernel_power_integral(kernel, power, engine=None, absolute=True):
    """``int_S int |f|^power`` over the whole support of ``kernel``."""
    if isinstance(kernel, ConeKernel):
        return cone_power_integral(kernel, power, None, engine, absolute)
    if isinstance(kernel, GeometricMAKernel):
        v = kernel.lp_integral(power)
        return QuadResult(v, 0.0)
    return box_power_integral(kernel, power, 0.0, engine, absolute)


# -- mean and covariance ---------------------------------------------------

def lens_volume(r1, r2, d, m):
    """Volume of ``B(0, r1) cap B(x, r2)`` in R^m with ``|x| = d`` (m <= 3)."""
    r1, r2, d = np.broadcast_arrays(np.asarray(r1, float), np.asarray(r2, float),
                                    np.asarray(d, float))
    if m == 0:
        return np.ones_like(r1)
    if m == 1:
        return np.maximum(0.0, np.minimum(r1, d + r2) - np.maximum(-r1, d - r2))
    rmin = np.minimum(r1, r2)
    disjoint = d >= r1 + r2
    inside = d <= np.abs(r2 - r1)
    dd = np.where(disjoint | inside, 1.0, d)
    if m == 2:
        with np.errstate(invalid="ignore"):
            a1 = np.arccos(np.clip((dd ** 2 + r1 ** 2 - r2 ** 2) / (2 * dd * r1), -1, 1))
            a2 = np.arccos(np.clip((dd ** 2 + r2 ** 2 - r1 ** 2) / (2 * dd * r2), -1, 1))
            k = np.sqrt(np.maximum((-dd + r1 + r2) * (dd + r1 - r2) * (dd - r1 + r2)
                                   * (dd + r1 + r2), 0.0))
        part = r1 ** 2 * a1 + r2 ** 2 * a2 - 0.5 * k
        full = math.pi * rmin ** 2
    elif m == 3:
        part = (math.pi * (r1 + r2 - dd) ** 2
                * (dd ** 2 + 2 * dd * (r1 + r2) - 3 * (r1 - r2) ** 2) / (12 * dd))
        full = 4.0 / 3.0 * math.pi * rmin ** 3
    else:
        raise ValidationError("lens volumes are implemented for m <= 3")
    return np.where(disjoint, 0.0, np.where(inside, full, part))


def _check_cov_pre(quad):
    if not math.isfinite(quad.sigma_lambda):
        raise MomentUnavailable("int x^2 nu(dx) is infinite; covariance unavailable")


def mmaf_mean(kernel, quad, engine=None):
    """``E[X_t] = mu_Lambda int_S int f(A, -s) ds pi(dA)``; exactly 0 when centred."""
    if isinstance(kernel, GeometricMAKernel):
        return geometric_ma_mean(kernel.ratio, quad.mu_lambda)
    if hasattr(quad, "nu") and not check_moment_condition(quad, 1.0):
        raise MomentUnavailable("int_{|x|>1}|x| nu(dx) is infinite; mean unavailable")
    mu = quad.mu_lambda
    if mu == 0:
        return 0.0
    if isinstance(kernel, MSTOUKernel):
        return mu * kernel.lp_integral(1.0)
    return mu * kernel_power_integral(kernel, 1.0, engine, absolute=False).value


def mstou_mean(kernel, mu_lambda):
    """Closed form ``mu_Lambda V_m(c) m! E[lambda^{-(m+1)}]``."""
    return mu_lambda * kernel.lp_integral(1.0)


def mstou_variance(kernel, sigma_lambda):
    """Closed form ``Sigma_Lambda V_m(c) m! E[lambda^{-(m+1)}] / 2^{m+1}``."""
    return sigma_lambda * kernel.lp_integral(2.0)


def mstou_cov(kernel, sigma_lambda, lags):
    """Closed-form MSTOU autocovariance for one spatial dimension.

    ``Cov(X_0, X_(tau, delta)) = (c Sigma / 2) E[lambda^{-2} exp(-lambda a)]``
    with ``a = max(|tau|, |delta| / c)``.  Vectorized over lag rows.
    """
    if kernel.m != 1:
        raise ValidationError("the closed form covers m = 1 only")
    lags = np.atleast_2d(np.asarray(lags, dtype=float))
    a = np.maximum(np.abs(lags[:, 0]), np.abs(lags[:, 1]) / kernel.c)
    return 0.5 * kernel.c * sigma_lambda * np.atleast_1d(kernel.mixing.laplace_inverse(2.0, a))


def _cone_cov(kernel, lag, eng):
    lag = np.asarray(lag, dtype=float)
    tau, delta = float(lag[0]), lag[1:]
    if tau < 0:
        tau, delta = -tau, -delta
    d = float(np.linalg.norm(delta))
    c, m = kernel.c, kernel.m
    u0 = max(0.0, (d - c * tau) / (2 * c))
    mix = kernel.mixing_or_unit()
    if not (kernel.spatially_constant or m <= 1):
        raise MomentUnavailable("covariances of radial cone kernels need m <= 1")

    def ev(level):
        lam, wl = mix.nodes(eng, level, inverse_power=m + 1)
        A = lam[:, None]
        u, wu = eng.halfline_nodes(u0, kernel.decay_scale(lam), level)
        if kernel.spatially_constant or m == 0:
            g = kernel.profile(A, u, 0.0) * kernel.profile(A, u + tau, 0.0)
            vals = g * lens_volume(c * u, c * (u + tau), d, m)
        else:
            dl = float(delta[0]) if delta.size else 0.0
            lo = np.maximum(-c * u, dl - c * (u + tau))
            hi = np.minimum(c * u, dl + c * (u + tau))
            hi = np.maximum(hi, lo)
            xi, wx = eng.finite_nodes(lo, hi, level, panels=2)
            g = (kernel.profile(A[..., None], u[..., None], np.abs(xi))
                 * kernel.profile(A[..., None], (u + tau)[..., None], np.abs(dl - xi)))
            vals = np.sum(g * wx, axis=-1)
        return np.sum(wl[:, None] * wu * vals)

    return eng.refine(ev, "cone covariance").value


def _full_space_cov(kernel, lag, eng):
    lag = np.asarray(lag, dtype=float)
    los, his, breaks, scale = _full_space_setup(kernel)
    segments = []
    brk = []
    for k in range(kernel.dim):
        # integrate over s with kinks of f(-s) at s = 0 and of f(lag - s) at s = lag
        a1, a2 = sorted((0.0, float(lag[k])))
        seg = [(-math.inf, a1), (a1, a2), (a2, math.inf)]
        if los is not None:
            lo = max(-his[k], lag[k] - his[k])
            hi = min(-los[k], lag[k] - los[k])
            seg = [(lo, hi)] if hi > lo else []
            brk.append(np.concatenate([-breaks[k], lag[k] - breaks[k]]))
        segments.append([s for s in seg if s[1] > s[0]])
    if any(len(s) == 0 for s in segments):
        return 0.0

    def fn(pts):
        return kernel.evaluate(None, -pts) * kernel.evaluate(None, lag - pts)

    def ev(level):
        return _tensor_integral(fn, segments, eng, level, scale, brk if brk else None)

    return eng.refine(ev, "covariance").value


def mmaf_cov(kernel, quad, lag, engine=None):
    """``Cov(X_0, X_lag) = Sigma_Lambda int_S int f(A,-s) f(A, lag-s) ds pi(dA)``."""
    _check_cov_pre(quad)
    sig = quad.sigma_lambda
    if isinstance(kernel, GeometricMAKernel):
        return geometric_ma_cov(np.ravel(lag)[0], kernel.ratio, sig)
    if sig == 0:
        return 0.0
    eng = _engine(engine)
    lag = np.atleast_1d(np.asarray(lag, dtype=float))
    if lag.size != kernel.dim:
        raise ValidationError(f"lag must have {kernel.dim} coordinates")
    if isinstance(kernel, ConeKernel):
        return sig * _cone_cov(kernel, lag, eng)
    return sig * _full_space_cov(kernel, lag, eng)


# -- geometric moving average ---------------------------------------------

def geometric_ma_mean(ratio=0.5, noise_mean=0.5):
    """``E[X] = noise_mean * sum_j (1-r) r^j = noise_mean``."""
    return float(noise_mean)


def geometric_ma_cov(h, ratio=0.5, noise_var=0.25):
    """``noise_var (1-r)^2 r^|h| / (1 - r^2)``; ``2^{-|h|}/12`` for Bernoulli(1/2)."""
    r = ratio
    return noise_var * (1 - r) ** 2 * r ** abs(h) / (1 - r * r)


def geometric_ma_series_cov(h, ratio=0.5, noise_var=0.25, terms=64):
    """Truncated series ``noise_var sum_{j<J} a_j a_{j+h}`` and its remainder bound."""
    r = ratio
    j = np.arange(terms)
    a = (1 - r) * r ** j
    b = (1 - r) * r ** (j + abs(h))
    partial = noise_var * float(np.sum(a * b))
    rem = noise_var * (1 - r) ** 2 * r ** (2 * terms + abs(h)) / (1 - r * r)
    return partial, rem


def geometric_ma_long_run_variance(ratio=0.5, noise_var=0.25):
    """``sum_h Cov(h) = noise_var (sum_j a_j)^2 = noise_var``."""
    return float(noise_var)


# -- ambit fields ----------------------------------------------------------

def _vol_mean(vol, eng):
    if isinstance(vol, MMAFVolatility):
        return vol.mean(eng)
    return vol.mean()


def _vol_second(vol, eng):
    if isinstance(vol, MMAFVolatility):
        return vol.second_moment(eng)
    return vol.second_moment()


def ambit_mean(ambit, engine=None):
    """``E[Y] = mu_Lambda E[sigma] int l``."""
    eng = _engine(engine)
    q = ambit.quad
    if not check_moment_condition(q, 1.0):
        raise MomentUnavailable("int_{|x|>1}|x| nu(dx) is infinite; mean unavailable")
    if q.mu_lambda == 0:
        return 0.0
    il = kernel_power_integral(ambit.l, 1.0, eng, absolute=False).value
    return q.mu_lambda * _vol_mean(ambit.volatility, eng) * il


def _vol_covariance_fn(vol, eng):
    """Vectorized ``rho(x, y)`` for the volatility field."""
    if isinstance(vol, PDependentVolatility):
        if vol.rho is None:
            raise MomentUnavailable(
                "the p-dependent generator must supply its covariance rho")
        return vol.rho
    if isinstance(vol, MMAFVolatility):
        j = vol.j
        if isinstance(j, MSTOUKernel) and j.m == 1:
            sig = vol.quad.sigma_lambda

            def rho(x, y):
                return mstou_cov(j, sig, np.asarray(y) - np.asarray(x))
            return rho
        raise MomentUnavailable(
            "no vectorized covariance for this volatility kernel (MSTOU, m = 1 only)")
    raise MomentUnavailable("unknown volatility model")


def _cone_tensor_nodes(kernel, eng, n_u, n_v, u_max):
    """Nodes ``(points, weights)`` covering the cone ``u <= u_max`` for m = 1."""
    c = kernel.c
    u, wu = eng.finite_nodes(0.0, u_max, 0, panels=max(1, n_u // eng.order))
    v, wv = eng.finite_nodes(-1.0, 1.0, 0, panels=max(1, n_v // eng.order))
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * c * U
    pts = np.stack([U.ravel(), (c * U * V).ravel()], axis=-1)
    return pts, W.ravel()


def ambit_cov(ambit, lag, engine=None, budget=4_000_000, tail_tol=1e-10,
              return_bound=False):
    """Autocovariance of an ambit field.

    ``Sigma_Lambda E[sigma^2] int_{A cap A~} l l + mu_Lambda^2 int int l l rho``.
    The second term uses tensorized quadrature (one spatial dimension) with
    at most ``budget`` integrand evaluations; the residual bound from the
    discarded cone tail is ``2 mu_Lambda^2 Var(sigma) int|l| int_{u > U}|l|``.
    With ``return_bound`` the pair ``(value, residual_bound)`` is returned.
    """
    eng = _engine(engine)
    q = ambit.quad
    _check_cov_pre(q)
    vol = ambit.volatility
    lag = np.atleast_1d(np.asarray(lag, dtype=float))
    first = q.sigma_lambda * _vol_second(vol, eng) * (
        _cone_cov(ambit.l, lag, eng) if q.sigma_lambda else 0.0)
    mu = q.mu_lambda
    if mu == 0 or isinstance(vol, ConstantVolatility):
        return (first, 0.0) if return_bound else first
    rho = _vol_covariance_fn(vol, eng)
    l = ambit.l
    var_sigma = _vol_second(vol, eng) - _vol_mean(vol, eng) ** 2
    il_abs = kernel_power_integral(l, 1.0, eng).value
    if l.m != 1:
        raise DoubleIntegralBudgetExceeded(
            "the double integral is implemented for one spatial dimension",
            partial=first, bound=mu * mu * abs(var_sigma) * il_abs ** 2)
    # truncate the cone where the l-tail is below tail_tol
    u_max = 1.0
    while True:
        tail = cone_power_integral(l, 1.0, ConeDomain(l.c, l.m, u_max), eng).value
        if tail <= tail_tol * il_abs or u_max > 1e6:
            break
        u_max *= 1.5
    per_dim = int(round(budget ** 0.25))
    n_u = max(eng.order, (per_dim // eng.order) * eng.order)
    if n_u ** 4 > budget or n_u < eng.order:
        raise DoubleIntegralBudgetExceeded(
            "budget too small for the tensor rule", partial=first,
            bound=mu * mu * abs(var_sigma) * il_abs ** 2)
    pts, w = _cone_tensor_nodes(l, eng, n_u, n_u, u_max)
    fl = l.evaluate(None, pts) * w
    # points s = t - lag_point; first field at 0, second at lag
    s1 = -pts
    s2 = lag - pts
    acc = 0.0
    for i in range(s1.shape[0]):
        acc += fl[i] * float(np.sum(fl * rho(s1[i][None, :], s2)))
    resid = 2.0 * mu * mu * abs(var_sigma) * il_abs * tail
    value = first + mu * mu * acc
    return (value, resid) if return_bound else value


# -- covariance tables and long-run variance -------------------------------

def lattice_shell_size(r, dim):
    """Number of points of Z^dim with sup norm exactly ``r``."""
    r = np.asarray(r)
    return np.where(r == 0, 1, (2 * r + 1) ** dim - (2 * r - 1) ** dim)


@dataclass
class CovarianceTable:
    """Autocovariances on a set of lags plus a bound on the omitted tail."""

    lags: np.ndarray
    values: np.ndarray
    tail_bound: float = math.inf
    mean: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def variance(self):
        zero = np.all(self.lags == 0, axis=1)
        return float(self.values[zero][0])

    def to_csv(self, path=None, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        dim = self.lags.shape[1]
        w.writerow([f"lag{k}" for k in range(dim)] + ["cov", "mean", "tail_flag"])
        for lag, v in zip(self.lags, self.values):
            w.writerow([int(x) for x in lag] + [repr(float(v)), repr(float(self.mean)), 0])
        w.writerow(["tail"] * dim + [repr(float(self.tail_bound)), repr(float(self.mean)), 1])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _lags_up_to(K, dim):
    rng = np.arange(-K, K + 1)
    return np.stack(np.meshgrid(*([rng] * dim), indexing="ij"), -1).reshape(-1, dim)


def covariance_table(kernel, quad, max_lag, engine=None, tail_bound_fn=None):
    """Autocovariances on ``{k : |k|_inf <= max_lag}`` of Z^dim."""
    eng = _engine(engine)
    dim = kernel.dim
    lags = _lags_up_to(int(max_lag), dim)
    if isinstance(kernel, MSTOUKernel) and kernel.m == 1:
        vals = mstou_cov(kernel, quad.sigma_lambda, lags)
    else:
        cache = {}
        vals = np.empty(lags.shape[0])
        for i, k in enumerate(lags):
            key = tuple(np.abs(k)) if dim == 1 else tuple(k)
            neg = tuple(-x for x in key)
            if neg in cache:
                vals[i] = cache[neg]
                continue
            vals[i] = cache[key] = mmaf_cov(kernel, quad, k, eng)
    tail = tail_bound_fn(int(max_lag)) if tail_bound_fn is not None else math.inf
    try:
        mean = mmaf_mean(kernel, quad, eng)
    except MomentUnavailable:
        mean = math.nan
    return CovarianceTable(lags, np.asarray(vals, dtype=float), tail, mean)


@dataclass(frozen=True)
class LongRunVariance:
    """Truncated lattice sum with its tail certificate."""

    value: float
    radius: int
    tail_bound: float
    certified: bool


def long_run_variance(cov, tail_bound=None, eps=1e-4, dim=None, max_radius=5000):
    """``Sigma = sum_{k in Z^dim} Cov(X_0, X_k)`` with a truncation certificate.

    Parameters
    ----------
    cov : CovarianceTable or callable
        A table (summed as given, its ``tail_bound`` is the certificate) or a
        vectorized ``cov(lags)`` evaluated shell by shell.
    tail_bound : callable, optional
        ``tail_bound(K)`` bounding ``|sum_{|k|_inf > K} Cov(k)|``; required
        for callables.
    eps : float
        Requested certificate.
    dim : int
        Lattice dimension for callables.
    """
    if isinstance(cov, CovarianceTable):
        t = cov.tail_bound
        return LongRunVariance(float(np.sum(cov.values)), int(np.max(np.abs(cov.lags))),
                               float(t), bool(t <= eps))
    if tail_bound is None or dim is None:
        raise ValidationError("callable covariances need tail_bound and dim")
    K = 0
    while tail_bound(K) > eps:
        K = max(1, 2 * K)
        if K > max_radius:
            raise NotSummable(f"tail bound above {eps} at radius {max_radius}")
    # bisect the smallest admissible radius
    lo = K // 2
    while K - lo > 1:
        mid = (K + lo) // 2
        if tail_bound(mid) <= eps:
            K = mid
        else:
            lo = mid
    total = 0.0
    for r in range(K + 1):
        total += float(np.sum(cov(_shell(r, dim))))
    return LongRunVariance(total, K, float(tail_bound(K)), True)


def _shell(r, dim):
    """Lattice points with sup norm exactly ``r``, generated without the interior."""
    if r == 0:
        return np.zeros((1, dim), dtype=int)
    parts = []
    full = np.arange(-r, r + 1)
    inner = np.arange(-r + 1, r)
    for i in range(dim):
        # coordinate i is the first one with |k_i| = r
        axes = [inner] * i + [np.array([-r, r])] + [full] * (dim - i - 1)
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dim)
        parts.append(grid)
    return np.concatenate(parts)


def mstou_cov_tail_bound(kernel, sigma_lambda):
    """Certificate ``K -> sum_{|k|_inf > K} Cov(k)`` for m = 1 MSTOU on Z^2.

    Uses ``max(|tau|, |delta|/c) >= |k|_inf min(1, 1/c)`` and the monotone
    decay of ``E[lambda^{-2} exp(-lambda a)]``; explicit shell sums up to a
    cutoff are followed by an integral bound.  Raises ``NotSummable`` when the
    Gamma-mixing covariances are not summable (alpha <= 4).
    """
    mix = kernel.mixing
    if kernel.m != 1:
        raise ValidationError("tail bound implemented for m = 1")
    dim = 2
    kap = min(1.0, 1.0 / kernel.c)
    const = 0.5 * kernel.c * sigma_lambda

    def g(r):
        return const * np.atleast_1d(mix.laplace_inverse(2.0, kap * np.asarray(r, float)))

    if mix.kind == "gamma":
        p = mix.alpha - 2.0
        if p <= dim:
            raise NotSummable(f"covariances decay like |k|^-{p:g}; not summable on Z^{dim}")
        # E[lambda^-2 e^{-lambda a}] = C (beta + a)^-p
        cst = const * math.exp(mix.alpha * math.log(mix.beta) + special.gammaln(mix.alpha - 2)
                               - special.gammaln(mix.alpha))
    else:
        cst = None

    def bound(K):
        R = max(4 * K, K + 2000)
        r = np.arange(K + 1, R + 1)
        s = float(np.sum(lattice_shell_size(r, dim) * g(r)))
        if cst is not None:
            # shells of size <= 2 dim (2r+1)^{dim-1} <= 2 dim 3 r for r >= 1
            s += 2 * dim * 3 * cst * kap ** (-p) * R ** (2 - p) / (p - 2)
        else:
            # E[lambda^-2 e^{-lambda a}] <= E[lambda^-2] e^{-lambda_min a}
            lam_min = float(np.min(mix.values))
            s += 2 * dim * 3 * const * mix.inverse_moment(2.0) * _exp_tail(kap * lam_min, R)
        return s

    return bound


def _exp_tail(a, R):
    # int_R^inf r e^{-a r} dr
    return math.exp(-a * R) * (R / a + 1 / a ** 2)


def theta_cov_tail_bound(theta_fn, variance, dim, order):
    """Estimate ``K -> sum_{|k|_inf>K} sqrt(Var) theta(|k|_inf) / 2``.

    Valid for centred fields with a case-(i) coefficient bound ``theta_fn``;
    the tail beyond ``4K`` is extrapolated with the fitted polynomial
    ``order`` (positive decay rate).
    """
    if order <= dim:
        raise NotSummable(f"decay order {order:g} does not exceed lattice dimension {dim}")
    sv = math.sqrt(variance)

    def bound(K):
        R = max(4 * K, K + 50)
        r = np.arange(K + 1, R + 1, dtype=float)
        th = np.array([theta_fn(x) for x in r])
        s = float(np.sum(lattice_shell_size(r.astype(int), dim) * sv * th / 2))
        s += 2 * dim * 3 ** (dim - 1) * sv * th[-1] / 2 * R ** order * R ** (dim - order) / (order - dim)
        return s

    return bound
