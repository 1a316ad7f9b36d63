"""Lattice simulation of mixed moving average and ambit fields.

A single basis realization serves every lattice point of a window.  The
basis is decomposed into

* represented jumps: a Poisson number of points in a box, uniform
  locations, mixing values ``A ~ pi`` and sizes from the jump law;
* a Gaussian part (``Sigma`` plus, optionally, the variance of discarded
  small jumps): independent normal weights on cells of side ``grid_step``
  with mixing values drawn per cell (midpoint rule);
* a deterministic part chosen so the simulated field has the exact mean:
  ``mu_Lambda int f - (int_rep x nu) int_trunc f``.

Kernels are truncated to lags with time lag ``<= T`` (cone kernels) or sup
norm ``<= T`` (full-space kernels).  The omitted part and the dropped small
jumps are reported as bias bounds.
"""

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import (DegenerateDomain, MomentUnavailable, PlanBiasTooLarge,
                         UnsupportedShape, ValidationError)
from .geometry import ConeDomain, SamplingWindow
from .kernels import (AmbitModel, ConeKernel, ConstantVolatility, ExpBoundedKernel,
                      GeometricMAKernel, MMAFVolatility, PDependentVolatility,
                      TabulatedKernel)
from .moments import box_power_integral, cone_power_integral, kernel_power_integral
from .quadrature import QuadratureEngine

__all__ = [
    "SimPlan", "LatticeSample", "BiasReport", "make_plan", "stream",
    "simulate_mmaf", "simulate_ambit", "simulate_geometric_ma",
    "simulate_replications", "model_hash",
]

BASIS, VOLATILITY = 0, 1
_ENGINE = QuadratureEngine()
CHUNK = 1 << 21


def stream(master_seed, rep_index, branch=BASIS):
    """Independent generator for ``(master_seed, rep_index, branch)``.

    Uses the counter-based Philox bit generator keyed by a ``SeedSequence``
    whose spawn key encodes the replication and branch; no state is shared.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(rep_index), int(branch)))
    return np.random.Generator(np.random.Philox(ss))


def model_hash(*parts):
    """Short SHA-256 digest of JSON descriptions."""
    blob = json.dumps([_describe(p) for p in parts], sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _describe(obj):
    if hasattr(obj, "describe"):
        return obj.describe()
    if hasattr(obj, "nu") and hasattr(obj, "gamma"):
        return {"gamma": obj.gamma, "sigma": obj.sigma, "nu": obj.nu.describe()}
    return obj


@dataclass(frozen=True)
class BiasReport:
    """Bias bounds of a simulation plan.

    ``drift_discretization`` is a bound on the mean error of the midpoint
    rule for the ambit drift term; the other entries are on the standard
    deviation scale.
    """

    kernel_tail: float
    small_jump: float
    gaussian_discretization: float
    drift_discretization: float = 0.0

    @property
    def total(self):
        return (self.kernel_tail + self.small_jump + self.gaussian_discretization
                + self.drift_discretization)

    def to_dict(self):
        return {"kernel_tail": self.kernel_tail, "small_jump": self.small_jump,
                "gaussian_discretization": self.gaussian_discretization,
                "drift_discretization": self.drift_discretization,
                "total": self.total}


@dataclass(frozen=True)
class SimPlan:
    """Simulation plan.

    Attributes
    ----------
    window : SamplingWindow
    T : float
        Kernel truncation radius.
    grid_step : float
        Cell side for the Gaussian and drift parts.
    master_seed : int
    reps : int
    bias : BiasReport, optional
    eps_bias : float
    """

    window: SamplingWindow
    T: float
    grid_step: float = 0.5
    master_seed: int = 0
    reps: int = 1
    bias: BiasReport = None
    eps_bias: float = math.inf

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise DegenerateDomain("truncation radius must be positive and finite")
        if not self.grid_step > 0:
            raise DegenerateDomain("grid step must be positive")
        if self.reps < 1:
            raise ValidationError("reps must be >= 1")

    def describe(self):
        return {"window": self.window.describe(), "T": self.T, "grid_step": self.grid_step,
                "master_seed": self.master_seed, "reps": self.reps,
                "bias": None if self.bias is None else self.bias.to_dict()}


@dataclass
class LatticeSample:
    """Field values on a window plus provenance."""

    window: SamplingWindow
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def flat(self):
        return self.values.reshape(-1)

    def to_csv(self, path=None, header_lines=()):
        """CSV with columns ``coords..., value`` and LF line endings."""
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        m = self.window.m
        w.writerow([f"x{k}" for k in range(m)] + ["value"])
        for p, v in zip(self.window.points.tolist(), self.flat.tolist()):
            w.writerow(p + [repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


# -- kernel geometry helpers -----------------------------------------------

def _check_kernel(kernel):
    if isinstance(kernel, GeometricMAKernel) or getattr(kernel, "discrete", False):
        raise UnsupportedShape("discrete kernels are simulated by simulate_geometric_ma")
    if not isinstance(kernel, (ConeKernel, ExpBoundedKernel, TabulatedKernel)) and \
            not hasattr(kernel, "evaluate"):
        raise UnsupportedShape("kernel cannot be simulated")


def _support_box(kernel, T):
    """Bounds ``(lo, hi)`` of lags ``t - s`` kept by the truncation."""
    if isinstance(kernel, ConeKernel):
        lo = np.concatenate([[0.0], np.full(kernel.m, -kernel.c * T)])
        hi = np.concatenate([[T], np.full(kernel.m, kernel.c * T)])
    elif isinstance(kernel, TabulatedKernel):
        lo = np.array([a[0] for a in kernel.axes])
        hi = np.array([a[-1] for a in kernel.axes])
    else:
        lo = np.full(kernel.dim, -T)
        hi = np.full(kernel.dim, T)
    return lo, hi


def _keep(kernel, lag, T):
    if isinstance(kernel, ConeKernel):
        return lag[..., 0] <= T
    if isinstance(kernel, TabulatedKernel):
        return np.ones(lag.shape[:-1], dtype=bool)
    return np.max(np.abs(lag), axis=-1) <= T


def _point_box(kernel, window, T):
    wlo, whi = window.bounds()
    klo, khi = _support_box(kernel, T)
    # s = t - lag
    return wlo - khi, whi - klo


def _trunc_integral(kernel, power, T, eng, absolute=True):
    """``E int_{kept} f^power``."""
    if isinstance(kernel, ConeKernel):
        return cone_power_integral(kernel, power, ConeDomain(kernel.c, kernel.m, 0.0, T),
                                   eng, absolute).value
    full = kernel_power_integral(kernel, power, eng, absolute).value
    if isinstance(kernel, TabulatedKernel):
        return full
    return full - box_power_integral(kernel, power, 2.0 * T, eng, absolute).value


def _tail_integral(kernel, power, T, eng, absolute=True):
    """``E int_{dropped} f^power``."""
    if isinstance(kernel, ConeKernel):
        return cone_power_integral(kernel, power, ConeDomain(kernel.c, kernel.m, T),
                                   eng, absolute).value
    if isinstance(kernel, TabulatedKernel):
        return 0.0
    return box_power_integral(kernel, power, 2.0 * T, eng, absolute).value


def _gauss_variance(quad):
    nu = quad.nu
    v = quad.sigma
    if nu.gaussian_compensation:
        v += nu.small_jump_moment(2.0)
    return float(v)


def _cells(box_lo, box_hi, step):
    counts = np.maximum(np.ceil((box_hi - box_lo) / step - 1e-12).astype(int), 1)
    axes = [box_lo[k] + step * (np.arange(counts[k]) + 0.5) for k in range(box_lo.size)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box_lo.size)
    return grid


def _discretization_bias(kernel, window, T, step, gvar, eng):
    """``sqrt(gvar |sum_cells step^d E f^2 - int f^2|)`` at the central lattice point."""
    if gvar == 0:
        return 0.0
    return math.sqrt(gvar * _midpoint_error(kernel, window, T, step, 2.0, eng))


def _midpoint_error(kernel, window, T, step, power, eng):
    """``|sum_cells step^d E f^power - int_trunc f^power|`` at the central lattice point."""
    pts = window.points
    t = pts[len(pts) // 2].astype(float)
    lo, hi = _point_box(kernel, window, T)
    cells = _cells(lo, hi, step)
    lag = t - cells
    keep = _keep(kernel, lag, T)
    lag = lag[keep]
    mix = kernel.mixing_or_unit()
    lam, wl = mix.nodes(eng, 0)
    acc = 0.0
    for a, w in zip(lam, wl):
        acc += w * float(np.sum(np.asarray(kernel.evaluate(a, lag), dtype=float) ** power))
    disc = acc * step ** kernel.dim
    exact = _trunc_integral(kernel, power, T, eng, absolute=False)
    return abs(disc - exact)


def _plan_bias(kernel, quad, window, T, step, eng, vol_factor=1.0):
    sig = quad.sigma_lambda
    tail = math.sqrt(max(sig * vol_factor * _tail_integral(kernel, 2.0, T, eng), 0.0))
    nu = quad.nu
    small = 0.0
    if nu.kind != "finite-activity" and not nu.gaussian_compensation:
        small = math.sqrt(nu.small_jump_moment(2.0) * vol_factor
                          * kernel_power_integral(kernel, 2.0, eng).value)
    disc = _discretization_bias(kernel, window, T, step, _gauss_variance(quad) * vol_factor, eng)
    return BiasReport(tail, small, disc)


def make_plan(kernel, quad, window, eps_bias=1e-3, T=None, grid_step=0.5, master_seed=0,
              reps=1, engine=None, T_max=1e4):
    """Build a plan whose total bias bound is below ``eps_bias``.

    With ``T=None`` the truncation radius is doubled from 1 until the kernel
    tail bound falls below ``eps_bias / 2``.

    Raises
    ------
    PlanBiasTooLarge
        When the bias bound exceeds ``eps_bias``.
    """
    if isinstance(kernel, AmbitModel):
        return _make_ambit_plan(kernel, window, eps_bias, T, grid_step, master_seed, reps,
                                engine, T_max)
    _check_kernel(kernel)
    eng = engine if engine is not None else _ENGINE
    _check_mean(quad)
    if T is None:
        T = 1.0
        sig = quad.sigma_lambda
        while math.sqrt(sig * _tail_integral(kernel, 2.0, T, eng)) > eps_bias / 2:
            T *= 2.0
            if T > T_max:
                raise PlanBiasTooLarge(f"kernel tail above {eps_bias / 2:g} at T = {T_max:g}")
    bias = _plan_bias(kernel, quad, window, T, grid_step, eng)
    if bias.total > eps_bias:
        raise PlanBiasTooLarge(
            f"bias bound {bias.total:.3g} exceeds eps {eps_bias:.3g} ({bias.to_dict()})")
    return SimPlan(window, float(T), float(grid_step), int(master_seed), int(reps), bias,
                   float(eps_bias))


def _make_ambit_plan(ambit, window, eps_bias, T, grid_step, master_seed, reps, engine, T_max):
    eng = engine if engine is not None else _ENGINE
    q = ambit.quad
    _check_mean(q)
    vol = ambit.volatility
    e2 = _vol_second(vol, eng)
    l = ambit.l

    def bias_at(TT):
        b = _plan_bias(l, q, window, TT, grid_step, eng, vol_factor=e2)
        if isinstance(vol, MMAFVolatility):
            vq = vol.quad
            jt = math.sqrt(max(vq.sigma_lambda * _tail_integral(vol.j, 2.0, TT, eng), 0.0))
            lnorm = math.sqrt(q.sigma_lambda * kernel_power_integral(l, 2.0, eng).value)
            b = BiasReport(b.kernel_tail + lnorm * jt, b.small_jump, b.gaussian_discretization)
        coef = q.mu_lambda - q.nu.represented_mean("all")
        if coef != 0 and not isinstance(vol, ConstantVolatility):
            e1 = vol.mean(eng) if isinstance(vol, MMAFVolatility) else vol.mean()
            drift = float(abs(coef * e1) * _midpoint_error(l, window, TT, grid_step, 1.0, eng))
            b = BiasReport(b.kernel_tail, b.small_jump, b.gaussian_discretization, drift)
        return b

    if T is None:
        T = 1.0
        while bias_at(T).kernel_tail > eps_bias / 2:
            T *= 2.0
            if T > T_max:
                raise PlanBiasTooLarge(f"kernel tail above {eps_bias / 2:g} at T = {T_max:g}")
    bias = bias_at(T)
    if bias.total > eps_bias:
        raise PlanBiasTooLarge(
            f"bias bound {bias.total:.3g} exceeds eps {eps_bias:.3g} ({bias.to_dict()})")
    return SimPlan(window, float(T), float(grid_step), int(master_seed), int(reps), bias,
                   float(eps_bias))


def _vol_second(vol, eng):
    if isinstance(vol, MMAFVolatility):
        return vol.second_moment(eng)
    return vol.second_moment()


def _check_mean(quad):
    if not math.isfinite(quad.mu_lambda):
        raise MomentUnavailable("int_{|x|>1} |x| nu(dx) is infinite; the field has no mean")


# -- basis realization -----------------------------------------------------

@dataclass
class _Basis:
    """Weighted points ``(s_i, A_i, w_i)`` approximating the random part."""

    s: np.ndarray
    A: np.ndarray
    w: np.ndarray


def _realize_basis(kernel, quad, box_lo, box_hi, step, rng):
    """Jumps then Gaussian cells, drawn in a fixed order from ``rng``."""
    vol = float(np.prod(box_hi - box_lo))
    if not vol > 0:
        raise DegenerateDomain("empty simulation box")
    dim = box_lo.size
    mix = kernel.mixing_or_unit()
    nu = quad.nu
    parts_s, parts_A, parts_w = [], [], []
    if not nu.is_zero:
        n = int(rng.poisson(nu.intensity * vol))
        s = box_lo + (box_hi - box_lo) * rng.random((n, dim))
        A = np.asarray(mix.sample(rng, n), dtype=float).reshape(n)
        x = np.asarray(nu.jump_law.sample(rng, n), dtype=float).reshape(n)
        parts_s.append(s)
        parts_A.append(A)
        parts_w.append(x)
    gvar = _gauss_variance(quad)
    if gvar > 0:
        cells = _cells(box_lo, box_hi, step)
        n = cells.shape[0]
        A = np.asarray(mix.sample(rng, n), dtype=float).reshape(n)
        z = rng.standard_normal(n) * math.sqrt(gvar * step ** dim)
        parts_s.append(cells)
        parts_A.append(A)
        parts_w.append(z)
    if not parts_s:
        return _Basis(np.zeros((0, dim)), np.zeros(0), np.zeros(0))
    return _Basis(np.concatenate(parts_s), np.concatenate(parts_A), np.concatenate(parts_w))


def _cone_pairs(kernel, s, targets, T):
    """Index pairs ``(i, j)`` with ``t_j - s_i`` in the truncated cone."""
    u = targets[None, :, 0] - s[:, None, 0]
    ok = (u >= 0) & (u <= T)
    if kernel.m:
        d2 = np.zeros(u.shape)
        for k in range(1, s.shape[1]):
            d2 += (targets[None, :, k] - s[:, None, k]) ** 2
        ok &= d2 <= kernel.c ** 2 * u * u
    return np.nonzero(ok)


def _apply(kernel, basis, targets, T, weights=None):
    """``sum_i f(A_i, t - s_i) w_i`` for each target ``t``.

    Only pairs inside the truncated support are evaluated; accumulation is
    sequential in point order, so results do not depend on threading.
    """
    w = basis.w if weights is None else weights
    out = np.zeros(targets.shape[0])
    npts = basis.s.shape[0]
    if npts == 0:
        return out
    per = max(1, CHUNK // max(targets.shape[0], 1))
    for start in range(0, npts, per):
        sl = slice(start, start + per)
        s = basis.s[sl]
        if isinstance(kernel, ConeKernel):
            i, j = _cone_pairs(kernel, s, targets, T)
        else:
            lag = targets[None, :, :] - s[:, None, :]
            i, j = np.nonzero(_keep(kernel, lag, T))
        if i.size == 0:
            continue
        lag = targets[j] - s[i]
        f = np.asarray(kernel.evaluate(basis.A[sl][i], lag), dtype=float)
        out += np.bincount(j, weights=f * w[sl][i], minlength=targets.shape[0])
    return out


@lru_cache(maxsize=64)
def _drift_constants(kernel, quad, T, eng):
    """Coefficients ``(mu_Lambda int f, rep_mean int_trunc f)``, memoized per model."""
    mu = quad.mu_lambda
    rep = quad.nu.represented_mean("all")
    full = kernel_power_integral(kernel, 1.0, eng, absolute=False).value if mu != 0 else 0.0
    trunc = _trunc_integral(kernel, 1.0, T, eng, absolute=False) if rep != 0 else 0.0
    return mu * full, rep * trunc


def _provenance(plan, rep_index, kernel, quad, **extra):
    return {"master_seed": plan.master_seed, "rep": int(rep_index), "T": plan.T,
            "grid_step": plan.grid_step, "model_hash": model_hash(kernel, quad), **extra}


def simulate_mmaf(kernel, quad, plan, rep_index=0, engine=None):
    """Simulate ``X_t = int f(A, t - s) Lambda(dA, ds)`` on ``plan.window``.

    Parameters
    ----------
    kernel : ConeKernel, ExpBoundedKernel or TabulatedKernel
    quad : CharacteristicQuadruplet
    plan : SimPlan
    rep_index : int

    Returns
    -------
    LatticeSample
        Deterministic in ``(plan, rep_index)``.
    """
    _check_kernel(kernel)
    _check_mean(quad)
    eng = engine if engine is not None else _ENGINE
    vals = _mmaf_values(kernel, quad, plan, rep_index, eng)
    return LatticeSample(plan.window, vals.reshape(plan.window.shape),
                         _provenance(plan, rep_index, kernel, quad))


def _mmaf_values(kernel, quad, plan, rep_index, eng):
    window = plan.window
    targets = window.points.astype(float)
    lo, hi = _point_box(kernel, window, plan.T)
    rng = stream(plan.master_seed, rep_index, BASIS)
    basis = _realize_basis(kernel, quad, lo, hi, plan.grid_step, rng)
    full_c, trunc_c = _drift_constants(kernel, quad, plan.T, eng)
    return _apply(kernel, basis, targets, plan.T) + (full_c - trunc_c)


class _FieldSigma:
    """Volatility realized on demand at arbitrary points from its own stream."""

    def __init__(self, vol, plan, rep_index, eng):
        self.vol = vol
        self.plan = plan
        self.rep = rep_index
        self.eng = eng
        self.mean = vol.mean(eng) if isinstance(vol, MMAFVolatility) else vol.mean()

    def realize(self, pts):
        rng = stream(self.plan.master_seed, self.rep, VOLATILITY)
        if isinstance(self.vol, PDependentVolatility):
            return np.asarray(self.vol.sampler(rng, pts), dtype=float)
        j, vq, T = self.vol.j, self.vol.quad, self.plan.T
        if pts.shape[0] == 0:
            return np.zeros(0)
        klo, khi = _support_box(j, T)
        lo, hi = pts.min(axis=0) - khi, pts.max(axis=0) - klo
        basis = _realize_basis(j, vq, lo, hi, self.plan.grid_step, rng)
        full_c, trunc_c = _drift_constants(j, vq, T, self.eng)
        return _apply(j, basis, pts, T) + (full_c - trunc_c)


def _ambit_values(ambit, plan, rep_index, eng):
    l, q, vol = ambit.l, ambit.quad, ambit.volatility
    window = plan.window
    targets = window.points.astype(float)
    lo, hi = _point_box(l, window, plan.T)
    rng = stream(plan.master_seed, rep_index, BASIS)
    basis = _realize_basis(l, q, lo, hi, plan.grid_step, rng)
    full_c, trunc_c = _drift_constants(l, q, plan.T, eng)
    if isinstance(vol, ConstantVolatility):
        vals = _apply(l, basis, targets, plan.T) + (full_c - trunc_c)
        return vals if vol.value == 1.0 else vol.value * vals
    mu = q.mu_lambda
    rep_mean = q.nu.represented_mean("all")
    coef = mu - rep_mean
    # drift cells are only needed when the compensator does not cancel the mean
    cells = _cells(lo, hi, plan.grid_step) if coef != 0 else np.zeros((0, lo.size))
    allpts = np.concatenate([basis.s, cells])
    field = _FieldSigma(vol, plan, rep_index, eng)
    sig = field.realize(allpts)
    nb = basis.s.shape[0]
    rand = _apply(l, basis, targets, plan.T, basis.w * sig[:nb])
    drift = np.zeros(targets.shape[0])
    if coef != 0:
        cb = _Basis(cells, l.mixing_or_unit().sample(rng, cells.shape[0]),
                    sig[nb:] * plan.grid_step ** l.dim)
        drift += coef * _apply(l, cb, targets, plan.T)
    if mu != 0:
        beyond = _tail_integral(l, 1.0, plan.T, eng, absolute=False)
        drift += mu * field.mean * beyond
    return rand + drift


def simulate_ambit(ambit, plan, rep_index=0, engine=None):
    """Simulate ``Y_t = int l(t - s) sigma_s Lambda(ds)`` on ``plan.window``.

    The volatility is realized from its own stream branch, independent of
    the driving basis, on the jump points and cells that the assembly needs.
    With ``sigma == 1`` the output equals :func:`simulate_mmaf` on ``l``.
    The drift term ``(mu_Lambda - int_rep x nu) int_trunc l sigma`` uses the
    midpoint rule on cells of side ``grid_step`` with mixing values drawn
    per cell; beyond the truncation the volatility is replaced by its mean.
    """
    if not isinstance(ambit, AmbitModel):
        raise ValidationError("simulate_ambit needs an AmbitModel")
    _check_mean(ambit.quad)
    eng = engine if engine is not None else _ENGINE
    vals = _ambit_values(ambit, plan, rep_index, eng)
    return LatticeSample(plan.window, vals.reshape(plan.window.shape),
                         _provenance(plan, rep_index, ambit.l, ambit.quad,
                                     volatility=ambit.volatility.describe()))


def simulate_geometric_ma(n, rep_index=0, seed=0, ratio=0.5, terms=64, noise_p=0.5):
    """``X_t = sum_{j<terms} (1 - r) r^j xi_{t-j}`` with ``xi ~ Bernoulli(noise_p)``.

    With ``r = 1/2`` and 64 terms the omitted tail is below ``2^{-64}``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = stream(seed, rep_index, BASIS)
    xi = (rng.random(n + terms - 1) < noise_p).astype(float)
    a = (1 - ratio) * ratio ** np.arange(terms)
    return _fir(xi, a)


def _fir(xi, a):
    # X_t = sum_j a_j xi_{t-j}: valid part of the full convolution
    return np.convolve(xi, a, mode="valid")


def simulate_replications(fn, plan, threads=1):
    """Run ``fn(rep_index)`` for every replication of ``plan``.

    Results are returned in replication order; thread count affects speed
    only.
    """
    idx = range(plan.reps if hasattr(plan, "reps") else int(plan))
    if threads <= 1:
        return [fn(i) for i in idx]
    with ThreadPoolExecutor(max_workers=int(threads)) as ex:
        return list(ex.map(fn, idx))
