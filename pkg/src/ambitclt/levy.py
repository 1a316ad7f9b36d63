"""Levy bases described by their characteristic quadruplet.

All bases are real valued.  A Levy measure is stored as a total intensity
(per unit volume of the product of mixing law and Lebesgue measure) times a
normalized jump law; infinite-activity measures are represented by their
restriction to jumps above a cutoff ``epsilon`` together with closed-form
moments of the discarded small jumps.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special, stats

from .exceptions import RequestUnavailable, ValidationError

__all__ = [
    "JumpLaw", "PointMasses", "NormalJumps", "GammaJumps",
    "TwoSidedExponential", "ParetoJumps", "TruncatedGammaLevy",
    "LevyMeasure", "MixingLaw", "CharacteristicQuadruplet",
    "MomentFunctionals", "moment_functionals", "check_moment_condition",
    "make_jump_law",
]

_REGIONS = ("all", "small", "big")


def _check_region(region):
    if region not in _REGIONS:
        raise ValueError(f"region must be one of {_REGIONS}, got {region!r}")


class JumpLaw:
    """Normalized law of jump sizes.

    Subclasses provide ``abs_moment(r, region)`` for ``E|J|^r 1_region``
    where ``region`` is ``"all"``, ``"small"`` (``|J| <= 1``) or ``"big"``
    (``|J| > 1``), and ``mean(region)`` for the signed first moment.
    Divergent moments are returned as ``math.inf``.
    """

    name = "abstract"

    def sample(self, rng, size):
        raise NotImplementedError

    def abs_moment(self, r, region="all"):
        raise NotImplementedError

    def mean(self, region="all"):
        raise NotImplementedError

    def tail_moment_finite(self, r):
        return math.isfinite(self.abs_moment(r, "big"))

    def pdf(self, x):
        """Density for continuous laws; ``None`` for atomic ones."""
        return None

    def params(self):
        return {}


class PointMasses(JumpLaw):
    """Finitely many atoms ``values`` with probabilities ``probs``."""

    name = "point-masses"

    def __init__(self, values, probs=None):
        v = np.atleast_1d(np.asarray(values, dtype=float))
        p = (np.full(v.shape, 1.0 / v.size) if probs is None
             else np.atleast_1d(np.asarray(probs, dtype=float)))
        if v.shape != p.shape or v.size == 0:
            raise ValidationError("values and probs must be non-empty and aligned")
        if np.any(v == 0):
            raise ValidationError("a jump law cannot charge 0")
        if np.any(p < 0) or not math.isclose(p.sum(), 1.0, rel_tol=1e-12):
            raise ValidationError("probs must be nonnegative and sum to 1")
        self.values, self.probs = v, p

    def _mask(self, region):
        _check_region(region)
        a = np.abs(self.values)
        if region == "small":
            return a <= 1.0
        if region == "big":
            return a > 1.0
        return np.ones_like(a, dtype=bool)

    def sample(self, rng, size):
        return rng.choice(self.values, size=size, p=self.probs)

    def abs_moment(self, r, region="all"):
        m = self._mask(region)
        return float(np.sum(self.probs[m] * np.abs(self.values[m]) ** r))

    def mean(self, region="all"):
        m = self._mask(region)
        return float(np.sum(self.probs[m] * self.values[m]))

    def params(self):
        return {"values": self.values.tolist(), "probs": self.probs.tolist()}


class _ContinuousLaw(JumpLaw):
    """Continuous law with a scipy frozen distribution for sampling."""

    def _dist(self):
        raise NotImplementedError

    def sample(self, rng, size):
        return self._dist().rvs(size=size, random_state=rng)

    def pdf(self, x):
        return self._dist().pdf(x)


class NormalJumps(_ContinuousLaw):
    """Normal jump sizes ``N(mean, std**2)``."""

    name = "normal"

    def __init__(self, mean=0.0, std=1.0):
        if std <= 0:
            raise ValidationError("std must be positive")
        self.mu, self.std = float(mean), float(std)

    def _dist(self):
        return stats.norm(self.mu, self.std)

    def abs_moment(self, r, region="all"):
        _check_region(region)
        if region == "all":
            # E|X|^r for X ~ N(mu, s^2) via Kummer's function.
            s, mu = self.std, self.mu
            return float(s ** r * 2 ** (r / 2) * special.gamma((r + 1) / 2)
                         / math.sqrt(math.pi)
                         * special.hyp1f1(-r / 2, 0.5, -mu ** 2 / (2 * s ** 2)))
        small = _quad_moment(self.pdf, r, -1.0, 1.0, absolute=True)
        return small if region == "small" else max(self.abs_moment(r) - small, 0.0)

    def mean(self, region="all"):
        _check_region(region)
        if region == "all":
            return self.mu
        # E[X 1{|X|<=1}] = mu P(|X|<=1) + s^2 (phi(-1) - phi(1)).
        d = self._dist()
        small = (self.mu * (d.cdf(1.0) - d.cdf(-1.0))
                 + self.std ** 2 * (d.pdf(-1.0) - d.pdf(1.0)))
        return float(small if region == "small" else self.mu - small)

    def params(self):
        return {"mean": self.mu, "std": self.std}


class GammaJumps(_ContinuousLaw):
    """Positive Gamma(shape, scale) jumps, optionally negated by ``sign``."""

    name = "gamma"

    def __init__(self, shape=1.0, scale=1.0, sign=1):
        if shape <= 0 or scale <= 0:
            raise ValidationError("shape and scale must be positive")
        if sign not in (1, -1):
            raise ValidationError("sign must be +1 or -1")
        self.shape, self.scale, self.sign = float(shape), float(scale), int(sign)

    def _dist(self):
        return stats.gamma(self.shape, scale=self.scale)

    def sample(self, rng, size):
        return self.sign * rng.gamma(self.shape, self.scale, size=size)

    def pdf(self, x):
        return self._dist().pdf(self.sign * np.asarray(x, dtype=float))

    def abs_moment(self, r, region="all"):
        _check_region(region)
        k, th = self.shape, self.scale
        full = math.exp(r * math.log(th) + special.gammaln(k + r) - special.gammaln(k))
        if region == "all":
            return full
        small = full * special.gammainc(k + r, 1.0 / th)
        return float(small if region == "small" else full * special.gammaincc(k + r, 1.0 / th))

    def mean(self, region="all"):
        return self.sign * self.abs_moment(1.0, region)

    def params(self):
        return {"shape": self.shape, "scale": self.scale, "sign": self.sign}


class TwoSidedExponential(_ContinuousLaw):
    """Asymmetric Laplace law: up-jumps Exp(rate_up) with probability p_up,
    down-jumps -Exp(rate_down) otherwise."""

    name = "two-sided-exponential"

    def __init__(self, p_up=0.5, rate_up=1.0, rate_down=1.0):
        if not 0 <= p_up <= 1:
            raise ValidationError("p_up must lie in [0, 1]")
        if rate_up <= 0 or rate_down <= 0:
            raise ValidationError("rates must be positive")
        self.p_up, self.rate_up, self.rate_down = float(p_up), float(rate_up), float(rate_down)

    def sample(self, rng, size):
        up = rng.random(size) < self.p_up
        e = rng.standard_exponential(size)
        return np.where(up, e / self.rate_up, -e / self.rate_down)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        pos = self.p_up * self.rate_up * np.exp(-self.rate_up * np.abs(x))
        neg = (1 - self.p_up) * self.rate_down * np.exp(-self.rate_down * np.abs(x))
        return np.where(x > 0, pos, np.where(x < 0, neg, 0.0))

    def _side(self, r, rate, region):
        full = special.gamma(r + 1) / rate ** r
        if region == "all":
            return full
        if region == "small":
            return full * special.gammainc(r + 1, rate)
        return full * special.gammaincc(r + 1, rate)

    def abs_moment(self, r, region="all"):
        _check_region(region)
        return float(self.p_up * self._side(r, self.rate_up, region)
                     + (1 - self.p_up) * self._side(r, self.rate_down, region))

    def mean(self, region="all"):
        _check_region(region)
        return float(self.p_up * self._side(1.0, self.rate_up, region)
                     - (1 - self.p_up) * self._side(1.0, self.rate_down, region))

    def params(self):
        return {"p_up": self.p_up, "rate_up": self.rate_up, "rate_down": self.rate_down}


class ParetoJumps(_ContinuousLaw):
    """Pareto jumps with tail index ``a`` and scale ``x_m``; optionally symmetric."""

    name = "pareto"

    def __init__(self, tail_index, scale=1.0, symmetric=False):
        if tail_index <= 0 or scale <= 0:
            raise ValidationError("tail_index and scale must be positive")
        self.a, self.xm, self.symmetric = float(tail_index), float(scale), bool(symmetric)

    def sample(self, rng, size):
        x = self.xm * (1.0 - rng.random(size)) ** (-1.0 / self.a)
        if self.symmetric:
            x = np.where(rng.random(size) < 0.5, x, -x)
        return x

    def pdf(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            d = np.where(ax >= self.xm, self.a * self.xm ** self.a / ax ** (self.a + 1), 0.0)
        if self.symmetric:
            return 0.5 * d
        return np.where(np.asarray(x) > 0, d, 0.0)

    def abs_moment(self, r, region="all"):
        _check_region(region)
        a, xm = self.a, self.xm
        lo_big = max(1.0, xm)
        small = 0.0
        if xm < 1.0:
            if math.isclose(r, a):
                small = a * xm ** a * math.log(1.0 / xm)
            else:
                small = a * xm ** a * (1.0 - xm ** (r - a)) / (r - a)
        big = math.inf if r >= a else a * xm ** a * lo_big ** (r - a) / (a - r)
        if region == "small":
            return float(small)
        if region == "big":
            return float(big)
        return float(small + big)

    def mean(self, region="all"):
        m = self.abs_moment(1.0, region)
        if self.symmetric:
            return 0.0 if math.isfinite(m) else math.nan
        return m

    def params(self):
        return {"tail_index": self.a, "scale": self.xm, "symmetric": self.symmetric}


class TruncatedGammaLevy(_ContinuousLaw):
    """Normalized jumps above ``epsilon`` of the Gamma Levy density
    ``a x^{-1} exp(-b x)`` on ``x > 0``."""

    name = "gamma-levy"

    def __init__(self, a=1.0, b=1.0, epsilon=1e-2):
        if a <= 0 or b <= 0 or epsilon <= 0:
            raise ValidationError("a, b and epsilon must be positive")
        self.a, self.b, self.eps = float(a), float(b), float(epsilon)
        self.mass = self.a * special.exp1(self.b * self.eps)

    def sample(self, rng, size):
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            n = max(16, int(need * 1.2 / self._accept_rate()) + 1)
            x = self.eps + rng.standard_exponential(n) / self.b
            keep = x[rng.random(n) * x <= self.eps]
            take = min(need, keep.size)
            out[filled:filled + take] = keep[:take]
            filled += take
        return out

    def _accept_rate(self):
        be = self.b * self.eps
        return max(be * math.exp(be) * special.exp1(be), 1e-6)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d = self.a * np.exp(-self.b * x) / x / self.mass
        return np.where(x > self.eps, d, 0.0)

    def _upper(self, r, lo):
        # a int_lo^inf x^{r-1} e^{-bx} dx
        if r == 0:
            return self.a * special.exp1(self.b * lo)
        return self.a * self.b ** (-r) * special.gamma(r) * special.gammaincc(r, self.b * lo)

    def abs_moment(self, r, region="all"):
        _check_region(region)
        full = self._upper(r, self.eps)
        if region == "all":
            return float(full / self.mass)
        big = self._upper(r, max(1.0, self.eps))
        if region == "big":
            return float(big / self.mass)
        return float((full - big) / self.mass)

    def mean(self, region="all"):
        return self.abs_moment(1.0, region)

    def small_jump_moment(self, r, region="all"):
        """``int_{0<x<=eps} x^r nu(dx)``; restricted to ``|x|<=1`` or ``>1``."""
        _check_region(region)
        hi = min(self.eps, 1.0) if region == "small" else self.eps
        if region == "big":
            return 0.0 if self.eps <= 1.0 else float(
                self.a * self.b ** (-r) * special.gamma(r)
                * (special.gammainc(r, self.b * self.eps) - special.gammainc(r, self.b)))
        return float(self.a * self.b ** (-r) * special.gamma(r) * special.gammainc(r, self.b * hi))

    def params(self):
        return {"a": self.a, "b": self.b, "epsilon": self.eps}


def _quad_moment(pdf, r, lo, hi, absolute=True):
    from scipy.integrate import quad

    def g(x):
        v = abs(x) ** r if absolute else x * abs(x) ** (r - 1)
        return v * float(pdf(x))

    pts = [0.0] if lo < 0 < hi else None
    val, _ = quad(g, lo, hi, points=pts, limit=200, epsabs=0, epsrel=1e-12)
    return float(val)


_LAW_REGISTRY = {
    "point-masses": PointMasses,
    "normal": NormalJumps,
    "gamma": GammaJumps,
    "two-sided-exponential": TwoSidedExponential,
    "pareto": ParetoJumps,
}


def make_jump_law(name, params=None):
    """Build a jump law from its registry name and parameters."""
    params = dict(params or {})
    if name == "laplace":
        rate = 1.0 / params.pop("scale", 1.0)
        if params:
            raise ValidationError(f"unknown laplace parameters {sorted(params)}")
        return TwoSidedExponential(0.5, rate, rate)
    if name == "gamma-levy":
        return TruncatedGammaLevy(**params)
    try:
        cls = _LAW_REGISTRY[name]
    except KeyError:
        raise ValidationError(f"unknown jump law {name!r}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for jump law {name!r}: {exc}") from None


@dataclass(frozen=True)
class LevyMeasure:
    """Levy measure ``nu = intensity * jump_law`` plus discarded small jumps.

    Parameters
    ----------
    jump_law : JumpLaw or None
        Normalized jump-size law; ``None`` means ``nu = 0``.
    intensity : float
        Rate of represented jumps per unit volume of ``pi x Lebesgue``.
    gaussian_compensation : bool
        For truncated infinite-activity measures, simulate the discarded
        small jumps by a Gaussian with matching variance.
    """

    jump_law: JumpLaw = None
    intensity: float = 0.0
    gaussian_compensation: bool = False

    def __post_init__(self):
        if self.intensity < 0 or not math.isfinite(self.intensity):
            raise ValidationError("intensity must be finite and nonnegative")
        if self.jump_law is None and self.intensity != 0:
            raise ValidationError("nonzero intensity requires a jump law")

    @classmethod
    def zero(cls):
        return cls(None, 0.0)

    @classmethod
    def gamma_process(cls, a, b, epsilon, gaussian_compensation=False):
        """Gamma-process Levy density ``a x^{-1} e^{-bx}`` truncated at ``epsilon``."""
        law = TruncatedGammaLevy(a, b, epsilon)
        return cls(law, law.mass, gaussian_compensation)

    @property
    def kind(self):
        if isinstance(self.jump_law, TruncatedGammaLevy):
            return "truncated-infinite-activity"
        return "finite-activity"

    @property
    def truncation_epsilon(self):
        return self.jump_law.eps if self.kind != "finite-activity" else 0.0

    @property
    def is_zero(self):
        return self.jump_law is None or self.intensity == 0

    def small_jump_moment(self, r, region="all"):
        """Moment of the jumps discarded by the truncation."""
        if self.kind == "finite-activity":
            return 0.0
        return self.jump_law.small_jump_moment(r, region)

    def abs_moment(self, r, region="all"):
        """``int |x|^r nu(dx)`` over ``region`` for the full (untruncated) measure."""
        if self.is_zero:
            return 0.0
        rep = self.intensity * self.jump_law.abs_moment(r, region)
        return float(rep + self.small_jump_moment(r, region))

    def signed_mean(self, region="all"):
        """``int x nu(dx)`` over ``region``."""
        if self.is_zero:
            return 0.0
        rep = self.intensity * self.jump_law.mean(region)
        return float(rep + self.small_jump_moment(1.0, region))

    def represented_abs_moment(self, r, region="all"):
        """Moment of the simulated (truncated) part only."""
        if self.is_zero:
            return 0.0
        return float(self.intensity * self.jump_law.abs_moment(r, region))

    def represented_mean(self, region="all"):
        if self.is_zero:
            return 0.0
        return float(self.intensity * self.jump_law.mean(region))

    def truncation_activity(self):
        """``int (1 ^ x^2) nu(dx)``; finite for every supported law."""
        return self.abs_moment(2.0, "small") + (
            0.0 if self.is_zero else self.intensity * _big_mass(self))

    def describe(self):
        if self.is_zero:
            return {"name": "none"}
        return {"name": self.jump_law.name, "params": self.jump_law.params(),
                "intensity": self.intensity}


def _big_mass(nu):
    return nu.jump_law.abs_moment(0.0, "big")


class MixingLaw:
    """Law ``pi`` of the mixing parameter ``lambda > 0``.

    Parameters
    ----------
    kind : {"degenerate", "discrete", "gamma"}
    params : dict
        ``{"value": l0}``; ``{"values": [...], "probs": [...]}``;
        ``{"alpha": a, "beta": b}`` (shape and rate).
    """

    def __init__(self, kind, **params):
        self.kind = kind
        if kind == "degenerate":
            v = float(params.pop("value", params.pop("lambda0", 1.0)))
            if v <= 0:
                raise ValidationError("degenerate value must be positive")
            self.values, self.probs = np.array([v]), np.array([1.0])
        elif kind == "discrete":
            self.values = np.asarray(params.pop("values"), dtype=float)
            self.probs = np.asarray(params.pop("probs"), dtype=float)
            if (self.values.shape != self.probs.shape or np.any(self.values <= 0)
                    or np.any(self.probs < 0)
                    or not math.isclose(self.probs.sum(), 1.0, rel_tol=1e-12)):
                raise ValidationError("discrete mixing needs positive values and probs summing to 1")
        elif kind == "gamma":
            self.alpha = float(params.pop("alpha"))
            self.beta = float(params.pop("beta"))
            if self.alpha <= 0 or self.beta <= 0:
                raise ValidationError("Gamma mixing needs alpha > 0 and beta > 0")
        else:
            raise ValidationError(f"unknown mixing kind {kind!r}")
        if params:
            raise ValidationError(f"unknown mixing parameters {sorted(params)}")

    @classmethod
    def degenerate(cls, value=1.0):
        return cls("degenerate", value=value)

    @classmethod
    def gamma(cls, alpha, beta):
        return cls("gamma", alpha=alpha, beta=beta)

    @classmethod
    def discrete(cls, values, probs):
        return cls("discrete", values=values, probs=probs)

    def params(self):
        if self.kind == "gamma":
            return {"alpha": self.alpha, "beta": self.beta}
        if self.kind == "degenerate":
            return {"value": float(self.values[0])}
        return {"values": self.values.tolist(), "probs": self.probs.tolist()}

    def __repr__(self):
        return f"MixingLaw({self.kind!r}, {self.params()})"

    def sample(self, rng, size):
        if self.kind == "gamma":
            return rng.gamma(self.alpha, 1.0 / self.beta, size=size)
        if self.kind == "degenerate":
            return np.full(size, self.values[0])
        return rng.choice(self.values, size=size, p=self.probs)

    def inverse_moment(self, p):
        """``E[lambda^{-p}]``; ``inf`` when it diverges."""
        return self.laplace_inverse(p, 0.0)

    def laplace_inverse(self, p, a):
        """``E[lambda^{-p} exp(-a lambda)]`` for ``a >= 0`` (vectorized in ``a``)."""
        a = np.asarray(a, dtype=float)
        if self.kind == "gamma":
            al, be = self.alpha, self.beta
            if al - p <= 0:
                return np.full(a.shape, math.inf)[()] if a.ndim else math.inf
            logv = (al * math.log(be) + special.gammaln(al - p) - special.gammaln(al)
                    - (al - p) * np.log(be + a))
            return np.exp(logv)[()]
        lam = self.values
        return np.sum(self.probs * lam ** (-p) * np.exp(-np.multiply.outer(a, lam)),
                      axis=-1)[()]

    def nodes(self, quad, level, inverse_power=0.0):
        """Quadrature nodes and weights for ``E_pi[g(lambda)]``.

        Atoms are returned exactly.  For Gamma mixing the density is
        integrated in log coordinates around its mean; ``inverse_power``
        widens the lower window for integrands growing like
        ``lambda^{-inverse_power}`` near zero.
        """
        if self.kind != "gamma":
            return self.values.copy(), self.probs.copy()
        al, be = self.alpha, self.beta
        center = al / be
        rate = max(al - inverse_power, 1e-3)
        y_lo = -min(max(60.0, 40.0 / rate), 3000.0)
        y_hi = math.log((al + 45.0 + 12.0 * math.sqrt(al)) / al)
        lam, w = quad.log_nodes(center, y_lo, y_hi, level)
        logpdf = stats.gamma.logpdf(lam, al, scale=1.0 / be)
        return lam, w * np.exp(logpdf)


@dataclass(frozen=True)
class MomentFunctionals:
    """Moment functionals of a Levy basis; ``inf`` marks divergence."""

    mu_lambda: float
    sigma_lambda: float
    finite_variation: bool
    gamma0: float = None
    gamma_abs: float = None
    sigma_lambda_small: float = None
    big_abs_mean: float = None


@dataclass(frozen=True)
class CharacteristicQuadruplet:
    """``(gamma, Sigma, nu, pi)`` for a real-valued Levy basis."""

    gamma: float = 0.0
    sigma: float = 0.0
    nu: LevyMeasure = field(default_factory=LevyMeasure.zero)
    pi: MixingLaw = field(default_factory=MixingLaw.degenerate)

    def __post_init__(self):
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ValidationError("sigma must be finite and nonnegative")
        if not math.isfinite(self.gamma):
            raise ValidationError("gamma must be finite")

    @cached_property
    def finite_variation(self):
        return self.sigma == 0 and math.isfinite(self.nu.abs_moment(1.0, "small"))

    @cached_property
    def mu_lambda(self):
        if self.nu.is_zero:
            return float(self.gamma)
        if not math.isfinite(self.nu.abs_moment(1.0, "big")):
            return math.inf
        return float(self.gamma + self.nu.signed_mean("big"))

    @cached_property
    def sigma_lambda(self):
        return float(self.sigma + self.nu.abs_moment(2.0))

    @cached_property
    def sigma_lambda_small(self):
        """``Sigma + int_{|x|<=1} x^2 nu(dx)``."""
        return float(self.sigma + self.nu.abs_moment(2.0, "small"))

    @property
    def gamma0(self):
        if not self.finite_variation:
            raise RequestUnavailable("gamma0 requires the finite-variation case")
        return float(self.gamma - self.nu.signed_mean("small"))

    @property
    def gamma_abs(self):
        return abs(self.gamma0) + self.nu.abs_moment(1.0)

    @property
    def centered(self):
        return self.mu_lambda == 0.0


def moment_functionals(q, request_gamma0=False):
    """Return the moment functionals of ``q``.

    ``gamma0`` and ``gamma_abs`` are filled only in the finite-variation case;
    requesting them otherwise raises ``RequestUnavailable``.
    """
    fv = q.finite_variation
    if request_gamma0 and not fv:
        raise RequestUnavailable("gamma0 requested but the basis is not of finite variation")
    g0 = q.gamma0 if fv else None
    return MomentFunctionals(
        mu_lambda=q.mu_lambda,
        sigma_lambda=q.sigma_lambda,
        finite_variation=fv,
        gamma0=g0,
        gamma_abs=(abs(g0) + q.nu.abs_moment(1.0)) if fv else None,
        sigma_lambda_small=q.sigma_lambda_small,
        big_abs_mean=q.nu.abs_moment(1.0, "big"),
    )


def check_moment_condition(q, r):
    """True iff ``int_{|x|>1} |x|^r nu(dx) < inf``."""
    if r <= 0:
        raise ValidationError("moment order must be positive")
    return math.isfinite(q.nu.abs_moment(float(r), "big"))
