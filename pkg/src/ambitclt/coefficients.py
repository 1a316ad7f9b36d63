"""Upper bounds on theta-lex and eta weak-dependence coefficients, decay
fits, hereditary and shifted-vector transforms, and CLT admissibility.
"""

import csv
import io
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy import special

from .exceptions import (CaseInapplicable, ExponentInvalid, HorizonNotReached,
                         NoPolynomialFit, ParameterOutOfRange, ShiftTooLarge,
                         UnsupportedShape, ValidationError)
from .geometry import (ball_volume, complement_cone_domain, eta_cone_domain, psi,
                       psi_inverse, truncated_cone_domain)
from .kernels import (ConeKernel, ConstantVolatility, ExpBoundedKernel,
                      MMAFVolatility, PDependentVolatility)
from .levy import check_moment_condition
from .moments import _vol_second, box_power_integral, cone_power_integral
from .quadrature import QuadratureEngine

__all__ = [
    "DecayFit", "CoefficientCurve", "coefficient_curve", "fit_decay",
    "theta_bound_mmaf", "theta_bound_mstou_gamma", "mstou_gamma_curve",
    "eta_bound_mmaf", "eta_bound_exp_envelope", "theta_bound_ambit",
    "hereditary_exponent", "hereditary_transform", "shift_set_size",
    "shifted_vector_bound", "clt_threshold", "Verdict", "clt_condition_check",
    "mstou_alpha_threshold", "mstou_decay_order",
]

CASES_MMAF = ("i", "ii", "iii", "iv")


# -- curves and decay fits -------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """Decay fit of a bound curve.

    ``order`` is the fitted log-log slope (negative for decaying curves) and
    ``rate`` its negative; for exponential fits ``rate`` is the exponential
    rate and ``order`` is ``-inf``.
    """

    kind: str
    order: float
    rate: float
    r2_poly: float
    r2_exp: float
    h_min: float
    h_max: float

    def to_dict(self):
        return {"kind": self.kind, "order": _jsonable(self.order), "rate": self.rate,
                "r2_poly": self.r2_poly, "r2_exp": self.r2_exp,
                "h_min": self.h_min, "h_max": self.h_max}


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _r2(y, yhat):
    ss = float(np.sum((y - y.mean()) ** 2))
    if ss == 0:
        return 1.0
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss


def fit_decay(h, values):
    """Least-squares decay fit on the positive part of a curve.

    Both ``log v ~ log h`` (polynomial) and ``log v ~ h`` (exponential) are
    fitted; the exponential model is selected when its R^2 is larger.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = (h > 0) & (v > 0) & np.isfinite(v)
    if ok.sum() < 3:
        raise NoPolynomialFit("need at least three positive grid points")
    h, v = h[ok], v[ok]
    lv = np.log(v)
    lh = np.log(h)
    sp, ip = np.polyfit(lh, lv, 1)
    se, ie = np.polyfit(h, lv, 1)
    r2p = _r2(lv, sp * lh + ip)
    r2e = _r2(lv, se * h + ie)
    if r2e > r2p and se < 0:
        return DecayFit("exponential", -math.inf, float(-se), r2p, r2e, float(h[0]), float(h[-1]))
    return DecayFit("polynomial", float(sp), float(-sp), r2p, r2e, float(h[0]), float(h[-1]))


@dataclass
class CoefficientCurve:
    """Bound curve ``h -> bound`` with decay metadata.

    Attributes
    ----------
    kind : {"theta-lex", "eta"}
    h, values : ndarray
    case : str
    provenance : str
        Short description of the bound evaluated.
    fn : callable, optional
        Scalar evaluator used by shift transforms.
    decay : DecayFit, optional
    theory_order : float, optional
        Known analytic decay order (log-log slope) where available.
    exact_domain : bool
        False when an outer bound of the truncated domain was used.
    note : str
    """

    kind: str
    h: np.ndarray
    values: np.ndarray
    case: str = ""
    provenance: str = ""
    fn: object = None
    decay: DecayFit = None
    theory_order: float = None
    exact_domain: bool = True
    note: str = ""
    constant: str = "1"

    def fit(self):
        self.decay = fit_decay(self.h, self.values)
        return self.decay

    def is_nonincreasing(self, rtol=1e-12):
        v = self.values
        return bool(np.all(np.diff(v) <= rtol * np.abs(v[:-1]) + 1e-300))

    def to_csv(self, path=None, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "bound", "kind", "case"])
        for h, v in zip(self.h, self.values):
            w.writerow([repr(float(h)), repr(float(v)), self.kind, self.case])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self):
        return {"kind": self.kind, "case": self.case, "provenance": self.provenance,
                "exact_domain": self.exact_domain, "constant": self.constant,
                "theory_order": self.theory_order, "note": self.note,
                "decay": None if self.decay is None else self.decay.to_dict()}


def coefficient_curve(fn, h, kind="theta-lex", case="", provenance="", fit=True, **kw):
    """Evaluate ``fn`` on a grid and wrap the result as a curve."""
    h = np.asarray(h, dtype=float)
    vals = np.array([float(fn(x)) for x in h])
    curve = CoefficientCurve(kind, h, vals, case, provenance, fn, **kw)
    if fit:
        try:
            curve.fit()
        except NoPolynomialFit:
            pass
    return curve


# -- generic mixed moving average bounds ------------------------------------

def _vectorize(h, scalar_fn):
    arr = np.asarray(h, dtype=float)
    if arr.ndim == 0:
        return float(scalar_fn(float(arr)))
    return np.array([scalar_fn(float(x)) for x in arr.ravel()]).reshape(arr.shape)


def _case_pre(quad, case):
    """Validate case preconditions and return the coefficient pieces."""
    if case not in CASES_MMAF:
        raise ValidationError(f"case must be one of {CASES_MMAF}")
    nu = quad.nu
    if case in ("i", "ii"):
        if not check_moment_condition(quad, 2.0):
            raise CaseInapplicable(f"case ({case}) needs int_{{|x|>1}} x^2 nu(dx) < inf")
        if case == "i" and quad.mu_lambda != 0:
            raise CaseInapplicable(
                "case (i) needs gamma + int_{|x|>1} x nu(dx) = 0 (centred basis)")
    if case == "iii":
        if quad.sigma != 0:
            raise CaseInapplicable("case (iii) needs Sigma = 0")
        if not math.isfinite(nu.abs_moment(1.0)):
            raise CaseInapplicable("case (iii) needs int |x| nu(dx) < inf")
    if case == "iv" and not check_moment_condition(quad, 1.0):
        raise CaseInapplicable("case (iv) needs int_{|x|>1} |x| nu(dx) < inf")


def _combine(case, quad, I2, I1s, I1a, lead):
    """Assemble a bound from domain integrals of f^2, f and |f|."""
    if case == "i":
        return lead * math.sqrt(max(quad.sigma_lambda * I2, 0.0))
    if case == "ii":
        return lead * math.sqrt(max(quad.sigma_lambda * I2 + (quad.mu_lambda * I1s) ** 2, 0.0))
    if case == "iii":
        return lead * quad.gamma_abs * I1a
    sl1 = quad.sigma_lambda_small
    return (lead * math.sqrt(max(sl1 * I2 + (quad.gamma * I1s) ** 2, 0.0))
            + lead * I1a * quad.nu.abs_moment(1.0, "big"))


def _needs(case):
    return {"i": (True, False, False), "ii": (True, True, False),
            "iii": (False, False, True), "iv": (True, True, True)}[case]


def _cone_pieces(kernel, dom, eng, case):
    n2, n1s, n1a = _needs(case)
    I2 = cone_power_integral(kernel, 2.0, dom, eng).value if n2 else 0.0
    I1s = cone_power_integral(kernel, 1.0, dom, eng, absolute=False).value if n1s else 0.0
    I1a = cone_power_integral(kernel, 1.0, dom, eng).value if n1a else 0.0
    return I2, I1s, I1a


def theta_bound_mmaf(kernel, quad, case="i", h=0.0, A0=None, engine=None):
    """theta-lex coefficient bound of an influenced mixed moving average.

    Parameters
    ----------
    kernel : ConeKernel
    quad : CharacteristicQuadruplet
    case : {"i", "ii", "iii", "iv"}
        (i) centred square-integrable; (ii) square-integrable with mean;
        (iii) finite variation; (iv) integrable big jumps.
    h : float or array_like
    A0 : SphereOfInfluence, optional
        Defaults to the kernel's cone.

    Returns
    -------
    float or ndarray
        ``2 (Sigma_Lambda int_{A_0 cap V^psi} f^2)^{1/2}`` for case (i) and
        the analogous expressions for the other cases.
    """
    A0 = A0 if A0 is not None else getattr(kernel, "cone", None)
    if A0 is None:
        raise UnsupportedShape("theta-lex bounds need a sphere of influence")
    psi(A0, 1.0)  # raises ConditionViolated early
    if not isinstance(kernel, ConeKernel):
        raise UnsupportedShape("theta-lex bounds are parameterized for cone kernels")
    _case_pre(quad, case)
    eng = engine if engine is not None else QuadratureEngine()

    def one(hh):
        dom = truncated_cone_domain(A0, psi(A0, hh))
        return _combine(case, quad, *_cone_pieces(kernel, dom, eng, case), lead=2.0)

    return _vectorize(h, one)


def eta_bound_exp_envelope(M, K, dim, sigma_lambda, h):
    """Closed-form eta bound for exponentially bounded kernels.

    ``m |Sigma^{1/2}|_F M^{1/2} / (2K)^{m/2} exp(-K h / 4)``.
    """
    h = np.asarray(h, dtype=float)
    pre = dim * math.sqrt(sigma_lambda) * math.sqrt(M) / (2.0 * K) ** (dim / 2.0)
    return (pre * np.exp(-0.25 * K * h))[()]


def eta_bound_mmaf(kernel, quad, case="i", h=0.0, engine=None, method="auto"):
    """eta coefficient bound over the cube complement ``((-h/2, h/2)^dim)^c``.

    For exponentially bounded kernels in case (i), ``method="auto"`` or
    ``"envelope"`` returns the closed-form exponential bound; ``"quadrature"``
    integrates the kernel itself.
    """
    _case_pre(quad, case)
    if isinstance(kernel, ExpBoundedKernel) and case == "i" and method in ("auto", "envelope"):
        return eta_bound_exp_envelope(kernel.M, kernel.K, kernel.dim, quad.sigma_lambda, h)
    if method == "envelope":
        raise CaseInapplicable("the envelope bound needs an exp-bounded kernel in case (i)")
    eng = engine if engine is not None else QuadratureEngine()
    n2, n1s, n1a = _needs(case)

    def one(hh):
        if isinstance(kernel, ConeKernel):
            dom = eta_cone_domain(kernel.cone, hh)
            pieces = _cone_pieces(kernel, dom, eng, case)
        elif getattr(kernel, "discrete", False):
            raise UnsupportedShape("eta bounds are defined for continuous-index kernels")
        else:
            pieces = (
                box_power_integral(kernel, 2.0, hh, eng).value if n2 else 0.0,
                box_power_integral(kernel, 1.0, hh, eng, absolute=False).value if n1s else 0.0,
                box_power_integral(kernel, 1.0, hh, eng).value if n1a else 0.0)
        return _combine(case, quad, *pieces, lead=1.0)

    return _vectorize(h, one)


# -- MSTOU with Gamma mixing -----------------------------------------------

def mstou_decay_order(alpha, m, case="L2"):
    """Log-log slope of the Gamma-MSTOU bound: ((m+1)-alpha)/2 or (m+1)-alpha."""
    if case == "L2":
        return ((m + 1) - alpha) / 2.0
    if case == "FV":
        return float((m + 1) - alpha)
    raise ValidationError("case must be 'L2' or 'FV'")


def theta_bound_mstou_gamma(alpha, beta, c, m, scale=1.0, case="L2", h=0.0):
    """Closed-form theta-lex bound for a c-class MSTOU with Gamma mixing.

    Parameters
    ----------
    alpha, beta : float
        Gamma shape and rate of the mean-reversion parameter.
    c : float
        Cone slope.
    m : int
        Number of spatial dimensions.
    scale : float
        ``Sigma_Lambda`` for ``case="L2"`` or ``gamma_abs`` for ``case="FV"``.
    case : {"L2", "FV"}
    h : float or array_like

    Notes
    -----
    With ``p = psi(h)`` (``p / c`` when ``c > 1``), ``n = alpha - m - 1`` and
    ``G_k = Gamma(n + k) / Gamma(alpha)``:

    * L2: ``2 (V_m(c) m! Sigma beta^alpha / 2^{m+1}
      sum_k (2p)^k G_k / (k! (2p + beta)^{n+k}))^{1/2}``;
    * FV: ``2 V_m(c) m! gamma_abs beta^alpha sum_k p^k G_k / (k! (p + beta)^{n+k})``.
    """
    if not (alpha > m + 1):
        raise ParameterOutOfRange(f"alpha must exceed m + 1 = {m + 1}")
    if not (beta > 0 and c > 0):
        raise ParameterOutOfRange("beta and c must be positive")
    if case not in ("L2", "FV"):
        raise ValidationError("case must be 'L2' or 'FV'")
    h = np.asarray(h, dtype=float)
    b = -1.0 / math.sqrt(1.0 + c * c)
    p = -b * h / math.sqrt(m + 1)
    if c > 1:
        p = p / c
    n = alpha - m - 1
    x = 2.0 * p if case == "L2" else p
    k = np.arange(m + 1).reshape((-1,) + (1,) * h.ndim)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    logt = (alpha * math.log(beta) + special.gammaln(n + k) - special.gammaln(alpha)
            - special.gammaln(k + 1) - (n + k) * np.log(x + beta))
    logt = logt + np.where(k > 0, k * np.where(k > 0, logx, 0.0), 0.0)
    s = np.sum(np.exp(logt), axis=0)
    vm = ball_volume(m, c) * math.factorial(m)
    if case == "L2":
        out = 2.0 * np.sqrt(vm * scale * s / 2.0 ** (m + 1))
    else:
        out = 2.0 * vm * scale * s
    return out[()]


def mstou_gamma_curve(alpha, beta, c, m, scale=1.0, case="L2", h=None):
    """Closed-form curve with its analytic decay order attached."""
    h = np.geomspace(1.0, 1e4, 41) if h is None else np.asarray(h, dtype=float)
    vals = np.asarray(theta_bound_mstou_gamma(alpha, beta, c, m, scale, case, h))
    curve = CoefficientCurve(
        "theta-lex", h, vals, case,
        f"c-class MSTOU, Gamma({alpha:g},{beta:g}) mixing, c={c:g}, m={m}",
        lambda x: float(theta_bound_mstou_gamma(alpha, beta, c, m, scale, case, x)),
        theory_order=mstou_decay_order(alpha, m, case), exact_domain=c <= 1,
        note="" if c <= 1 else "outer bound of the truncated cone (c > 1)")
    try:
        curve.fit()
    except NoPolynomialFit:
        pass
    return curve


# -- ambit fields ----------------------------------------------------------

AMBIT_CASES = ("i", "ii", "iii", "p-dep", "vol-fv")


def _j_pieces(vol, A0, psi_val, eng, absolute=False):
    j = vol.j
    dom = truncated_cone_domain(j.cone, psi_val)
    I2 = cone_power_integral(j, 2.0, dom, eng).value
    I1 = cone_power_integral(j, 1.0, dom, eng, absolute=absolute).value
    return I2, I1


def theta_bound_ambit(ambit, case="i", h=0.0, engine=None):
    """theta-lex bound for an ambit field with the truncation radius
    ``psi(h) = -b h / (2 sqrt(m+1))``.

    Cases: ``"i"`` centred basis, ``"ii"`` general square-integrable,
    ``"iii"`` finite-variation basis, ``"p-dep"`` p-dependent volatility
    (valid once ``psi(h) > p``), ``"vol-fv"`` finite-variation basis and
    volatility basis.
    """
    if case not in AMBIT_CASES:
        raise ValidationError(f"case must be one of {AMBIT_CASES}")
    eng = engine if engine is not None else QuadratureEngine()
    q = ambit.quad
    vol = ambit.volatility
    A0 = ambit.cone
    l = ambit.l
    psi(A0, 1.0)

    if case in ("i", "p-dep"):
        _case_pre(q, "i")
    elif case == "ii":
        _case_pre(q, "ii")
    else:
        _case_pre(q, "iii")
    if case == "p-dep" and not isinstance(vol, PDependentVolatility):
        raise CaseInapplicable("case p-dep needs a p-dependent volatility")
    if case == "vol-fv":
        if not isinstance(vol, MMAFVolatility):
            raise CaseInapplicable("case vol-fv needs an MMAF volatility")
        vq = vol.quad
        if not (vq.finite_variation and vq.gamma0 >= 0 and _no_negative_jumps(vq)):
            raise CaseInapplicable(
                "case vol-fv needs a nonnegative finite-variation volatility basis")
    if case in ("i", "ii", "iii") and isinstance(vol, PDependentVolatility):
        raise CaseInapplicable(f"case ({case}) needs an MMAF or constant volatility")
    horizon = None
    if case == "p-dep":
        horizon = float(psi_inverse(A0, vol.p, factor=0.5))
    e_sig2 = _vol_second(vol, eng)

    def one(hh):
        if horizon is not None and not hh > horizon:
            raise HorizonNotReached(
                f"h = {hh:g} is below the independence horizon {horizon:g}")
        pv = float(psi(A0, hh, factor=0.5))
        dom = truncated_cone_domain(A0, pv)
        comp = complement_cone_domain(A0, pv)
        if case in ("i", "p-dep"):
            L2 = cone_power_integral(l, 2.0, dom, eng).value
            first = 2.0 * math.sqrt(q.sigma_lambda * e_sig2 * L2)
            if case == "p-dep" or isinstance(vol, ConstantVolatility):
                return first
            J2, J1 = _j_pieces(vol, A0, pv, eng)
            vq = vol.quad
            jterm = vq.sigma_lambda * J2 + vq.mu_lambda ** 2 * J1 ** 2
            L2c = cone_power_integral(l, 2.0, comp, eng).value
            return first + 2.0 * math.sqrt(jterm * q.sigma_lambda * L2c)
        if case == "ii":
            L2 = cone_power_integral(l, 2.0, dom, eng).value
            L1 = cone_power_integral(l, 1.0, dom, eng, absolute=False).value
            first = 2.0 * math.sqrt(q.sigma_lambda * e_sig2 * L2
                                    + q.mu_lambda ** 2 * e_sig2 * L1 ** 2)
            if isinstance(vol, ConstantVolatility):
                return first
            J2, J1 = _j_pieces(vol, A0, pv, eng)
            vq = vol.quad
            jterm = vq.sigma_lambda * J2 + vq.mu_lambda ** 2 * J1 ** 2
            L2c = cone_power_integral(l, 2.0, comp, eng).value
            L1c = cone_power_integral(l, 1.0, comp, eng, absolute=False).value
            return first + 2.0 * math.sqrt(
                jterm * (q.sigma_lambda * L2c + q.mu_lambda ** 2 * L1c ** 2))
        ga = q.gamma_abs
        L1a = cone_power_integral(l, 1.0, dom, eng).value
        if case == "iii":
            first = 2.0 * math.sqrt(e_sig2) * ga * L1a
            if isinstance(vol, ConstantVolatility):
                return first
            J2, J1 = _j_pieces(vol, A0, pv, eng)
            vq = vol.quad
            jterm = vq.sigma_lambda * J2 + vq.mu_lambda ** 2 * J1 ** 2
            L1c = cone_power_integral(l, 1.0, comp, eng).value
            return first + 2.0 * math.sqrt(jterm) * ga * L1c
        # vol-fv
        vq = vol.quad
        gs = vq.gamma_abs
        j_all = cone_power_integral(vol.j, 1.0, None, eng).value
        j_tr = cone_power_integral(vol.j, 1.0, truncated_cone_domain(vol.j.cone, pv), eng).value
        L1c = cone_power_integral(l, 1.0, comp, eng).value
        return 2.0 * gs * ga * j_all * L1a + 2.0 * gs * ga * L1c * j_tr

    return _vectorize(h, one)


def _no_negative_jumps(q):
    nu = q.nu
    if nu.is_zero:
        return True
    law = nu.jump_law
    if hasattr(law, "values"):
        return bool(np.all(law.values > 0))
    return bool(law.pdf(np.array([-1e-3, -1.0, -10.0])).max() == 0)


# -- hereditary and shift transforms ---------------------------------------

def hereditary_exponent(p, a):
    """``(p - a) / (p - 1)``, exact for rational inputs."""
    if not (1 <= a < p):
        raise ExponentInvalid(f"need 1 <= a < p, got p={p}, a={a}")
    try:
        return (Fraction(p) - Fraction(a)) / (Fraction(p) - 1)
    except TypeError:
        return (p - a) / (p - 1)


def hereditary_transform(curve, p, a):
    """Power transform ``theta -> theta^{(p-a)/(p-1)}`` with constant 1.

    The multiplicative constant of the hereditary bound is not tracked
    (reported symbolically as ``C``); only the decay order matters for the
    CLT conditions.
    """
    e = float(hereditary_exponent(p, a))
    fn = None if curve.fn is None else (lambda x, f=curve.fn: f(x) ** e)
    decay = curve.decay
    if decay is not None:
        decay = replace(decay, order=decay.order * e if decay.kind == "polynomial" else decay.order,
                        rate=decay.rate * e)
    return CoefficientCurve(
        curve.kind, curve.h.copy(), np.power(curve.values, e), curve.case,
        f"hereditary^{e:g} of [{curve.provenance}]", fn, decay,
        None if curve.theory_order is None else curve.theory_order * e,
        curve.exact_domain, curve.note, constant="C")


def shift_set_size(k, m):
    """``|S_k| = (k+1) (2k+1)^{m-1}``."""
    if k < 0 or m < 1:
        raise ValidationError("need k >= 0 and m >= 1")
    return (k + 1) * (2 * k + 1) ** (m - 1)


def shifted_vector_bound(curve, k, m, A0=None, case="i"):
    """Bound for the vector of shifted copies ``(X_t, X_{t+s})_{s in S_k}``.

    theta-lex curves shift by ``psi^{-1}(k)`` (requires ``A0``), eta curves
    by ``2k``; values are multiplied by ``|S_k|^{m/2}`` in cases (i)/(ii)
    and ``|S_k|^m`` in cases (iii)/(iv).
    """
    if k == 0:
        return replace(curve, values=curve.values.copy(), h=curve.h.copy())
    size = shift_set_size(k, m)
    mult = size ** (m / 2.0) if case in ("i", "ii", "L2") else float(size ** m)
    if curve.kind == "eta":
        shift = 2.0 * k
    else:
        if A0 is None:
            raise ValidationError("theta-lex shifts need the sphere of influence")
        shift = float(psi_inverse(A0, k))
    if curve.fn is None:
        raise ValidationError("shifted bounds need a curve evaluator")
    keep = curve.h > shift
    if not np.any(keep):
        raise ShiftTooLarge(f"no grid point with h > {shift:g}")
    h = curve.h[keep]
    vals = np.array([mult * curve.fn(x - shift) for x in h])
    fn = (lambda x, f=curve.fn: mult * f(x - shift))
    out = CoefficientCurve(curve.kind, h, vals, curve.case,
                           f"shifted k={k} of [{curve.provenance}]", fn,
                           None, curve.theory_order, curve.exact_domain, curve.note)
    try:
        out.fit()
    except NoPolynomialFit:
        pass
    return out


# -- CLT admissibility ----------------------------------------------------

TARGETS = ("mean", "autocov", "pth-moment", "eta-mean")


def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(float(x)))


def clt_threshold(m, delta, target="mean", p=None):
    """Required decay order for the CLT of ``target`` (exact rational).

    * mean: ``m (1 + 1/delta)``
    * autocov: ``m (1 + 1/delta) (3 + delta) / (2 + delta)``
    * pth-moment: ``m (1 + 1/delta) (2p - 1 + delta) / (p + delta)``
    * eta-mean: ``m max(2, 1 + 1/delta)``
    """
    d = _frac(delta)
    if d <= 0:
        raise ValidationError("delta must be positive")
    base = m * (1 + 1 / d)
    if target == "mean":
        return base
    if target == "autocov":
        return base * (3 + d) / (2 + d)
    if target == "pth-moment":
        if p is None or p < 1:
            raise ValidationError("pth-moment needs p >= 1")
        pf = _frac(p)
        return base * (2 * pf - 1 + d) / (pf + d)
    if target == "eta-mean":
        return m * max(Fraction(2), 1 + 1 / d)
    raise ValidationError(f"target must be one of {TARGETS}")


def mstou_alpha_threshold(m, delta, target="mean", case="L2"):
    """Gamma shape threshold for asymptotic normality of c-class MSTOU statistics.

    L2 (centred basis): mean ``(m+1)(3 + 2/delta)``, autocov
    ``(m+1)(3+delta)/(2+delta) (3 + 2/delta)``; FV: the same with
    ``2 + 2/delta``.  ``target="mean-second-moment"`` gives ``3(m+1)``.
    """
    d = _frac(delta)
    if target == "mean-second-moment":
        return Fraction(3 * (m + 1))
    core = (3 + 2 / d) if case == "L2" else (2 + 2 / d)
    if target == "mean":
        return (m + 1) * core
    if target == "autocov":
        return (m + 1) * (3 + d) / (2 + d) * core
    raise ValidationError("target must be 'mean', 'autocov' or 'mean-second-moment'")


@dataclass(frozen=True)
class Verdict:
    """CLT admissibility verdict."""

    target: str
    passed: bool
    required: Fraction
    fitted: float
    fit_kind: str
    note: str = ""

    def to_dict(self):
        return {"target": self.target, "verdict": "pass" if self.passed else "fail",
                "required_order": str(self.required),
                "required_order_float": float(self.required),
                "fitted_order": _jsonable(self.fitted), "fit_kind": self.fit_kind,
                "note": self.note}


def clt_condition_check(curve, m, delta, target="mean", p=None, use_theory=False):
    """Compare the decay of ``curve`` against the CLT threshold.

    ``fitted`` is the decay rate ``a`` in ``bound = O(h^{-a})``.  Exponential
    curves pass every polynomial threshold.  With ``use_theory`` the
    analytic order attached to the curve replaces the regression.
    """
    req = clt_threshold(m, delta, target, p)
    if use_theory and curve.theory_order is not None:
        rate = -curve.theory_order
        return Verdict(target, rate > req, req, rate, "polynomial", "analytic decay order")
    fit = curve.decay or curve.fit()
    if fit.kind == "exponential":
        return Verdict(target, True, req, math.inf, "exponential",
                       "exponential decay passes every polynomial threshold")
    return Verdict(target, fit.rate > req, req, fit.rate, "polynomial",
                   f"log-log fit R^2 = {fit.r2_poly:.6f}")
