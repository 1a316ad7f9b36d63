"""Command-line entry point: config -> models -> CSV/JSON artifacts.

Exit status 0 on success, 2 on validation errors, 3 on numeric failures
(a ``diagnostics.json`` file is written to the output directory).
"""

import argparse
from dataclasses import replace
import json
import math
import os
import sys

import numpy as np
from scipy import stats

from . import __version__
from .coefficients import (clt_condition_check, coefficient_curve, eta_bound_mmaf,
                           mstou_gamma_curve, theta_bound_ambit, theta_bound_mmaf)
from .config import ConfigError, config_hash, load_config, section
from .exceptions import NotSummable, NumericFailure, ValidationError
from .geometry import LightCone, SamplingWindow
from .gmm import MSTOUMomentEstimator
from .harness import (build_report, pth_moment_stat, sample_autocov_stat,
                      sample_mean_stat)
from .kernels import (AmbitModel, ConstantVolatility, ExpBoundedKernel, GeometricMAKernel,
                      IIDCellVolatility, MMAFVolatility, MSTOUKernel, TabulatedKernel)
from .levy import CharacteristicQuadruplet, LevyMeasure, MixingLaw, make_jump_law
from .moments import (CovarianceTable, ambit_cov, ambit_mean, covariance_table,
                      geometric_ma_cov, long_run_variance, mmaf_cov, mmaf_mean,
                      mstou_cov, mstou_cov_tail_bound)
from .quadrature import QuadratureEngine
from .simulation import (LatticeSample, SimPlan, make_plan, model_hash, simulate_ambit,
                         simulate_geometric_ma, simulate_mmaf, simulate_replications,
                         stream)

__all__ = ["main", "run", "build_model"]

TASKS = ("moments", "coeffs", "simulate", "clt-mean", "clt-acf", "clt-pmoment", "fit")


# -- model construction ---------------------------------------------------

def build_mixing(cfg):
    with section("model.levy.mixing"):
        p = dict(cfg.params)
        if cfg.kind == "gamma":
            return MixingLaw.gamma(p["alpha"], p["beta"])
        if cfg.kind == "discrete":
            return MixingLaw.discrete(p["values"], p["probs"])
        return MixingLaw.degenerate(p.get("value", 1.0))


def build_quad(cfg):
    with section("model.levy"):
        if cfg.jump_law is None:
            nu = LevyMeasure.zero()
        else:
            law = make_jump_law(cfg.jump_law.name, cfg.jump_law.params)
            if cfg.jump_law.name == "gamma-levy":
                nu = LevyMeasure(law, law.mass, cfg.gaussian_compensation)
            else:
                nu = LevyMeasure(law, cfg.intensity, cfg.gaussian_compensation)
        return CharacteristicQuadruplet(cfg.gamma, cfg.sigma, nu, build_mixing(cfg.mixing))


def build_kernel(cfg, mixing, where="model.kernel"):
    with section(where):
        if cfg.kind == "mstou-exp":
            return MSTOUKernel(cfg.c, cfg.m, mixing)
        if cfg.kind == "exp-bounded":
            return ExpBoundedKernel(cfg.M, cfg.K, cfg.dim)
        if cfg.kind == "geometric-ma":
            return GeometricMAKernel(cfg.ratio, cfg.terms)
        if cfg.path is None:
            raise ConfigError("tabulated kernels need a CSV path", f"{where}.path")
        return TabulatedKernel.from_csv(cfg.path)


def build_model(cfg):
    """Return ``dict(type, kernel, quad, ambit, cone)`` from a validated config."""
    mc = cfg.model
    if mc.type in ("geometric-ma", "iid-normal"):
        return {"type": mc.type, "kernel": GeometricMAKernel(mc.kernel.ratio, mc.kernel.terms)
                if mc.type == "geometric-ma" else None, "quad": None, "ambit": None,
                "cone": None}
    quad = build_quad(mc.levy)
    kernel = build_kernel(mc.kernel, quad.pi)
    cone = getattr(kernel, "cone", None)
    if mc.geometry is not None:
        with section("model.geometry"):
            g = mc.geometry
            if g.shape == "c-cone":
                cone = LightCone(g.c, g.m, alpha=g.alpha)
                if hasattr(kernel, "c") and (g.c != kernel.c or g.m != kernel.m):
                    raise ConfigError("geometry disagrees with the kernel cone", "model.geometry")
            else:
                raise ConfigError("bounds need a c-cone sphere of influence", "model.geometry.shape")
    ambit = None
    if mc.type == "ambit":
        with section("model.volatility"):
            v = mc.volatility
            if v is None or v.kind == "constant":
                vol = ConstantVolatility(1.0 if v is None else v.value)
            elif v.kind == "mmaf":
                if v.kernel is None or v.levy is None:
                    raise ConfigError("mmaf volatility needs kernel and levy tables",
                                      "model.volatility")
                vq = build_quad(v.levy)
                vol = MMAFVolatility(build_kernel(v.kernel, vq.pi, "model.volatility.kernel"), vq)
            else:
                dist = getattr(stats, v.law)(**v.params)
                vol = IIDCellVolatility(dist)
            ambit = AmbitModel(kernel, vol, quad)
    return {"type": mc.type, "kernel": kernel, "quad": quad, "ambit": ambit, "cone": cone}


# -- helpers ---------------------------------------------------------------

class Context:
    def __init__(self, cfg, out, threads):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.hash = config_hash(cfg)
        self.engine = QuadratureEngine(rel_tol=cfg.tolerances.rel_tol,
                                       max_refinements=cfg.tolerances.max_refinements)
        self.written = []

    @property
    def header(self):
        return [f"ambitclt {__version__}", f"config_hash {self.hash}"]

    def path(self, name):
        return os.path.join(self.out, self.cfg.output.prefix + name)

    def write_json(self, name, obj):
        obj = dict(obj, tool_version=__version__, config_hash=self.hash)
        text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            fh.write(text)
        self.written.append(p)

    def write_text(self, name, text):
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            fh.write(text)
        self.written.append(p)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _h_grid(t):
    if t.h is not None:
        return np.asarray(t.h, dtype=float)
    return np.geomspace(t.h_min, t.h_max, t.points)


def _lattice_dim(model):
    k = model["kernel"]
    return 1 if k is None else k.dim


def _plan(ctx, model):
    p = ctx.cfg.plan
    window = SamplingWindow(p.n, p.m)
    with section("plan"):
        if model["type"] in ("geometric-ma", "iid-normal"):
            return SimPlan(window, 1.0, p.grid_step, p.seed, p.reps)
        target = model["ambit"] if model["ambit"] is not None else model["kernel"]
        if model["kernel"].dim != p.m:
            raise ConfigError(f"window dimension {p.m} differs from kernel dimension "
                              f"{model['kernel'].dim}", "plan.m")
        return make_plan(target, model["quad"], window, p.eps_bias, p.T, p.grid_step,
                         p.seed, p.reps, ctx.engine)


def _simulate(ctx, model, plan, offset=0, reduce=None):
    """Arrays for replications ``offset .. offset + reps - 1`` in order.

    With ``reduce`` each array is mapped through it inside the worker.
    """
    t = model["type"]
    n, m = plan.window.n, plan.window.m
    if t == "geometric-ma":
        k = model["kernel"]

        def one(r):
            return simulate_geometric_ma(n, r + offset, plan.master_seed, k.ratio, k.terms)
    elif t == "iid-normal":
        def one(r):
            return stream(plan.master_seed, r + offset).standard_normal((n,) * m)
    elif t == "ambit":
        def one(r):
            return simulate_ambit(model["ambit"], plan, r + offset, ctx.engine).values
    else:
        def one(r):
            return simulate_mmaf(model["kernel"], model["quad"], plan, r + offset,
                                 ctx.engine).values
    if reduce is not None:
        base = one

        def one(r):
            return reduce(base(r))
    return simulate_replications(one, plan, ctx.threads)


def _analytic_mean(ctx, model):
    t = model["type"]
    if t == "geometric-ma":
        return 0.5
    if t == "iid-normal":
        return 0.0
    if t == "ambit":
        return ambit_mean(model["ambit"], ctx.engine)
    return mmaf_mean(model["kernel"], model["quad"], ctx.engine)


def _analytic_cov(ctx, model, lag):
    t = model["type"]
    lag = np.atleast_1d(np.asarray(lag))
    if t == "geometric-ma":
        return geometric_ma_cov(int(lag[0]), model["kernel"].ratio, 0.25)
    if t == "iid-normal":
        return 1.0 if not np.any(lag) else 0.0
    if t == "ambit":
        return ambit_cov(model["ambit"], lag, ctx.engine)
    return mmaf_cov(model["kernel"], model["quad"], lag, ctx.engine)


def _long_run(ctx, model):
    """Analytic long-run variance or ``None`` when unavailable."""
    t = model["type"]
    if t == "geometric-ma":
        # Var(xi) (sum_j a_j)^2 with sum_j a_j = 1
        return 0.25
    if t == "iid-normal":
        return 1.0
    k, q = model["kernel"], model["quad"]
    if t == "mmaf" and isinstance(k, MSTOUKernel) and k.m == 1:
        try:
            lrv = long_run_variance(lambda lags: mstou_cov(k, q.sigma_lambda, lags),
                                    mstou_cov_tail_bound(k, q.sigma_lambda),
                                    eps=ctx.cfg.task.lrv_eps, dim=2)
            return lrv.value
        except NotSummable:
            return None
    return None


def _verdict(ctx, model, target):
    """CLT admissibility from the analytic coefficient decay, when available."""
    k = model["kernel"]
    t = ctx.cfg.task
    if model["type"] == "mmaf" and isinstance(k, MSTOUKernel) and k.mixing.kind == "gamma":
        q = model["quad"]
        case = "L2" if q.centered else "FV"
        if case == "FV" and not q.finite_variation:
            return None
        scale = q.sigma_lambda if case == "L2" else q.gamma_abs
        curve = mstou_gamma_curve(k.mixing.alpha, k.mixing.beta, k.c, k.m, scale, case)
        return clt_condition_check(curve, k.dim, t.delta, target,
                                   t.p if target == "pth-moment" else None, use_theory=True)
    return None


# -- tasks ------------------------------------------------------------------

def task_moments(ctx, model):
    t = ctx.cfg.task
    K = t.max_lag
    if model["type"] == "geometric-ma":
        lags = np.arange(-K, K + 1).reshape(-1, 1)
        vals = np.array([geometric_ma_cov(int(h), model["kernel"].ratio, 0.25) for h in lags[:, 0]])
        table = CovarianceTable(lags, vals, 2.0 * 0.5 ** K / 12.0, 0.5)
    elif model["type"] == "iid-normal":
        lags = np.arange(-K, K + 1).reshape(-1, 1)
        table = CovarianceTable(lags, (lags[:, 0] == 0).astype(float), 0.0, 0.0)
    elif model["type"] == "ambit":
        from .moments import _lags_up_to
        lags = _lags_up_to(K, model["kernel"].dim)
        vals = np.array([ambit_cov(model["ambit"], k, ctx.engine) for k in lags])
        table = CovarianceTable(lags, vals, math.inf, ambit_mean(model["ambit"], ctx.engine))
    else:
        k, q = model["kernel"], model["quad"]
        tb = None
        if isinstance(k, MSTOUKernel) and k.m == 1:
            try:
                tb = mstou_cov_tail_bound(k, q.sigma_lambda)
            except NotSummable:
                tb = None
        with section("task"):
            table = covariance_table(k, q, K, ctx.engine, tb)
    ctx.write_text("covariance.csv", table.to_csv(header_lines=ctx.header))
    lrv = _long_run(ctx, model)
    ctx.write_json("moments.json", {"mean": table.mean, "variance": table.variance,
                                    "tail_bound": table.tail_bound, "long_run_variance": lrv})


def task_coeffs(ctx, model):
    t = ctx.cfg.task
    k, q = model["kernel"], model["quad"]
    h = _h_grid(t)
    if model["type"] not in ("mmaf", "ambit"):
        raise ConfigError("coefficient bounds need an mmaf or ambit model", "model.type")
    with section("task"):
        if model["type"] == "ambit":
            curve = coefficient_curve(lambda x: theta_bound_ambit(model["ambit"], t.case, x,
                                                                  ctx.engine),
                                      h, "theta-lex", t.case, "ambit field bound")
        elif t.coefficient == "eta":
            curve = coefficient_curve(lambda x: eta_bound_mmaf(k, q, t.case, x, ctx.engine),
                                      h, "eta", t.case, "mixed moving average eta bound")
        elif (t.method == "closed-form" and isinstance(k, MSTOUKernel)
              and k.mixing.kind == "gamma"):
            case = {"i": "L2", "ii": "L2", "L2": "L2", "iii": "FV", "FV": "FV"}.get(t.case)
            if case is None:
                raise ConfigError(f"no closed form for case {t.case!r}", "task.case")
            if case == "L2" and not q.centered:
                raise ConfigError("the L2 closed form needs a centred basis", "task.case")
            scale = q.sigma_lambda if case == "L2" else q.gamma_abs
            curve = mstou_gamma_curve(k.mixing.alpha, k.mixing.beta, k.c, k.m, scale, case, h)
        else:
            cone = model["cone"]
            curve = coefficient_curve(lambda x: theta_bound_mmaf(k, q, t.case, x, cone,
                                                                 ctx.engine),
                                      h, "theta-lex", t.case, "mixed moving average bound")
        verdict = clt_condition_check(curve, k.dim, t.delta, t.target,
                                      t.p if t.target == "pth-moment" else None,
                                      use_theory=curve.theory_order is not None)
    ctx.write_text("curve.csv", curve.to_csv(header_lines=ctx.header))
    ctx.write_json("coeffs.json", {"curve": curve.summary(), "verdict": verdict.to_dict()})


def task_simulate(ctx, model):
    plan = _plan(ctx, model)
    arrays = _simulate(ctx, model, plan)
    for r, a in enumerate(arrays):
        s = LatticeSample(plan.window, np.asarray(a).reshape(plan.window.shape))
        ctx.write_text(f"sample_{r:04d}.csv", s.to_csv(header_lines=ctx.header + [
            f"seed {plan.master_seed}", f"rep {r}"]))
    ctx.write_json("plan.json", {"plan": plan.describe(), "model_hash": _mhash(model)})


def _mhash(model):
    if model["ambit"] is not None:
        return model_hash(model["ambit"].l, model["quad"], model["ambit"].volatility)
    return model_hash(model["type"], model["kernel"], model["quad"])


def _clt(ctx, model, statistic):
    t = ctx.cfg.task
    plan = _plan(ctx, model)
    arrays = _simulate(ctx, model, plan)
    with section("task"):
        mean = _analytic_mean(ctx, model)
        targets = {"mean": mean}
        if statistic == "mean":
            lrv = t.variance if t.variance is not None else _long_run(ctx, model)
            res = sample_mean_stat(arrays, mean, lrv)
            targets["long_run_variance"] = lrv
            verdict = _verdict(ctx, model, "mean")
        elif statistic == "autocov":
            m = plan.window.m
            lags = t.lags if t.lags is not None else [[k] + [0] * (m - 1)
                                                     for k in range(t.max_lag + 1)]
            R = [_analytic_cov(ctx, model, k) for k in lags]
            res = sample_autocov_stat(arrays, lags, R, mean)
            targets.update(lags=lags, R=R)
            est = res.estimates
            targets["R_hat"] = est.mean(axis=0).tolist()
            targets["R_hat_se"] = (est.std(axis=0, ddof=1) / math.sqrt(est.shape[0])).tolist()
            verdict = _verdict(ctx, model, "autocov")
        else:
            p = t.p
            if t.moment is not None:
                moment, src = t.moment, "supplied"
            elif model["type"] == "geometric-ma" and p <= 2:
                moment, src = (0.5 if p == 1 else 1.0 / 12 + 0.25), "analytic"
            elif p == 1:
                moment, src = mean, "analytic"
            else:
                # the pilot error enters the statistic at order sqrt(reps / pilot_reps)
                n_pilot = t.pilot_reps or 10 * plan.reps
                pilot = _simulate(ctx, model, replace(plan, reps=n_pilot), offset=plan.reps,
                                  reduce=lambda a: float(np.mean(np.asarray(a) ** p)))
                moment, src = float(np.mean(pilot)), "estimated"
                targets["pilot_reps"] = n_pilot
            lrv = t.variance if (t.variance is not None and p == 1) else (
                _long_run(ctx, model) if p == 1 else None)
            res = pth_moment_stat(arrays, p, moment, lrv)
            targets.update(p=p, moment=moment, moment_source=src)
            verdict = _verdict(ctx, model, "pth-moment")
    report = build_report(statistic, res, _mhash(model), [plan.window.describe()],
                          targets, verdict, t.level,
                          meta={"plan": plan.describe()})
    ctx.write_text("standardized.csv", report.standardized_csv(header_lines=ctx.header))
    ctx.write_json("report.json", json.loads(report.to_json()))


def task_fit(ctx, model):
    t = ctx.cfg.task
    if t.data is not None:
        with section("task.data"):
            arrays = [_read_sample(t.data)]
    else:
        if model["type"] != "mmaf" or not isinstance(model["kernel"], MSTOUKernel):
            raise ConfigError("fitting simulated data needs an MSTOU model", "model.kernel")
        plan = _plan(ctx, model)
        arrays = _simulate(ctx, model, plan)
    with section("task"):
        est = MSTOUMomentEstimator(conditions=tuple(t.conditions), free=tuple(t.free),
                                   init=dict(t.init) or None, n_restarts=t.restarts,
                                   random_state=ctx.cfg.plan.seed, delta=t.delta)
        est.fit(arrays)
    ctx.write_json("estimate.json", est.report())


def _read_sample(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rows.append(line.strip().split(","))
    head, body = rows[0], np.array(rows[1:], dtype=float)
    m = len(head) - 1
    idx = body[:, :m].astype(int)
    shape = tuple(idx.max(axis=0) - idx.min(axis=0) + 1)
    out = np.full(shape, np.nan)
    out[tuple((idx - idx.min(axis=0)).T)] = body[:, m]
    if np.isnan(out).any():
        raise ConfigError("sample CSV does not cover a full window", "task.data")
    return out


HANDLERS = {
    "moments": task_moments,
    "coeffs": task_coeffs,
    "simulate": task_simulate,
    "clt-mean": lambda c, m: _clt(c, m, "mean"),
    "clt-acf": lambda c, m: _clt(c, m, "autocov"),
    "clt-pmoment": lambda c, m: _clt(c, m, "pth-moment"),
    "fit": task_fit,
}


# -- entry points ------------------------------------------------------------

def run(task, config=None, overrides=(), out=".", seed=None, threads=1):
    """Run ``task`` and return the list of written files."""
    ov = list(overrides or ())
    ov.append(f'task.kind="{task}"')
    if seed is not None:
        ov.append(f"plan.seed={int(seed)}")
    cfg = load_config(config, ov)
    os.makedirs(out, exist_ok=True)
    ctx = Context(cfg, out, max(1, int(threads)))
    model = build_model(cfg)
    HANDLERS[task](ctx, model)
    return ctx.written


def _parser():
    ap = argparse.ArgumentParser(prog="ambitclt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ambitclt {__version__}")
    sub = ap.add_subparsers(dest="task", required=True)
    for name in TASKS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry (dotted path)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, help="master seed (overrides plan.seed)")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads; affects speed only")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        files = run(args.task, args.config, args.overrides, args.out, args.seed, args.threads)
    except ValidationError as exc:
        print(f"error [{_where(exc)}]: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        os.makedirs(args.out, exist_ok=True)
        diag = {"error": type(exc).__name__, "message": str(exc), "config_path": _where(exc),
                "tool_version": __version__}
        for attr in ("partial", "bound", "result"):
            if getattr(exc, attr, None) is not None:
                diag[attr] = getattr(exc, attr)
        with open(os.path.join(args.out, "diagnostics.json"), "w", newline="") as fh:
            fh.write(json.dumps(_jsonable(diag), indent=2, sort_keys=True, default=str) + "\n")
        print(f"numeric failure [{_where(exc)}]: {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


def _where(exc):
    return getattr(exc, "path", None) or getattr(exc, "config_path", None) or "task"


if __name__ == "__main__":
    sys.exit(main())
