"""Hierarchical Bayesian estimation of choice-model parameters.

Subjects share a population: each subject-level parameter x is modeled
non-centered as x = mu + sigma * z with z ~ N(0, 1), a flat (optionally
bounded) prior on the group mean mu and half-Cauchy(0, 1) on the group
scale sigma. Sampling is adaptive Metropolis-within-Gibbs on transformed
coordinates, with an extra subject-effect-preserving group move per sweep
so group scalars mix even when the likelihood pins subjects down tightly.
That extra move changes coordinates, not the target distribution.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import SeedSequence, default_rng
from scipy.optimize import minimize
from scipy.special import expit, logit, ndtr, ndtri

from ..choicemodels import Model
from ..domain import Dataset, DomainError
from ..ident import dataset_ident_report
from ..learner import LearnerConfig, default_learner
from .contexts import build_context
from .diagnostics import scalar_summary

LOG_2_OVER_PI = math.log(2.0 / math.pi)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class RunawayError(RuntimeError):
    """The sampler wandered into numerically absurd territory."""


@dataclass(frozen=True)
class ParamPrior:
    """Group-mean prior for one subject-level parameter.

    Both bounds present: uniform group mean on (lower, upper). Both absent:
    improper flat. One-sided bounds are not supported. The group scale prior
    is always half-Cauchy(0, 1).
    """

    name: str
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if (self.lower is None) != (self.upper is None):
            raise DomainError(f"one-sided bounds are not supported ({self.name})")
        if self.bounded and not self.upper > self.lower:
            raise DomainError(f"empty prior interval for {self.name}")

    @property
    def bounded(self) -> bool:
        return self.lower is not None


@dataclass(frozen=True)
class HierPrior:
    params: tuple[ParamPrior, ...]

    @property
    def d(self) -> int:
        return len(self.params)

    def to_dict(self) -> dict:
        return {
            p.name: {"lower": p.lower, "upper": p.upper} for p in self.params
        }


def default_prior(model: Model | str) -> HierPrior:
    model = Model(model)
    if model is Model.SM1:
        return HierPrior((ParamPrior("beta", 0.0, 10.0),))
    if model is Model.SM2:
        return HierPrior((ParamPrior("beta", 0.0, 10.0), ParamPrior("phi")))
    if model is Model.SM3:
        return HierPrior(
            (ParamPrior("beta", 0.0, 10.0), ParamPrior("phi"), ParamPrior("rho"))
        )
    if model is Model.PROBIT:
        return HierPrior(
            (
                ParamPrior("w1", 0.0, 5.0),
                ParamPrior("w2", -1.0, 5.0),
                ParamPrior("w3", -1.0, 5.0),
            )
        )
    raise DomainError("alpha is estimated per subject, not hierarchically")


def _mu_from_u(u: float, pp: ParamPrior) -> float:
    if pp.bounded:
        return pp.lower + (pp.upper - pp.lower) * float(expit(u))
    return u


def _u_from_mu(mu: float, pp: ParamPrior) -> float:
    if pp.bounded:
        span = pp.upper - pp.lower
        frac = min(max((mu - pp.lower) / span, 1e-12), 1.0 - 1e-12)
        return float(logit(frac))
    return mu


def _logprior_u(u: float, pp: ParamPrior) -> float:
    # Flat density on mu; only the squash Jacobian survives on bounded dims.
    if pp.bounded:
        return -float(np.logaddexp(0.0, -u)) - float(np.logaddexp(0.0, u))
    return 0.0


def _logprior_v(v: float) -> float:
    # half-Cauchy(0, 1) on sigma = exp(v), including the log-scale Jacobian
    return LOG_2_OVER_PI - float(np.logaddexp(0.0, 2.0 * v)) + v


def _scale_target(v: float, sse: float, n: int) -> float:
    """Log density of v = log(sigma) given subject effects with fixed spread."""
    if 2.0 * v < -700.0:
        return -math.inf
    return -n * v - 0.5 * sse * math.exp(-2.0 * v) + _logprior_v(v)


def _run_chain(
    ctx,
    prior: HierPrior,
    iters: int,
    warmup: int,
    seed_seq: SeedSequence,
    theta0: np.ndarray,
    runaway_limit: float,
):
    rng = default_rng(seed_seq)
    n, d = ctx.n_subjects, ctx.d
    pps = prior.params
    kept = iters - warmup

    for _ in range(10):
        u = np.empty(d)
        for j, pp in enumerate(pps):
            if pp.bounded:
                u[j] = _u_from_mu(theta0[j], pp) + 0.5 * rng.standard_normal()
            else:
                u[j] = theta0[j] + (0.2 + 0.2 * abs(theta0[j])) * rng.standard_normal()
        v = rng.normal(math.log(0.5), 0.5, size=d)
        mu = np.array([_mu_from_u(u[j], pps[j]) for j in range(d)])
        sigma = np.exp(v)
        z = 0.5 * rng.standard_normal((n, d))
        x = mu + sigma * z
        ll = ctx.loglik(x)
        if np.all(np.isfinite(ll)):
            break
    else:
        raise RunawayError("no finite-likelihood starting point after 10 draws")

    ls_z = np.full((n, d), math.log(0.5))
    ls_u = np.full(d, math.log(0.25))
    ls_v = np.full(d, math.log(0.25))
    ls_gv = np.full(d, math.log(0.5))

    # Per-dimension walks crawl when a subject's likelihood couples two
    # parameters (a curved ridge), so mid-warmup we freeze a per-subject
    # covariance estimate and add one joint proposal per sweep.
    cov_from = warmup // 4
    cov_until = max(warmup // 2, cov_from + 1)
    w_count = 0
    w_mean = np.zeros((n, d))
    w_m2 = np.zeros((n, d, d))
    chol = None
    ls_j = np.full(n, math.log(0.1))

    out_mu = np.empty((kept, d))
    out_sigma = np.empty((kept, d))
    out_x = np.empty((kept, n, d))
    out_ll = np.empty((kept, n))
    acc = {
        "z": np.zeros(d),
        "mu": np.zeros(d),
        "sigma": np.zeros(d),
        "joint": np.zeros(1),
        "fresh": np.zeros(1),
    }

    for i in range(iters):
        gamma = (i + 10.0) ** -0.6 if i < warmup else 0.0
        tally = i >= warmup

        # Subject effects, one coordinate across all subjects at once.
        for j in range(d):
            zj = z[:, j]
            zj_new = zj + np.exp(ls_z[:, j]) * rng.standard_normal(n)
            x_prop = x.copy()
            x_prop[:, j] = mu[j] + sigma[j] * zj_new
            ll_prop = ctx.loglik(x_prop)
            logr = ll_prop - ll + 0.5 * (zj * zj - zj_new * zj_new)
            accept = np.log(rng.random(n)) < logr
            z[accept, j] = zj_new[accept]
            x[accept, j] = x_prop[accept, j]
            ll = np.where(accept, ll_prop, ll)
            if gamma:
                ls_z[:, j] += gamma * (np.exp(np.minimum(logr, 0.0)) - 0.44)
            if tally:
                acc["z"][j] += accept.mean()

        if d > 1:
            if cov_from <= i < cov_until:
                w_count += 1
                delta = x - w_mean
                w_mean += delta / w_count
                w_m2 += np.einsum("ni,nj->nij", delta, x - w_mean)
            elif i == cov_until:
                covs = w_m2 / max(w_count - 1, 1)
                tr = np.trace(covs, axis1=1, axis2=2) / d
                covs += (1e-6 * np.maximum(tr, 1e-12) + 1e-12)[:, None, None] * np.eye(d)
                chol = np.linalg.cholesky(covs)
            if chol is not None:
                dx = np.exp(ls_j)[:, None] * np.einsum(
                    "nij,nj->ni", chol, rng.standard_normal((n, d))
                )
                z_new = z + dx / sigma
                x_prop = mu + sigma * z_new
                ll_prop = ctx.loglik(x_prop)
                logr = ll_prop - ll + 0.5 * (
                    np.square(z).sum(axis=1) - np.square(z_new).sum(axis=1)
                )
                accept = np.log(rng.random(n)) < logr
                z[accept] = z_new[accept]
                x[accept] = x_prop[accept]
                ll = np.where(accept, ll_prop, ll)
                if gamma:
                    ls_j += gamma * (np.exp(np.minimum(logr, 0.0)) - 0.23)
                if tally:
                    acc["joint"][0] += accept.mean()

        # A subject can drift far out along a nearly flat likelihood valley
        # (phi and rho trade off for one-sided choice records), where every
        # local walk stalls and the inflated group scale lets the mean run
        # away. One independence proposal per sweep resamples each subject
        # from the prior; the N(0,1) factors cancel, leaving the bare
        # likelihood ratio, which is near one exactly on such a valley.
        z_new = rng.standard_normal((n, d))
        x_prop = mu + sigma * z_new
        ll_prop = ctx.loglik(x_prop)
        logr = ll_prop - ll
        accept = np.log(rng.random(n)) < logr
        z[accept] = z_new[accept]
        x[accept] = x_prop[accept]
        ll = np.where(accept, ll_prop, ll)
        if tally:
            acc["fresh"][0] += accept.mean()

        # Group mean, non-centered: subjects ride along with the proposal.
        for j in range(d):
            u_new = u[j] + math.exp(ls_u[j]) * rng.standard_normal()
            mu_new = _mu_from_u(u_new, pps[j])
            x_prop = x.copy()
            x_prop[:, j] = mu_new + sigma[j] * z[:, j]
            ll_prop = ctx.loglik(x_prop)
            logr = (
                float(ll_prop.sum() - ll.sum())
                + _logprior_u(u_new, pps[j])
                - _logprior_u(u[j], pps[j])
            )
            if math.log(rng.random()) < logr:
                u[j], mu[j], x, ll = u_new, mu_new, x_prop, ll_prop
                if tally:
                    acc["mu"][j] += 1.0
            if gamma:
                ls_u[j] += gamma * (math.exp(min(logr, 0.0)) - 0.44)

        # Group scale, non-centered.
        for j in range(d):
            v_new = v[j] + math.exp(ls_v[j]) * rng.standard_normal()
            sigma_new = math.exp(v_new)
            x_prop = x.copy()
            x_prop[:, j] = mu[j] + sigma_new * z[:, j]
            ll_prop = ctx.loglik(x_prop)
            logr = (
                float(ll_prop.sum() - ll.sum())
                + _logprior_v(v_new)
                - _logprior_v(v[j])
            )
            if math.log(rng.random()) < logr:
                v[j], sigma[j], x, ll = v_new, sigma_new, x_prop, ll_prop
                if tally:
                    acc["sigma"][j] += 1.0
            if gamma:
                ls_v[j] += gamma * (math.exp(min(logr, 0.0)) - 0.44)

        # Interweaved group move holding subject effects fixed: with x pinned
        # the mean conditional is truncated-normal (exact draw) and the scale
        # conditional is one-dimensional, so neither needs the likelihood.
        for j in range(d):
            pp = pps[j]
            xj = x[:, j]
            xbar = float(xj.mean())
            se = sigma[j] / math.sqrt(n)
            if pp.bounded:
                plo = float(ndtr((pp.lower - xbar) / se))
                phi = float(ndtr((pp.upper - xbar) / se))
                if phi - plo > 1e-14:
                    pdraw = plo + (phi - plo) * rng.random()
                    pdraw = min(max(pdraw, 1e-15), 1.0 - 1e-15)
                    cand = xbar + se * float(ndtri(pdraw))
                    mu[j] = min(max(cand, pp.lower + 1e-9), pp.upper - 1e-9)
            else:
                mu[j] = xbar + se * rng.standard_normal()
            u[j] = _u_from_mu(mu[j], pp)
            sse = float(((xj - mu[j]) ** 2).sum())
            if sse > 1e-300:
                vj = v[j]
                g_cur = _scale_target(vj, sse, n)
                for _ in range(2):
                    v_new = vj + math.exp(ls_gv[j]) * rng.standard_normal()
                    g_new = _scale_target(v_new, sse, n)
                    logr = g_new - g_cur
                    if math.log(rng.random()) < logr:
                        vj, g_cur = v_new, g_new
                    if gamma:
                        ls_gv[j] += gamma * (math.exp(min(logr, 0.0)) - 0.44)
                v[j] = vj
                sigma[j] = math.exp(vj)
            z[:, j] = (xj - mu[j]) / sigma[j]

        for j in range(d):
            if not pps[j].bounded:
                worst = max(abs(float(mu[j])), float(np.abs(x[:, j]).max()))
                if worst > runaway_limit:
                    raise RunawayError(
                        f"{pps[j].name} exceeded |{runaway_limit:g}| while sampling"
                    )

        if tally:
            k = i - warmup
            out_mu[k] = mu
            out_sigma[k] = sigma
            out_x[k] = x
            out_ll[k] = ll

    for key in acc:
        acc[key] /= max(kept, 1)
    return {"mu": out_mu, "sigma": out_sigma, "x": out_x, "ll": out_ll, "accept": acc}


@dataclass
class HierPosterior:
    """Posterior draws plus the bookkeeping needed to judge and reuse them."""

    model: str
    param_names: tuple[str, ...]
    subject_ids: tuple[str, ...]
    mu: np.ndarray  # [chains, kept, d]
    sigma: np.ndarray  # [chains, kept, d]
    subj: np.ndarray  # [chains, kept, N, d]
    subj_loglik: np.ndarray  # [chains, kept, N]
    n_rows: np.ndarray  # likelihood rows per subject
    accept: dict
    diagnostics: dict
    converged: bool
    warnings: list[str]
    config: dict
    ident: dict | None = None

    @property
    def n_chains(self) -> int:
        return self.mu.shape[0]

    @property
    def n_kept(self) -> int:
        return self.mu.shape[1]

    def mu_draws(self) -> np.ndarray:
        return self.mu.reshape(-1, self.mu.shape[-1])

    def sigma_draws(self) -> np.ndarray:
        return self.sigma.reshape(-1, self.sigma.shape[-1])

    def subject_draws(self) -> np.ndarray:
        return self.subj.reshape(-1, *self.subj.shape[2:])

    def loglik_draws(self) -> np.ndarray:
        return self.subj_loglik.reshape(-1, self.subj_loglik.shape[-1])

    def summary(self) -> dict[str, dict]:
        return dict(self.diagnostics)

    def group_mean(self, name: str) -> float:
        j = self.param_names.index(name)
        return float(self.mu[:, :, j].mean())

    def group_ci(self, name: str, level: float = 0.9) -> tuple[float, float]:
        j = self.param_names.index(name)
        tail = 100.0 * (1.0 - level) / 2.0
        lo, hi = np.percentile(self.mu[:, :, j], [tail, 100.0 - tail])
        return float(lo), float(hi)

    def to_dict(self) -> dict:
        """JSON-ready report without the raw draws."""
        return {
            "model": self.model,
            "param_names": list(self.param_names),
            "n_subjects": len(self.subject_ids),
            "chains": self.n_chains,
            "kept_per_chain": self.n_kept,
            "summary": {
                k: {
                    **{kk: vv for kk, vv in s.items() if kk != "ci90"},
                    "ci90": list(s["ci90"]),
                }
                for k, s in self.diagnostics.items()
            },
            "accept": {k: list(np.round(v, 4)) for k, v in self.accept.items()},
            "converged": self.converged,
            "warnings": list(self.warnings),
            "ident": self.ident,
            "config": self.config,
        }


def _golden_scalar(f, lo: float, hi: float, iters: int = 30) -> tuple[float, float]:
    """Maximize a unimodal scalar function on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d_ = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d_)
    for _ in range(iters):
        if fc >= fd:
            b, d_, fd = d_, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + GOLDEN * (b - a)
            fd = f(d_)
    return (c, fc) if fc >= fd else (d_, fd)


def _pooled_start(ctx, prior: HierPrior, sweeps: int = 3) -> np.ndarray:
    """Coarse shared-parameter optimum used to seed every chain."""
    d = prior.d
    theta = np.zeros(d)
    for j, pp in enumerate(prior.params):
        if pp.bounded:
            theta[j] = 0.5 * (pp.lower + pp.upper)
    for _ in range(sweeps):
        for j, pp in enumerate(prior.params):
            if pp.bounded:
                lo, hi = pp.lower + 1e-6, pp.upper - 1e-6
            else:
                lo, hi = theta[j] - 15.0, theta[j] + 15.0

            def f(val: float) -> float:
                t = theta.copy()
                t[j] = val
                return ctx.total_loglik(t)

            theta[j], _ = _golden_scalar(f, lo, hi, iters=25)

    # Coordinate passes stall in curved valleys where two parameters trade
    # off, so finish with a joint simplex search from the coarse point.
    def neg(t: np.ndarray) -> float:
        for j, pp in enumerate(prior.params):
            if pp.bounded and not (pp.lower <= t[j] <= pp.upper):
                return 1e12 + float(np.square(t).sum())
        v = ctx.total_loglik(np.asarray(t, dtype=float))
        return 1e12 if not np.isfinite(v) else -v

    res = minimize(
        neg,
        theta,
        method="Nelder-Mead",
        options={"maxiter": 400 * prior.d, "xatol": 1e-5, "fatol": 1e-6},
    )
    if np.isfinite(res.fun) and -res.fun > ctx.total_loglik(theta):
        theta = np.asarray(res.x, dtype=float)
        for j, pp in enumerate(prior.params):
            if pp.bounded:
                theta[j] = min(max(theta[j], pp.lower + 1e-6), pp.upper - 1e-6)
    return theta


def fit_hier_ctx(
    ctx,
    prior: HierPrior,
    *,
    chains: int = 4,
    iters: int = 1000,
    warmup: int = 500,
    seed: int = 0,
    n_jobs: int | None = None,
    runaway_limit: float = 1e3,
    ident: dict | None = None,
    model_label: str | None = None,
    extra_config: dict | None = None,
) -> HierPosterior:
    """Run the sampler against any object exposing the context protocol."""
    if prior.d != ctx.d:
        raise DomainError("prior dimensionality does not match the model")
    if warmup >= iters:
        raise DomainError("warmup must leave at least one kept iteration")
    t0 = time.perf_counter()
    theta0 = _pooled_start(ctx, prior)
    seqs = SeedSequence(seed).spawn(chains)

    def one(args):
        return _run_chain(ctx, prior, iters, warmup, *args)

    jobs = [(seqs[c], theta0, runaway_limit) for c in range(chains)]
    if n_jobs is None:
        n_jobs = chains
    if n_jobs > 1 and chains > 1:
        # Kernels drop the interpreter lock, so threads buy real parallelism.
        with ThreadPoolExecutor(max_workers=min(n_jobs, chains)) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(job) for job in jobs]

    mu = np.stack([r["mu"] for r in results])
    sigma = np.stack([r["sigma"] for r in results])
    subj = np.stack([r["x"] for r in results])
    ll = np.stack([r["ll"] for r in results])
    accept = {
        k: np.mean([r["accept"][k] for r in results], axis=0)
        for k in results[0]["accept"]
    }

    names = tuple(p.name for p in prior.params)
    diagnostics: dict[str, dict] = {}
    warnings: list[str] = []
    converged = True
    for j, name in enumerate(names):
        for kind, draws in (("mu", mu[:, :, j]), ("sigma", sigma[:, :, j])):
            key = f"{kind}[{name}]"
            s = scalar_summary(draws)
            diagnostics[key] = s
            if s["rhat"] > 1.05:
                warnings.append(f"{key}: split R-hat {s['rhat']:.3f} exceeds 1.05")
                converged = False
            if s["ess"] < 100.0:
                warnings.append(f"{key}: ESS {s['ess']:.0f} below 100")
                converged = False

    config = {
        "chains": chains,
        "iters": iters,
        "warmup": warmup,
        "seed": seed,
        "prior": prior.to_dict(),
        "pooled_start": [float(t) for t in theta0],
        "elapsed_s": round(time.perf_counter() - t0, 3),
    }
    if extra_config:
        config.update(extra_config)
    return HierPosterior(
        model=model_label or "custom",
        param_names=names,
        subject_ids=tuple(getattr(ctx, "subject_ids", range(ctx.n_subjects))),
        mu=mu,
        sigma=sigma,
        subj=subj,
        subj_loglik=ll,
        n_rows=np.asarray(getattr(ctx, "n_rows", np.ones(ctx.n_subjects, dtype=np.int64))),
        accept=accept,
        diagnostics=diagnostics,
        converged=converged,
        warnings=warnings,
        config=config,
        ident=ident,
    )


def fit_hier(
    model: Model | str,
    dataset: Dataset,
    *,
    prior: HierPrior | None = None,
    learner_cfg: LearnerConfig | None = None,
    chains: int = 4,
    iters: int = 1000,
    warmup: int = 500,
    seed: int = 0,
    n_jobs: int | None = None,
    check_ident: bool = True,
    runaway_limit: float = 1e3,
) -> HierPosterior:
    """Fit a choice model's subject parameters hierarchically to a dataset."""
    model = Model(model)
    if model is Model.QCARE:
        raise DomainError("use fit_qcare; alpha is a per-subject estimate")
    prior = prior or default_prior(model)
    cfg = learner_cfg or default_learner(dataset.env_spec)
    ctx = build_context(model, dataset, cfg)

    ident = None
    if check_ident:
        rep = dataset_ident_report(model, dataset, cfg)
        ident = {
            "identifiable": rep["identifiable"],
            "rank_deficient_subjects": rep["rank_deficient_subjects"],
        }

    post = fit_hier_ctx(
        ctx,
        prior,
        chains=chains,
        iters=iters,
        warmup=warmup,
        seed=seed,
        n_jobs=n_jobs,
        runaway_limit=runaway_limit,
        ident=ident,
        model_label=model.value,
        extra_config={"learner": cfg.to_dict(), "agent_label": dataset.agent_label},
    )
    if ident is not None and not ident["identifiable"]:
        post.warnings.append(
            "design matrix is rank deficient for every subject; "
            "parameters are not separately identifiable"
        )
    return post


def map_fit(
    model: Model | str,
    dataset: Dataset,
    *,
    prior: HierPrior | None = None,
    learner_cfg: LearnerConfig | None = None,
    restarts: int = 2,
    max_sweeps: int = 40,
    tol: float = 1e-7,
    seed: int = 0,
) -> dict:
    """Posterior-mode fit by cyclic coordinate ascent; smoke-check companion
    to the full sampler, sharing its priors."""
    model = Model(model)
    prior = prior or default_prior(model)
    cfg = learner_cfg or default_learner(dataset.env_spec)
    ctx = build_context(model, dataset, cfg)
    return _map_ctx(ctx, prior, restarts, max_sweeps, tol, seed, model.value)


def _map_ctx(ctx, prior, restarts, max_sweeps, tol, seed, label):
    n, d = ctx.n_subjects, ctx.d
    pps = prior.params
    rng = default_rng(SeedSequence(seed, spawn_key=(77,)))
    theta0 = _pooled_start(ctx, prior)

    def penalty_sigma(sig: np.ndarray) -> float:
        return float(np.sum(LOG_2_OVER_PI - np.log1p(sig * sig)))

    def target(mu, sigma, x, ll=None):
        if ll is None:
            ll = ctx.loglik(x)
        z = (x - mu) / sigma
        return (
            float(ll.sum())
            - 0.5 * float((z * z).sum())
            - n * float(np.log(sigma).sum())
            + penalty_sigma(sigma)
        )

    best = None
    for r in range(restarts):
        mu = theta0 + (0.0 if r == 0 else 0.3 * rng.standard_normal(d))
        for j, pp in enumerate(pps):
            if pp.bounded:
                mu[j] = min(max(mu[j], pp.lower + 1e-6), pp.upper - 1e-6)
        sigma = np.full(d, 0.5)
        x = np.tile(mu, (n, 1))
        cur = target(mu, sigma, x)
        sweeps = 0
        for sweep in range(max_sweeps):
            sweeps = sweep + 1
            prev = cur
            for j, pp in enumerate(pps):
                # Subject column: batched golden section in natural space.
                lo = np.minimum(x[:, j] - 1.0, mu[j] - 6.0 * sigma[j])
                hi = np.maximum(x[:, j] + 1.0, mu[j] + 6.0 * sigma[j])

                def colf(vals: np.ndarray) -> np.ndarray:
                    xp = x.copy()
                    xp[:, j] = vals
                    zz = (vals - mu[j]) / sigma[j]
                    return ctx.loglik(xp) - 0.5 * zz * zz

                base = colf(x[:, j])
                cand, fcand = _golden_vec_simple(colf, lo, hi, iters=28)
                better = fcand > base
                x[better, j] = cand[better]

                # Group mean: flat prior makes the optimum the plain average.
                mu[j] = float(x[:, j].mean())
                if pp.bounded:
                    mu[j] = min(max(mu[j], pp.lower + 1e-9), pp.upper - 1e-9)

                # Group scale on the log axis.
                sse = float(((x[:, j] - mu[j]) ** 2).sum())

                def fv(v: float) -> float:
                    s = math.exp(v)
                    return (
                        -0.5 * sse / (s * s)
                        - n * v
                        + LOG_2_OVER_PI
                        - math.log1p(s * s)
                    )

                vbest, _ = _golden_scalar(fv, math.log(1e-3), math.log(50.0), iters=40)
                sigma[j] = math.exp(vbest)
            cur = target(mu, sigma, x)
            if cur - prev < tol * (1.0 + abs(prev)):
                break
        if best is None or cur > best["target"]:
            best = {
                "model": label,
                "param_names": [p.name for p in pps],
                "mu": mu.copy(),
                "sigma": sigma.copy(),
                "x": x.copy(),
                "target": cur,
                "sweeps": sweeps,
            }
    return best


def _golden_vec_simple(f, lo: np.ndarray, hi: np.ndarray, iters: int = 28):
    """Batched golden-section maximize; two evaluations per step for clarity."""
    a, b = lo.astype(np.float64).copy(), hi.astype(np.float64).copy()
    for _ in range(iters):
        c = b - GOLDEN * (b - a)
        d_ = a + GOLDEN * (b - a)
        fc, fd = f(c), f(d_)
        left = fc >= fd
        b = np.where(left, d_, b)
        a = np.where(left, a, c)
    mid = 0.5 * (a + b)
    return mid, f(mid)
