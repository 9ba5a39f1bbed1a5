"""Data-generating processes and the Monte-Carlo study runner.

Covariates are shared across all schedules: each pair draws a bivariate
normal z with unit variances and correlation 0.25, and the special
regressor is x1 = z'b + e with b = (0.5, -0.5) and standard-normal e,
so the true conditional density of x1 given z is phi(x1 - z'b).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .design import PairIndexing
from .estimator import FitOptions, fit
from .inference import (
    ci_effects,
    ci_slopes,
    recover_support,
    similarity,
    test_heterogeneity,
    test_sparse,
    zeta_contrast,
)
from .network import DirectedNetwork
from .smoothing import SmoothingPlan, select_bandwidth
from .weighted import ci_weighted, fit_weighted

COVARIATE_B = np.array([0.5, -0.5])
COVARIATE_CORR = 0.25

# Named noise menus; mixture parameters are (weights, means, variances).
NOISES = {
    "normal": ("normal", 1.0),
    "normal25": ("normal", 0.25),
    "logistic": ("logistic", 0.5),
    "logistic25": ("logistic", 0.25),
    "mnorm1": ("mixnorm", (0.75, 0.25), (-0.3, 0.9), (0.91, 0.19)),
    "mnorm2": ("mixnorm", (0.75, 0.25), (-0.3, 0.9), (0.5, 0.5)),
    "uniform-hetero": ("uniform-hetero",),
}


@dataclass
class DgpSpec:
    n: int
    schedule: str = "consistency"       # see param_schedule
    knob: float = 0.0                   # rho for the rho-indexed schedules
    noise: str = "normal"
    eta: tuple = (-0.5, 0.5)
    levels: tuple = tuple(range(7))     # weighted schedule only
    omega: tuple = tuple(0.25 * l for l in range(6))

    @property
    def weighted(self) -> bool:
        return self.schedule == "weighted"


def param_schedule(kind: str, n: int, knob: float = 0.0):
    """True (alpha0, beta0) vectors; beta0[n-1] is always the pinned zero."""
    i = np.arange(1, n + 1, dtype=np.float64)
    if kind == "consistency":
        ln = np.log(n)
        alpha = -0.25 * ln + (i - 1) * (0.25 * ln + knob * ln) / (n - 1)
    elif kind == "sparse":
        alpha = np.where(i <= knob * n, -2.0 * i / n, 0.0)
    elif kind == "support":
        d = n // 15
        head = np.array([-1.0, 2.0, -2.0, 1.5, -3.0])
        alpha = np.concatenate([head, -1.5 * np.ones(d), np.zeros(n - d - 5)])
    elif kind == "heterogeneity":
        alpha = -knob * i / n
    elif kind == "weighted":
        alpha = np.full(n, -0.3)
        alpha[-1] = 0.0
    else:
        raise ValueError(f"unknown schedule {kind!r}")
    if kind == "support":
        d = n // 15
        head = np.array([-1.0, 2.0, -2.0, 1.5, -3.0])
        beta = np.concatenate([np.zeros(5), head, -1.5 * np.ones(d),
                               np.zeros(n - d - 10)])
    else:
        beta = alpha.copy()
    beta[-1] = 0.0
    return alpha, beta


def draw_noise(noise: str, size: int, rng: np.random.Generator,
               z: np.ndarray | None = None) -> np.ndarray:
    spec = NOISES[noise]
    kind = spec[0]
    if kind == "normal":
        return rng.normal(0.0, np.sqrt(spec[1]), size)
    if kind == "logistic":
        return rng.logistic(0.0, spec[1], size)
    if kind == "mixnorm":
        weights, means, variances = spec[1], spec[2], spec[3]
        comp = rng.random(size) >= weights[0]
        mu = np.where(comp, means[1], means[0])
        sd = np.where(comp, np.sqrt(variances[1]), np.sqrt(variances[0]))
        return rng.normal(mu, sd)
    if kind == "uniform-hetero":
        if z is None or z.shape[1] < 2:
            raise ValueError("uniform-hetero noise needs two z columns")
        half = np.where(z[:, 0] * z[:, 1] > 0.0, 0.5, 1.0)
        return rng.uniform(-1.0, 1.0, size) * half
    raise ValueError(f"unknown noise {noise!r}")


def generate_network(spec: DgpSpec, seed) -> tuple[DirectedNetwork, dict]:
    """Simulate one network; also returns the truth record."""
    n = spec.n
    idx = PairIndexing(n)
    N = idx.row_count
    rng = np.random.default_rng(seed)
    cov = np.array([[1.0, COVARIATE_CORR], [COVARIATE_CORR, 1.0]])
    z = rng.multivariate_normal(np.zeros(2), cov, size=N)
    x1 = z @ COVARIATE_B + rng.standard_normal(N)
    alpha, beta = param_schedule(spec.schedule, n, spec.knob)
    eta = np.asarray(spec.eta, dtype=np.float64)
    index = alpha[idx.senders - 1] + beta[idx.receivers - 1] + x1 + z @ eta
    eps = draw_noise(spec.noise, N, rng, z=z)
    latent = index - eps
    if spec.weighted:
        omega = np.asarray(spec.omega, dtype=np.float64)
        levels = np.asarray(spec.levels, dtype=np.float64)
        a = levels[np.searchsorted(omega, latent, side="left")]
    else:
        omega = None
        a = (latent > 0.0).astype(np.float64)
    net = DirectedNetwork(idx=idx, a=a, x1=x1, z=z)
    f_true = scipy.stats.norm.pdf(x1 - z @ COVARIATE_B)
    truth = {"alpha": alpha, "beta": beta, "eta": eta, "omega": omega,
             "f_true": f_true, "index": index}
    return net, truth


@dataclass
class McReport:
    study: str
    spec: DgpSpec
    reps: int
    failures: int
    seconds: float
    bandwidth: float | None = None
    targets: dict = field(default_factory=dict)   # name -> Bias/SD/CP
    tests: dict = field(default_factory=dict)     # name -> size/power
    support: dict = field(default_factory=dict)   # M/FP/FN summaries

    def to_dict(self) -> dict:
        return {
            "study": self.study, "n": self.spec.n, "schedule": self.spec.schedule,
            "knob": self.spec.knob, "noise": self.spec.noise, "reps": self.reps,
            "failures": self.failures, "seconds": self.seconds,
            "bandwidth": self.bandwidth, "targets": self.targets,
            "tests": self.tests, "support": self.support,
        }


#: Undersmoothing multiplier applied to the selected bandwidth inside the
#: Monte-Carlo harness.  The shift-matching loss targets density accuracy,
#: whose optimal bandwidth leaves a first-order smoothing bias in the
#: downstream least-squares estimates; valid inference needs that bias to
#: be an order of magnitude below the sampling noise, which a modest
#: undersmoothing of the density restores.  The value was calibrated on
#: the consistency design at n=50; anything in [0.80, 0.90] behaves
#: similarly.
UNDERSMOOTH = 0.85


def _shared_bandwidth(spec: DgpSpec, seed: int, options: FitOptions) -> float:
    """Select the bandwidth once, on a pilot replication, for reuse.

    Within a study every replication shares the covariate law, so the
    selected bandwidth is stable across replications; selecting it once
    keeps large studies inside their runtime budget.  The selected value
    is shrunk by ``UNDERSMOOTH`` to keep smoothing bias second-order.
    """
    if options.bandwidth is not None:
        return float(options.bandwidth)
    net, _ = generate_network(spec, [seed, 0])
    plan = SmoothingPlan.build(net.x1, zc=net.z, kernel=options.kernel)
    h, _, _ = select_bandwidth(plan, net.x1, floor=options.m_floor)
    return UNDERSMOOTH * h


def _summary(values: np.ndarray, truth: float, covered: np.ndarray) -> dict:
    return {
        "truth": float(truth),
        "bias": float(np.mean(values) - truth),
        "sd": float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
        "cp": float(100.0 * np.mean(covered)),
    }


def mc_estimation(spec: DgpSpec, reps: int, seed: int = 0, level: float = 0.05,
                  options: FitOptions | None = None) -> McReport:
    """Bias/SD/CP study for eta, selected alpha coordinates, and contrasts."""
    t0 = time.time()
    opts = options or FitOptions(sign=1)
    n = spec.n
    h = _shared_bandwidth(spec, seed, opts)
    opts.bandwidth = h
    alpha0, beta0, eta0 = *param_schedule(spec.schedule, n, spec.knob), \
        np.asarray(spec.eta)
    coords = {"alpha_1": 0, f"alpha_{n // 2}": n // 2 - 1, f"alpha_{n}": n - 1}
    contrasts = {f"alpha_{n // 5}_{4 * n // 5}": (n // 5, 4 * n // 5),
                 f"alpha_{n // 2}_{n // 2 + 1}": (n // 2, n // 2 + 1)}
    z975 = scipy.stats.norm.ppf(1.0 - level / 2.0)
    rows = {k: [] for k in list(coords) + list(contrasts)
            + [f"eta_{j + 1}" for j in range(eta0.size)]}
    cover = {k: [] for k in rows}
    failures = 0
    for r in range(reps):
        net, _ = generate_network(spec, [seed, r])
        try:
            f = fit(net, opts)
        except Exception:
            failures += 1
            continue
        lo_t, hi_t = ci_effects(f, level)
        for name, c in coords.items():
            rows[name].append(f.theta[c])
            cover[name].append(lo_t[c] <= alpha0[c] <= hi_t[c])
        for name, (i, j) in contrasts.items():
            est = f.theta[i - 1] - f.theta[j - 1]
            half = z975 * np.sqrt(zeta_contrast(f, i, j) / (n - 1))
            truth = alpha0[i - 1] - alpha0[j - 1]
            rows[name].append(est)
            cover[name].append(est - half <= truth <= est + half)
        lo_e, hi_e = ci_slopes(f, level)
        for j in range(eta0.size):
            rows[f"eta_{j + 1}"].append(f.eta[j])
            cover[f"eta_{j + 1}"].append(lo_e[j] <= eta0[j] <= hi_e[j])
    targets = {}
    truth_map = {**{k: alpha0[c] for k, c in coords.items()},
                 **{k: alpha0[i - 1] - alpha0[j - 1]
                    for k, (i, j) in contrasts.items()},
                 **{f"eta_{j + 1}": eta0[j] for j in range(eta0.size)}}
    for name in rows:
        if rows[name]:
            targets[name] = _summary(np.asarray(rows[name]), truth_map[name],
                                     np.asarray(cover[name]))
    return McReport(study="estimation", spec=spec, reps=reps, failures=failures,
                    seconds=time.time() - t0, bandwidth=h, targets=targets)


def mc_sparse_test(spec: DgpSpec, reps: int, seed: int = 0, B: int = 2000,
                   level: float = 0.05, block: str = "alpha",
                   options: FitOptions | None = None) -> McReport:
    """Empirical rejection rate of the sparse-signal test."""
    t0 = time.time()
    opts = options or FitOptions(sign=1)
    h = _shared_bandwidth(spec, seed, opts)
    opts.bandwidth = h
    rejections = []
    failures = 0
    for r in range(reps):
        net, _ = generate_network(spec, [seed, r])
        try:
            f = fit(net, opts)
            rep = test_sparse(f, block=block, B=B, seed=int(1_000_000 + r),
                              level=level)
        except Exception:
            failures += 1
            continue
        rejections.append(rep.reject)
    rate = float(np.mean(rejections)) if rejections else float("nan")
    return McReport(study="sparse-test", spec=spec, reps=reps, failures=failures,
                    seconds=time.time() - t0, bandwidth=h,
                    tests={f"sparse-{block}": {"reject_rate": rate, "B": B,
                                               "level": level}})


def mc_support(spec: DgpSpec, reps: int, seed: int = 0, t: float = 2.0,
               options: FitOptions | None = None) -> McReport:
    """Support-recovery accuracy for the sender-effect block."""
    t0 = time.time()
    opts = options or FitOptions(sign=1)
    h = _shared_bandwidth(spec, seed, opts)
    opts.bandwidth = h
    alpha0, beta0 = param_schedule(spec.schedule, spec.n, spec.knob)
    true_a = np.flatnonzero(alpha0 != 0.0) + 1
    true_b = np.flatnonzero(beta0 != 0.0) + 1
    stats = {"alpha": {"m": [], "fp": [], "fn": [], "exact": []},
             "beta": {"m": [], "fp": [], "fn": [], "exact": []}}
    failures = 0
    for r in range(reps):
        net, _ = generate_network(spec, [seed, r])
        try:
            f = fit(net, opts)
            est = recover_support(f, t=t)
        except Exception:
            failures += 1
            continue
        for block, shat, s0 in (("alpha", est.alpha_nodes, true_a),
                                ("beta", est.beta_nodes, true_b)):
            sh, s0s = set(shat.tolist()), set(s0.tolist())
            stats[block]["m"].append(similarity(shat, s0))
            stats[block]["fp"].append(len(sh - s0s))
            stats[block]["fn"].append(len(s0s - sh))
            stats[block]["exact"].append(sh == s0s)
    support = {}
    for block, d in stats.items():
        if d["m"]:
            support[block] = {
                "m_mean": float(np.mean(d["m"])),
                "m_sd": float(np.std(d["m"], ddof=1)) if len(d["m"]) > 1 else 0.0,
                "fp_mean": float(np.mean(d["fp"])),
                "fn_mean": float(np.mean(d["fn"])),
                "exact_rate": float(np.mean(d["exact"])),
            }
    return McReport(study="support", spec=spec, reps=reps, failures=failures,
                    seconds=time.time() - t0, bandwidth=h, support=support)


def mc_heterogeneity(spec: DgpSpec, reps: int, seed: int = 0, B: int = 2000,
                     level: float = 0.05, m_tilde: int = 0, block: str = "alpha",
                     options: FitOptions | None = None) -> McReport:
    """Empirical rejection rate of the degree-heterogeneity test."""
    t0 = time.time()
    opts = options or FitOptions(sign=1)
    h = _shared_bandwidth(spec, seed, opts)
    opts.bandwidth = h
    rejections = []
    failures = 0
    for r in range(reps):
        net, _ = generate_network(spec, [seed, r])
        try:
            f = fit(net, opts)
            rep = test_heterogeneity(f, block=block, m_tilde=m_tilde, B=B,
                                     seed=int(1_000_000 + r), level=level)
        except Exception:
            failures += 1
            continue
        rejections.append(rep.reject)
    rate = float(np.mean(rejections)) if rejections else float("nan")
    key = f"heterogeneity-{block}-m{m_tilde}"
    return McReport(study="heterogeneity-test", spec=spec, reps=reps,
                    failures=failures, seconds=time.time() - t0, bandwidth=h,
                    tests={key: {"reject_rate": rate, "B": B, "level": level,
                                 "m_tilde": m_tilde}})


def mc_weighted(spec: DgpSpec, reps: int, seed: int = 0, level: float = 0.05,
                options: FitOptions | None = None) -> McReport:
    """Bias/SD/CP study for the ordered-threshold model."""
    t0 = time.time()
    opts = options or FitOptions(sign=1)
    h = _shared_bandwidth(spec, seed, opts)
    opts.bandwidth = h
    omega0 = np.asarray(spec.omega, dtype=np.float64)
    eta0 = np.asarray(spec.eta, dtype=np.float64)
    alpha0, _ = param_schedule(spec.schedule, spec.n, spec.knob)
    names = ([f"omega_{l + 1}" for l in range(omega0.size)]
             + [f"eta_{j + 1}" for j in range(eta0.size)]
             + ["alpha_1"])
    rows = {k: [] for k in names}
    cover = {k: [] for k in names}
    failures = 0
    for r in range(reps):
        net, _ = generate_network(spec, [seed, r])
        try:
            f = fit_weighted(net, spec.levels, opts)
            cis = ci_weighted(f, level)
        except Exception:
            failures += 1
            continue
        for l in range(omega0.size):
            rows[f"omega_{l + 1}"].append(f.omega[l])
            cover[f"omega_{l + 1}"].append(
                cis["omega"][0][l] <= omega0[l] <= cis["omega"][1][l])
        for j in range(eta0.size):
            rows[f"eta_{j + 1}"].append(f.eta[j])
            cover[f"eta_{j + 1}"].append(
                cis["eta"][0][j] <= eta0[j] <= cis["eta"][1][j])
        rows["alpha_1"].append(f.alpha[0])
        cover["alpha_1"].append(cis["alpha"][0][0] <= alpha0[0] <= cis["alpha"][1][0])
    truth_map = {**{f"omega_{l + 1}": omega0[l] for l in range(omega0.size)},
                 **{f"eta_{j + 1}": eta0[j] for j in range(eta0.size)},
                 "alpha_1": alpha0[0]}
    targets = {k: _summary(np.asarray(rows[k]), truth_map[k], np.asarray(cover[k]))
               for k in names if rows[k]}
    return McReport(study="weighted", spec=spec, reps=reps, failures=failures,
                    seconds=time.time() - t0, bandwidth=h, targets=targets)


def run_mc(spec: DgpSpec, study: str, reps: int, seed: int = 0,
           **kwargs) -> McReport:
    """Dispatch a named Monte-Carlo study; deterministic given the seed."""
    runners = {
        "estimation": mc_estimation,
        "sparse-test": mc_sparse_test,
        "support": mc_support,
        "heterogeneity-test": mc_heterogeneity,
        "weighted": mc_weighted,
    }
    if study not in runners:
        raise ValueError(f"unknown study {study!r}; choose from {sorted(runners)}")
    return runners[study](spec, reps, seed=seed, **kwargs)
