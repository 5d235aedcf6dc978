"""Experiment drivers behind the CLI subcommands.

Every driver is a pure function of the config: random streams derive
from ``config.seed`` and fixed per-purpose keys, so reruns reproduce
their CSV output byte for byte.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import kernels as kern
from ..calculus import curl_magnitude, fd_divergence
from ..fields import (
    NoiseSpec,
    make_gradient_field,
    make_stream_field_2d,
    make_vectorpotential_field_3d,
    random_kernel_combo,
    sample_observations,
    sin_cos,
    sin_sin,
    PlaneWaves,
)
from ..geometry import generate_points, mesh_ratio
from ..gp import FitError, fit
from ..sampler import kl_sample, midpoint_grid, nystrom_eigensystem, sample_gaussian_field
from .norms import estimate_rate, grid_Lq_norm, predicted_rate, sampling_gamma

# stream keys, so each purpose owns an independent generator
_FIELD_KEY, _NOISE_KEY, _CERT_KEY, _CHEB_KEY, _SAMPLE_KEY, _KCHECK_KEY = range(6)


def _seed(config, *keys):
    return int(np.random.SeedSequence([config.seed, *keys]).generate_state(1)[0])


def build_field(config):
    """Target field and its smoothness beta (inf for trigonometric fields)."""
    kind = config.field.kind
    fc = config.field
    d = config.kernel.dim
    if kind == "stream2d":
        return make_stream_field_2d(sin_sin(fc.a, fc.b, fc.amplitude)), math.inf
    if kind == "vectorpotential3d":
        s = sin_sin(fc.a, fc.b, fc.amplitude)
        lifted = PlaneWaves.of([(a, w + (0.0,), p) for a, w, p in zip(s.amplitudes, s.frequencies, s.phases)])
        return make_vectorpotential_field_3d((PlaneWaves.of([]), PlaneWaves.of([]), lifted)), math.inf
    if kind == "gradient":
        phi = sin_cos(fc.a, fc.b, fc.amplitude)
        if d == 3:
            phi = PlaneWaves.of([(a, w + (0.0,), p) for a, w, p in zip(phi.amplitudes, phi.frequencies, phi.phases)])
        return make_gradient_field(phi, dim=d), math.inf
    if kind == "kernel_combo":
        kc = fc.kernel if fc.kernel is not None else config.kernel
        target_kernel = kc.build()
        combo = random_kernel_combo(target_kernel, fc.n_centers, config.domain,
                                    seed=_seed(config, _FIELD_KEY, fc.seed))
        return combo, target_kernel.tau
    raise ValueError(f"unknown field kind {kind!r}")


def auto_lambda(h, tau, beta):
    """Smoothing parameter with sqrt(lambda) = h^(tau - beta/2), beta capped at tau."""
    b = min(beta, tau)
    if math.isinf(b):
        raise ValueError("auto lambda needs a finite Sobolev order")
    return h ** (2.0 * tau - b)


@dataclass
class EvaluationSetup:
    points: np.ndarray
    weights: np.ndarray
    shape: tuple
    spacing: tuple


def evaluation_setup(config, margin):
    dom = config.domain.shrink(margin)
    n = config.evaluation.resolution
    pts = dom.grid(n)
    spacing = tuple((b - a) / (n - 1) for a, b in zip(dom.lower, dom.upper))
    weights = np.full(len(pts), dom.volume / len(pts))
    return EvaluationSetup(pts, weights, (n,) * dom.dim, spacing)


@dataclass
class LevelFit:
    level: int
    count: int
    sites: object
    stats: object
    model: Optional[object]
    regularization: float
    error: Optional[str] = None


def fit_level(config, kernel, target, beta, level, count):
    dom = config.domain
    sites = generate_points(config.points.kind, count, dom, seed=_seed(config, _FIELD_KEY, level))
    stats = mesh_ratio(sites, dom, config.evaluation.probe_resolution)
    noise = NoiseSpec(config.noise.sigma, _seed(config, _NOISE_KEY, config.noise.seed, level))
    obs = sample_observations(target, sites, noise)
    reg = config.fit.regularization
    if reg == "auto":
        reg = auto_lambda(stats.fill_distance, kernel.tau, beta)
    elif config.fit.mode == "posterior" and not reg:
        reg = config.noise.sigma ** 2
    try:
        model = fit(kernel, obs, config.fit.mode, float(reg))
        return LevelFit(level, count, sites, stats, model, float(reg))
    except FitError as exc:
        return LevelFit(level, count, sites, stats, None, float(reg), str(exc))


def norm_tag(q, s):
    qs = "inf" if q == math.inf else str(int(q))
    g = sampling_gamma(q)
    gs = "inf" if g == math.inf else str(int(g))
    return f"q={qs};s={s};gamma={gs}"


@dataclass
class ConvergenceRow:
    level: int
    N: int
    h: float
    q_sep: float
    rho: float
    norm_tag: str
    error: float
    observed_rate: float
    predicted_rate: float
    jitter: float


@dataclass
class ConvergenceResult:
    rows: list
    fitted_rates: dict
    tau: float
    beta: float
    regularizations: list = field(default_factory=list)
    final_model: Optional[object] = None

    def errors(self, tag):
        return [r.error for r in self.rows if r.norm_tag == tag]

    def monotone_trend(self):
        """Finest-level error below coarsest-level error for every norm."""
        tags = dict.fromkeys(r.norm_tag for r in self.rows)
        return {t: self.errors(t)[-1] < self.errors(t)[0] for t in tags}


def run_convergence(config):
    kernel = config.kernel.build()
    target, beta = build_field(config)
    ladder = list(config.points.ladder)
    fits = [fit_level(config, kernel, target, beta, lvl, n) for lvl, n in enumerate(ladder)]
    margin = config.evaluation.margin
    if margin == "auto":
        # coarse sets can have h comparable to the box; keep half the box
        side = min(b - a for a, b in zip(config.domain.lower, config.domain.upper))
        margin = min(fits[0].stats.fill_distance, 0.25 * side)
    ev = evaluation_setup(config, float(margin))
    truth = target(ev.points)
    d = kernel.dim
    rows, fitted = [], {}
    for q, s in config.evaluation.norm_pairs():
        tag = norm_tag(q, s)
        pred = predicted_rate(kernel.tau, beta, s, q, d)
        prev = None
        pairs = []
        for lf in fits:
            if lf.model is None:
                err = math.nan
            else:
                e = lf.model.predict_mean(ev.points) - truth
                err = grid_Lq_norm(e, ev.weights, q, s, ev.shape, ev.spacing)
            h = lf.stats.fill_distance
            obs_rate = math.nan
            if prev is not None and err > 0 and prev[1] > 0:
                obs_rate = math.log(err / prev[1]) / math.log(h / prev[0])
            rows.append(ConvergenceRow(
                lf.level, len(lf.sites), h, lf.stats.separation_radius, lf.stats.mesh_ratio,
                tag, err, obs_rate, pred, lf.model.jitter_used if lf.model else math.nan,
            ))
            prev = (h, err)
            pairs.append((h, err))
        try:
            fitted[tag] = estimate_rate(pairs).slope
        except ValueError:
            fitted[tag] = math.nan
    rows.sort(key=lambda r: (r.norm_tag, r.level))
    return ConvergenceResult(rows, fitted, kernel.tau, beta, [lf.regularization for lf in fits], fits[-1].model)


def _uniform_points(rng, dom, n):
    lo, hi = np.array(dom.lower), np.array(dom.upper)
    return lo + (hi - lo) * rng.random((n, dom.dim))


@dataclass
class CertificateReport:
    structure: str
    max_defect: float
    tolerance: float
    n_points: int

    @property
    def passed(self):
        return self.max_defect <= self.tolerance


def run_divergence_certificate(config):
    """Largest scaled finite-difference divergence (or curl) of the posterior mean.

    Scaling divides by ``max_j |y_j| * kappa``. The structure checked is
    the one the target field carries, so a diagonal kernel acts as a
    negative control.
    """
    kernel = config.kernel.build()
    target, beta = build_field(config)
    structure = target.structure
    if structure not in ("divergence_free", "curl_free"):
        structure = "curl_free" if kernel.mode == "curl_free" else "divergence_free"
    cc = config.certificate
    sites = generate_points(config.points.kind, cc.count, config.domain, seed=_seed(config, _CERT_KEY))
    noise = NoiseSpec(config.noise.sigma, _seed(config, _NOISE_KEY, config.noise.seed, _CERT_KEY))
    obs = sample_observations(target, sites, noise)
    reg = config.fit.regularization
    if reg == "auto":
        reg = auto_lambda(mesh_ratio(sites, config.domain).fill_distance, kernel.tau, beta)
    model = fit(kernel, obs, config.fit.mode, float(reg))
    rng = np.random.default_rng(_seed(config, _CERT_KEY, 1))
    pts = _uniform_points(rng, config.domain, cc.n_points)
    kappa = kernel.base.kappa
    step = 1e-4 / kappa
    scale = float(np.linalg.norm(obs.values, axis=1).max()) * kappa
    if structure == "divergence_free":
        defect = np.abs(fd_divergence(model.predict_mean, pts, step))
    else:
        defect = curl_magnitude(model.predict_mean, pts, step)
    return CertificateReport(structure, float(defect.max() / scale), cc.tolerance, cc.n_points)


@dataclass
class ChebyshevRow:
    point_id: int
    x: np.ndarray
    component: int
    eps: float
    variance: float
    empirical: float
    bound: float

    def passed(self, n_samples):
        return self.empirical <= self.bound + 3.0 / math.sqrt(n_samples)


def run_chebyshev_check(config, points=None):
    """Monte-Carlo tail frequencies of posterior samples against var/eps^2.

    Uses an interpolation fit regardless of ``config.fit``.
    """
    kernel = config.kernel.build()
    target, _ = build_field(config)
    cc = config.chebyshev
    sites = generate_points(config.points.kind, cc.count, config.domain, seed=_seed(config, _CHEB_KEY))
    obs = sample_observations(target, sites)
    model = fit(kernel, obs, "interpolate")
    if points is None:
        rng = np.random.default_rng(_seed(config, _CHEB_KEY, 1))
        points = _uniform_points(rng, config.domain, cc.n_points)
    rows = []
    for pid, x in enumerate(np.atleast_2d(points)):
        samples = sample_gaussian_field(model, x[None, :], cc.n_samples, _seed(config, _CHEB_KEY, 2, pid))
        vals = np.stack([s.values[0] for s in samples])
        mean = model.predict_mean(x)
        var = np.diag(model.predict_cov(x))
        for comp in range(kernel.dim):
            sd = math.sqrt(max(var[comp], 0.0))
            dev = np.abs(vals[:, comp] - mean[comp])
            for f in cc.eps_factors:
                eps = f * sd
                if eps <= 0:
                    # zero variance: every sample sits on the mean up to jitter
                    eps = f * 1e-6 * math.sqrt(kernel.base.alpha2) * kernel.base.kappa
                emp = float(np.mean(dev >= eps))
                rows.append(ChebyshevRow(pid, x, comp, eps, float(var[comp]), emp, float(var[comp]) / eps ** 2))
    return rows, model


@dataclass
class PowerMapResult:
    points: np.ndarray
    lambda_max: np.ndarray
    level_maxima: list
    counts: list
    fill_distances: list
    sup_bound_violations: Optional[int] = None
    sup_bound_ratio: Optional[float] = None


def run_power_map(config):
    """Power function over a full-domain grid at each ladder level.

    For kernel-combination targets built from the regression kernel, also
    checks ``|v(x) - I_X v(x)| <= sqrt(lambda_max(x)) * |v|_H`` on the grid.
    """
    kernel = config.kernel.build()
    target, _ = build_field(config)
    pts = config.domain.grid(config.powermap.resolution)
    maxima, counts, fills = [], [], []
    lam = None
    in_native = (
        target.kind == "kernel_combo"
        and target.params["kernel"] == kernel
    )
    violations, worst_ratio = (0, 0.0) if in_native else (None, None)
    for lvl, n in enumerate(config.points.ladder):
        sites = generate_points(config.points.kind, n, config.domain, seed=_seed(config, _FIELD_KEY, lvl))
        obs = sample_observations(target, sites)
        model = fit(kernel, obs, "interpolate")
        _, lam = model.power_function(pts)
        maxima.append(float(lam.max()))
        counts.append(len(sites))
        fills.append(mesh_ratio(sites, config.domain, config.evaluation.probe_resolution).fill_distance)
        if in_native:
            err = np.linalg.norm(target(pts) - model.predict_mean(pts), axis=1)
            bound = np.sqrt(np.maximum(lam, 0.0)) * target.native_norm
            slack = 1e-10 * math.sqrt(kernel.base.alpha2) * kernel.base.kappa * target.native_norm
            violations += int(np.sum(err > bound + slack))
            ok = bound > slack
            if np.any(ok):
                worst_ratio = max(worst_ratio, float(np.max(err[ok] / bound[ok])))
    return PowerMapResult(pts, lam, maxima, counts, fills, violations, worst_ratio)


def run_sample(config):
    """Draw fields on a cell-centre grid; returns (grid points, list of FieldSample)."""
    kernel = config.kernel.build()
    sc = config.sample
    grid = midpoint_grid(config.domain, sc.resolution)
    seed = _seed(config, _SAMPLE_KEY)
    if sc.source == "prior":
        return grid.points, sample_gaussian_field(kernel, grid, sc.n_samples, seed)
    if sc.source == "posterior":
        target, _ = build_field(config)
        sites = generate_points(config.points.kind, sc.count, config.domain, seed=_seed(config, _SAMPLE_KEY, 1))
        model = fit(kernel, sample_observations(target, sites), "interpolate")
        return grid.points, sample_gaussian_field(model, grid, sc.n_samples, seed)
    if sc.source == "kl":
        eigs = nystrom_eigensystem(kernel, grid, sc.truncation)
        return grid.points, [kl_sample(eigs, seed, index=i) for i in range(sc.n_samples)]
    raise ValueError(f"unknown sample source {sc.source!r}")


@dataclass
class CheckRow:
    check: str
    value: float
    tolerance: float

    @property
    def passed(self):
        return self.value <= self.tolerance


def _central_hessian(f, z, step):
    d = len(z)
    H = np.empty((d, d))
    for a in range(d):
        for b in range(d):
            ea, eb = np.eye(d)[a] * step, np.eye(d)[b] * step
            H[a, b] = (f(z + ea + eb) - f(z + ea - eb) - f(z - ea + eb) + f(z - ea - eb)) / (4 * step * step)
    return H


def fd_hessian(spec, z, step):
    """Central-difference Hessian of the base kernel at a single ``z``,
    Richardson-extrapolated over ``step`` and ``step / 2``."""
    zero = np.zeros(spec.dim)
    f = lambda p: float(kern.eval_scalar(spec, p, zero))
    return (4 * _central_hessian(f, z, step / 2) - _central_hessian(f, z, step)) / 3


def run_kernel_check(config, n_points=100):
    """Derivative and structure checks of the configured kernel."""
    kernel = config.kernel.build()
    spec = kernel.base
    rng = np.random.default_rng(_seed(config, _KCHECK_KEY))
    kappa, scale2 = spec.kappa, spec.alpha2 * spec.kappa ** 2
    z = rng.uniform(-1.5, 1.5, (n_points, spec.dim)) / kappa
    H = kern.hessian(spec, z)
    H_fd = np.stack([fd_hessian(spec, zi, 2.5e-4 / kappa) for zi in z])
    rows = [CheckRow("hessian_vs_fd_relative", float(np.abs(H - H_fd).max() / scale2), 1e-5)]
    lap_gap = np.abs(kern.laplacian(spec, z) - np.trace(H, axis1=1, axis2=2)).max()
    rows.append(CheckRow("laplacian_minus_trace", float(lap_gap / scale2), 1e-13))
    x = rng.uniform(0, 1, (n_points, spec.dim))
    y = rng.uniform(0, 1, (n_points, spec.dim))
    sym = np.abs(kernel(x, y) - np.swapaxes(kernel(y, x), -1, -2)).max()
    rows.append(CheckRow("symmetry", float(sym), 0.0))
    if kernel.mode != "diagonal" and spec.smoothness() >= 3:
        worst = 0.0
        for xi, yi in zip(x, y):
            for col in range(spec.dim):
                if kernel.mode == "divergence_free":
                    v = np.abs(kern.divergence_of_column(kernel, xi, yi, col))
                else:
                    v = np.abs(kern.curl_of_column(kernel, xi, yi, col))
                worst = max(worst, float(v.max()))
        label = "column_divergence" if kernel.mode == "divergence_free" else "column_curl"
        rows.append(CheckRow(label + "_scaled", worst / kern.structure_scale(kernel), 1e-5))
    return rows
