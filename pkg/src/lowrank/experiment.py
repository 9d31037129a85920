"""Experiment configuration and the per-seed pipeline the CLI drives."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

from .core import FactorPoint, GroundTruth, InsufficientDecay
from .descent import DescentConfig, Trajectory, default_step, run
from .diagnostics import (
    CurvatureEstimate,
    NoiseSummary,
    estimate_curvature,
    estimate_rip,
    fit_contraction,
    noise_summary,
)
from .losses import BernoulliData, LossModel, bernoulli_loss, quadratic_loss, sensing_loss
from .synth import (
    FRAMES,
    TruthSpec,
    bernoulli_bounds,
    gen_bernoulli,
    gen_gaussian_noise,
    gen_sensing,
    gen_truth,
    oracle_init,
    read_binary_csv,
    spectral_init,
)

MODELS = ("sym-quadratic", "asym-quadratic", "sensing", "bernoulli")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "sym-quadratic"
    n: int = 50
    q: Optional[int] = None
    r: int = 2
    sigma_min: float = 1.0
    kappa: float = 1.0
    frame: str = "haar"
    noise: float = 0.0
    alpha0: float = 0.0
    m: Optional[int] = None
    init: str = "oracle"
    phi: float = 0.05
    psi: float = math.inf
    eta: Optional[float] = None
    step_curvature: Optional[str] = None
    max_iter: int = 500
    align_tol: Optional[float] = None
    curvature_samples: int = 100
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "out"
    data_file: Optional[str] = None

    @property
    def symmetric(self) -> bool:
        return self.model == "sym-quadratic"

    @property
    def n_cols(self) -> int:
        return self.n if (self.q is None or self.symmetric) else self.q

    @property
    def curvature_mode(self) -> str:
        if self.step_curvature is not None:
            return self.step_curvature
        return "estimated" if self.model == "bernoulli" else "declared"


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"3"``, ``"0..9"`` (inclusive) or a comma list such as ``"1,4,7"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split(".."))
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        seeds = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError("seeds", f"cannot parse {text!r}; use N, A..B or a comma list") from None
    if not seeds:
        raise ConfigError("seeds", "no seeds given")
    if any(s < 0 for s in seeds):
        raise ConfigError("seeds", "seeds must be nonnegative")
    return seeds


_CASTS = {
    "model": str,
    "n": int,
    "q": int,
    "r": int,
    "sigma_min": float,
    "kappa": float,
    "frame": str,
    "noise": float,
    "alpha0": float,
    "m": int,
    "init": str,
    "phi": float,
    "psi": float,
    "eta": float,
    "step_curvature": str,
    "max_iter": int,
    "align_tol": float,
    "curvature_samples": int,
    "output_dir": str,
    "data_file": str,
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno} is not of the form 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in values:
            raise ConfigError(key, f"duplicate key on line {lineno}")
        if key == "seeds":
            values[key] = parse_seeds(value)
            continue
        if key not in _CASTS:
            raise ConfigError(key, "unknown key")
        try:
            values[key] = _CASTS[key](value)
        except ValueError:
            raise ConfigError(key, f"cannot parse {value!r} as {_CASTS[key].__name__}") from None
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    def need(cond, key, msg):
        if not cond:
            raise ConfigError(key, msg)

    need(cfg.model in MODELS, "model", f"must be one of {', '.join(MODELS)}")
    need(cfg.n >= 1, "n", "must be a positive integer")
    need(cfg.q is None or cfg.q >= 1, "q", "must be a positive integer")
    need(1 <= cfg.r <= min(cfg.n, cfg.n_cols), "r", "must lie in [1, min(n, q)]")
    need(cfg.sigma_min > 0 and math.isfinite(cfg.sigma_min), "sigma_min", "must be positive")
    need(cfg.kappa >= 1 and math.isfinite(cfg.kappa), "kappa", "must be >= 1")
    need(cfg.r > 1 or cfg.kappa == 1, "kappa", "must be 1 when r = 1")
    need(cfg.frame in FRAMES, "frame", f"must be one of {', '.join(FRAMES)}")
    need(cfg.noise >= 0 and math.isfinite(cfg.noise), "noise", "must be a nonnegative number")
    need(math.isfinite(cfg.alpha0), "alpha0", "must be finite")
    need(cfg.m is None or cfg.m >= 1, "m", "must be a positive integer")
    need(cfg.init in ("oracle", "spectral"), "init", "must be 'oracle' or 'spectral'")
    need(cfg.init == "oracle" or cfg.model in ("sensing", "bernoulli"), "init", "spectral init needs model sensing or bernoulli")
    need(cfg.phi >= 0 and math.isfinite(cfg.phi), "phi", "must be a nonnegative number")
    need(cfg.psi > 0, "psi", "must be positive")
    need(cfg.eta is None or (cfg.eta > 0 and math.isfinite(cfg.eta)), "eta", "must be positive")
    need(cfg.step_curvature in (None, "declared", "estimated"), "step_curvature", "must be 'declared' or 'estimated'")
    need(cfg.max_iter >= 1, "max_iter", "must be a positive integer")
    need(cfg.align_tol is None or cfg.align_tol > 0, "align_tol", "must be positive")
    need(cfg.curvature_samples >= 10, "curvature_samples", "must be at least 10")
    need(cfg.data_file is None or cfg.model == "bernoulli", "data_file", "only the bernoulli model reads external data")
    need(cfg.data_file is None or cfg.init == "spectral", "init", "external data has no truth; use init = spectral")


@dataclass
class Instance:
    loss: LossModel
    truth: Optional[GroundTruth]
    init: FactorPoint
    alpha: float
    beta: float
    eta: float
    rho: float
    curvature: CurvatureEstimate
    noise: Optional[NoiseSummary]
    delta_rip: Optional[float] = None


def build_instance(cfg: ExperimentConfig, seed: int) -> Instance:
    """Generate the problem, the initializer and the step size for one seed."""
    truth = None
    delta_rip = None
    if cfg.data_file is not None:
        Y = read_binary_csv(cfg.data_file)
        data = BernoulliData(Y, cfg.alpha0, 0.0, 0.0)
        init = spectral_init(data, cfg.r)
        # entry bounds from the spectral estimate stand in for the unknown truth
        M1, M2 = bernoulli_bounds(init.product(), cfg.alpha0)
        data = BernoulliData(Y, cfg.alpha0, M1, M2)
        loss = bernoulli_loss(data)
        anchor = init
    else:
        mode = "symmetric" if cfg.symmetric else "asymmetric"
        spec = TruthSpec(cfg.n, cfg.r, cfg.sigma_min, cfg.kappa, seed, None if cfg.symmetric else cfg.n_cols, cfg.frame)
        truth = gen_truth(spec, mode)
        n, q = truth.point.shape
        if cfg.model in ("sym-quadratic", "asym-quadratic"):
            E = gen_gaussian_noise(n, q, cfg.noise, seed, symmetric=cfg.symmetric)
            loss = quadratic_loss(truth.X, E)
        elif cfg.model == "sensing":
            m = cfg.m if cfg.m is not None else 20 * cfg.r * (n + q)
            data = gen_sensing(truth, m, cfg.noise, seed)
            delta_rip = estimate_rip(data, 2 * cfg.r, 100, seed)
            loss = sensing_loss(data, truth.X, min(delta_rip, 0.99))
        else:
            data = gen_bernoulli(truth, cfg.alpha0, seed)
            loss = bernoulli_loss(data)
        if cfg.init == "spectral":
            init = spectral_init(data, cfg.r)
        else:
            init = oracle_init(truth, cfg.phi, cfg.psi, seed)
        anchor = truth.point

    curvature = estimate_curvature(loss, anchor, cfg.curvature_samples, seed=seed)
    if cfg.curvature_mode == "estimated":
        alpha, beta = curvature.alpha_hat, curvature.beta_hat
    else:
        alpha, beta = loss.alpha, loss.beta
    if truth is not None:
        kappa, sigma_min = truth.kappa, truth.sigma_min
    else:
        kappa, sigma_min = cfg.kappa, cfg.sigma_min
    eta_thm, rho = default_step(alpha, beta, kappa, sigma_min)
    eta = cfg.eta if cfg.eta is not None else eta_thm
    noise = noise_summary(loss, truth) if truth is not None and loss.has_population else None
    return Instance(loss, truth, init, alpha, beta, eta, rho, curvature, noise, delta_rip)


TRAJ_COLUMNS = ("iter", "loss", "dist2", "dist_inf", "balance", "penalty_grad_norm", "grad_norm")
SUMMARY_COLUMNS = (
    "seed",
    "rho_hat",
    "floor",
    "theorem_rho",
    "alpha_hat",
    "beta_hat",
    "delta2",
    "delta_inf",
    "delta_inf_bar",
)


def run_seed(cfg: ExperimentConfig, seed: int) -> tuple[Trajectory, dict]:
    """Run one seed and return its trajectory and summary row."""
    return run_instance(cfg, build_instance(cfg, seed), seed)


def run_instance(cfg: ExperimentConfig, inst: Instance, seed: int) -> tuple[Trajectory, dict]:
    dcfg = DescentConfig(
        eta=inst.eta,
        max_iter=cfg.max_iter,
        seed=seed,
        record_alignment=inst.truth is not None,
        align_tol=cfg.align_tol,
        penalty_alpha=inst.alpha,
    )
    traj = run(inst.loss, inst.init, inst.truth, dcfg)
    try:
        fit = fit_contraction(traj)
        rho_hat, floor = fit.rho_hat, fit.floor
    except InsufficientDecay:
        rho_hat = floor = math.nan
    nz = inst.noise
    row = dict(
        seed=seed,
        rho_hat=rho_hat,
        floor=floor,
        theorem_rho=inst.rho,
        alpha_hat=inst.curvature.alpha_hat,
        beta_hat=inst.curvature.beta_hat,
        delta2=nz.delta2 if nz else math.nan,
        delta_inf=nz.delta_inf if nz else math.nan,
        delta_inf_bar=nz.delta_inf_bar if nz else math.nan,
    )
    return traj, row


def config_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(ExperimentConfig))

