"""Experiment configuration, read from TOML.

Sections: ``[kernel]``, ``[field]``, ``[fit]``, ``[noise]``, ``[points]``,
``[evaluation]``, plus optional per-subcommand sections ``[certificate]``,
``[chebyshev]``, ``[powermap]`` and ``[sample]``. See README for the keys.
"""
import math
import sys
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dfield
from typing import Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..geometry import Domain
from ..kernels import MatrixKernel, ScalarKernelSpec


class ConfigError(ValueError):
    pass


def _parse_q(q):
    if isinstance(q, str):
        if q.lower() in ("inf", "infinity"):
            return math.inf
        q = float(q)
    if q not in (1, 2, math.inf):
        raise ConfigError(f"norm exponent q must be 1, 2 or inf, got {q}")
    return math.inf if q == math.inf else int(q)


@dataclass
class KernelConfig:
    family: str = "matern"
    nu: Optional[float] = 2.5
    k: Optional[int] = None
    kappa: float = 3.0
    alpha2: float = 1.0
    mode: str = "divergence_free"
    dim: int = 2

    def build(self):
        nu = self.nu if self.family == "matern" else None
        k = self.k if self.family == "wendland" else None
        base = ScalarKernelSpec(self.family, self.dim, nu, k, self.kappa, self.alpha2)
        return MatrixKernel(base, self.mode)


@dataclass
class FieldConfig:
    """``kind`` is stream2d, gradient, vectorpotential3d or kernel_combo.

    Trigonometric fields use ``a`` and ``b`` as frequencies of the
    potential and ``amplitude`` as its scale. Kernel combinations draw
    ``n_centers`` centres and coefficients from ``seed``; ``kernel``
    overrides the regression kernel (for rough targets).
    """

    kind: str = "kernel_combo"
    a: float = 1.0
    b: float = 1.0
    amplitude: float = 1.0
    n_centers: int = 10
    seed: int = 1
    kernel: Optional[KernelConfig] = None


@dataclass
class FitConfig:
    mode: str = "interpolate"
    # sigma^2 for posterior, lambda for penalized; "auto" picks lambda from h
    regularization: Union[float, str] = 0.0


@dataclass
class NoiseConfig:
    sigma: float = 0.0
    seed: int = 7


@dataclass
class PointsConfig:
    kind: str = "grid"
    ladder: list = dfield(default_factory=lambda: [5, 9, 17, 33])


@dataclass
class EvaluationConfig:
    resolution: int = 60
    probe_resolution: int = 101
    # boundary margin; "auto" is the coarsest fill distance, capped at a quarter side
    margin: Union[float, str] = "auto"
    norms: list = dfield(default_factory=lambda: [[2, 0], ["inf", 0]])

    def norm_pairs(self):
        out = []
        for q, s in self.norms:
            s = int(s)
            if s not in (0, 1):
                raise ConfigError(f"derivative order s must be 0 or 1, got {s}")
            out.append((_parse_q(q), s))
        return out


@dataclass
class CertificateConfig:
    count: int = 9
    n_points: int = 200
    tolerance: float = 1e-5


@dataclass
class ChebyshevConfig:
    count: int = 5
    n_points: int = 5
    n_samples: int = 10000
    eps_factors: list = dfield(default_factory=lambda: [0.5, 1.0, 2.0])


@dataclass
class PowermapConfig:
    resolution: int = 41


@dataclass
class SampleConfig:
    source: str = "prior"  # prior | posterior | kl
    count: int = 5
    resolution: int = 10
    n_samples: int = 3
    truncation: Optional[int] = None


@dataclass
class ExperimentConfig:
    seed: int = 0
    domain_lower: Optional[list] = None
    domain_upper: Optional[list] = None
    kernel: KernelConfig = dfield(default_factory=KernelConfig)
    field: FieldConfig = dfield(default_factory=FieldConfig)
    fit: FitConfig = dfield(default_factory=FitConfig)
    noise: NoiseConfig = dfield(default_factory=NoiseConfig)
    points: PointsConfig = dfield(default_factory=PointsConfig)
    evaluation: EvaluationConfig = dfield(default_factory=EvaluationConfig)
    certificate: CertificateConfig = dfield(default_factory=CertificateConfig)
    chebyshev: ChebyshevConfig = dfield(default_factory=ChebyshevConfig)
    powermap: PowermapConfig = dfield(default_factory=PowermapConfig)
    sample: SampleConfig = dfield(default_factory=SampleConfig)

    def __post_init__(self):
        ladder = list(self.points.ladder)
        if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError(f"refinement ladder must be strictly increasing, got {ladder}")
        if self.fit.mode not in ("interpolate", "posterior", "penalized"):
            raise ConfigError(f"unknown fit mode {self.fit.mode!r}")
        reg = self.fit.regularization
        if isinstance(reg, str) and (reg != "auto" or self.fit.mode != "penalized"):
            raise ConfigError("regularization 'auto' is only available in penalized mode")
        self.kernel.build()
        self.evaluation.norm_pairs()

    @property
    def domain(self):
        d = self.kernel.dim
        lo = self.domain_lower if self.domain_lower is not None else [0.0] * d
        hi = self.domain_upper if self.domain_upper is not None else [1.0] * d
        return Domain(tuple(lo), tuple(hi))

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        kwargs = {}
        domain = data.pop("domain", None)
        if domain is not None:
            kwargs["domain_lower"] = domain.get("lower")
            kwargs["domain_upper"] = domain.get("upper")
        sections = {f.name: f.type for f in fields(cls)}
        for name, value in data.items():
            if name not in sections:
                raise ConfigError(f"unknown config key {name!r}")
            section_cls = _SECTION_TYPES.get(name)
            if section_cls is None:
                kwargs[name] = value
            else:
                kwargs[name] = _build_section(section_cls, value, name)
        return cls(**kwargs)

    def to_dict(self):
        return asdict(self)


def _build_section(section_cls, value, name):
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in fields(section_cls)}
    unknown = set(value) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    value = dict(value)
    if section_cls is FieldConfig and value.get("kernel") is not None:
        value["kernel"] = _build_section(KernelConfig, value["kernel"], "field.kernel")
    return section_cls(**value)


_SECTION_TYPES = {
    "kernel": KernelConfig,
    "field": FieldConfig,
    "fit": FitConfig,
    "noise": NoiseConfig,
    "points": PointsConfig,
    "evaluation": EvaluationConfig,
    "certificate": CertificateConfig,
    "chebyshev": ChebyshevConfig,
    "powermap": PowermapConfig,
    "sample": SampleConfig,
}


def load_config(path):
    with open(path, "rb") as fh:
        return ExperimentConfig.from_dict(tomllib.load(fh))
