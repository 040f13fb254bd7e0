"""Experiment configuration: JSON files mapping onto the solver and particle
parameters, with the benchmark defaults baked in.

A config round-trips exactly (parse -> serialize -> parse is the identity)
and hashes deterministically, so every output artifact can be traced to the
configuration that produced it.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ccbo.basis import BasisFamily, BoxDomain, HyperbolicCross, MultiIndexBasis, TotalDegree
from ccbo.cbo import CBOConfig, InitSpec, Variant
from ccbo.hjb import HJBConfig, MonteCarloLoad
from ccbo.objectives import Objective, by_name

__all__ = [
    "ObjectiveSpec",
    "BasisSpec",
    "FlowSpec",
    "ExperimentConfig",
    "ConfigError",
    "load_config",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    dim: int
    q_diag: tuple[float, ...] | None = None


@dataclass(frozen=True)
class BasisSpec:
    family: str = "legendre"
    truncation: str = "hyperbolic_cross"
    degree: int = 2


@dataclass(frozen=True)
class FlowSpec:
    x0: tuple[float, ...] = (-2.0,)
    dt: float = 0.01
    t_final: float = 10.0
    fields: tuple[str, ...] = ("feedback", "neg_gradient")
    fd_step: float = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    objective: ObjectiveSpec
    domain_lower: tuple[float, ...]
    domain_upper: tuple[float, ...]
    basis: BasisSpec = BasisSpec()
    # offline solver
    epsilon: float = 0.1
    mu: float = 0.1
    theta: float = 0.5
    tol: float = 1e-8
    tol_mu: float = 0.01
    max_inner_iters: int = 200
    load_mode: str = "auto"  # auto | separable | monte_carlo
    mc_samples: int = 1_000_000
    mc_seed: int = 7_041_776
    # particle system
    n_particles: int = 50
    lam: float = 1.0
    beta: float = 1.0
    sigma: float = 0.7
    alpha: float = 40.0
    dt: float = 0.1
    t_final: float = 10.0
    variant: str = "controlled"
    init_kind: str = "uniform_box"
    init_lower: tuple[float, ...] = ()
    init_upper: tuple[float, ...] = ()
    seed: int = 0
    # batching / outputs
    n_runs: int = 100
    success_threshold: float = 0.0625
    output_dir: str | None = None
    coefficient_file: str | None = None
    flow: FlowSpec | None = None

    # ------------------------------------------------------------------
    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        try:
            obj = doc["objective"]
            spec = ObjectiveSpec(
                name=str(obj["name"]),
                dim=int(obj["dim"]),
                q_diag=tuple(float(v) for v in obj["q_diag"]) if obj.get("q_diag") else None,
            )
            d = spec.dim
            domain = doc.get("domain", {})
            lower = tuple(float(v) for v in domain.get("lower", [-2.0] * d))
            upper = tuple(float(v) for v in domain.get("upper", [2.0] * d))
            b = doc.get("basis", {})
            basis = BasisSpec(family=b.get("family", "legendre"),
                              truncation=b.get("truncation", "hyperbolic_cross"),
                              degree=int(b.get("degree", 2)))
            h = doc.get("hjb", {})
            c = doc.get("cbo", {})
            init = c.get("init", {})
            init_lower = tuple(float(v) for v in init.get("lower", [-1.0] * d))
            init_upper = tuple(float(v) for v in init.get("upper", [-0.5] * d))
            flow = None
            if doc.get("flow") is not None:
                fl = doc["flow"]
                flow = FlowSpec(
                    x0=tuple(float(v) for v in fl.get("x0", [-2.0] * d)),
                    dt=float(fl.get("dt", 0.01)),
                    t_final=float(fl.get("t_final", 10.0)),
                    fields=tuple(fl.get("fields", ["feedback", "neg_gradient"])),
                    fd_step=float(fl.get("fd_step", 1e-6)),
                )
            cfg = ExperimentConfig(
                objective=spec,
                domain_lower=lower,
                domain_upper=upper,
                basis=basis,
                epsilon=float(h.get("epsilon", 0.1)),
                mu=float(h.get("mu", 0.1)),
                theta=float(h.get("theta", 0.5)),
                tol=float(h.get("tol", 1e-8)),
                tol_mu=float(h.get("tol_mu", 0.01)),
                max_inner_iters=int(h.get("max_inner_iters", 200)),
                load_mode=str(h.get("load_mode", "auto")),
                mc_samples=int(h.get("mc_samples", 1_000_000)),
                mc_seed=int(h.get("mc_seed", 7_041_776)),
                n_particles=int(c.get("n_particles", 50)),
                lam=float(c.get("lambda", 1.0)),
                beta=float(c.get("beta", 1.0)),
                sigma=float(c.get("sigma", 0.7)),
                alpha=float(c.get("alpha", 40.0)),
                dt=float(c.get("dt", 0.1)),
                t_final=float(c.get("t_final", 10.0)),
                variant=str(c.get("variant", "controlled")),
                init_kind=str(init.get("kind", "uniform_box")),
                init_lower=init_lower,
                init_upper=init_upper,
                seed=int(c.get("seed", 0)),
                n_runs=int(doc.get("n_runs", 100)),
                success_threshold=float(doc.get("success_threshold", 0.0625)),
                output_dir=doc.get("output_dir"),
                coefficient_file=doc.get("coefficient_file"),
                flow=flow,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        doc = {
            "objective": {"name": self.objective.name, "dim": self.objective.dim},
            "domain": {"lower": list(self.domain_lower), "upper": list(self.domain_upper)},
            "basis": {"family": self.basis.family, "truncation": self.basis.truncation,
                      "degree": self.basis.degree},
            "hjb": {"epsilon": self.epsilon, "mu": self.mu, "theta": self.theta,
                    "tol": self.tol, "tol_mu": self.tol_mu,
                    "max_inner_iters": self.max_inner_iters,
                    "load_mode": self.load_mode, "mc_samples": self.mc_samples,
                    "mc_seed": self.mc_seed},
            "cbo": {"n_particles": self.n_particles, "lambda": self.lam,
                    "beta": self.beta, "sigma": self.sigma, "alpha": self.alpha,
                    "dt": self.dt, "t_final": self.t_final, "variant": self.variant,
                    "init": {"kind": self.init_kind, "lower": list(self.init_lower),
                             "upper": list(self.init_upper)},
                    "seed": self.seed},
            "n_runs": self.n_runs,
            "success_threshold": self.success_threshold,
            "output_dir": self.output_dir,
            "coefficient_file": self.coefficient_file,
            "flow": None,
        }
        if self.objective.q_diag is not None:
            doc["objective"]["q_diag"] = list(self.objective.q_diag)
        if self.flow is not None:
            doc["flow"] = {"x0": list(self.flow.x0), "dt": self.flow.dt,
                           "t_final": self.flow.t_final, "fields": list(self.flow.fields),
                           "fd_step": self.flow.fd_step}
        return doc

    def validate(self) -> None:
        d = self.objective.dim
        if d < 1:
            raise ConfigError("objective dimension must be >= 1")
        for name, tup in (("domain.lower", self.domain_lower),
                          ("domain.upper", self.domain_upper),
                          ("cbo.init.lower", self.init_lower),
                          ("cbo.init.upper", self.init_upper)):
            if len(tup) != d:
                raise ConfigError(f"{name} has length {len(tup)}, objective dimension is {d}")
        if any(a >= b for a, b in zip(self.domain_lower, self.domain_upper)):
            raise ConfigError("domain requires lower < upper componentwise")
        if self.basis.family not in ("monomial", "legendre"):
            raise ConfigError(f"unknown basis family {self.basis.family!r}")
        if self.basis.truncation not in ("total_degree", "hyperbolic_cross"):
            raise ConfigError(f"unknown truncation {self.basis.truncation!r}")
        if self.load_mode not in ("auto", "separable", "monte_carlo"):
            raise ConfigError(f"unknown load mode {self.load_mode!r}")
        if self.variant not in (v.value for v in Variant):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.flow is not None and len(self.flow.x0) != d:
            raise ConfigError("flow.x0 dimension does not match the objective")
        if self.objective.q_diag is not None and len(self.objective.q_diag) != d:
            raise ConfigError("objective.q_diag length does not match dim")

    # ------------------------------------------------------------------
    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def build_objective(self) -> Objective:
        q = np.diag(self.objective.q_diag) if self.objective.q_diag is not None else None
        return by_name(self.objective.name, self.objective.dim, q=q)

    def build_basis(self) -> MultiIndexBasis:
        family = BasisFamily(self.basis.family)
        trunc = (TotalDegree(self.basis.degree) if self.basis.truncation == "total_degree"
                 else HyperbolicCross(self.basis.degree))
        return MultiIndexBasis(family, BoxDomain(self.domain_lower, self.domain_upper), trunc)

    def hjb_config(self) -> HJBConfig:
        mode: str | MonteCarloLoad = self.load_mode
        if mode == "monte_carlo":
            mode = MonteCarloLoad(n_samples=self.mc_samples, seed=self.mc_seed)
        return HJBConfig(mu=self.mu, epsilon=self.epsilon, tol=self.tol,
                         max_inner_iters=self.max_inner_iters, theta=self.theta,
                         tol_mu=self.tol_mu, load_mode=mode)

    def cbo_config(self, seed: int | None = None) -> CBOConfig:
        return CBOConfig(
            n_particles=self.n_particles, lam=self.lam, beta=self.beta,
            sigma=self.sigma, alpha=self.alpha, dt=self.dt, t_final=self.t_final,
            variant=Variant(self.variant),
            init=InitSpec(self.init_kind, self.init_lower, self.init_upper),
            seed=self.seed if seed is None else seed)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(doc)
