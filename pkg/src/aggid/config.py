"""Experiment configuration: flat JSON with dotted section keys.

Every key has a default; unknown keys are rejected before any
computation.  ``materialize`` returns the fully defaulted flat mapping
(so serialize(parse(text)) is semantically stable), and the ``build_*``
helpers construct the domain objects the pipeline needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .bregman import RegularizerSpec, SolverConfig
from .denoise import MlsConfig, NoiseSpec
from .errors import ValidationError
from .grids import SpatialGrid, TimeGrid
from .potentials import (
    Aniso2D,
    AttractRepel2D,
    Morse,
    RepulsiveAttractive,
    TimeVaryingBlend,
    Topaz,
)

_DEFAULTS = {
    "grid.dim": 1,
    "grid.L": 1.0,
    "grid.M": 100,
    "time.T": 3.0,
    "time.N": 300,
    "potential.kind": "ra",
    "potential.theta1": 5.0,
    "potential.theta2": 2.0,
    "potential.m0": 15.0,
    "potential.tau": 0.1,
    "potential.c_a": 0.5,
    "potential.ell_a": 0.5,
    "potential.c_r": 0.2,
    "potential.ell_r": 0.4,
    "potential.a": -0.1,
    "potential.file": "",
    "blend.kappa": 8.0,
    "blend.t_b": 1.5,
    "blend.first.kind": "ra",
    "blend.first.theta1": 8.0,
    "blend.first.theta2": 3.0,
    "blend.first.m0": 55.0,
    "blend.first.tau": 0.1,
    "blend.second.kind": "ra",
    "blend.second.theta1": 2.0,
    "blend.second.theta2": 5.0,
    "blend.second.m0": 15.0,
    "blend.second.tau": 0.1,
    "initial.m0": 0.6,
    "noise.percent": 0.0,
    "denoise.h_x": 0.04,
    "denoise.h_t": 0.04,
    "denoise.passes": 1,
    "denoise.mode": "auto",
    "reg.grad": "l1",
    "reg.alpha": 1e-5,
    "reg.lap": "l2",
    "reg.beta": 1e-7,
    "solver.lambda": 0.05,
    "solver.gamma": 0.0,
    "solver.r0": None,
    "solver.eps": 1e-6,
    "solver.max_iter": 10000,
    "solver.init": "zero",
    "solver.symmetric": False,
    "solver.derivative_mode": "sdd",
    "solver.pin_boundary": True,
    "tv.Q": 1,
    "tv.rho": 0.5,
    "tv.h": 0.19,
    "agents.V": 100,
    "agents.sigma": 0.0,
    "agents.H": None,
    "agents.h_t": None,
    "agents.memory": 1.0,
    "agents.source": "sample",
    "agents.steps": 200,
    "agents.dt": 0.01,
    "agents.strength": 0.05,
    "agents.radius": 0.5,
    "agents.t_switch": None,
    "seed": 0,
    "output.dir": "out",
}

_POTENTIAL_KINDS = ("ra", "morse", "topaz", "attract_repel_2d", "aniso_2d", "blend", "file")


@dataclass
class ExperimentConfig:
    """Validated flat configuration with every default materialized."""

    entries: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.entries[key]

    def materialize(self) -> dict:
        return dict(self.entries)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        entries = dict(_DEFAULTS)
        for key, value in mapping.items():
            if key not in _DEFAULTS:
                raise ValidationError(f"unknown configuration key {key!r}")
            entries[key] = value
        cfg = cls(entries)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            mapping = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"configuration is not valid JSON: {exc}") from exc
        if not isinstance(mapping, dict):
            raise ValidationError("configuration JSON must be an object")
        return cls.from_mapping(mapping)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_json(self) -> str:
        return json.dumps(self.entries, indent=2, sort_keys=True)

    # -- validation --------------------------------------------------------

    def validate(self):
        e = self.entries
        if e["grid.dim"] not in (1, 2):
            raise ValidationError("grid.dim must be 1 or 2")
        for key in ("grid.L", "time.T"):
            if not e[key] > 0:
                raise ValidationError(f"{key} must be positive")
        for key in ("grid.M", "time.N", "denoise.passes", "tv.Q", "agents.V", "agents.steps"):
            if int(e[key]) < 1:
                raise ValidationError(f"{key} must be a positive integer")
        if e["potential.kind"] not in _POTENTIAL_KINDS:
            raise ValidationError(
                f"potential.kind must be one of {_POTENTIAL_KINDS}, got {e['potential.kind']!r}"
            )
        if e["potential.kind"] == "file" and not e["potential.file"]:
            raise ValidationError("potential.kind = 'file' requires potential.file")
        if e["noise.percent"] < 0:
            raise ValidationError("noise.percent must be nonnegative")
        if not (0.0 <= e["tv.rho"] < 1.0):
            raise ValidationError("tv.rho must lie in [0, 1)")
        if e["agents.source"] not in ("sample", "boids", "file"):
            raise ValidationError("agents.source must be sample, boids or file")
        if e["denoise.mode"] not in ("auto", "on", "off"):
            raise ValidationError("denoise.mode must be auto, on or off")
        # these constructors run their own validation
        self.build_regularizer()
        self.build_solver_config()
        self.build_mls()

    # -- builders ----------------------------------------------------------

    def build_grid(self) -> SpatialGrid:
        e = self.entries
        return SpatialGrid(float(e["grid.L"]), int(e["grid.M"]), dim=int(e["grid.dim"]))

    def build_times(self) -> TimeGrid:
        e = self.entries
        return TimeGrid(float(e["time.T"]), int(e["time.N"]))

    def build_noise(self) -> NoiseSpec:
        e = self.entries
        return NoiseSpec(float(e["noise.percent"]), int(e["seed"]))

    def build_mls(self) -> MlsConfig:
        e = self.entries
        return MlsConfig(float(e["denoise.h_x"]), float(e["denoise.h_t"]))

    def build_regularizer(self) -> RegularizerSpec:
        e = self.entries
        alpha = float(e["reg.alpha"]) if e["reg.grad"] != "none" else 0.0
        beta = float(e["reg.beta"]) if e["reg.lap"] != "none" else 0.0
        return RegularizerSpec(grad=e["reg.grad"], alpha=alpha, lap=e["reg.lap"], beta=beta)

    def build_solver_config(self) -> SolverConfig:
        e = self.entries
        r0 = e["solver.r0"]
        return SolverConfig(
            lam=float(e["solver.lambda"]),
            gamma=float(e["solver.gamma"]),
            r0=None if r0 is None else float(r0),
            eps=float(e["solver.eps"]),
            max_iter=int(e["solver.max_iter"]),
            init=e["solver.init"],
            symmetric=bool(e["solver.symmetric"]),
            derivative_mode=e["solver.derivative_mode"],
            h_x=float(e["denoise.h_x"]),
            h_t=float(e["denoise.h_t"]),
            pin_boundary=bool(e["solver.pin_boundary"]),
        )

    def _potential_from(self, prefix: str, kind: str):
        e = self.entries
        if kind == "ra":
            return RepulsiveAttractive(
                float(e[f"{prefix}.theta1"]),
                float(e[f"{prefix}.theta2"]),
                float(e[f"{prefix}.m0"]),
                float(e[f"{prefix}.tau"]),
            )
        raise ValidationError(f"blend pieces support kind 'ra' only, got {kind!r}")

    def build_potential_spec(self):
        e = self.entries
        kind = e["potential.kind"]
        if kind == "ra":
            return RepulsiveAttractive(
                float(e["potential.theta1"]),
                float(e["potential.theta2"]),
                float(e["potential.m0"]),
                float(e["potential.tau"]),
            )
        if kind == "morse":
            return Morse(
                float(e["potential.c_a"]),
                float(e["potential.ell_a"]),
                float(e["potential.c_r"]),
                float(e["potential.ell_r"]),
                float(e["potential.tau"]),
            )
        if kind == "topaz":
            return Topaz(float(e["potential.a"]), float(e["potential.tau"]))
        if kind == "attract_repel_2d":
            return AttractRepel2D()
        if kind == "aniso_2d":
            return Aniso2D()
        if kind == "blend":
            return TimeVaryingBlend(
                float(e["blend.kappa"]),
                float(e["blend.t_b"]),
                self._potential_from("blend.first", e["blend.first.kind"]),
                self._potential_from("blend.second", e["blend.second.kind"]),
            )
        if kind == "file":
            from .fileio import read_potential_csv

            return read_potential_csv(e["potential.file"])
        raise ValidationError(f"unknown potential.kind {kind!r}")
