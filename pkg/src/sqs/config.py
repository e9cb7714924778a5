"""Run configuration schema.

JSON keys are camelCase; unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic.alias_generators import to_camel

from .evolution import EvolutionConfig, LocalOptConfig
from .svm import SvmConfig

_KERNEL_MODE = re.compile(r"^(exact|shots:[1-9][0-9]*)$")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", alias_generator=to_camel, populate_by_name=True)


class DataSource(_Strict):
    path: str | None = None
    label_column: str = "label"
    positive_label: str = "1"
    generator: dict | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.path is None) == (self.generator is None):
            raise ValueError("data needs exactly one of 'path' or 'generator'")
        return self


class ReductionParams(_Strict):
    top_k: int = Field(10, ge=1)
    out_dim: int | None = Field(None, ge=1)
    bins: int = Field(10, ge=2)


class LocalOptParams(_Strict):
    max_iterations: int = Field(10, ge=0)
    fd_step: float = Field(1e-4, gt=0)
    initial_step_size: float = Field(1.0, gt=0)


class EvolutionParams(_Strict):
    maximum_generations: int = Field(50, ge=1)
    target_fitness: float = Field(1.0, ge=0, le=1)
    qubit_size: int = Field(2, ge=1, le=10)
    gene_chain_size: int = Field(4, ge=1)
    population_size: int = Field(10, ge=2)
    crossover_rate: float = Field(0.7, ge=0, le=1)
    mutation_percentage: float = Field(0.2, ge=0, le=1)
    elite_size: int = Field(2, ge=2)
    quantum_dim: int | None = Field(None, ge=1, le=10)
    master_seed: int | None = Field(None, ge=0)
    local_opt: LocalOptParams = Field(default_factory=LocalOptParams)
    fitness: Literal["eigen", "alignment"] = "alignment"
    balanced_alignment: bool = True

    @model_validator(mode="after")
    def _consistent(self):
        if self.elite_size > self.population_size:
            raise ValueError("eliteSize must not exceed populationSize")
        if self.quantum_dim is not None and self.quantum_dim != self.qubit_size:
            raise ValueError("quantumDim must equal qubitSize")
        return self

    def build(self, seed: int) -> EvolutionConfig:
        return EvolutionConfig(
            maximum_generations=self.maximum_generations,
            target_fitness=self.target_fitness,
            qubit_size=self.qubit_size,
            gene_chain_size=self.gene_chain_size,
            population_size=self.population_size,
            crossover_rate=self.crossover_rate,
            mutation_percentage=self.mutation_percentage,
            elite_size=self.elite_size,
            quantum_dim=self.quantum_dim,
            master_seed=self.master_seed if self.master_seed is not None else seed,
            local_opt=LocalOptConfig(**self.local_opt.model_dump()),
            fitness=self.fitness,
            balanced_alignment=self.balanced_alignment,
        )


class SvmParams(_Strict):
    C: float = Field(1.0, gt=0, alias="C")
    class_weight_positive: float | None = Field(None, gt=0)
    kkt_tolerance: float = Field(1e-3, gt=0)
    max_passes: int = Field(1000, ge=1)
    c_grid: bool = False

    def build(self, C: float | None = None) -> SvmConfig:
        return SvmConfig(C if C is not None else self.C, self.class_weight_positive,
                         self.kkt_tolerance, self.max_passes)


class RunConfig(_Strict):
    data: DataSource | None = None
    seed: int = Field(0, ge=0)
    train_fraction: float = Field(0.8, gt=0, lt=1)
    reduction: ReductionParams = Field(default_factory=ReductionParams)
    evolution: EvolutionParams = Field(default_factory=EvolutionParams)
    svm: SvmParams = Field(default_factory=SvmParams)
    kernel: str = Field("exact", pattern=_KERNEL_MODE.pattern)
    baselines: list[Literal["svc-rbf", "svc-linear"]] = Field(default_factory=lambda: ["svc-rbf"])
    scenarios: list[int] = Field(default_factory=lambda: [500, 1000, 2000, 3000])
    nested_scenarios: bool = True
    output_dir: str = "out"
    threads: int | None = Field(None, ge=1)

    @property
    def shots(self) -> int | None:
        return None if self.kernel == "exact" else int(self.kernel.split(":")[1])

    def to_json_dict(self) -> dict:
        return self.model_dump(by_alias=True, mode="json")

    def digest(self) -> str:
        """Hash of the result-affecting settings; ``outputDir`` and ``threads`` are left out."""
        body = {k: v for k, v in self.to_json_dict().items() if k not in ("outputDir", "threads")}
        canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return RunConfig.model_validate(json.load(fh))
