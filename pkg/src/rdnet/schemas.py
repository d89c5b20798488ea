"""Pydantic report models emitted by the rdnet command line."""

import csv
import math
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field

from .certify import BootstrapTrace, Certificate, Condition
from .stoich import ConservationVector, Infeasible, NotSortable, QuasiPositivityReport, SortResult
from .utils import format_fraction


def rational(value: Union[int, Fraction, float]) -> str:
    """Exact rationals as "p/q"; infinity as "inf"."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        value = Fraction(value)
    return format_fraction(Fraction(value))


class ConditionModel(BaseModel):
    """One exact inequality of a certificate."""

    name: str
    lhs: str
    relation: str
    rhs: str
    satisfied: bool

    @classmethod
    def from_condition(cls, condition: Condition) -> "ConditionModel":
        return cls(name=condition.name, lhs=rational(condition.lhs), relation=condition.relation.value,
                   rhs=rational(condition.rhs), satisfied=condition.satisfied)


class BootstrapTraceModel(BaseModel):
    """Exponent sequence of a bootstrap run."""

    epsilon: str
    sequence: List[str]
    outcome: str
    steps: int

    @classmethod
    def from_trace(cls, trace: BootstrapTrace) -> "BootstrapTraceModel":
        return cls(epsilon=rational(trace.epsilon), sequence=[rational(r) for r in trace.sequence],
                   outcome=trace.outcome.value, steps=trace.steps)


class CertificateModel(BaseModel):
    """Global-existence verdict with its supporting conditions."""

    certified: bool
    kind: str
    alpha: str = "1"
    beta: str = "1"
    gamma: str = "1"
    diffusivity_class: str
    dim: int = Field(ge=1)
    r0: str
    r0_is_supremum: bool
    conditions: List[ConditionModel]
    bootstrap: Optional[BootstrapTraceModel] = None
    max_certified_dim: Optional[int] = None
    notes: List[str] = Field(default_factory=list)

    @classmethod
    def from_certificate(cls, certificate: Certificate) -> "CertificateModel":
        kind = certificate.kind
        return cls(
            certified=certificate.certified,
            kind=kind.name.value,
            alpha=rational(kind.alpha),
            beta=rational(kind.beta),
            gamma=rational(kind.gamma),
            diffusivity_class=certificate.diffusivity_class.value,
            dim=certificate.dim,
            r0=rational(certificate.r0),
            r0_is_supremum=certificate.r0_is_supremum,
            conditions=[ConditionModel.from_condition(c) for c in certificate.conditions],
            bootstrap=BootstrapTraceModel.from_trace(certificate.bootstrap) if certificate.bootstrap else None,
            max_certified_dim=certificate.max_certified_dim,
            notes=list(certificate.notes),
        )


class ConservationModel(BaseModel):
    """Conservation vector e as [numerator, denominator] pairs, or the reason none exists."""

    feasible: bool
    e: Optional[List[List[int]]] = None
    null_space_dim: int
    reason: Optional[str] = None

    @classmethod
    def from_result(cls, result: Union[ConservationVector, Infeasible]) -> "ConservationModel":
        if isinstance(result, ConservationVector):
            return cls(feasible=True, e=result.to_json(), null_space_dim=result.null_space_dim)
        return cls(feasible=False, null_space_dim=result.null_space_dim, reason=result.reason)


class SortModel(BaseModel):
    """Block-triangular permutations or the stalled remainder."""

    sortable: bool
    row_perm: Optional[List[int]] = None
    col_perm: Optional[List[int]] = None
    s: Optional[int] = None
    block_bounds: Optional[List[int]] = None
    is_identity: Optional[bool] = None
    reason: Optional[str] = None
    remaining_rows: Optional[List[int]] = None
    remaining_cols: Optional[List[int]] = None

    @classmethod
    def from_result(cls, result: Union[SortResult, NotSortable]) -> "SortModel":
        if isinstance(result, SortResult):
            return cls(sortable=True, row_perm=list(result.row_perm), col_perm=list(result.col_perm),
                       s=result.s, block_bounds=list(result.block_bounds), is_identity=result.is_identity)
        return cls(sortable=False, reason=result.reason, remaining_rows=list(result.remaining_rows),
                   remaining_cols=list(result.remaining_cols))


class SpeciesPositivityModel(BaseModel):
    species: str
    min_face_value: float
    points: int
    structural_cases: List[str]
    passed: bool


class QuasiPositivityModel(BaseModel):
    """Sampled quasi-positivity check per species."""

    passed: bool
    species: List[SpeciesPositivityModel]

    @classmethod
    def from_report(cls, report: QuasiPositivityReport) -> "QuasiPositivityModel":
        return cls(passed=report.passed, species=[
            SpeciesPositivityModel(species=s.species, min_face_value=s.min_face_value, points=s.points,
                                   structural_cases=list(s.structural_cases), passed=s.passed)
            for s in report.species])


class AnalysisReport(BaseModel):
    """Structural analysis of a network file."""

    species: List[str]
    matrix: List[List[int]]
    structure_problems: List[str] = Field(default_factory=list)
    conservation: ConservationModel
    quasi_positivity: QuasiPositivityModel
    sort: SortModel
    kind: Optional[str] = None
    diffusivity_class: Optional[str] = None


class LqEntry(BaseModel):
    q: str
    value: float = Field(ge=0)


class SpeciesNorms(BaseModel):
    """Space-time norms of one species over the whole run."""

    species: str
    lq_spacetime: List[LqEntry]
    linf: float = Field(ge=0)
    v2: Optional[float] = None


class MuEntry(BaseModel):
    r: str
    q: str
    value: float = Field(ge=0)


class LevelSetEntry(BaseModel):
    """Measures of {c > k} per sample time and their time integrals."""

    species: str
    k: float = Field(ge=0)
    lambda_series: List[float]
    mu: List[MuEntry] = Field(default_factory=list)


class NormReport(BaseModel):
    """Monitor output of a simulation run."""

    times: List[float]
    species: List[SpeciesNorms]
    conservation_drift: Optional[List[float]] = None
    equilibrium_residual: List[float] = Field(default_factory=list)
    level_sets: List[LevelSetEntry] = Field(default_factory=list)

    def csv_rows(self) -> List[List[str]]:
        """Rows of (t, metric, species, value); run-wide norms carry the final time."""
        rows: List[List[str]] = []
        final = repr(self.times[-1]) if self.times else ""
        for k, t in enumerate(self.times):
            if self.conservation_drift is not None:
                rows.append([repr(t), "conservation_drift", "*", repr(self.conservation_drift[k])])
            if self.equilibrium_residual:
                rows.append([repr(t), "equilibrium_residual", "*", repr(self.equilibrium_residual[k])])
            for entry in self.level_sets:
                rows.append([repr(t), f"lambda_k={entry.k!r}", entry.species, repr(entry.lambda_series[k])])
        for norms in self.species:
            for lq in norms.lq_spacetime:
                rows.append([final, f"lq_q={lq.q}", norms.species, repr(lq.value)])
            rows.append([final, "linf", norms.species, repr(norms.linf)])
            if norms.v2 is not None:
                rows.append([final, "v2", norms.species, repr(norms.v2)])
        for entry in self.level_sets:
            for mu in entry.mu:
                rows.append([final, f"mu_k={entry.k!r}_r={mu.r}_q={mu.q}", entry.species, repr(mu.value)])
        return rows

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "metric", "species", "value"])
            writer.writerows(self.csv_rows())


SCHEMAS: Dict[str, type[BaseModel]] = {
    "analysis": AnalysisReport,
    "bootstrap": BootstrapTraceModel,
    "certificate": CertificateModel,
    "norms": NormReport,
}
