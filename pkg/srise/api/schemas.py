from typing import List, Optional

from pydantic import BaseModel, Field

from ..core.evaluation import MetricResult
from ..core.explainer import PairExplanation, TripletExplanation
from ..core.sanity import SanityReport


class PairExplanationDocument(BaseModel):
    """JSON document for one explained pair."""
    embedder: str = Field(..., description="Name of the embedder that was explained.")
    seed: int = Field(..., description="Seed of the mask stream.")
    num_masks: int = Field(..., description="Number of masks N.")
    base_similarity: float = Field(..., description="Cosine similarity of the unmasked pair.")
    degenerate_masks: int = Field(0, description="Masked embeddings that were degenerate and scored 0.")
    per_mask_scores_a: List[float] = Field(..., description="Scores with the first image masked.")
    per_mask_scores_b: List[float] = Field(..., description="Scores with the second image masked.")
    artifacts: dict = Field(default_factory=dict, description="Written files, by role.")

    @classmethod
    def from_explanation(cls, explanation: PairExplanation, embedder: str, seed: int,
                         artifacts: Optional[dict] = None) -> "PairExplanationDocument":
        return cls(
            embedder=embedder,
            seed=seed,
            num_masks=explanation.num_masks,
            base_similarity=explanation.base_similarity,
            degenerate_masks=explanation.degenerate_masks,
            per_mask_scores_a=explanation.per_mask_scores_a.tolist(),
            per_mask_scores_b=explanation.per_mask_scores_b.tolist(),
            artifacts=artifacts or {},
        )


class TripletExplanationDocument(BaseModel):
    """JSON document for one explained triplet."""
    embedder: str = Field(..., description="Name of the embedder that was explained.")
    seed: int = Field(..., description="Seed of the mask stream.")
    match: PairExplanationDocument = Field(..., description="The {probe, mate} pair.")
    nonmatch: PairExplanationDocument = Field(..., description="The {probe, nonmate} pair.")
    weight_match: float = Field(..., description="Weight applied to the matching maps.")
    weight_nonmatch: float = Field(..., description="Weight applied to the non-matching maps.")
    degenerate: bool = Field(False, description="Matching similarity was not positive.")
    artifacts: dict = Field(default_factory=dict, description="Written files, by role.")

    @classmethod
    def from_explanation(cls, explanation: TripletExplanation, embedder: str, seed: int,
                         artifacts: Optional[dict] = None) -> "TripletExplanationDocument":
        return cls(
            embedder=embedder,
            seed=seed,
            match=PairExplanationDocument.from_explanation(explanation.match, embedder, seed),
            nonmatch=PairExplanationDocument.from_explanation(explanation.nonmatch, embedder, seed),
            weight_match=explanation.weight_match,
            weight_nonmatch=explanation.weight_nonmatch,
            degenerate=explanation.degenerate,
            artifacts=artifacts or {},
        )


class SanityDocument(BaseModel):
    """JSON document for a parameter-randomization check."""
    trained: str = Field(..., description="Name of the trained embedder.")
    randomized: str = Field(..., description="Name of the randomized embedder.")
    r_randomized: float = Field(..., description="Pearson r, trained map vs randomized-model map.")
    r_rerun: float = Field(..., description="Pearson r, trained map vs trained map with another mask seed.")
    spearman_randomized: float = Field(..., description="Spearman rho, trained vs randomized.")
    spearman_rerun: float = Field(..., description="Spearman rho, trained vs rerun.")
    margin: float = Field(..., description="Required r_rerun - r_randomized.")
    passed: bool = Field(..., description="Whether the margin was met.")
    seeds: List[int] = Field(..., description="Mask seed 1, mask seed 2, randomized-model seed.")
    artifacts: dict = Field(default_factory=dict, description="Written files, by role.")

    @classmethod
    def from_report(cls, report: SanityReport, trained: str, randomized: str,
                    artifacts: Optional[dict] = None) -> "SanityDocument":
        return cls(
            trained=trained,
            randomized=randomized,
            r_randomized=report.r_randomized,
            r_rerun=report.r_rerun,
            spearman_randomized=report.spearman_randomized,
            spearman_rerun=report.spearman_rerun,
            margin=report.margin,
            passed=report.passed,
            seeds=list(report.seeds),
            artifacts=artifacts or {},
        )


class MetricRow(BaseModel):
    """Deletion and insertion for one explained image of a matching pair."""
    triplet: str = Field(..., description="Triplet folder name.")
    role: str = Field(..., description="'probe' or 'mate': the image whose map was evaluated.")
    method: str = Field(..., description="Saliency method.")
    iterations: int = Field(..., description="Masks N for S-RISE, 0 for baselines.")
    deletion: float = Field(..., description="Deletion fraction.")
    insertion: float = Field(..., description="Insertion fraction.")
    deletion_crossed: bool = Field(..., description="Whether deletion reached the threshold.")
    insertion_crossed: bool = Field(..., description="Whether insertion reached the threshold.")

    @classmethod
    def from_results(cls, triplet: str, role: str, method: str, iterations: int,
                     deletion: MetricResult, insertion: MetricResult) -> "MetricRow":
        return cls(
            triplet=triplet,
            role=role,
            method=method,
            iterations=iterations,
            deletion=deletion.fraction,
            insertion=insertion.fraction,
            deletion_crossed=deletion.crossed,
            insertion_crossed=insertion.crossed,
        )


class SummaryRow(BaseModel):
    """One row of the evaluation table: method, iterations, deletion, insertion, average."""
    method: str = Field(..., description="Saliency method.")
    iterations: int = Field(..., description="Masks N for S-RISE, 0 for baselines.")
    deletion: float = Field(..., description="Mean deletion fraction.")
    insertion: float = Field(..., description="Mean insertion fraction.")
    average: float = Field(..., description="Mean of deletion and insertion.")


class EvaluationReport(BaseModel):
    """JSON document for a dataset evaluation."""
    embedder: str = Field(..., description="Name of the embedder.")
    threshold: float = Field(..., description="Verification threshold.")
    step: int = Field(..., description="Pixels per round.")
    triplets: List[str] = Field(..., description="Evaluated triplet folders.")
    summary: List[SummaryRow] = Field(..., description="One row per method and N.")
    rows: List[MetricRow] = Field(..., description="Per-image results.")
