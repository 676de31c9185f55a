"""Answer-coverage evaluation of paragraph selections and the ranker ablation.

The ablation scores four selections per question: the BM25 baseline top-k,
the reranked top-k drawn from the baseline's top candidate pool, the full
candidate pool itself (the upper bound for any reranker over it), and the
question+answer oracle retrieval top-k.  Coverage is reported two ways per
selection: the fraction of questions whose answer occurs verbatim in some
selected paragraph (EM), and the mean best same-length-span Rouge-L.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .bm25 import (
    MODE_QUESTION,
    MODE_QUESTION_ANSWER,
    Bm25Index,
    oracle_query,
    question_query,
    retrieve,
)
from .corpus import Paragraph, QaExample
from .errors import EvalError
from .reranker import RerankCandidate, RerankRequest, Scorer, apply_scores

DEFAULT_K_BASE = 32
DEFAULT_K_TOP = 5


@dataclass(frozen=True)
class CoverageReport:
    selection: str
    em_coverage: float
    rouge_coverage: float
    n_questions: int

    def to_dict(self) -> dict:
        return {
            "selection": self.selection,
            "em_coverage": round(self.em_coverage, 6),
            "rouge_coverage": round(self.rouge_coverage, 6),
            "model_selection_score": round(model_selection_score(self), 6),
            "n_questions": self.n_questions,
        }


def model_selection_score(report: CoverageReport) -> float:
    """Average of EM and Rouge-L coverage, the ranker model-selection signal."""
    return (report.em_coverage + report.rouge_coverage) / 2.0


def _question_coverage(
    selected: Sequence[Paragraph], answers: Sequence[str]
) -> tuple[bool, float]:
    from .spans import any_contains_answer, coverage_rouge

    return any_contains_answer(selected, answers), coverage_rouge(selected, answers)


def evaluate_selection(
    examples: Sequence[QaExample],
    selections: Mapping[str, Sequence[Paragraph]],
    selection_label: str,
) -> CoverageReport:
    """Coverage of per-question paragraph selections; every question must
    have at least one selected paragraph."""
    if not examples:
        raise EvalError("no questions to evaluate")
    em_sum = 0.0
    rouge_sum = 0.0
    for q in examples:
        selected = selections.get(q.question_id)
        if not selected:
            raise EvalError(f"question {q.question_id!r} has no selected paragraphs")
        em, rouge = _question_coverage(selected, q.answers)
        em_sum += float(em)
        rouge_sum += rouge
    n = len(examples)
    return CoverageReport(selection_label, em_sum / n, rouge_sum / n, n)


def row_labels(k_base: int, k_top: int) -> tuple[str, str, str, str]:
    return (
        f"bm25_top{k_top}",
        f"reranked_top{k_top}",
        f"upperbound_top{k_base}",
        f"oracle_top{k_top}",
    )


@dataclass(frozen=True)
class QuestionAblation:
    """Per-question (EM, Rouge-L) coverage for the four ablation rows."""

    question_id: str
    rows: tuple[tuple[bool, float], ...]


def ablation_for_question(
    index: Bm25Index,
    paragraphs: Sequence[Paragraph],
    example: QaExample,
    scorer: Scorer,
    k_base: int = DEFAULT_K_BASE,
    k_top: int = DEFAULT_K_TOP,
) -> QuestionAblation:
    by_index = {p.para_index: p for p in paragraphs}

    baseline = retrieve(
        index, question_query(example), k_base, example.question_id, MODE_QUESTION
    )
    if not baseline.ranked:
        raise EvalError(
            f"question {example.question_id!r} has no BM25 candidates; "
            "its query shares no terms with the book"
        )
    unknown = [p for p in baseline.para_indexes() if p not in by_index]
    if unknown:
        raise EvalError(
            f"index for book {example.book_id!r} references paragraphs missing "
            f"from the paragraphs file: {unknown[:5]}"
        )
    candidates = [by_index[p] for p in baseline.para_indexes()]

    request = RerankRequest(
        question_id=example.question_id,
        question=example.question,
        candidates=tuple(
            RerankCandidate(p.para_index, p.text()) for p in candidates
        ),
    )
    try:
        scores = scorer.score(request)
        reranked = apply_scores(request, scores)
    except Exception as exc:
        raise EvalError(
            f"reranker failed on question {example.question_id!r}: {exc}"
        ) from exc
    reranked_paras = [by_index[c.para_index] for c in reranked[:k_top]]

    oracle = retrieve(
        index, oracle_query(example), k_top, example.question_id, MODE_QUESTION_ANSWER
    )
    if not oracle.ranked:
        raise EvalError(
            f"question {example.question_id!r} has no oracle candidates"
        )
    oracle_paras = [by_index[p] for p in oracle.para_indexes()]

    answers = example.answers
    base_cov = _question_coverage(candidates[:k_top], answers)
    rerank_cov = _question_coverage(reranked_paras, answers)
    upper_cov = _question_coverage(candidates, answers)
    oracle_cov = _question_coverage(oracle_paras, answers)

    # Selecting from within the pool can never beat the pool itself.
    for label, cov in (("baseline", base_cov), ("reranked", rerank_cov)):
        if (cov[0] and not upper_cov[0]) or cov[1] > upper_cov[1] + 1e-12:
            raise EvalError(
                f"coverage invariant violated for question {example.question_id!r}: "
                f"{label} top-{k_top} exceeds its top-{k_base} superset"
            )

    return QuestionAblation(
        example.question_id, (base_cov, rerank_cov, upper_cov, oracle_cov)
    )


@dataclass(frozen=True)
class AblationResult:
    rows: tuple[CoverageReport, ...]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def format_table(self) -> str:
        width = max(len(r.selection) for r in self.rows) + 2
        lines = [f"{'Selection':<{width}}{'EM':>8}{'Rouge-L':>10}"]
        for r in self.rows:
            lines.append(
                f"{r.selection:<{width}}"
                f"{100.0 * r.em_coverage:>8.2f}{100.0 * r.rouge_coverage:>10.2f}"
            )
        return "\n".join(lines)


def aggregate_ablation(
    items: Sequence[QuestionAblation], k_base: int, k_top: int
) -> AblationResult:
    if not items:
        raise EvalError("no questions to evaluate")
    labels = row_labels(k_base, k_top)
    n = len(items)
    reports = []
    for row, label in enumerate(labels):
        em = sum(float(item.rows[row][0]) for item in items) / n
        rouge = sum(item.rows[row][1] for item in items) / n
        reports.append(CoverageReport(label, em, rouge, n))
    return AblationResult(tuple(reports))


def run_ablation(
    indexes: Mapping[str, Bm25Index],
    paragraphs_by_book: Mapping[str, Sequence[Paragraph]],
    examples: Sequence[QaExample],
    scorer: Scorer,
    k_base: int = DEFAULT_K_BASE,
    k_top: int = DEFAULT_K_TOP,
) -> AblationResult:
    items = []
    for q in examples:
        if q.book_id not in indexes:
            raise EvalError(f"no index for book {q.book_id!r}")
        items.append(
            ablation_for_question(
                indexes[q.book_id],
                paragraphs_by_book[q.book_id],
                q,
                scorer,
                k_base,
                k_top,
            )
        )
    return aggregate_ablation(items, k_base, k_top)
