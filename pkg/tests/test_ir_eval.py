import pytest

from bookqa.bm25 import build_index, question_query, retrieve
from bookqa.corpus import QaExample, chunk_book
from bookqa.errors import EvalError
from bookqa.ir_eval import (
    CoverageReport,
    aggregate_ablation,
    evaluate_selection,
    model_selection_score,
    row_labels,
    run_ablation,
)
from bookqa.reranker import IdentityReranker, LexicalReranker, RerankRequest
from bookqa.spans import coverage_rouge
from bookqa.synth import synth_corpus

from conftest import make_paragraph


def _setup(seed=4, **kwargs):
    kwargs.setdefault("n_books", 2)
    kwargs.setdefault("paras_per_book", 10)
    kwargs.setdefault("questions_per_book", 3)
    kwargs.setdefault("width", 40)
    books, qa, truths = synth_corpus(seed=seed, **kwargs)
    paragraphs = {b.book_id: chunk_book(b, width=kwargs["width"]) for b in books}
    indexes = {b.book_id: build_index(paragraphs[b.book_id]) for b in books}
    return paragraphs, indexes, qa, truths


class OracleScorer:
    """Scores each candidate by its span coverage of the gold answers."""

    def __init__(self, qa):
        self.answers = {q.question_id: q.answers for q in qa}

    def score(self, request: RerankRequest):
        from bookqa.text import tokenize
        from bookqa.corpus import Paragraph

        answers = self.answers[request.question_id]
        out = []
        for cand in request.candidates:
            para = Paragraph("x", cand.para_index, tokenize(cand.text))
            out.append(coverage_rouge([para], answers))
        return out


def test_evaluate_selection_trivial_cases():
    p_hit = make_paragraph("b", 0, ["the", "falcon", "flies"])
    p_miss = make_paragraph("b", 1, ["stone", "wall"])
    qa = [QaExample("q1", "b", "where", ("falcon",))]
    report = evaluate_selection(qa, {"q1": [p_hit, p_miss]}, "test_sel")
    assert report.em_coverage == 1.0
    assert report.rouge_coverage == 1.0
    assert report.n_questions == 1
    assert report.selection == "test_sel"

    report = evaluate_selection(qa, {"q1": [p_miss]}, "test_sel")
    assert report.em_coverage == 0.0
    assert report.rouge_coverage == 0.0


def test_evaluate_selection_single_question_equals_raw_values():
    p = make_paragraph("b", 0, ["gold", "grey", "stone"])
    qa = [QaExample("q1", "b", "x", ("gold stone",))]
    report = evaluate_selection(qa, {"q1": [p]}, "one")
    assert report.rouge_coverage == coverage_rouge([p], ["gold stone"])
    assert report.em_coverage == 0.0


def test_evaluate_selection_missing_selection_errors():
    qa = [QaExample("q1", "b", "x", ("y",))]
    with pytest.raises(EvalError, match="q1"):
        evaluate_selection(qa, {}, "sel")
    with pytest.raises(EvalError, match="q1"):
        evaluate_selection(qa, {"q1": []}, "sel")


def test_model_selection_score():
    assert model_selection_score(CoverageReport("s", 1.0, 1.0, 1)) == 1.0
    assert model_selection_score(CoverageReport("s", 0.0, 0.5, 1)) == 0.25
    assert model_selection_score(CoverageReport("s", 0.1899, 0.4748, 1)) == pytest.approx(
        0.33235
    )


def test_identity_reranker_reproduces_baseline_row_exactly():
    paragraphs, indexes, qa, _ = _setup(seed=10)
    result = run_ablation(indexes, paragraphs, qa, IdentityReranker())
    labels = row_labels(32, 5)
    baseline = result.rows[0]
    reranked = result.rows[1]
    assert baseline.selection == labels[0]
    assert reranked.selection == labels[1]
    assert reranked.em_coverage == baseline.em_coverage
    assert reranked.rouge_coverage == baseline.rouge_coverage


def test_top5_never_beats_top32_and_oracle_dominates_baseline():
    for seed in (1, 6, 9):
        paragraphs, indexes, qa, _ = _setup(seed=seed)
        result = run_ablation(indexes, paragraphs, qa, IdentityReranker())
        base, _, upper, oracle = result.rows
        assert base.em_coverage <= upper.em_coverage + 1e-12
        assert base.rouge_coverage <= upper.rouge_coverage + 1e-12
        assert oracle.em_coverage >= base.em_coverage - 1e-12
        assert oracle.rouge_coverage >= base.rouge_coverage - 1e-12


def test_oracle_score_reranker_matches_upperbound_and_dominates_others():
    paragraphs, indexes, qa, _ = _setup(seed=12)
    oracle_result = run_ablation(indexes, paragraphs, qa, OracleScorer(qa))
    upper = oracle_result.rows[2]
    reranked = oracle_result.rows[1]
    # Picking the best-covering candidates from the pool achieves the pool's
    # own coverage.
    assert reranked.em_coverage == pytest.approx(upper.em_coverage)
    assert reranked.rouge_coverage == pytest.approx(upper.rouge_coverage)

    for scorer in (IdentityReranker(), LexicalReranker()):
        other = run_ablation(indexes, paragraphs, qa, scorer).rows[1]
        assert reranked.em_coverage >= other.em_coverage - 1e-12
        assert reranked.rouge_coverage >= other.rouge_coverage - 1e-12


def test_reranker_failure_aborts_with_question_named():
    paragraphs, indexes, qa, _ = _setup(seed=2, n_books=1)

    class Exploding:
        def score(self, request):
            raise RuntimeError("boom")

    with pytest.raises(EvalError, match=qa[0].question_id):
        run_ablation(indexes, paragraphs, qa, Exploding())


def test_question_with_no_candidates_errors():
    paras = [make_paragraph("b", 0, ["stone", "wall"])]
    indexes = {"b": build_index(paras)}
    qa = [QaExample("q1", "b", "zebra quagga", ("okapi",))]
    with pytest.raises(EvalError, match="no BM25 candidates"):
        run_ablation(indexes, {"b": paras}, qa, IdentityReranker())


def test_fewer_candidates_than_k_base_is_fine():
    paras = [
        make_paragraph("b", 0, ["falcon", "stone"]),
        make_paragraph("b", 1, ["wall", "moss"]),
    ]
    indexes = {"b": build_index(paras)}
    qa = [QaExample("q1", "b", "falcon", ("falcon",))]
    result = run_ablation(indexes, {"b": paras}, qa, IdentityReranker(), k_base=32, k_top=5)
    assert result.rows[0].em_coverage == 1.0
    assert result.rows[2].n_questions == 1


def test_format_table_shape():
    paragraphs, indexes, qa, _ = _setup(seed=3, n_books=1)
    result = run_ablation(indexes, paragraphs, qa, IdentityReranker())
    table = result.format_table()
    lines = table.splitlines()
    assert len(lines) == 5
    assert "EM" in lines[0] and "Rouge-L" in lines[0]
    for label, line in zip(row_labels(32, 5), lines[1:]):
        assert line.startswith(label)

    payload = result.to_dict()
    assert [r["selection"] for r in payload["rows"]] == list(row_labels(32, 5))
    for row in payload["rows"]:
        assert 0.0 <= row["em_coverage"] <= 1.0
        assert row["model_selection_score"] == pytest.approx(
            (row["em_coverage"] + row["rouge_coverage"]) / 2, abs=1e-6
        )


def test_aggregate_requires_items():
    with pytest.raises(EvalError):
        aggregate_ablation([], 32, 5)


def test_baseline_row_equals_direct_retrieval_coverage():
    paragraphs, indexes, qa, _ = _setup(seed=15, n_books=1)
    result = run_ablation(indexes, paragraphs, qa, IdentityReranker(), k_top=5)
    selections = {}
    for q in qa:
        got = retrieve(indexes[q.book_id], question_query(q), 32)
        by_index = {p.para_index: p for p in paragraphs[q.book_id]}
        selections[q.question_id] = [by_index[p] for p in got.para_indexes()[:5]]
    direct = evaluate_selection(qa, selections, "bm25_top5")
    assert direct == result.rows[0]
