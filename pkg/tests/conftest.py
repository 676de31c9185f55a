import pytest

from bookqa.corpus import Book, Paragraph, QaExample
from bookqa.text import TokenSeq, tokenize


def make_paragraph(book_id, para_index, tokens):
    return Paragraph(book_id, para_index, TokenSeq(tuple(tokens)))


def make_book(book_id, text, title=""):
    return Book(book_id, title or book_id, tokenize(text))


@pytest.fixture
def tiny_book():
    text = (
        "Millicent is sent to a boarding school in France . "
        "The school stands on a hill . "
        "Morgan is Wyatt 's brother and a gunslinger . "
        "Doc Holiday suffers from tuberculosis ."
    )
    return make_book("b1", text, "Tiny Book")


@pytest.fixture
def tiny_qa():
    return [
        QaExample("q1", "b1", "where is Millicent sent to boarding school", ("France", "france")),
        QaExample("q2", "b1", "what is Morgan's relationship to Wyatt", ("Morgan is Wyatt's brother", "Brothers")),
        QaExample("q3", "b1", "what illness does Doc Holiday suffer from", ("Tuberculosis", "Tuberculosis")),
    ]
