"""Toolkit for question answering over full-length books: paragraph retrieval,
weak supervision for passage rankers, and answer/coverage evaluation."""

__version__ = "0.1.0"
