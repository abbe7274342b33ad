"""uqrag: two-stage Persian RAG question answering with reference-free evaluation."""

__version__ = "0.1.0"
