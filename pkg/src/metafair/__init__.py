"""metafair - meta-embeddings, debiasing and gender-bias evaluation for word vectors."""

__version__ = "0.1.0"
