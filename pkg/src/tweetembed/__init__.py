"""Word embeddings for microblog text, end to end.

Raw tweets -> padded 5-gram counts -> frequency-sorted dictionary ->
top-|V| vocabulary -> 4-context-word neural predictor -> exported
embeddings -> cosine-threshold intrinsic evaluation.
"""

__version__ = "0.1.0"
