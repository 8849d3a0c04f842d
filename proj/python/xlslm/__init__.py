"""Cross-lingual interleaving experiments on discrete-unit corpora.

Thin bindings over the C++ core: synthetic bilingual corpus generation,
the causal unit language model, the training pipeline, the pairwise
log-likelihood benchmark, and hidden-state alignment analysis.
"""

try:
    from xlslm._core import *  # noqa: F401,F403  (installed layout)
except ImportError:  # build-tree layout: _core.so on PYTHONPATH
    from _core import *  # noqa: F401,F403

__all__ = [
    "Corpus",
    "Model",
    "default_config",
    "synth_corpus",
    "train",
    "evaluate",
    "alignment",
    "pack_rows",
    "lr_at",
]
