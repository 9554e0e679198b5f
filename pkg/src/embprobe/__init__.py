"""Layer-wise speech-embedding probing toolkit.

Aggregates 12-layer utterance embeddings into layer-group features,
trains calibrated RBF-SVM and feedforward classifiers, evaluates them
in and out of domain, and maps decision boundaries for 2-D projection.
"""

__version__ = "0.1.0"

from .backend import BACKEND

__all__ = ["BACKEND", "__version__"]
