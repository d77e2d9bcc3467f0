"""Unsupervised hyperplane classifier trained by small shift and rotation steps."""

from ._accel import BACKEND
from .headmap import ClassHead, HeadSet, associate_labels, classify_topn
from .learner import DomainBox, LearnerConfig, Pool, init_grid, init_random, train
from .synthdata import MixtureSpec, gen_mixture

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ClassHead", "DomainBox", "HeadSet", "LearnerConfig", "MixtureSpec", "Pool",
    "associate_labels", "classify_topn", "gen_mixture", "init_grid", "init_random", "train",
]
