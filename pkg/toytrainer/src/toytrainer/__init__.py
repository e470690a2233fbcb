"""toytrainer: desk-scale dual-encoder client for riddleforge data.

Trains a bag-of-features text/image encoder pair with a symmetric
contrastive objective on a mix stream, then scores a retrieval benchmark
into eval-ready CSV files.  Images are synthetic entity bags; everything is
consumed and produced through files.
"""

from .data import VocabularyMismatch, load_benchmark, load_training_data
from .model import DualEncoder
from .train import TrainConfig, score_benchmark, train_and_score, train_model

__version__ = "0.1.0"
