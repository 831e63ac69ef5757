"""
Synthetic datasets and encoder/decoder agents with mismatched latent spaces.
"""

from .agent import Agent, train_agent
from .datasets import Dataset, gen_gaussian_mixture, split_dataset, standard_datasets
from .decoders import (
    Decoder,
    accuracy,
    cross_entropy_gradient,
    cross_entropy_loss,
    decode,
    init_decoder,
    train_decoder,
)
from .encoders import Encoder, EncoderKind, encode, make_encoder

__all__ = [
    "Agent",
    "Dataset",
    "Decoder",
    "Encoder",
    "EncoderKind",
    "accuracy",
    "cross_entropy_gradient",
    "cross_entropy_loss",
    "decode",
    "encode",
    "gen_gaussian_mixture",
    "init_decoder",
    "make_encoder",
    "split_dataset",
    "standard_datasets",
    "train_agent",
    "train_decoder",
]
