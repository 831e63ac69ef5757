"""
Agents: an encoder paired with an independently trained decoder.
"""

from dataclasses import dataclass

from semeq.agents.datasets import Dataset
from semeq.agents.decoders import (
    DEFAULT_DECODER_LEARNING_RATE,
    DEFAULT_EPOCHS,
    Decoder,
    train_decoder,
)
from semeq.agents.encoders import Encoder, make_encoder
from semeq.errors import InvalidArgumentError
from semeq.numerics import derive_seed


@dataclass(frozen=True, eq=False)
class Agent:
    encoder: Encoder
    decoder: Decoder
    id: str

    def __post_init__(self):
        if self.decoder.latent_dim != self.encoder.latent_dim:
            raise InvalidArgumentError(
                f"agent {self.id!r}: decoder latent dim {self.decoder.latent_dim} "
                f"!= encoder latent dim {self.encoder.latent_dim}"
            )


def train_agent(
    agent_id: str,
    data: Dataset,
    kind,
    latent_dim: int,
    seed: int,
    scale: float = 1.0,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_DECODER_LEARNING_RATE,
) -> Agent:
    """
    Draw an encoder and train its decoder on `data`.

    The encoder uses `seed` directly; the decoder initialization uses
    derive_seed(seed, "decoder").
    """
    encoder = make_encoder(kind, data.input_dim, latent_dim, seed, scale=scale)
    decoder = train_decoder(encoder, data, epochs=epochs, lr=lr, seed=derive_seed(seed, "decoder"))
    return Agent(encoder=encoder, decoder=decoder, id=agent_id)
