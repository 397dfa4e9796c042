from .exceptions import MoreGANException
from .model.gan import Generator, Discriminator, GanTopology
from .trainer.config import TrainConfig


__version__ = "0.1.0"

__all__ = [
    "MoreGANException",
    "Generator",
    "Discriminator",
    "GanTopology",
    "TrainConfig",
]
