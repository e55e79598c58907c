"""Neural encoder-decoder: featurization, network, search and checkpoints."""

from .checkpoint import load, save
from .features import OutputSpace, output_space, symbols_to_tokens, target_symbols
from .net import AnchorNet, Decoder, Encoder, EncoderOutput, ModelConfig, StepOutput, selective_read, teacher
from .prepare import Prepared, prepare
from .search import DecodeResult, beam_search, ensemble_step, fallback_tokens

__all__ = [
    "AnchorNet", "DecodeResult", "Decoder", "Encoder", "EncoderOutput", "ModelConfig", "OutputSpace",
    "Prepared", "StepOutput", "beam_search", "ensemble_step", "fallback_tokens", "load", "output_space",
    "prepare", "save", "selective_read", "symbols_to_tokens", "target_symbols", "teacher",
]
