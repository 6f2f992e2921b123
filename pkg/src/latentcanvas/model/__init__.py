from .tokenizer import CONTROLS, SPECIALS, ControlTokens, Tokenizer
from .transformer import (HEAD_KINDS, LatentHead, ModelConfig, ModelConfigError, Stream, ToyLM, default_donors,
                          init_control_embeddings)
