from .tensor import (BackwardError, Tensor, add, concat, embedding, ensure_tensor, exp, getitem, log, matmul, mean,
                     mul, no_grad, parameter, reshape, sqrt, stack, sub, transpose, where)
from .functional import (IGNORE_INDEX, LN_EPS, causal_attention_block, cross_entropy, gelu, layer_norm, linear,
                         log_softmax, softmax)
from .layers import CausalSelfAttention, DecoderLayer, Embedding, LayerNorm, Linear, MLPBlock, Module
from .optim import AdamW, CosineSchedule, NonFiniteGradient, OptimState, ParamGroup, global_grad_norm
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, numerical_grad, relative_error
