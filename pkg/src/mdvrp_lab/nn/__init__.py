from .autograd import (Tensor, as_tensor, concat, grad_enabled, log_softmax, masked_fill,
                       matmul, no_grad, softmax, stack)
from .gradcheck import grad_check
from .layers import CLIP, encode_nodes, init_encoder, layer_norm, linear, mha, tanh_clip
from .params import ParamSet, init_uniform, load, merge, save

__all__ = [
    "Tensor", "as_tensor", "concat", "grad_enabled", "log_softmax", "masked_fill", "matmul",
    "no_grad", "softmax", "stack", "grad_check", "CLIP", "encode_nodes", "init_encoder",
    "layer_norm", "linear", "mha", "tanh_clip", "ParamSet", "init_uniform", "load", "merge",
    "save",
]
