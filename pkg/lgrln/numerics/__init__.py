"""Dense tensors, reverse-mode differentiation and the LGRT blob format."""

from lgrln.numerics.ops import cosine, gelu, matmul, sigmoid, softmax
from lgrln.numerics.tensor import Gradients, GradTape, Tensor, backward

__all__ = [
    "GradTape",
    "Gradients",
    "Tensor",
    "backward",
    "cosine",
    "gelu",
    "matmul",
    "sigmoid",
    "softmax",
]
