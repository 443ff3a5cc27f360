"""
Small networks with hand-written gradients, training and explicit constructions.
"""

from .constructive import (
    corrected_decoder_matrix,
    corrected_decoder_network,
    identity_relu_gadget,
    interpolatory_network,
    pinv_decoder_network,
    plateau_network,
)
from .data import piecewise_poly_signals
from .layers import Conv1d, Dense, LeakyReLU, MaxPool2, ReLU, Reshape, SkipConcat, TransposeConv1d
from .network import (
    Network,
    NetworkReconstructor,
    build_mlp,
    build_unet,
    complex_training_pairs,
    gradient_check,
    zero_filled,
)
from .serialization import decode_network, encode_network, load_network, save_network, summary
from .training import (
    Adam,
    TrainResult,
    multi_mask_pairs,
    train,
    train_multi_mask,
    train_regularized,
    training_error,
    weight_norm_penalty,
)

__all__ = [
    'Conv1d',
    'Dense',
    'LeakyReLU',
    'MaxPool2',
    'ReLU',
    'Reshape',
    'SkipConcat',
    'TransposeConv1d',
    'Network',
    'NetworkReconstructor',
    'build_mlp',
    'build_unet',
    'complex_training_pairs',
    'gradient_check',
    'zero_filled',
    'Adam',
    'TrainResult',
    'train',
    'train_regularized',
    'train_multi_mask',
    'multi_mask_pairs',
    'training_error',
    'weight_norm_penalty',
    'identity_relu_gadget',
    'pinv_decoder_network',
    'corrected_decoder_matrix',
    'corrected_decoder_network',
    'interpolatory_network',
    'plateau_network',
    'piecewise_poly_signals',
    'encode_network',
    'decode_network',
    'save_network',
    'load_network',
    'summary',
]
