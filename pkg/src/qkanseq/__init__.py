"""QKAN-LSTM sequence forecasting: DARUAN activations, QKAN layers and LSTM-family cells."""
from . import cells, daruan, data, grad_engine, kan, kernels, quantum_core, train
from .cells import CellParams, init_cell, run_sequence
from .daruan import DaruanParams, daruan_forward, daruan_grad, daruan_param_shift
from .train import TrainConfig, count_params

__version__ = "0.1.0"

__all__ = [
    "CellParams",
    "DaruanParams",
    "TrainConfig",
    "cells",
    "count_params",
    "daruan",
    "daruan_forward",
    "daruan_grad",
    "daruan_param_shift",
    "data",
    "grad_engine",
    "init_cell",
    "kan",
    "kernels",
    "quantum_core",
    "run_sequence",
    "train",
]
