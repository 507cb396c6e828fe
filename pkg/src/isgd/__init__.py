"""Inconsistent SGD: loss-monitored mini-batch training with extra effort
on batches whose loss sits above a control limit."""

from .data import Batch, Dataset, FcprSampler, load_mnist_idx, synth_gaussian, synth_train_test
from .errors import DivergenceError, WorkerError
from .nn import LossAndGrad, NetworkSpec, evaluate, forward_backward, init_network
from .optim import OptimizerConfig, TrainingReport, accelerate_batch, train
from .parallel import ParallelEvaluator, parallel_forward_backward, shard
from .spc import SpcWindow
from .timemodel import SystemModel, iter_time, loss_after_time, optimal_batch, time_for_loss

__all__ = [
    "Batch", "Dataset", "FcprSampler", "load_mnist_idx", "synth_gaussian", "synth_train_test",
    "DivergenceError", "WorkerError",
    "LossAndGrad", "NetworkSpec", "evaluate", "forward_backward", "init_network",
    "OptimizerConfig", "TrainingReport", "accelerate_batch", "train",
    "ParallelEvaluator", "parallel_forward_backward", "shard",
    "SpcWindow",
    "SystemModel", "iter_time", "loss_after_time", "optimal_batch", "time_for_loss",
]
