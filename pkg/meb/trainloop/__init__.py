from meb.trainloop.adapt import AdaptResult, adapt_target, loss_config
from meb.trainloop.optim import Adam, AdamState, adam_step, step_lr
from meb.trainloop.supervised import pretrain_source, train_supervised

__all__ = [
    "Adam",
    "AdamState",
    "AdaptResult",
    "adam_step",
    "adapt_target",
    "loss_config",
    "pretrain_source",
    "step_lr",
    "train_supervised",
]
