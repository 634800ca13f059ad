from . import autograd, checkpoint, layers, optim

__all__ = ["autograd", "checkpoint", "layers", "optim"]
