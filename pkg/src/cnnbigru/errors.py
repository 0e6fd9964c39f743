class DomainError(ValueError):
    """Argument outside the domain of an operation (non-finite input, bad extent)."""


class ShapeError(ValueError):
    """Array shapes disagree with what a layer or model expects."""


class DataError(ValueError):
    """Dataset, CSV or recipe problem."""


class TrainingDivergence(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss}")
        self.epoch = epoch
        self.loss = loss
