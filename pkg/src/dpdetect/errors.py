"""Exception hierarchy. Everything here is a ValueError so callers can catch broadly."""


class DarkPatternError(ValueError):
    pass


class CorpusError(DarkPatternError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SplitError(DarkPatternError):
    pass


class VocabularyError(DarkPatternError):
    pass


class DimensionMismatch(DarkPatternError):
    pass


class TrainingError(DarkPatternError):
    pass


class DivergenceError(TrainingError):
    def __init__(self, iteration, loss):
        super().__init__(f"loss became non-finite ({loss}) at iteration {iteration}")
        self.iteration = iteration


class ModelFormatError(DarkPatternError):
    pass


class VersionError(ModelFormatError):
    pass


class IntegrityError(ModelFormatError):
    pass


class MetricsError(DarkPatternError):
    pass


class ExperimentError(DarkPatternError):
    pass
