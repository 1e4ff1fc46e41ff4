"""Exception hierarchy shared by all modules."""


class ExerciseEvalError(Exception):
    """Base class for every error raised by this package."""


# dataset
class MissingStream(ExerciseEvalError):
    pass


class LabelOutOfBounds(ExerciseEvalError):
    pass


class RateAnomaly(ExerciseEvalError):
    pass


class InvalidConfig(ExerciseEvalError, ValueError):
    pass


class SeriesNotInRecording(ExerciseEvalError):
    pass


class DatasetFormatError(ExerciseEvalError):
    pass


# features
class LengthMismatch(ExerciseEvalError, ValueError):
    pass


class InsufficientData(ExerciseEvalError, ValueError):
    pass


# labels
class InvalidCombination(ExerciseEvalError, ValueError):
    pass


class MissingClass(ExerciseEvalError, LookupError):
    pass


# classifiers
class DimensionMismatch(ExerciseEvalError, ValueError):
    pass


class DegenerateLabels(ExerciseEvalError, ValueError):
    pass


class NonFiniteFeature(ExerciseEvalError, ValueError):
    pass


class EmptyGrid(ExerciseEvalError, ValueError):
    pass


# pipelines
class MissingExerciseData(ExerciseEvalError):
    pass


class IncompleteResults(ExerciseEvalError):
    pass


# evaluation
class TooFewVolunteers(ExerciseEvalError, ValueError):
    pass


class UnknownLabel(ExerciseEvalError, LookupError):
    pass


class ClassMismatch(ExerciseEvalError, ValueError):
    pass


class SchemeMismatch(ExerciseEvalError, ValueError):
    pass
