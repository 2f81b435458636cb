"""Exception hierarchy. Every error carries the name of the module it
originates from so the CLI can surface a single machine-parsable line."""


class NewsbenchError(Exception):
    module = "newsbench"


class DatasetError(NewsbenchError):
    module = "corpus"


class RuleError(NewsbenchError):
    module = "corpus"


class TokenizerError(NewsbenchError):
    module = "tokenizer"


class ShapeError(NewsbenchError):
    module = "autodiff"


class NumericsError(NewsbenchError):
    module = "autodiff"


class ModelError(NewsbenchError):
    module = "model"


class TrainerError(NewsbenchError):
    module = "trainer"


class CheckpointError(NewsbenchError):
    module = "trainer"


class MetricsError(NewsbenchError):
    module = "evaluation"


class DiagnosticsError(NewsbenchError):
    module = "diagnostics"


class EnsembleError(NewsbenchError):
    module = "ensemble"


class ConfigError(NewsbenchError):
    module = "cli"
