"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`CsiAdmmError`,
which is itself a ``ValueError`` so callers that only care about bad input can
catch the builtin.
"""


class CsiAdmmError(ValueError):
    pass


# topology
class GraphGenerationError(CsiAdmmError):
    pass


class NoHamiltonianCycle(CsiAdmmError):
    pass


# data
class MalformedLine(CsiAdmmError):
    def __init__(self, lineno, reason=""):
        self.lineno = lineno
        msg = f"malformed LIBSVM line {lineno}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class EmptyFile(CsiAdmmError):
    pass


class TooFewSamples(CsiAdmmError):
    pass


class InvalidStragglerCount(CsiAdmmError):
    pass


class BatchTooLarge(CsiAdmmError):
    pass


class IndivisibleBatch(CsiAdmmError):
    pass


# coding
class IndivisibleGroups(CsiAdmmError):
    pass


class DecodabilityFailure(CsiAdmmError):
    pass


class MissingPartitionGradient(CsiAdmmError):
    pass


class InsufficientResponses(CsiAdmmError):
    pass


class SingularDecode(CsiAdmmError):
    pass


# admm core
class EmptyBatch(CsiAdmmError):
    pass


class BadMixingMatrix(CsiAdmmError):
    pass


# metrics
class SingularSystem(CsiAdmmError):
    pass


class DegenerateInit(CsiAdmmError):
    pass


class EmptyTestSet(CsiAdmmError):
    pass


# experiments
class ConfigError(CsiAdmmError):
    """Invalid run configuration; ``key`` names the offending field."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class UnknownKey(ConfigError):
    def __init__(self, key):
        super().__init__(key, "unknown key")


class TypeMismatch(ConfigError):
    pass


class MissingRequired(ConfigError):
    def __init__(self, key):
        super().__init__(key, "required key is missing")
