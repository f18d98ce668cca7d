"""Exception hierarchy.

Every error carries the CLI exit code it maps to:
0 success, 1 I/O, 2 bad parameter, 3 pipeline integrity.
"""

EXIT_IO = 1
EXIT_PARAM = 2
EXIT_PIPELINE = 3


class PovpoolError(Exception):
    exit_code = EXIT_PIPELINE

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code,
        }


# frame ingest
class SourceGap(PovpoolError):
    exit_code = EXIT_IO


class MetaMissing(PovpoolError):
    exit_code = EXIT_IO


class DimensionMismatch(PovpoolError):
    exit_code = EXIT_PIPELINE


class TruncatedClip(PovpoolError):
    exit_code = EXIT_PIPELINE


# pooling
class EmptyWindow(PovpoolError):
    exit_code = EXIT_PARAM


class BadParameter(PovpoolError):
    exit_code = EXIT_PARAM


class WeightMismatch(PovpoolError):
    exit_code = EXIT_PIPELINE


# subtitles
class ParseError(PovpoolError):
    exit_code = EXIT_IO

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# interleave
class IncompletePipeline(PovpoolError):
    exit_code = EXIT_PIPELINE


class PromptError(PovpoolError):
    exit_code = EXIT_PARAM


# metrics
class DimMismatch(PovpoolError):
    exit_code = EXIT_PARAM


class ZeroVector(PovpoolError):
    exit_code = EXIT_PARAM


# losses
class EmptySequence(PovpoolError):
    exit_code = EXIT_PARAM


class EmptyBatch(PovpoolError):
    exit_code = EXIT_PARAM


class ShapeError(PovpoolError):
    exit_code = EXIT_PARAM
