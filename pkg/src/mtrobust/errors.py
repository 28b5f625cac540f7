"""Exception hierarchy shared across the toolkit.

Every domain failure derives from MtRobustError so the CLI can map any of
them to exit code 1 with a diagnostic.
"""


class MtRobustError(Exception):
    """Base class for all toolkit errors."""


class OutOfVocabularyError(MtRobustError):
    def __init__(self, token):
        super().__init__(f"token not in embedding vocabulary: {token!r}")
        self.token = token


class DimensionMismatchError(MtRobustError):
    pass


class EmptyFileError(MtRobustError):
    pass


class LineCountMismatchError(MtRobustError):
    def __init__(self, src_count, tgt_count):
        # the first missing line is one past the shorter file
        self.line = min(src_count, tgt_count) + 1
        self.src_count = src_count
        self.tgt_count = tgt_count
        super().__init__(
            f"line counts differ: {src_count} source vs {tgt_count} target "
            f"(first missing pair at line {self.line})"
        )


class InvalidUtf8Error(MtRobustError):
    def __init__(self, path, line):
        self.line = line
        super().__init__(f"{path}: invalid UTF-8 at line {line}")


class UnknownDirectionError(MtRobustError):
    pass


class MissingSplitError(MtRobustError):
    pass


class LengthMismatchError(MtRobustError):
    pass


class EmptyCorpusError(MtRobustError):
    pass


class ZeroBaselineError(MtRobustError):
    pass


class HookFailureError(MtRobustError):
    def __init__(self, command, returncode, stderr):
        self.command = command
        self.returncode = returncode
        self.stderr = stderr
        super().__init__(
            f"hook exited with status {returncode}: {command}\n--- captured stderr ---\n{stderr.strip()}"
        )


class MissingOutputError(MtRobustError):
    pass


class IncompleteGridError(MtRobustError):
    pass


class DegenerateDataError(MtRobustError):
    pass


class MissingSeedError(MtRobustError):
    pass


class ConfigError(MtRobustError):
    pass
