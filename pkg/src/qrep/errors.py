"""Exception hierarchy shared by all qrep modules."""

from __future__ import annotations


class QrepError(Exception):
    """Base class for every error raised by qrep."""


# manifest ------------------------------------------------------------------

class ManifestError(QrepError):
    pass


class MalformedDocument(ManifestError):
    pass


class MissingField(ManifestError):
    def __init__(self, field: str) -> None:
        super().__init__(f"missing required field: {field}")
        self.field = field


class UnknownField(ManifestError):
    def __init__(self, field: str) -> None:
        super().__init__(f"unknown field: {field}")
        self.field = field


class InvalidField(ManifestError):
    def __init__(self, field: str, reason: str) -> None:
        super().__init__(f"invalid value for {field}: {reason}")
        self.field = field
        self.reason = reason


class DuplicateArtifactId(ManifestError):
    def __init__(self, artifact_id: str) -> None:
        super().__init__(f"duplicate artifact id: {artifact_id}")
        self.artifact_id = artifact_id


class InvalidPath(ManifestError):
    def __init__(self, path: str) -> None:
        super().__init__(f"path must be relative and must not contain '..': {path!r}")
        self.path = path


# generator -----------------------------------------------------------------

class GenerationError(QrepError):
    pass


class UnboundPlaceholder(GenerationError):
    def __init__(self, name: str) -> None:
        super().__init__(f"template placeholder has no binding: {name}")
        self.name = name


class TemplateSyntaxError(GenerationError):
    pass


class UnsupportedBackendKind(GenerationError):
    def __init__(self, kind: str) -> None:
        super().__init__(f"unsupported backend kind: {kind}")
        self.kind = kind


class ManifestNotValid(GenerationError):
    def __init__(self, findings) -> None:
        self.findings = list(findings)
        lines = "; ".join(str(f) for f in self.findings)
        super().__init__(f"manifest has validation findings: {lines}")


# replay --------------------------------------------------------------------

class ReplayError(QrepError):
    pass


class TranscriptSealed(ReplayError):
    pass


class TranscriptNotSealed(ReplayError):
    pass


class TranscriptFormatError(ReplayError):
    pass


class UnmatchedRequest(ReplayError):
    def __init__(self, digest: str) -> None:
        super().__init__(f"no recorded interaction for request digest {digest}")
        self.digest = digest


class DigestExhausted(ReplayError):
    def __init__(self, digest: str, recorded: int) -> None:
        super().__init__(
            f"all {recorded} recorded interaction(s) for digest {digest} already served"
        )
        self.digest = digest
        self.recorded = recorded


class BindFailure(ReplayError):
    pass


# packager / verifier -------------------------------------------------------

class PathTooLong(QrepError):
    def __init__(self, path: str, limit: int) -> None:
        super().__init__(f"archive member path exceeds {limit} bytes: {path[:60]}...")
        self.path = path


class CorruptArchive(QrepError):
    pass


class UnparsableRecipe(QrepError):
    def __init__(self, line_no: int, line: str) -> None:
        super().__init__(f"line {line_no}: not a supported recipe instruction: {line!r}")
        self.line_no = line_no
        self.line = line


# audit ---------------------------------------------------------------------

class CorpusError(QrepError):
    row: int | None = None


class BadHeader(CorpusError):
    def __init__(self, header: list[str]) -> None:
        super().__init__(f"row 1: unexpected header {','.join(header)!r}")
        self.row = 1


class BadEnumValue(CorpusError):
    def __init__(self, row: int, column: str, value: str) -> None:
        super().__init__(f"row {row}: invalid value {value!r} for {column}")
        self.row = row
        self.column = column
        self.value = value


class InconsistentRecord(CorpusError):
    def __init__(self, row: int, reason: str) -> None:
        super().__init__(f"row {row}: inconsistent record: {reason}")
        self.row = row
