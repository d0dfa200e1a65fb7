"""Byte-deterministic tar archives with an embedded SHA-256 checksum manifest."""

from __future__ import annotations

import hashlib
import io
import re
import tarfile
from dataclasses import dataclass, field

from .errors import CorruptArchive, InvalidPath, PathTooLong
from .tree import PackageTree

CHECKSUM_NAME = "CHECKSUMS.sha256"
# 2021-01-01T00:00:00Z; mtime 0 makes some extractors complain
FIXED_MTIME = 1609459200
MAX_PATH_BYTES = 4096

_CHECKSUM_LINE = re.compile(r"^([0-9a-f]{64}) [ *](.+)$")


@dataclass(frozen=True)
class ChecksumManifest:
    entries: tuple[tuple[str, str], ...]  # (sha256 hex, path), sorted by path bytes

    def render(self) -> str:
        return "".join(f"{digest}  {path}\n" for digest, path in self.entries)

    def as_dict(self) -> dict[str, str]:
        return {path: digest for digest, path in self.entries}

    @classmethod
    def parse(cls, text: str) -> "ChecksumManifest":
        entries = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            m = _CHECKSUM_LINE.match(line)
            if m is None:
                raise CorruptArchive(f"{CHECKSUM_NAME} line {line_no} is malformed: {line!r}")
            entries.append((m.group(1), m.group(2)))
        return cls(tuple(entries))


def _without_checksum_file(tree: PackageTree) -> PackageTree:
    if CHECKSUM_NAME in tree:
        tree = tree.copy()
        tree.remove(CHECKSUM_NAME)
    return tree


def checksum_manifest(tree: PackageTree) -> ChecksumManifest:
    tree = _without_checksum_file(tree)
    return ChecksumManifest(tuple(
        (hashlib.sha256(entry.content).hexdigest(), path) for path, entry in tree.items()
    ))


def package_id(tree: PackageTree) -> str:
    return hashlib.sha256(checksum_manifest(tree).render().encode("utf-8")).hexdigest()


def _tarinfo(path: str, size: int, executable: bool) -> tarfile.TarInfo:
    if len(path.encode("utf-8")) > MAX_PATH_BYTES:
        raise PathTooLong(path, MAX_PATH_BYTES)
    info = tarfile.TarInfo(path)
    info.size = size
    info.mtime = FIXED_MTIME
    info.mode = 0o755 if executable else 0o644
    info.uid = info.gid = 0
    info.uname = info.gname = ""
    info.type = tarfile.REGTYPE
    return info


def build_archive(tree: PackageTree) -> bytes:
    tree = _without_checksum_file(tree)
    members = tree.copy()
    members.add(CHECKSUM_NAME, checksum_manifest(tree).render().encode("utf-8"))
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.PAX_FORMAT, encoding="utf-8") as tar:
        for path, entry in members.items():
            tar.addfile(_tarinfo(path, len(entry.content), entry.executable), io.BytesIO(entry.content))
    return buf.getvalue()


def read_archive(data: bytes) -> PackageTree:
    """Load every regular file of an archive, ``CHECKSUMS.sha256`` included."""
    tree = PackageTree()
    try:
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:") as tar:
            for member in tar:
                if member.isdir():
                    continue
                if not member.isreg():
                    raise CorruptArchive(f"unexpected non-regular member {member.name!r}")
                fh = tar.extractfile(member)
                content = fh.read() if fh is not None else b""
                try:
                    tree.add(member.name, content, bool(member.mode & 0o100))
                except InvalidPath:
                    raise CorruptArchive(f"unsafe member path {member.name!r}") from None
    except (tarfile.TarError, EOFError) as exc:
        raise CorruptArchive(f"cannot read archive: {exc}") from exc
    return tree


@dataclass
class ArchiveReport:
    mismatches: list[str] = field(default_factory=list)
    missing_from_archive: list[str] = field(default_factory=list)
    missing_from_manifest: list[str] = field(default_factory=list)
    no_checksum_manifest: bool = False

    @property
    def ok(self) -> bool:
        return not (self.mismatches or self.missing_from_archive
                    or self.missing_from_manifest or self.no_checksum_manifest)

    def lines(self) -> list[str]:
        out = []
        if self.no_checksum_manifest:
            out.append(f"NoChecksumManifest: archive has no {CHECKSUM_NAME}")
        out += [f"ChecksumMismatch: {p}" for p in self.mismatches]
        out += [f"MissingFromArchive: {p}" for p in self.missing_from_archive]
        out += [f"MissingFromManifest: {p}" for p in self.missing_from_manifest]
        return out


def verify_tree_checksums(tree: PackageTree) -> ArchiveReport:
    report = ArchiveReport()
    entry = tree.get(CHECKSUM_NAME)
    if entry is None:
        report.no_checksum_manifest = True
        return report
    try:
        expected = ChecksumManifest.parse(entry.content.decode("utf-8")).as_dict()
    except UnicodeDecodeError:
        raise CorruptArchive(f"{CHECKSUM_NAME} is not UTF-8") from None
    actual = checksum_manifest(tree).as_dict()
    for path in sorted(set(expected) | set(actual), key=lambda p: p.encode("utf-8")):
        if path not in actual:
            report.missing_from_archive.append(path)
        elif path not in expected:
            report.missing_from_manifest.append(path)
        elif expected[path] != actual[path]:
            report.mismatches.append(path)
    return report


def verify_archive(data: bytes) -> ArchiveReport:
    return verify_tree_checksums(read_archive(data))
