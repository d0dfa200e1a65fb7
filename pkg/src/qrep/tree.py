from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

from .errors import InvalidPath


def is_safe_relpath(path: str) -> bool:
    """True for a non-empty relative POSIX path that cannot escape its root."""
    if not isinstance(path, str) or not path or "\x00" in path or "\\" in path:
        return False
    if path.startswith("/") or (len(path) > 1 and path[1] == ":"):
        return False
    parts = path.split("/")
    return all(part not in ("..",) for part in parts) and any(p not in ("", ".") for p in parts)


def normalize_relpath(path: str) -> str:
    if not is_safe_relpath(path):
        raise InvalidPath(path)
    parts = [p for p in path.split("/") if p not in ("", ".")]
    return "/".join(parts)


@dataclass(frozen=True)
class FileEntry:
    content: bytes
    executable: bool = False


class PackageTree:
    """Relative path -> file contents, iterated in byte-lexicographic path order."""

    def __init__(self, files: Mapping[str, FileEntry | bytes] | None = None) -> None:
        self._files: dict[str, FileEntry] = {}
        for path, entry in (files or {}).items():
            if isinstance(entry, FileEntry):
                self.add(path, entry.content, entry.executable)
            else:
                self.add(path, entry)

    def add(self, path: str, content: bytes, executable: bool = False) -> None:
        path = normalize_relpath(path)
        if not isinstance(content, (bytes, bytearray)):
            raise TypeError(f"content for {path} must be bytes")
        self._files[path] = FileEntry(bytes(content), bool(executable))

    def remove(self, path: str) -> None:
        del self._files[normalize_relpath(path)]

    def copy(self) -> "PackageTree":
        new = PackageTree()
        new._files = dict(self._files)
        return new

    def paths(self) -> list[str]:
        return sorted(self._files, key=lambda p: p.encode("utf-8"))

    def items(self) -> Iterator[tuple[str, FileEntry]]:
        for path in self.paths():
            yield path, self._files[path]

    def contents(self) -> dict[str, bytes]:
        return {p: e.content for p, e in self.items()}

    def get(self, path: str) -> FileEntry | None:
        return self._files.get(path)

    def __getitem__(self, path: str) -> FileEntry:
        return self._files[path]

    def __contains__(self, path: object) -> bool:
        return path in self._files

    def __len__(self) -> int:
        return len(self._files)

    def __iter__(self) -> Iterator[str]:
        return iter(self.paths())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PackageTree):
            return NotImplemented
        return self._files == other._files

    def __repr__(self) -> str:
        return f"PackageTree({len(self)} files)"

    # filesystem ------------------------------------------------------------

    def write_to(self, root: str | os.PathLike) -> None:
        root = Path(root)
        for path, entry in self.items():
            target = root.joinpath(*path.split("/"))
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(entry.content)
            os.chmod(target, 0o755 if entry.executable else 0o644)

    @classmethod
    def read_from(cls, root: str | os.PathLike, exclude: tuple[str, ...] = ()) -> "PackageTree":
        """Load every regular file below ``root``; symlinks are skipped."""
        root = Path(root)
        tree = cls()
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames.sort()
            for name in sorted(filenames):
                full = Path(dirpath) / name
                if full.is_symlink() or not full.is_file():
                    continue
                rel = full.relative_to(root).as_posix()
                if rel in exclude:
                    continue
                tree.add(rel, full.read_bytes(), bool(full.stat().st_mode & 0o100))
        return tree
