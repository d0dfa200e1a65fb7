"""Name-anchored detection of credential values written into files.

Only lines mentioning a declared credential name are inspected.  Two rules:

* inline assignment: ``NAME=value``, ``NAME: "value"``, ``"NAME": "value"``
  where the value is a literal rather than a reference (``$NAME``, ``${...}``,
  ``os.environ[...]``, empty string, the redaction marker);
* high-entropy token: a run of at least 32 base64-ish characters on the
  same line as the name.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

REDACTION_MARKER = "«REDACTED»"
ENTROPY_MIN_LENGTH = 32

_HIGH_ENTROPY = re.compile(r"[A-Za-z0-9+/=_\-]{%d,}" % ENTROPY_MIN_LENGTH)
_NOT_VALUES = {"none", "null", "nil", "true", "false", "undefined"}


@dataclass(frozen=True)
class SecretHit:
    path: str
    line_no: int
    name: str
    rule: str  # "inline-assignment" | "high-entropy"

    def __str__(self) -> str:
        return f"{self.path}:{self.line_no}: {self.rule} next to credential {self.name}"


def _assignment_pattern(name: str) -> re.Pattern[str]:
    # ":" followed by "-", "=", "+" or "?" is shell parameter expansion, "==" is comparison
    return re.compile(
        r"(?<![A-Za-z0-9_$])(?<!\$\{)" + re.escape(name) + r"(?![A-Za-z0-9_])"
        r"[\"']?\s*(?::(?![-=+?])|=(?!=))\s*"
        r"(?:\"(?P<dq>[^\"]*)\"|'(?P<sq>[^']*)'|(?P<bare>[^\s\"',;}\]\)#]+)(?=$|[\s,;}\]\)#]))"
    )


def _is_literal_value(value: str) -> bool:
    value = value.strip()
    if not value or value == REDACTION_MARKER:
        return False
    if value.startswith("$") or value.startswith("<") or value.startswith("«"):
        return False
    if value.lower() in _NOT_VALUES:
        return False
    return True


def scan_text(path: str, text: str, credential_names: Iterable[str]) -> list[SecretHit]:
    names = sorted({n for n in credential_names if n})
    if not names:
        return []
    patterns = {n: _assignment_pattern(n) for n in names}
    hits = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        for name in names:
            if name not in line:
                continue
            inline = False
            for m in patterns[name].finditer(line):
                value = m.group("dq") if m.group("dq") is not None else (
                    m.group("sq") if m.group("sq") is not None else m.group("bare"))
                if _is_literal_value(value):
                    inline = True
                    break
            if inline:
                hits.append(SecretHit(path, line_no, name, "inline-assignment"))
                continue
            stripped = line.replace(name, " ")
            if _HIGH_ENTROPY.search(stripped):
                hits.append(SecretHit(path, line_no, name, "high-entropy"))
    return hits


def scan_files(files: Mapping[str, bytes], credential_names: Iterable[str]) -> list[SecretHit]:
    names = list(credential_names)
    hits = []
    for path in sorted(files):
        hits.extend(scan_text(path, files[path].decode("utf-8", errors="replace"), names))
    return hits
