"""Line-oriented ``[section]`` / ``key = value`` text format.

Unlike :mod:`configparser`, sections and keys may repeat (a robot file has
one ``[link]`` block per link, a foot block has one ``corner`` line per
corner), and order is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Malformed structured text file."""


@dataclass
class Section:
    name: str
    line: int
    entries: list[tuple[str, str]] = field(default_factory=list)

    def get(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.entries:
            if k == key:
                return v
        return default

    def require(self, key: str) -> str:
        value = self.get(key)
        if value is None:
            raise ParseError(f"[{self.name}] block at line {self.line}: missing key '{key}'")
        return value

    def get_all(self, key: str) -> list[str]:
        return [v for k, v in self.entries if k == key]

    def floats(self, key: str, n: int | None = None, default=None) -> np.ndarray:
        raw = self.get(key)
        if raw is None:
            if default is not None:
                return np.asarray(default, dtype=float)
            raise ParseError(f"[{self.name}] block at line {self.line}: missing key '{key}'")
        return parse_floats(raw, n, where=f"[{self.name}] line {self.line} key '{key}'")

    def float(self, key: str, default: float | None = None) -> float:
        raw = self.get(key)
        if raw is None:
            if default is not None:
                return float(default)
            raise ParseError(f"[{self.name}] block at line {self.line}: missing key '{key}'")
        return float(parse_floats(raw, 1, where=f"[{self.name}] key '{key}'")[0])


def parse_floats(raw: str, n: int | None = None, where: str = "") -> np.ndarray:
    try:
        values = np.array([float(tok) for tok in raw.split()], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{where}: expected numbers, got '{raw}'") from exc
    if n is not None and values.size != n:
        raise ParseError(f"{where}: expected {n} numbers, got {values.size}")
    return values


def parse(text: str) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ParseError(f"line {lineno}: bad section header '{raw.strip()}'")
            current = Section(line[1:-1].strip(), lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        if current is None:
            raise ParseError(f"line {lineno}: entry outside of any section")
        key, value = line.split("=", 1)
        current.entries.append((key.strip(), value.strip()))
    return sections


def read(path: str | Path) -> list[Section]:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def fmt(values) -> str:
    """Space-separated shortest round-trip decimal encoding."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    return " ".join(repr(float(v)) for v in arr)


def dump(sections: list[tuple[str, list[tuple[str, str]]]]) -> str:
    out = []
    for name, entries in sections:
        out.append(f"[{name}]")
        out.extend(f"{k} = {v}" for k, v in entries)
        out.append("")
    return "\n".join(out)
