"""Minimal s-expression reader with source positions.

Produces nested Python lists whose leaves are Sym tokens (text plus
line/column), which lets the problem parser report where things went
wrong. Comments run from ';' to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError


@dataclass(frozen=True)
class Sym:
    text: str
    line: int
    col: int

    def __repr__(self):
        return self.text


Node = "Sym | list"


def read_all(text: str) -> list:
    """Parse every top-level form in `text`."""
    forms = []
    stack: list[list] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def emit(item):
        if stack:
            stack[-1].append(item)
        else:
            forms.append(item)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
        elif ch in " \t\r":
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == "(":
            new: list = []
            if stack:
                stack[-1].append(new)
            else:
                forms.append(new)
            stack.append(new)
            i += 1
            col += 1
        elif ch == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            stack.pop()
            i += 1
            col += 1
        else:
            start = i
            start_col = col
            while i < n and text[i] not in " \t\r\n();":
                i += 1
                col += 1
            emit(Sym(text[start:i], line, start_col))
    if stack:
        raise ParseError("unbalanced '(': form not closed", line, col)
    return forms


def position(node) -> tuple[int | None, int | None]:
    """Best-effort source position of a node for error messages."""
    if isinstance(node, Sym):
        return node.line, node.col
    for item in node:
        pos = position(item)
        if pos != (None, None):
            return pos
    return None, None
