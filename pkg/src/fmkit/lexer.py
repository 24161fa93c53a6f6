"""Tokenizer for the .fm model language and .fms scenario files."""
from __future__ import annotations

from dataclasses import dataclass

from .diagnostics import Diagnostic, SourceSpan, error

KEYWORDS = {
    "thing", "sphere", "machine", "event", "behavior", "region",
    "flow", "trigger", "spawn", "when", "assign", "consuming", "implicit",
    "possible", "seq", "choice", "par", "repeat", "interrupt",
    "int", "dec", "str", "bool", "true", "false", "and", "or", "not",
    "create", "process", "release", "transfer", "receive",
    "inject", "at", "tick",
}

# Longest symbols first so '->' wins over '-' and '==' over '='.
SYMBOLS = ["->", "=>", "==", "!=", "<=", ">=", "{", "}", "(", ")", ",", ":",
           "=", "<", ">", "+", "-", "*", "/", "."]

LABEL_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.")


@dataclass(frozen=True)
class Token:
    type: str  # keyword/symbol literal, or IDENT, INT, DEC, STRING, LABEL, EOF
    text: str
    span: SourceSpan

    @property
    def value(self):
        if self.type == "INT":
            return int(self.text)
        if self.type == "DEC":
            return float(self.text)
        if self.type == "STRING":
            return self.text
        return self.text


def tokenize(source: str, file: str) -> tuple[list[Token], list[Diagnostic]]:
    """Total tokenizer: bad characters become diagnostics, never exceptions."""
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    line, col, i = 1, 1, 0
    n = len(source)

    def span(l0: int, c0: int) -> SourceSpan:
        return SourceSpan(file, l0, c0, line, max(col - 1, c0))

    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
                col += 1
            continue
        l0, c0 = line, col
        if ch == "#":
            i += 1
            col += 1
            start = i
            while i < n and source[i] in LABEL_CHARS:
                i += 1
                col += 1
            if i == start:
                diags.append(error("lex-error", "expected a label after '#'", span(l0, c0)))
                continue
            tokens.append(Token("LABEL", source[start:i], span(l0, c0)))
            continue
        if ch == '"':
            i += 1
            col += 1
            buf = []
            closed = False
            while i < n:
                c = source[i]
                if c == "\n":
                    break
                i += 1
                col += 1
                if c == '"':
                    closed = True
                    break
                if c == "\\" and i < n and source[i] in '"\\':
                    buf.append(source[i])
                    i += 1
                    col += 1
                else:
                    buf.append(c)
            if not closed:
                diags.append(error("lex-error", "unterminated string literal", span(l0, c0)))
            tokens.append(Token("STRING", "".join(buf), span(l0, c0)))
            continue
        if ch.isdigit():
            start = i
            while i < n and source[i].isdigit():
                i += 1
                col += 1
            if i + 1 < n and source[i] == "." and source[i + 1].isdigit():
                i += 1
                col += 1
                while i < n and source[i].isdigit():
                    i += 1
                    col += 1
                tokens.append(Token("DEC", source[start:i], span(l0, c0)))
            else:
                tokens.append(Token("INT", source[start:i], span(l0, c0)))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
                col += 1
            text = source[start:i]
            tokens.append(Token(text if text in KEYWORDS else "IDENT", text, span(l0, c0)))
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                i += len(sym)
                col += len(sym)
                tokens.append(Token(sym, sym, span(l0, c0)))
                break
        else:
            diags.append(error("lex-error", f"unexpected character {ch!r}", span(l0, c0)))
            i += 1
            col += 1
    tokens.append(Token("EOF", "", SourceSpan(file, line, col, line, col)))
    return tokens, diags
