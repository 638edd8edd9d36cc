"""SDPA sparse format (.dat-s) reader and writer.

Layout: optional comment lines prefixed with '"' or '*', then the number
of constraint matrices m, the number of blocks, the block sizes (a
negative size encodes a diagonal block), the vector b, and entry lines
``matno blockno i j value`` with i <= j. Matrix index 0 is the cost
matrix C; indices 1..m are the constraint matrices.

Multi-block files are embedded into a single dense block-diagonal
matrix; this preserves both optimal values. Files written by this module
always use a single block.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, ParseError
from .linalg import SymMatrix, svec_dense
from .model import SdpInstance

_SEPARATORS = str.maketrans({c: " " for c in ",{}()"})


def _tokenize(lines):
    """Yield (token, line_number) pairs, 1-based line numbers."""
    for lineno, line in lines:
        for tok in line.translate(_SEPARATORS).split():
            yield tok, lineno


class _Stream:
    def __init__(self, tokens):
        self._tokens = list(tokens)
        self._pos = 0
        self.last_line = 0

    def __len__(self):
        return len(self._tokens) - self._pos

    def next(self, what, conv):
        if self._pos >= len(self._tokens):
            raise ParseError(f"unexpected end of file while reading {what}",
                             self.last_line)
        tok, line = self._tokens[self._pos]
        self._pos += 1
        self.last_line = line
        try:
            return conv(tok)
        except ValueError:
            raise ParseError(f"expected {what}, got {tok!r}", line) from None

    def next_int(self, what):
        return self.next(what, int)

    def next_float(self, what):
        return self.next(what, float)


def read_sdpa(path) -> SdpInstance:
    """Parse an SDPA sparse file into an SdpInstance."""
    with open(path, "r") as fh:
        raw = fh.readlines()

    name = ""
    body = []
    header_done = False
    for i, line in enumerate(raw, start=1):
        stripped = line.strip()
        if not header_done and stripped[:1] in ('"', "*"):
            if not name:
                name = stripped.lstrip('"*').strip()
            continue
        if stripped:
            header_done = True
            body.append((i, stripped))

    stream = _Stream(_tokenize(body))
    m = stream.next_int("number of constraint matrices")
    if m < 1:
        raise ParseError(f"m must be >= 1, got {m}", stream.last_line)
    nblocks = stream.next_int("number of blocks")
    if nblocks < 1:
        raise ParseError(f"need >= 1 block, got {nblocks}", stream.last_line)
    sizes = [stream.next_int(f"size of block {k + 1}")
             for k in range(nblocks)]
    if any(s == 0 for s in sizes):
        raise ParseError("zero block size", stream.last_line)
    widths = [abs(s) for s in sizes]
    offsets = np.concatenate([[0], np.cumsum(widths)])
    n = int(offsets[-1])
    b = np.array([stream.next_float(f"b[{i + 1}]") for i in range(m)])

    mats = np.zeros((m + 1, n, n))
    seen = set()
    while len(stream):
        matno = stream.next_int("matrix index")
        line = stream.last_line
        blockno = stream.next_int("block index")
        i = stream.next_int("row index")
        j = stream.next_int("column index")
        value = stream.next_float("entry value")
        if not 0 <= matno <= m:
            raise ParseError(f"matrix index {matno} outside 0..{m}", line)
        if not 1 <= blockno <= nblocks:
            raise ParseError(f"block index {blockno} outside 1..{nblocks}",
                             line)
        width = widths[blockno - 1]
        if not (1 <= i <= j <= width):
            raise ParseError(
                f"entry ({i},{j}) outside upper triangle of block of size "
                f"{width}", line)
        if sizes[blockno - 1] < 0 and i != j:
            raise ParseError(
                f"off-diagonal entry ({i},{j}) in diagonal block", line)
        key = (matno, blockno, i, j)
        if key in seen:
            raise ParseError(f"duplicate entry {key}", line)
        seen.add(key)
        base = offsets[blockno - 1]
        mats[matno, base + i - 1, base + j - 1] = value
        mats[matno, base + j - 1, base + i - 1] = value

    try:
        return SdpInstance(
            C=SymMatrix(n, svec_dense(mats[0])),
            A=tuple(SymMatrix(n, svec_dense(mats[k])) for k in range(1, m + 1)),
            b=b,
            name=name,
        )
    except DimensionMismatch:
        raise
    except ValueError as exc:
        raise ParseError(str(exc), stream.last_line) from exc


def write_sdpa(inst: SdpInstance, path) -> None:
    """Write an instance as a single-block .dat-s file.

    Entries are formatted with 17 significant digits, which round-trips
    IEEE doubles exactly.
    """
    lines = []
    if inst.name:
        lines.append(f'"{inst.name}')
    lines.append(f"{inst.m}")
    lines.append("1")
    lines.append(f"{inst.n}")
    lines.append(" ".join(_fmt(v) for v in inst.b))
    mats = [inst.C_dense] + list(inst.A_dense)
    for matno, mat in enumerate(mats):
        for j in range(inst.n):
            for i in range(j + 1):
                v = mat[i, j]
                if v != 0.0:
                    lines.append(f"{matno} 1 {i + 1} {j + 1} {_fmt(v)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(v):
    return f"{float(v):.17g}"
