"""Genome ingestion: FASTA parsing, restriction digestion, distance files.

A restriction enzyme cuts wherever its recognition sequence occurs; cut
coordinates are recognition start plus the enzyme's cut offset.  Together
with the two sequence ends as dummy sites, the pairwise differences of the
cut coordinates form an integer turnpike instance.  Only exact A/C/G/T
matches count: ambiguity codes never match a recognition sequence, and
overlapping occurrences all count.

The distance file format is plain UTF-8 text: one decimal literal per line,
``#``-prefixed lines ignored, with an optional recommended header
``# kind=<turnpike|beltway> N=<int>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import DistanceMultiset, MultisetKind

__all__ = [
    "Enzyme",
    "DigestResult",
    "ENZYMES",
    "parse_fasta",
    "digest",
    "reverse_complement",
    "write_distances",
    "read_distances",
]

# IUPAC nucleotide codes (DNA)
_IUPAC = set("ACGTRYSWKMBDHVN")
_COMPLEMENT = str.maketrans("ACGT", "TGCA")


@dataclass(frozen=True)
class Enzyme:
    name: str
    recognition: str
    cut_offset: int  # bases from recognition start to the cut position

    def __post_init__(self):
        if not self.recognition:
            raise ValueError("recognition sequence must be nonempty")
        if set(self.recognition) - set("ACGT"):
            raise ValueError("recognition sequence must be over A/C/G/T")
        if not 0 <= self.cut_offset <= len(self.recognition):
            raise ValueError("cut offset must lie within the recognition sequence")


ENZYMES = {
    "SmaI": Enzyme("SmaI", "CCCGGG", 3),
    "BamHI": Enzyme("BamHI", "GGATCC", 1),
}


@dataclass(frozen=True)
class DigestResult:
    sites: np.ndarray  # strictly increasing, first 0, last len(sequence)
    N: int
    distances: DistanceMultiset  # raw turnpike, integer values

    def __post_init__(self):
        s = np.asarray(self.sites, dtype=int)
        if s[0] != 0 or np.any(np.diff(s) <= 0):
            raise ValueError("sites must be strictly increasing and start at 0")
        object.__setattr__(self, "sites", s)


def parse_fasta(path) -> str:
    """Sequence of the first record, uppercased, validated against IUPAC codes."""
    text = Path(path).read_text()
    lines = text.splitlines()
    i = 0
    while i < len(lines) and not lines[i].strip():
        i += 1
    if i == len(lines) or not lines[i].startswith(">"):
        raise ValueError(f"{path}: missing FASTA header line")
    chunks = []
    for line in lines[i + 1:]:
        if line.startswith(">"):
            break  # only the first record
        chunks.append(line.strip())
    seq = "".join(chunks).upper()
    if not seq:
        raise ValueError(f"{path}: empty sequence")
    bad = set(seq) - _IUPAC
    if bad:
        raise ValueError(f"{path}: illegal characters {sorted(bad)!r}")
    return seq


def reverse_complement(seq: str) -> str:
    return seq.translate(_COMPLEMENT)[::-1]


def digest(sequence: str, enzyme: Enzyme) -> DigestResult:
    """Cut coordinates (with dummy ends) and the induced distance multiset."""
    sites = {0, len(sequence)}
    needle = enzyme.recognition
    start = 0
    while True:
        i = sequence.find(needle, start)
        if i < 0:
            break
        sites.add(i + enzyme.cut_offset)
        start = i + 1  # overlapping occurrences all count
    ordered = np.array(sorted(sites), dtype=int)
    N = ordered.size
    i, j = np.triu_indices(N, k=1)
    dm = DistanceMultiset(
        (ordered[j] - ordered[i]).astype(float), MultisetKind.TURNPIKE_RAW, N
    )
    return DigestResult(ordered, N, dm)


_HEADER_RE = re.compile(r"^#\s*kind=(turnpike|beltway)\s+N=(\d+)\s*$")


def write_distances(path, dm: DistanceMultiset) -> None:
    lines = [f"# kind={dm.kind.family} N={dm.N}"]
    for v in dm.values:
        lines.append(repr(float(v)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_distances(path, N: int | None = None, family: str | None = None) -> DistanceMultiset:
    """Parse a distance file; header (when present) fixes N and the family.

    Whether the multiset is raw or augmented is inferred from its size.
    Malformed lines are reported with their line number.
    """
    values = []
    header_family = None
    header_N = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER_RE.match(line)
            if m:
                header_family, header_N = m.group(1), int(m.group(2))
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a decimal literal: {raw!r}") from None

    family = family or header_family
    N = N if N is not None else header_N
    if family is None or N is None:
        raise ValueError(f"{path}: kind/N not given and no header found")
    size = len(values)
    if family == "turnpike":
        raw_n, aug_n = N * (N - 1) // 2, N * (N + 1) // 2
        kind = MultisetKind.TURNPIKE_RAW if size == raw_n else MultisetKind.TURNPIKE_AUGMENTED
    else:
        raw_n, aug_n = N * (N - 1), N * N
        kind = MultisetKind.BELTWAY_RAW if size == raw_n else MultisetKind.BELTWAY_AUGMENTED
    if size not in (raw_n, aug_n):
        raise ValueError(
            f"{path}: {size} distances is neither raw ({raw_n}) nor augmented "
            f"({aug_n}) for {family} N={N}"
        )
    return DistanceMultiset(np.array(values), kind, N)
