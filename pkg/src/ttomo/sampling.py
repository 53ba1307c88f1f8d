"""Measurement datasets: categorical sampling and the on-disk format."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, ValidationError

_MAGIC = "ttsamples 1"
# Draws are consumed from the stream in fixed-size blocks so results do not
# depend on available memory.
_CHUNK = 1 << 20
_MAX_CODE_SITES = 31  # base-4 string codes must fit in int64


def _string_codes(strings: np.ndarray, L: int) -> np.ndarray:
    if L > _MAX_CODE_SITES:
        raise ValidationError(f"string codes support L <= {_MAX_CODE_SITES}, got {L}")
    weights = 4 ** np.arange(L - 1, -1, -1, dtype=np.int64)
    return strings.astype(np.int64) @ weights


@dataclass(frozen=True)
class SampleSet:
    """Distinct outcome strings with multiplicities.

    Attributes:
        L: String length.
        total: Number of draws the set aggregates.
        strings: Array (n_distinct, L) of symbols 0..3, lexicographically
            sorted with no repeated rows.
        counts: Positive multiplicities summing exactly to ``total``.
        seed: Seed of the generator that produced the draws, if any.
        stream: Substream index used to decorrelate related datasets.
        source: Free-form origin label ("train", "test", ...).
    """

    L: int
    total: int
    strings: np.ndarray
    counts: np.ndarray
    seed: int | None = None
    stream: int = 0
    source: str = "-"

    def __post_init__(self) -> None:
        strings = np.ascontiguousarray(np.asarray(self.strings, dtype=np.uint8))
        counts = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        object.__setattr__(self, "strings", strings)
        object.__setattr__(self, "counts", counts)
        if strings.ndim != 2 or strings.shape[1] != self.L:
            raise ValidationError(f"strings shape {strings.shape} does not match L={self.L}")
        if counts.shape != (strings.shape[0],):
            raise ValidationError("counts and strings lengths differ")
        if strings.size and strings.max() > 3:
            raise ValidationError("strings contain symbols outside 0..3")
        if counts.size and counts.min() < 1:
            raise ValidationError("multiplicities must be positive")
        if int(counts.sum()) != self.total:
            raise ValidationError(
                f"multiplicities sum to {int(counts.sum())}, recorded total is {self.total}"
            )
        codes = _string_codes(strings, self.L)
        if codes.size > 1 and not np.all(np.diff(codes) > 0):
            raise ValidationError("strings must be distinct and lexicographically sorted")
        strings.setflags(write=False)
        counts.setflags(write=False)

    @property
    def n_distinct(self) -> int:
        return self.strings.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Empirical probabilities counts / total."""
        return self.counts / self.total

    def codes(self) -> np.ndarray:
        """Strings as base-4 integers, site 0 most significant."""
        return _string_codes(self.strings, self.L)


def _num_sites_from_size(size: int) -> int:
    L = max(1, int(round(np.log2(size) / 2)))
    if 4**L != size:
        raise ValidationError(f"distribution length {size} is not a power of 4")
    return L


def sample_dataset(
    dist: np.ndarray,
    n: int,
    seed: int,
    stream: int = 0,
    source: str = "-",
) -> SampleSet:
    """Aggregate ``n`` i.i.d. categorical draws from a dense distribution.

    Draws use inverse-CDF lookup over the lexicographic string order, fed by
    the PCG64 stream ``SeedSequence(seed, spawn_key=(stream,))``. Negative
    entries above -1e-12 are clipped to zero and the distribution is
    renormalized before drawing.
    """
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1:
        raise ValidationError("distribution must be a flat vector")
    L = _num_sites_from_size(dist.size)
    if n < 1 or int(n) != n:
        raise ValidationError(f"sample count must be a positive integer, got {n}")
    if dist.min() < -1e-12:
        raise ValidationError(f"distribution has negative mass {dist.min():.3e}")
    dist = np.clip(dist, 0.0, None)
    mass = dist.sum()
    if abs(mass - 1.0) > 1e-8:
        raise ValidationError(f"distribution sums to {mass}, expected 1 within 1e-8")
    cdf = np.cumsum(dist / mass)
    cdf[-1] = 1.0
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))
    counts = np.zeros(dist.size, dtype=np.int64)
    remaining = int(n)
    while remaining > 0:
        block = min(_CHUNK, remaining)
        draws = np.searchsorted(cdf, rng.random(block), side="right")
        counts += np.bincount(draws, minlength=dist.size)
        remaining -= block
    observed = np.flatnonzero(counts)
    digits = (observed[:, None] // 4 ** np.arange(L - 1, -1, -1, dtype=np.int64)) % 4
    return SampleSet(
        L=L,
        total=int(n),
        strings=digits.astype(np.uint8),
        counts=counts[observed],
        seed=int(seed),
        stream=int(stream),
        source=source,
    )


def split_train_test(dist: np.ndarray, n: int, seed: int) -> tuple:
    """Two independent datasets of ``n`` draws each from decorrelated substreams."""
    train = sample_dataset(dist, n, seed, stream=0, source="train")
    test = sample_dataset(dist, n, seed, stream=1, source="test")
    return train, test


def save_samples(sset: SampleSet, path) -> None:
    """Write a sample set in the line-oriented text format."""
    lines = [
        _MAGIC,
        f"L {sset.L}",
        f"N {sset.total}",
        f"seed {'-' if sset.seed is None else sset.seed}",
        f"stream {sset.stream}",
        f"source {sset.source or '-'}",
    ]
    for row, count in zip(sset.strings, sset.counts):
        lines.append("".join(str(int(d)) for d in row) + f" {int(count)}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _fail(path, lineno: int, message: str):
    raise DataFormatError(f"{path}:{lineno}: {message}")


def load_samples(path) -> SampleSet:
    """Read a sample set, validating the format and every invariant."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        _fail(path, 1, f"expected header '{_MAGIC}'")
    header = {}
    fields = ["L", "N", "seed", "stream", "source"]
    for i, key in enumerate(fields):
        lineno = i + 2
        if lineno - 1 >= len(lines):
            _fail(path, lineno, f"missing header line '{key}'")
        parts = lines[lineno - 1].split(maxsplit=1)
        if len(parts) != 2 or parts[0] != key:
            _fail(path, lineno, f"expected '{key} <value>'")
        header[key] = parts[1]
    try:
        L = int(header["L"])
        total = int(header["N"])
        seed = None if header["seed"] == "-" else int(header["seed"])
        stream = int(header["stream"])
    except ValueError as exc:
        _fail(path, 2, f"bad header value: {exc}")
    strings = []
    counts = []
    for offset, line in enumerate(lines[len(fields) + 1 :]):
        lineno = len(fields) + 2 + offset
        parts = line.split()
        if len(parts) != 2:
            _fail(path, lineno, "expected '<string> <count>'")
        word, count_text = parts
        if len(word) != L or any(ch not in "0123" for ch in word):
            _fail(path, lineno, f"'{word}' is not a length-{L} string over symbols 0..3")
        try:
            count = int(count_text)
        except ValueError:
            _fail(path, lineno, f"bad multiplicity '{count_text}'")
        strings.append([int(ch) for ch in word])
        counts.append(count)
    arr = np.array(strings, dtype=np.uint8).reshape(len(strings), L)
    try:
        return SampleSet(
            L=L,
            total=total,
            strings=arr,
            counts=np.array(counts, dtype=np.int64),
            seed=seed,
            stream=stream,
            source=header["source"],
        )
    except ValidationError as exc:
        _fail(path, len(fields) + 1, str(exc))
