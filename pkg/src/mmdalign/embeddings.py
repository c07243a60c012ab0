"""Loading, normalization, and persistence of monolingual embedding spaces.

File format is fastText text ``.vec``: a header line ``n d`` followed by
``word v1 ... vd`` rows, whitespace separated, UTF-8. Vectors are stored as
float32; all downstream accumulation happens in float64.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

# Fraction of malformed lines tolerated before the whole file is rejected.
MAX_SKIP_FRACTION = 0.01


class EmbeddingFormatError(ValueError):
    """Raised when an embedding or lexicon file cannot be used at all."""


@dataclass
class Vocabulary:
    """Frequency-ordered word list with an exact reverse index.

    Index 0 is the most frequent word; order is exactly the file order.
    """

    words: list[str]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index


@dataclass
class EmbeddingSpace:
    """A vocabulary paired with an n x d matrix of word vectors (row i = word i)."""

    vocab: Vocabulary
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.vocab):
            raise ValueError(
                f"matrix shape {self.matrix.shape} inconsistent with "
                f"vocabulary of {len(self.vocab)} words"
            )
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("embedding matrix contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)


@dataclass
class Lexicon:
    """Ordered (source word, target word) pairs; sources may repeat."""

    pairs: list[tuple[str, str]]
    n_skipped: int = 0

    def __post_init__(self) -> None:
        seen = set()
        unique = []
        for s, t in self.pairs:
            if not s or not t:
                raise ValueError("empty word in lexicon pair")
            if (s, t) not in seen:
                seen.add((s, t))
                unique.append((s, t))
        self.pairs = unique

    def __len__(self) -> int:
        return len(self.pairs)


def load_embeddings(path: str | Path, max_vocab: int | None = None) -> EmbeddingSpace:
    """Read a fastText text ``.vec`` file.

    Keeps the first ``max_vocab`` valid rows (all rows if None). Duplicate
    words keep their first occurrence. Malformed lines are skipped with a
    warning; the file is rejected if more than 1% of its data lines are bad.
    """
    path = Path(path)
    words: list[str] = []
    vectors: list[np.ndarray] = []
    seen: set[str] = set()
    n_skipped = 0
    n_data_lines = 0
    header_n = header_d = None
    dim = None

    try:
        fh = open(path, encoding="utf-8", errors="replace")
    except OSError as exc:
        raise EmbeddingFormatError(f"cannot read {path}: {exc}") from exc

    with fh:
        first = fh.readline().split()
        if len(first) == 2:
            try:
                header_n, header_d = int(first[0]), int(first[1])
                dim = header_d
            except ValueError:
                raise EmbeddingFormatError(f"{path}: malformed header line {first!r}")
        else:
            raise EmbeddingFormatError(f"{path}: expected 'n d' header line")

        for line in fh:
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            n_data_lines += 1
            if max_vocab is not None and len(words) >= max_vocab:
                break
            if len(parts) != dim + 1:
                n_skipped += 1
                log.warning("%s: line with %d components, expected %d; skipped",
                            path.name, len(parts) - 1, dim)
                continue
            word = parts[0]
            if word in seen:
                continue
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                n_skipped += 1
                log.warning("%s: non-numeric component for word %r; skipped",
                            path.name, word)
                continue
            if not np.all(np.isfinite(vec)):
                n_skipped += 1
                log.warning("%s: non-finite vector for word %r; skipped", path.name, word)
                continue
            seen.add(word)
            words.append(word)
            vectors.append(vec.astype(np.float32))

    if not words:
        raise EmbeddingFormatError(f"{path}: no usable embedding rows")
    if n_data_lines and n_skipped / n_data_lines > MAX_SKIP_FRACTION:
        raise EmbeddingFormatError(
            f"{path}: {n_skipped}/{n_data_lines} lines malformed (>1%)"
        )
    if header_n is not None and header_n != n_data_lines and max_vocab is None:
        log.warning("%s: header declares %d rows, observed %d; using observed",
                    path.name, header_n, n_data_lines)

    return EmbeddingSpace(Vocabulary(words), np.vstack(vectors))


def save_embeddings(space: EmbeddingSpace, path: str | Path) -> None:
    """Write a space back out in fastText text format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(space)} {space.dim}\n")
        for word, row in zip(space.vocab.words, space.matrix):
            comps = " ".join("%.8g" % v for v in row)
            fh.write(f"{word} {comps}\n")


def normalize(space: EmbeddingSpace,
              steps: tuple[str, ...] = ("unit", "center", "unit")) -> EmbeddingSpace:
    """Apply length/centering steps in order and return a new space.

    ``unit`` divides each row by its Euclidean norm (zero rows are left
    untouched and flagged); ``center`` subtracts the column mean.
    """
    mat = space.matrix.astype(np.float64, copy=True)
    for step in steps:
        if step == "unit":
            norms = np.linalg.norm(mat, axis=1, keepdims=True)
            zero = norms[:, 0] == 0.0
            if np.any(zero):
                log.warning("normalize: %d zero rows left untouched", int(zero.sum()))
                norms[zero] = 1.0
            mat /= norms
        elif step == "center":
            mat -= mat.mean(axis=0, keepdims=True)
        else:
            raise ValueError(f"unknown normalization step {step!r}")
    return EmbeddingSpace(Vocabulary(list(space.vocab.words)), mat.astype(np.float32))


def load_lexicon(path: str | Path) -> Lexicon:
    """Read a two-column ``src tgt`` text lexicon; malformed lines are skipped."""
    pairs: list[tuple[str, str]] = []
    n_skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                n_skipped += 1
                log.warning("%s: malformed lexicon line %r; skipped", Path(path).name,
                            line.rstrip())
                continue
            pairs.append((parts[0], parts[1]))
    return Lexicon(pairs, n_skipped=n_skipped)


def save_lexicon(lex: Lexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s, t in lex.pairs:
            fh.write(f"{s} {t}\n")
