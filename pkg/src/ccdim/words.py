"""Finite words over the alphabet {1, ..., N}.

Words address basic intervals: the word ``(s1, ..., sn)`` names the image of
the unit interval under ``phi_{1,s1} o ... o phi_{n,sn}``.  Letters are
1-based throughout, including the serialized forms.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from itertools import product

from .errors import InputError


class Word(tuple):
    """Immutable word; a tuple of 1-based letters."""

    __slots__ = ()

    def __new__(cls, letters: Iterable[int] = ()) -> Word:
        return super().__new__(cls, (int(a) for a in letters))

    def __add__(self, other) -> Word:
        return Word(tuple.__add__(self, tuple(other)))

    def __getitem__(self, item):
        out = tuple.__getitem__(self, item)
        return Word(out) if isinstance(item, slice) else out

    def __repr__(self) -> str:
        return f"Word({format_word(self)!r})"

    @property
    def parent(self) -> Word:
        return parent(self)

    def truncate(self, k: int) -> Word:
        return truncate(self, k)

    def is_prefix_of(self, other: Iterable[int]) -> bool:
        return is_extension(self, Word(other))


EMPTY = Word()


def _check_alphabet(n_letters: int) -> None:
    if int(n_letters) != n_letters or n_letters < 2:
        raise InputError(f"alphabet size must be an integer >= 2, got {n_letters!r}")


def check_word(sigma: Iterable[int], n_letters: int) -> Word:
    """Return ``sigma`` as a Word after checking every letter is in 1..N."""
    w = Word(sigma)
    for i, a in enumerate(w):
        if not 1 <= a <= n_letters:
            raise InputError(f"letter {a} at position {i} outside 1..{n_letters}")
    return w


def enumerate_level(n_letters: int, depth: int) -> Iterator[Word]:
    """Yield all words of length ``depth`` in lexicographic order.

    The stream is lazy; ``N**depth`` words are never held at once.
    """
    _check_alphabet(n_letters)
    if int(depth) != depth or depth < 0:
        raise InputError(f"depth must be a non-negative integer, got {depth!r}")
    for letters in product(range(1, n_letters + 1), repeat=depth):
        yield Word(letters)


def parent(sigma: Word) -> Word:
    """Delete the last letter."""
    if len(sigma) == 0:
        raise InputError("the empty word has no parent")
    return Word(tuple(sigma)[:-1])


def concat(sigma: Iterable[int], tau: Iterable[int]) -> Word:
    return Word(tuple(sigma) + tuple(tau))


def truncate(sigma: Iterable[int], k: int) -> Word:
    s = tuple(sigma)
    if k < 0 or k > len(s):
        raise InputError(f"cannot truncate a word of length {len(s)} to {k}")
    return Word(s[:k])


def is_extension(sigma: Iterable[int], tau: Iterable[int]) -> bool:
    """True iff ``tau`` extends ``sigma`` (``sigma`` is a prefix of ``tau``)."""
    s, t = tuple(sigma), tuple(tau)
    return len(t) >= len(s) and t[: len(s)] == s


def word_index(sigma: Iterable[int], n_letters: int) -> int:
    """Position of ``sigma`` within its level in lexicographic order."""
    idx = 0
    for a in sigma:
        idx = idx * n_letters + (a - 1)
    return idx


def word_from_index(index: int, n_letters: int, depth: int) -> Word:
    letters = []
    for _ in range(depth):
        index, a = divmod(index, n_letters)
        letters.append(a + 1)
    if index:
        raise InputError("index out of range for this level")
    return Word(reversed(letters))


def format_word(sigma: Iterable[int], n_letters: int | None = None) -> str:
    """Serialize: digit string for N <= 9, comma list otherwise, ``-`` if empty."""
    s = tuple(sigma)
    if not s:
        return "-"
    if n_letters is None:
        n_letters = max(s)
    if n_letters <= 9:
        return "".join(str(a) for a in s)
    return ",".join(str(a) for a in s)


def parse_word(text: str, n_letters: int | None = None) -> Word:
    text = text.strip()
    if text in ("-", ""):
        return EMPTY
    try:
        if "," in text or (n_letters is not None and n_letters > 9):
            letters = [int(part) for part in text.split(",")]
        else:
            letters = [int(ch) for ch in text]
    except ValueError:
        raise InputError(f"malformed word {text!r}") from None
    if n_letters is not None:
        return check_word(letters, n_letters)
    if any(a < 1 for a in letters):
        raise InputError(f"malformed word {text!r}: letters are 1-based")
    return Word(letters)


@dataclass(frozen=True)
class Address:
    """Eventually periodic infinite word ``prefix + cycle + cycle + ...``."""

    prefix: Word
    cycle: Word

    def __post_init__(self):
        if len(self.cycle) == 0:
            raise InputError("address cycle must be nonempty")

    def truncate(self, n: int) -> Word:
        letters = list(self.prefix[:n])
        i = 0
        while len(letters) < n:
            letters.append(self.cycle[i % len(self.cycle)])
            i += 1
        return Word(letters)

    @classmethod
    def parse(cls, text: str, n_letters: int | None = None) -> Address:
        """Parse ``"2(12)"``: prefix ``2`` then ``12`` repeated forever.

        A bare word such as ``"1"`` is read as its own cycle.
        """
        text = text.strip()
        if "(" in text:
            if not text.endswith(")"):
                raise InputError(f"malformed address {text!r}")
            head, cyc = text[:-1].split("(", 1)
            return cls(parse_word(head or "-", n_letters), parse_word(cyc, n_letters))
        return cls(EMPTY, parse_word(text, n_letters))
