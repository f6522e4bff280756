"""Small text helpers shared across modules."""
import re
import unicodedata

_WS = re.compile(r"\s+")


def canonical(s: str) -> str:
    """Canonical form for tags, concepts and stop words.

    NFC-normalized, lowercased, trimmed, inner whitespace collapsed.
    Accents are preserved.
    """
    return _WS.sub(" ", unicodedata.normalize("NFC", s)).strip().lower()


def words(text: str) -> list[str]:
    """A word is a maximal run of non-whitespace characters."""
    return text.split()


def word_count(text: str) -> int:
    return len(text.split())
