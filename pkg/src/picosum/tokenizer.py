"""Deterministic whitespace/punctuation tokenizer with a corpus-built vocabulary.

Any object exposing ``split``, ``tokenize``, ``detokenize`` and the special-id
attributes below can stand in for :class:`WordTokenizer` (for example a thin
wrapper around a subword tokenizer for integration runs).
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Protocol, Sequence

PAD = "<pad>"
BOS = "<s>"
DOC_SEP = "<doc-sep>"
ENT_OPEN = "<ent>"
ENT_CLOSE = "</ent>"
UNK = "<unk>"

# fixed id layout shared by every vocabulary this kit writes
SPECIAL_TOKENS = (PAD, BOS, DOC_SEP, ENT_OPEN, ENT_CLOSE, UNK)

_SPECIAL_RE = "|".join(re.escape(t) for t in sorted(SPECIAL_TOKENS, key=len, reverse=True))
_TOKEN_RE = re.compile(rf"{_SPECIAL_RE}|\w+|[^\w\s]")
_WORD_RE = re.compile(r"\w+")


class Tokenizer(Protocol):
    pad_id: int
    bos_id: int
    doc_sep_id: int
    ent_open_id: int
    ent_close_id: int

    def split(self, text: str) -> list[str]: ...

    def tokenize(self, text: str) -> list[int]: ...

    def detokenize(self, ids: Sequence[int]) -> str: ...


def split_tokens(text: str) -> list[str]:
    """Split text into word, punctuation and special-token strings."""
    return _TOKEN_RE.findall(text)


def split_words(text: str) -> list[str]:
    """Lowercased alphanumeric words only; the token stream used for scoring."""
    return _WORD_RE.findall(text.lower())


class WordTokenizer:
    """Maps whitespace/punctuation tokens to integer ids.

    Special tokens always occupy ids 0-5 in the order of ``SPECIAL_TOKENS``.
    :meth:`from_texts` assigns ordinary tokens ids in sorted order, so the
    mapping depends only on the corpus token set.
    Tokens outside the vocabulary map to ``<unk>``.
    """

    def __init__(self, vocab: Iterable[str] = ()):
        self.id_to_token: list[str] = list(SPECIAL_TOKENS)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(SPECIAL_TOKENS)}
        for tok in vocab:
            if tok not in self.token_to_id:
                self.token_to_id[tok] = len(self.id_to_token)
                self.id_to_token.append(tok)

    pad_id = 0
    bos_id = 1
    doc_sep_id = 2
    ent_open_id = 3
    ent_close_id = 4
    unk_id = 5

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "WordTokenizer":
        seen: set[str] = set()
        for text in texts:
            seen.update(split_tokens(text))
        return cls(sorted(seen - set(SPECIAL_TOKENS)))

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def special_ids(self) -> dict[str, int]:
        return {tok: self.token_to_id[tok] for tok in SPECIAL_TOKENS}

    def split(self, text: str) -> list[str]:
        return split_tokens(text)

    def tokenize(self, text: str) -> list[int]:
        unk = self.unk_id
        return [self.token_to_id.get(tok, unk) for tok in split_tokens(text)]

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self.id_to_token[i] for i in ids)

    def save(self, path: str | Path) -> None:
        """Write the sidecar vocabulary file (id -> token text)."""
        mapping = {str(i): tok for i, tok in enumerate(self.id_to_token)}
        Path(path).write_text(json.dumps(mapping, ensure_ascii=False, indent=0) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordTokenizer":
        mapping = json.loads(Path(path).read_text(encoding="utf-8"))
        tokens = [mapping[str(i)] for i in range(len(mapping))]
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError(f"{path}: vocabulary does not start with the reserved special tokens")
        return cls(tokens[len(SPECIAL_TOKENS):])
