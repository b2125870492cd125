"""A tiny word-and-punctuation tokenizer with an explicit vocabulary.

It mirrors the token-counting convention of the prompt exporter: maximal
word-character runs and single non-space punctuation marks. The
end-of-sequence token doubles as the padding token.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"


class SimpleTokenizer:
    """Vocabulary built from a corpus; unknown words map to a single id."""

    def __init__(self, vocab: dict[str, int]):
        if EOS_TOKEN not in vocab or UNK_TOKEN not in vocab:
            raise ValueError("vocab must contain the eos and unk tokens")
        self.vocab = dict(vocab)
        self.inverse = {i: t for t, i in self.vocab.items()}

    @classmethod
    def from_corpus(cls, texts) -> "SimpleTokenizer":
        vocab = {EOS_TOKEN: 0, UNK_TOKEN: 1}
        for text in texts:
            for tok in _TOKEN_RE.findall(text):
                vocab.setdefault(tok, len(vocab))
        return cls(vocab)

    @property
    def eos_id(self) -> int:
        return self.vocab[EOS_TOKEN]

    @property
    def pad_id(self) -> int:
        return self.eos_id

    def __len__(self) -> int:
        return len(self.vocab)

    def encode(self, text: str) -> list[int]:
        unk = self.vocab[UNK_TOKEN]
        return [self.vocab.get(tok, unk) for tok in _TOKEN_RE.findall(text)]

    def decode(self, ids) -> str:
        return " ".join(self.inverse.get(int(i), UNK_TOKEN) for i in ids)

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.vocab, indent=0, sort_keys=True))

    @classmethod
    def load(cls, path: Path) -> "SimpleTokenizer":
        return cls(json.loads(Path(path).read_text()))
