"""Reference word/punctuation tokenizer with a byte fallback.

Pieces carry their leading space (``" word"``), punctuation is one piece per
character, and ``->`` is kept whole so the call markers ``" ["``, ``"]"`` and
``" ->"`` are single tokens. Any piece missing from the vocabulary is encoded
as its UTF-8 bytes, so ``decode(encode(s)) == s`` for every string.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from collections.abc import Iterable, Sequence

PIECE_RE = re.compile(r" ?->| ?[^\W\d_]+| ?\d+| ?_+| ?[^\s\w]|\s+(?!\S)|\s+")

N_BYTES = 256
EOS = "</s>"
# always in the vocabulary, whatever the training text
RESERVED = (EOS, " [", "[", "]", " ]", " ->", "->", "(", ")", " ", '"', " (")


def split_pieces(text: str) -> list[str]:
    return PIECE_RE.findall(text)


def _byte_piece(b: int) -> str:
    return f"<0x{b:02X}>"


class Tokenizer:
    """Fixed-vocabulary tokenizer. Ids 0-255 are the fallback bytes."""

    def __init__(self, pieces: Iterable[str] = ()):
        vocab: list[str] = [_byte_piece(b) for b in range(N_BYTES)]
        seen = set(vocab)
        for p in (*RESERVED, *pieces):
            if p not in seen:
                seen.add(p)
                vocab.append(p)
        self.vocab = vocab
        self._ids = {p: i for i, p in enumerate(vocab)}
        blob = json.dumps(vocab, ensure_ascii=False).encode("utf-8")
        self.tokenizer_id = "words-v1:" + hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_texts(cls, texts: Iterable[str], max_vocab: int | None = None,
                   min_count: int = 1) -> "Tokenizer":
        counts: Counter[str] = Counter()
        for t in texts:
            counts.update(split_pieces(t))
        ranked = sorted((p for p, c in counts.items() if c >= min_count),
                        key=lambda p: (-counts[p], p))
        if max_vocab is not None:
            ranked = ranked[:max_vocab]
        return cls(ranked)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def eos_id(self) -> int:
        return self._ids[EOS]

    def __contains__(self, piece: str) -> bool:
        return piece in self._ids

    def token_id(self, piece: str) -> int:
        """Id of a piece that must be a single vocabulary entry."""
        try:
            return self._ids[piece]
        except KeyError:
            raise KeyError(f"{piece!r} is not a vocabulary piece") from None

    def piece(self, token_id: int) -> str:
        return self.vocab[token_id]

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for p in split_pieces(text):
            i = self._ids.get(p)
            if i is not None and i >= N_BYTES:
                ids.append(i)
            else:
                ids.extend(p.encode("utf-8"))
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        out: list[str] = []
        pending = bytearray()
        for i in ids:
            if i < N_BYTES:
                pending.append(i)
                continue
            if pending:
                out.append(pending.decode("utf-8", errors="replace"))
                pending.clear()
            out.append(self.vocab[i])
        if pending:
            out.append(pending.decode("utf-8", errors="replace"))
        return "".join(out)

    def char_offsets(self, ids: Sequence[int]) -> list[int | None]:
        """Character offset of every token boundary 0..n.

        A boundary that falls inside a byte-encoded character is ``None``;
        nothing may be spliced there.
        """
        offsets: list[int | None] = [0]
        chars = 0
        pending = bytearray()
        for i in ids:
            if i < N_BYTES:
                pending.append(i)
                try:
                    chars_pending = len(pending.decode("utf-8"))
                except UnicodeDecodeError:
                    offsets.append(None)
                    continue
                chars += chars_pending
                pending.clear()
            else:
                if pending:
                    chars += len(pending.decode("utf-8", errors="replace"))
                    pending.clear()
                chars += len(self.vocab[i])
            offsets.append(chars)
        return offsets

    def to_dict(self) -> dict:
        return {"tokenizer_id": self.tokenizer_id, "pieces": self.vocab[N_BYTES:]}

    @classmethod
    def from_dict(cls, data: dict) -> "Tokenizer":
        tok = cls(data["pieces"])
        if data.get("tokenizer_id") not in (None, tok.tokenizer_id):
            raise ValueError(
                f"tokenizer id mismatch: stored {data['tokenizer_id']}, rebuilt {tok.tokenizer_id}")
        return tok
