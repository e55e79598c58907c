"""Turning a serialized example into model inputs, output symbols and training targets."""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from typing import Sequence

from ..hybrid import SPECIALS, HybridSequence
from ..sqlkit import SqlToken
from ..vocab import DIGITS, EOS, generation_vocab, reserved_set

KIND_IDS = {"question": 5, "schema": 6, "value": 7}  # 0..4 are the special tokens
COPY_KINDS = ("table", "field", "question")
_NUMERIC = re.compile(r"^\d+(\.\d+)?$")


def stable_hash(text: str, salt: int) -> int:
    return zlib.crc32(f"{salt}\x1f{text}".encode())


def char_ngrams(word: str, n: int = 3) -> list[str]:
    w = f"<{word}>"
    if len(w) <= n:
        return [w]
    return [w[i : i + n] for i in range(len(w) - n + 1)]


@dataclass
class TokenFeatures:
    type_ids: list[int]  # special index or kind id
    word_ids: list[int]  # 0 for special tokens
    ngram_ids: list[list[int]]  # possibly empty for special tokens
    match_ids: list[int] = field(default_factory=list)  # 1 where a question word and a schema word share a stem


def stem(word: str) -> str:
    w = word.lower()
    if len(w) > 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) > 3 and w.endswith("s") and not w.endswith("ss"):
        return w[:-1]
    return w


def featurize(h: HybridSequence, word_buckets: int, ngram_buckets: int, salt: int) -> TokenFeatures:
    types, words, grams = [], [], []
    stems = {k: {stem(t.surface) for t in h.tokens if t.kind == k} for k in ("question", "schema")}
    other = {"question": stems["schema"], "schema": stems["question"]}
    matches = []
    for tok in h.tokens:
        if tok.kind == "special":
            types.append(SPECIALS.index(tok.surface))
            words.append(0)
            grams.append([])
            matches.append(0)
            continue
        key = tok.key
        types.append(KIND_IDS[tok.kind])
        words.append(1 + stable_hash(key, salt) % (word_buckets - 1))
        grams.append(sorted({1 + stable_hash("#" + g, salt) % (ngram_buckets - 1) for g in char_ngrams(key)}))
        matches.append(int(stem(tok.surface) in other.get(tok.kind, ())))
    return TokenFeatures(types, words, grams, matches)


def vocab_symbol(entry: str) -> str:
    return f"value:{entry}" if entry in DIGITS else f"kw:{entry}"


EOS_SYMBOL = vocab_symbol(EOS)


@dataclass
class OutputSpace:
    """Layout of one example's step distribution: generation vocabulary, then X~.

    Several positions may denote the same output symbol (a question word that
    occurs twice, or a digit that is also a question word); ``pos_symbol``
    maps each position to its symbol id.
    """

    symbols: list[str]
    pos_symbol: list[int]
    pos_class: list[str]
    owners: list[int | None]  # owning table for field positions of X~
    surfaces: dict[str, str] = field(default_factory=dict)
    n_vocab: int = 0

    @property
    def size(self) -> int:
        return len(self.pos_symbol)

    def index(self, symbol: str) -> int | None:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            return None

    def positions(self, symbol: str) -> list[int]:
        sid = self.index(symbol)
        return [] if sid is None else [p for p, s in enumerate(self.pos_symbol) if s == sid]

    def pointable_positions(self, symbol: str) -> list[int]:
        """Indices into X~ (not into the full layout) carrying ``symbol``."""
        return [p - self.n_vocab for p in self.positions(symbol) if p >= self.n_vocab]


def output_space(h: HybridSequence) -> OutputSpace:
    symbols: list[str] = []
    lookup: dict[str, int] = {}
    pos_symbol, pos_class, owners = [], [], []
    surfaces: dict[str, str] = {}

    def sid(sym: str) -> int:
        if sym not in lookup:
            lookup[sym] = len(symbols)
            symbols.append(sym)
        return lookup[sym]

    vocab = generation_vocab()
    for entry in vocab:
        pos_symbol.append(sid(vocab_symbol(entry)))
        pos_class.append("value" if entry in DIGITS else "reserved")
        surfaces.setdefault(vocab_symbol(entry), entry)
    for p in h.pointable:
        if p.kind == "question":
            sym = f"value:{p.key}"
            pos_class.append("value")
            owners.append(None)
        elif p.kind == "table":
            sym = f"table:{p.ref}"
            pos_class.append("table")
            owners.append(None)
        else:
            sym = f"field:{p.ref}"
            pos_class.append("field")
            owners.append(h.view.schema.fields[p.ref].table)
        pos_symbol.append(sid(sym))
        surfaces.setdefault(sym, p.surface)
    return OutputSpace(symbols, pos_symbol, pos_class, owners, surfaces, len(vocab))


def target_symbols(tokens: Sequence[SqlToken], question: Sequence[str]) -> list[str] | None:
    """Gold execution-order tokens as output symbols, ending with EOS.

    A literal word is copied from the question when a question word matches
    it case-insensitively; otherwise an all-digit word is generated digit by
    digit.  Anything else cannot be produced and yields None.
    """
    words = {w.lower() for w in question}
    out = []
    for tok in tokens:
        if tok.kind == "reserved":
            out.append(f"kw:{tok.surface}")
        elif tok.kind in ("table", "field"):
            if tok.ref is None:
                return None
            out.append(f"{tok.kind}:{tok.ref}")
        else:
            w = tok.surface.lower()
            if w in words:
                out.append(f"value:{w}")
            elif w.isdigit():
                out.extend(f"value:{d}" for d in w)
            else:
                return None
    out.append(EOS_SYMBOL)
    return out


def symbol_token(sym: str, space: OutputSpace, h: HybridSequence) -> SqlToken:
    kind, _, rest = sym.partition(":")
    s = h.view.schema
    if kind == "kw":
        return SqlToken("reserved", rest)
    if kind == "table":
        tid = int(rest)
        return SqlToken("table", s.tables[tid].name, tid)
    if kind == "field":
        fid = int(rest)
        return SqlToken("field", s.qualified_name(fid), fid)
    surface = space.surfaces.get(sym, rest)
    return SqlToken("number" if _NUMERIC.match(surface) else "value", surface)


def symbols_to_tokens(symbols: Sequence[str], space: OutputSpace, h: HybridSequence) -> list[SqlToken]:
    return [symbol_token(s, space, h) for s in symbols if s != EOS_SYMBOL]


def is_reserved_symbol(sym: str) -> bool:
    return sym.startswith("kw:") and sym[3:] in reserved_set()
