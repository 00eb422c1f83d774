"""Structure-aware chunking of ToS pages into candidate clauses.

HTML is split on block-level boundaries (paragraphs, list items,
headings, table cells, leaf divs); plain text on blank lines and
numbered-clause headings. Chunks shorter than ``min_words`` are
dropped, mirroring the corpus filter.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Optional

from .textutil import normalize_ws, word_count

DEFAULT_MIN_WORDS = 7

# Hard block boundaries; div is a soft block (chunk only when it has no
# block children).
_BLOCK_TAGS = {
    "p", "li", "h1", "h2", "h3", "h4", "h5", "h6", "td", "th", "blockquote",
}
_SOFT_BLOCK_TAGS = {"div"}
_SKIP_TAGS = {"script", "style", "nav", "noscript", "template", "head"}
_LIST_TAGS = {"ul", "ol"}
_VOID_TAGS = {
    "br", "hr", "img", "input", "meta", "link", "area", "base", "col",
    "embed", "source", "track", "wbr",
}

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class Chunk:
    text: str
    char_span: tuple[int, int]
    dom_path: tuple[str, ...]
    word_count: int


class _Block:
    __slots__ = ("tag", "dom_path", "parts", "start", "end", "had_block_child")

    def __init__(self, tag: str, dom_path: tuple[str, ...]):
        self.tag = tag
        self.dom_path = dom_path
        self.parts: list[str] = []
        self.start: Optional[int] = None
        self.end: Optional[int] = None
        self.had_block_child = False

    def partial_text(self) -> str:
        return normalize_ws(" ".join(self.parts))


class _ChunkingParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.source = ""
        self._line_starts: list[int] = []
        self.stack: list[str] = []
        self.blocks: list[_Block] = []
        self.chunks: list[tuple[str, int, int, tuple[str, ...]]] = []
        # per open list: the trailing-colon sentence it inherits as a
        # context prefix for its items, or None
        self.list_contexts: list[Optional[str]] = []
        # trailing-colon sentence of the most recently emitted non-item
        # block, consumed by a list that directly follows it
        self.last_block_context: Optional[str] = None

    # -- offsets ----------------------------------------------------------
    def feed_source(self, html: str) -> None:
        self.source = html
        starts = [0]
        for i, ch in enumerate(html):
            if ch == "\n":
                starts.append(i + 1)
        self._line_starts = starts
        self.feed(html)
        self.close()
        while self.blocks:
            self._close_block()

    def _offset(self) -> int:
        line, col = self.getpos()
        return self._line_starts[line - 1] + col

    # -- block lifecycle ---------------------------------------------------
    def _open_block(self, tag: str) -> None:
        self.blocks.append(_Block(tag, tuple(self.stack)))

    def _close_block(self) -> None:
        block = self.blocks.pop()
        text = block.partial_text()
        if self.blocks:
            self.blocks[-1].had_block_child = True
        if block.tag in _SOFT_BLOCK_TAGS and block.had_block_child:
            return
        if not text or block.start is None or block.end is None:
            return
        if block.tag == "li":
            context = self.list_contexts[-1] if self.list_contexts else None
            if context:
                text = f"{context} {text}"
        else:
            self.last_block_context = _trailing_colon_sentence(text)
        self.chunks.append((text, block.start, block.end, block.dom_path))

    # -- parser callbacks ---------------------------------------------------
    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _VOID_TAGS:
            return
        if tag in _LIST_TAGS:
            context = None
            if self.blocks:
                context = _trailing_colon_sentence(self.blocks[-1].partial_text())
            if context is None and not self.list_contexts:
                context = self.last_block_context
            self.list_contexts.append(context)
        elif tag in _BLOCK_TAGS or tag in _SOFT_BLOCK_TAGS:
            if tag != "li":
                self.last_block_context = None
        self.stack.append(tag)
        if tag in _BLOCK_TAGS or tag in _SOFT_BLOCK_TAGS:
            self._open_block(tag)

    def handle_endtag(self, tag: str) -> None:
        if tag in _VOID_TAGS:
            return
        if tag in self.stack:
            while self.stack:
                top = self.stack.pop()
                if top in _BLOCK_TAGS or top in _SOFT_BLOCK_TAGS:
                    if self.blocks and self.blocks[-1].tag == top:
                        self._close_block()
                if top == tag:
                    break
        if tag in _LIST_TAGS and self.list_contexts:
            self.list_contexts.pop()

    def handle_data(self, data: str) -> None:
        if any(t in _SKIP_TAGS for t in self.stack):
            return
        if not data.strip():
            return
        start = self._offset()
        stripped_lead = len(data) - len(data.lstrip())
        stripped_trail = len(data) - len(data.rstrip())
        if self.blocks:
            block = self.blocks[-1]
            block.parts.append(data)
            if block.start is None:
                block.start = start + stripped_lead
            block.end = start + len(data) - stripped_trail


def _trailing_colon_sentence(text: str) -> Optional[str]:
    if not text.endswith(":"):
        return None
    sentences = _SENTENCE_SPLIT_RE.split(text)
    return sentences[-1] if sentences else None


def chunk_html(html: str, min_words: int = DEFAULT_MIN_WORDS) -> list[Chunk]:
    """Split an HTML page into ordered candidate clauses.

    Lenient parse: malformed markup never raises. Script, style and nav
    content is stripped; document order is preserved.
    """
    parser = _ChunkingParser()
    parser.feed_source(html)
    chunks = []
    for text, start, end, dom_path in parser.chunks:
        wc = word_count(text)
        if wc >= min_words:
            chunks.append(Chunk(text, (start, end), dom_path, wc))
    return chunks


_NUMBERED_RE = re.compile(r"^\s*\d+(\.\d+)*[.)]?\s+")


def chunk_text(text: str, min_words: int = DEFAULT_MIN_WORDS) -> list[Chunk]:
    """Split plain text on blank lines, then numbered-clause headings."""
    chunks: list[Chunk] = []
    pos = 0
    for paragraph in re.split(r"\n\s*\n", text):
        if not paragraph:
            continue
        start = text.index(paragraph, pos)
        pos = start + len(paragraph)
        for piece, piece_start in _split_numbered(paragraph, start):
            cleaned = normalize_ws(piece)
            if not cleaned:
                continue
            wc = word_count(cleaned)
            if wc < min_words:
                continue
            lead = len(piece) - len(piece.lstrip())
            trail = len(piece) - len(piece.rstrip())
            span = (piece_start + lead, piece_start + len(piece) - trail)
            chunks.append(Chunk(cleaned, span, (), wc))
    return chunks


def _split_numbered(paragraph: str, base: int) -> list[tuple[str, int]]:
    pieces: list[tuple[str, int]] = []
    current: list[str] = []
    current_start = base
    offset = base
    for line in paragraph.split("\n"):
        if _NUMBERED_RE.match(line) and any(s.strip() for s in current):
            pieces.append(("\n".join(current), current_start))
            current = []
        if not current:
            current_start = offset
        current.append(line)
        offset += len(line) + 1
    if any(s.strip() for s in current):
        pieces.append(("\n".join(current), current_start))
    return pieces
