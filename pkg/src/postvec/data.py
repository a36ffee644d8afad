"""Raw post ingestion, cleaning, label filtering, and batch assembly.

Cleaning rules, applied in this order (the order matters: URLs are
rewritten before hashtag extraction so URL fragments never become
labels):

    1. lower-case
    2. drop HTML tags            <[^>]+>
    3. rewrite URLs to "!url"    (https?:// or www. prefixed runs)
    4. rewrite mentions "!user"  @\\w+
    5. extract hashtags          #\\w+  (kept as labels, removed from text)
    6. collapse whitespace runs to single spaces and strip

Posts are rejected (with a counted reason) when they are retweets, not
in the target language, carry no hashtag, or clean to an empty string.

File formats, one record per line, UTF-8:

    raw posts     language_tag <TAB> retweet_flag(0/1) <TAB> text
    plain posts   text                 (assumed target language, not a retweet)
    clean posts   tag1,tag2 <TAB> cleaned text
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .tensor import SeededRng

TARGET_LANGUAGE = "en"
URL_TOKEN = "!url"
USER_TOKEN = "!user"

REJECT_RETWEET = "retweet"
REJECT_LANGUAGE = "non-target-language"
REJECT_NO_HASHTAG = "no-hashtag"
REJECT_EMPTY = "empty-after-clean"

_HTML_RE = re.compile(r"<[^>]+>")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#(\w+)")
_WS_RE = re.compile(r"\s+")


@dataclass
class RawPost:
    text: str
    language: str = TARGET_LANGUAGE
    is_retweet: bool = False


@dataclass
class CleanPost:
    """Cleaned text plus its extracted hashtag strings."""

    text: str
    tags: tuple[str, ...]


@dataclass
class LabeledExample:
    """Cleaned text plus gold label indices into a LabelSet."""

    text: str
    tag_ids: tuple[int, ...]


def _clean_text(text: str) -> tuple[str, tuple[str, ...]]:
    text = text.lower()
    text = _HTML_RE.sub(" ", text)
    text = _URL_RE.sub(URL_TOKEN, text)
    text = _MENTION_RE.sub(USER_TOKEN, text)
    tags = tuple(sorted(set(_HASHTAG_RE.findall(text))))
    text = _HASHTAG_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip(), tags


def preprocess(post: RawPost) -> CleanPost | str:
    """Clean one post; returns a CleanPost or a rejection reason string."""
    if post.is_retweet or post.text.lower().startswith("rt @"):
        return REJECT_RETWEET
    if post.language != TARGET_LANGUAGE:
        return REJECT_LANGUAGE
    text, tags = _clean_text(post.text)
    if not tags:
        return REJECT_NO_HASHTAG
    if not text:
        return REJECT_EMPTY
    return CleanPost(text=text, tags=tags)


def normalize_for_inference(text: str) -> str:
    """The same cleaning as training data, hashtags stripped, no rejection."""
    return _clean_text(text)[0]


def preprocess_corpus(posts: Iterable[RawPost]):
    """Clean a stream of posts; returns (kept, rejection counts by reason)."""
    kept: list[CleanPost] = []
    rejected = Counter()
    for post in posts:
        out = preprocess(post)
        if isinstance(out, CleanPost):
            kept.append(out)
        else:
            rejected[out] += 1
    return kept, rejected


@dataclass
class LabelSet:
    """Retained hashtags, indexed by descending training count then name."""

    tags: list[str]
    counts: list[int]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tags)}

    def __len__(self) -> int:
        return len(self.tags)

    def __eq__(self, other):
        return isinstance(other, LabelSet) and self.tags == other.tags


def filter_hashtags(posts: Sequence[CleanPost], min_count: int = 500,
                    max_count: int = 19000) -> LabelSet:
    """Keep tags whose training count lies in [min_count, max_count]."""
    counts = Counter()
    for post in posts:
        counts.update(post.tags)
    kept = [(tag, n) for tag, n in counts.items() if min_count <= n <= max_count]
    if not kept:
        raise ConfigError(
            f"no hashtag satisfies {min_count} <= count <= {max_count} "
            f"({len(counts)} distinct tags seen)"
        )
    kept.sort(key=lambda tn: (-tn[1], tn[0]))
    return LabelSet(tags=[t for t, _ in kept], counts=[n for _, n in kept])


def apply_labels(posts: Sequence[CleanPost], labels: LabelSet):
    """Map tag strings to indices, dropping posts left with no gold label.

    Returns (examples, dropped count).
    """
    examples: list[LabeledExample] = []
    dropped = 0
    for post in posts:
        ids = tuple(sorted(labels.index[t] for t in post.tags if t in labels.index))
        if ids:
            examples.append(LabeledExample(text=post.text, tag_ids=ids))
        else:
            dropped += 1
    return examples, dropped


def oov_count(text: str, vocab) -> int:
    """Whitespace tokens of ``text`` missing from the word vocabulary."""
    return sum(1 for tok in text.split() if tok not in vocab)


def select_oov_testsets(examples: Sequence, vocab, k: int = 2000):
    """Split off the k most OOV-heavy and k most in-vocabulary examples.

    Ties are broken by position so the construction is deterministic.
    Returns (rare set, frequent set).
    """
    if len(examples) < 2 * k:
        raise ConfigError(
            f"need at least {2 * k} test examples to build two sets of {k}, "
            f"got {len(examples)}"
        )
    counts = [oov_count(ex.text, vocab) for ex in examples]
    by_most = sorted(range(len(examples)), key=lambda i: (-counts[i], i))
    by_least = sorted(range(len(examples)), key=lambda i: (counts[i], i))
    rare = [examples[i] for i in by_most[:k]]
    frequent = [examples[i] for i in by_least[:k]]
    return rare, frequent


@dataclass
class Batch:
    indices: np.ndarray     # (B, T) right-padded symbol indices
    mask: np.ndarray        # (B, T) 1.0 at real steps
    targets: np.ndarray     # (B, L) multi-hot
    example_ids: tuple[int, ...]

    @property
    def sequences(self) -> list[np.ndarray]:
        lengths = self.mask.sum(axis=1).astype(int)
        return [self.indices[i, :lengths[i]] for i in range(len(lengths))]


def encode_examples(examples: Sequence[LabeledExample], table) -> list[np.ndarray]:
    seqs = []
    for i, ex in enumerate(examples):
        s = table.encode(ex.text)
        if s.size == 0:
            raise ShapeError(f"example {i} encodes to an empty sequence")
        seqs.append(s)
    return seqs


def make_batches(examples: Sequence[LabeledExample], table, n_labels: int,
                 batch_size: int, rng: SeededRng | None = None) -> list[Batch]:
    """Assemble shuffled, padded, multi-hot batches covering every example once."""
    if batch_size < 1:
        raise ConfigError(f"batch size must be positive, got {batch_size}")
    order = rng.permutation(len(examples)) if rng is not None \
        else np.arange(len(examples))
    seqs = encode_examples(examples, table)
    batches = []
    for start in range(0, len(examples), batch_size):
        ids = [int(i) for i in order[start:start + batch_size]]
        chunk = [seqs[i] for i in ids]
        lengths = [len(s) for s in chunk]
        steps = max(lengths)
        idx = np.zeros((len(ids), steps), dtype=np.int64)
        mask = np.zeros((len(ids), steps))
        targets = np.zeros((len(ids), n_labels))
        for row, i in enumerate(ids):
            idx[row, :lengths[row]] = chunk[row]
            mask[row, :lengths[row]] = 1.0
            if not examples[i].tag_ids:
                raise AssertionError(f"example {i} has no labels; it should have been dropped")
            for tag in examples[i].tag_ids:
                targets[row, tag] = 1.0
        batches.append(Batch(indices=idx, mask=mask, targets=targets,
                             example_ids=tuple(ids)))
    return batches


def split_dataset(items: Sequence, fractions: Sequence[float], rng: SeededRng):
    """Disjoint random splits covering all items, sized by fractions."""
    if len(fractions) < 2 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    order = rng.permutation(len(items))
    bounds = np.cumsum([round(f * len(items)) for f in fractions[:-1]])
    parts = np.split(order, bounds)
    return [[items[int(i)] for i in part] for part in parts]


def read_raw_file(path) -> list[RawPost]:
    """Read raw posts; the first line decides TSV versus plain-text mode."""
    posts = []
    mode = None
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if mode is None:
                mode = "tsv" if "\t" in line else "plain"
            if mode == "plain":
                posts.append(RawPost(text=line))
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"expected 3 tab-separated fields (language, retweet flag, text), "
                    f"got {len(parts)}", line_number=ln)
            lang, rt, text = parts
            if rt not in ("0", "1"):
                raise DataError(f"retweet flag must be 0 or 1, got {rt!r}", line_number=ln)
            posts.append(RawPost(text=text, language=lang, is_retweet=rt == "1"))
    return posts


def write_clean_file(path, posts: Sequence[CleanPost]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for post in posts:
            fh.write(",".join(post.tags) + "\t" + post.text + "\n")


def read_clean_file(path) -> list[CleanPost]:
    posts = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"expected 'tags<TAB>text', got {len(parts)} fields",
                                line_number=ln)
            tags, text = parts
            if not tags or not text:
                raise DataError("empty tag list or text", line_number=ln)
            posts.append(CleanPost(text=text, tags=tuple(tags.split(","))))
    return posts


def load_clean_dataset(path, processed: bool):
    """Read a dataset file in either format; returns (posts, rejection counts)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"data file not found: {path}")
    if processed:
        return read_clean_file(path), Counter()
    return preprocess_corpus(read_raw_file(path))
