"""POI-name text normalization and near-duplicate spelling consolidation.

Raw delivery-address names are noisy: stray whitespace and punctuation,
full-width characters, and one-or-two-keystroke misspellings that split the
writers of one alias across several spellings. `clean_text` fixes the
surface noise; `cluster_near_duplicates` merges spellings whose normalized
edit distance chains below a threshold.
"""

from __future__ import annotations

import math
import string
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import EmptyInputError, InvalidConfigError

# full-width ASCII variants (U+FF01..U+FF5E) fold to their ASCII forms
_FOLD = {code: code - 0xFEE0 for code in range(0xFF01, 0xFF5F)}
_FOLD[0x3000] = 0x20  # ideographic space

# stripped outright: ASCII punctuation plus common CJK punctuation.
# Digits are kept; building numbers are meaningful.
_STRIP = set(string.punctuation) | set("，。！？、（）【】")


def clean_text(raw: str) -> str:
    """Normalize one raw POI name.

    Full-width alphanumerics fold to half-width, Latin letters lower-case,
    all whitespace and the fixed punctuation set disappear, and CJK
    characters pass through verbatim. An empty result is legal and marks
    the record for exclusion downstream.
    """
    folded = raw.translate(_FOLD)
    out = []
    for ch in folded:
        if ch.isspace() or ch in _STRIP:
            continue
        out.append(ch.lower())
    return "".join(out)


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character edits transforming `a` into `b`.

    Standard dynamic program, two rolling rows.
    """
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    if la < lb:
        a, b, la, lb = b, a, lb, la
    prev = list(range(lb + 1))
    cur = [0] * (lb + 1)
    for i in range(1, la + 1):
        cur[0] = i
        ca = a[i - 1]
        for j in range(1, lb + 1):
            cost = 0 if ca == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev, cur = cur, prev
    return prev[lb]


def normalized_edit_distance(a: str, b: str) -> float:
    """Levenshtein distance divided by the longer length; 0.0 for two empties."""
    m = max(len(a), len(b))
    if m == 0:
        return 0.0
    return levenshtein(a, b) / m


def limited_edit_distance(a: str, b: str, k: int) -> int:
    """Levenshtein distance if it is <= k, else k + 1. Banded DP."""
    la, lb = len(a), len(b)
    if abs(la - lb) > k:
        return k + 1
    if k <= 0:
        return 0 if a == b else k + 1
    if la < lb:
        a, b, la, lb = b, a, lb, la
    big = k + 1
    prev = [min(j, big) for j in range(lb + 1)]
    for i in range(1, la + 1):
        jlo = max(1, i - k)
        jhi = min(lb, i + k)
        cur = [big] * (lb + 1)
        cur[0] = min(i, big)
        ca = a[i - 1]
        row_min = cur[0] if jlo == 1 else big
        for j in range(jlo, jhi + 1):
            cost = 0 if ca == b[j - 1] else 1
            v = prev[j - 1] + cost
            up = prev[j] + 1
            if up < v:
                v = up
            left = cur[j - 1] + 1
            if left < v:
                v = left
            if v > big:
                v = big
            cur[j] = v
            if v < row_min:
                row_min = v
        if row_min > k:
            return big
        prev = cur
    return prev[lb] if prev[lb] <= k else big


@dataclass
class CanonicalMap:
    """Mapping from each input spelling to its cluster's canonical spelling.

    Idempotent by construction: canonical names map to themselves, and every
    input name appears as a key.
    """

    mapping: dict[str, str] = field(default_factory=dict)
    cluster_sizes: dict[str, int] = field(default_factory=dict)

    def resolve(self, name: str) -> str:
        """Canonical spelling for `name`; unseen names map to themselves."""
        return self.mapping.get(name, name)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _chunked(s: str, pieces: int) -> list[str]:
    """Split `s` into `pieces` contiguous chunks of near-equal length."""
    n = len(s)
    out = []
    start = 0
    for i in range(pieces):
        end = start + (n - start + pieces - i - 1) // (pieces - i)
        out.append(s[start:end])
        start = end
    return out


def _candidate_pairs(names: list[str], threshold: float):
    """Yield index pairs that can possibly be within the distance threshold.

    Pigeonhole blocking: with at most k edits allowed between two strings,
    splitting one of them into k + 1 chunks leaves at least one chunk
    untouched, so it occurs verbatim as a substring of the other. Indexing
    chunks and probing substrings generates a candidate superset without
    the quadratic scan; every candidate is then verified exactly.
    """
    lmax = max(len(s) for s in names)
    k_global = int(math.floor(threshold * lmax + 1e-12))
    if k_global <= 0:
        return
    pieces = k_global + 1

    chunk_index: dict[str, list[int]] = defaultdict(list)
    chunk_lengths: set[int] = set()
    short_ids = []  # too short to chunk; handled exhaustively below
    for idx, s in enumerate(names):
        if len(s) < pieces:
            short_ids.append(idx)
            continue
        for chunk in _chunked(s, pieces):
            chunk_index[chunk].append(idx)
            chunk_lengths.add(len(chunk))

    seen: set[tuple[int, int]] = set()
    for idx, s in enumerate(names):
        ls = len(s)
        for clen in chunk_lengths:
            if clen > ls:
                continue
            for start in range(ls - clen + 1):
                sub = s[start:start + clen]
                bucket = chunk_index.get(sub)
                if not bucket:
                    continue
                for other in bucket:
                    if other == idx:
                        continue
                    pair = (idx, other) if idx < other else (other, idx)
                    if pair not in seen:
                        seen.add(pair)
                        yield pair
    # short names: a partner within threshold cannot be much longer
    for idx in short_ids:
        ls = len(names[idx])
        max_partner = int(math.floor(ls / (1.0 - threshold))) + 1
        for other, t in enumerate(names):
            if other == idx or len(t) > max_partner:
                continue
            pair = (idx, other) if idx < other else (other, idx)
            if pair not in seen:
                seen.add(pair)
                yield pair


def cluster_near_duplicates(
    names: list[tuple[str, int]], threshold: float
) -> CanonicalMap:
    """Collapse near-duplicate spellings into canonical names.

    `names` pairs each distinct spelling with its occurrence frequency.
    Two spellings land in the same cluster iff they are connected by a
    chain of pairs with normalized edit distance <= threshold
    (single-linkage on the similarity graph). Each cluster's canonical is
    its most frequent member, ties broken by lexicographic order. The
    result does not depend on input order.
    """
    if not names:
        raise EmptyInputError("cluster_near_duplicates with no names")
    if not (0.0 < threshold < 1.0):
        raise InvalidConfigError(f"cluster threshold must lie in (0, 1), got {threshold}")

    freq: dict[str, int] = defaultdict(int)
    for name, count in names:
        freq[name] += count
    distinct = sorted(freq)

    uf = _UnionFind(len(distinct))
    for i, j in _candidate_pairs(distinct, threshold):
        a, b = distinct[i], distinct[j]
        lm = max(len(a), len(b))
        k = int(math.floor(threshold * lm + 1e-12))
        d = limited_edit_distance(a, b, k)
        if d <= k and d / lm <= threshold:
            uf.union(i, j)

    clusters: dict[int, list[str]] = defaultdict(list)
    for i, name in enumerate(distinct):
        clusters[uf.find(i)].append(name)

    mapping: dict[str, str] = {}
    sizes: dict[str, int] = {}
    for members in clusters.values():
        canonical = min(members, key=lambda nm: (-freq[nm], nm))
        for nm in members:
            mapping[nm] = canonical
        sizes[canonical] = len(members)
    return CanonicalMap(mapping=mapping, cluster_sizes=sizes)
