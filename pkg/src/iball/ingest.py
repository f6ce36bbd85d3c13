"""Citation corpus parsing, yearly series, examples, and stream schedules.

The corpus format is line oriented: ``#index``/``#*``/``#@``/``#t``/``#c``
carry the id, title, authors, year, and venue, ``#%`` lines list referenced
ids, and a blank line closes a block.  Series are counted in years since the
entity's start (publication year, first-paper year, or first-venue-paper
year); features are the first three yearly counts and labels are the
normalized ten-year totals.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .models import StreamBatch

FEATURE_HORIZON = 3
LABEL_HORIZON = 10
LABEL_CAP = 7.0
# Year windows keeping entities old enough for a full label horizon.
YEAR_WINDOWS = {"paper": (1936, 2000), "author": (1960, 2000), "venue": (1900, 2001)}


@dataclass(frozen=True)
class RawEntry:
    """One parsed corpus block."""

    id: str
    title: str = ""
    authors: tuple = ()
    venue: str = ""
    year: int = 0
    refs: tuple = ()


@dataclass(frozen=True)
class ParseResult:
    entries: tuple
    malformed: int


@dataclass(frozen=True)
class CitationRecord:
    """Yearly citation series of one scholarly entity."""

    id: str
    kind: str  # paper | author | venue
    start_year: int
    yearly: np.ndarray

    def __post_init__(self):
        yearly = np.asarray(self.yearly, dtype=np.int64)
        object.__setattr__(self, "yearly", yearly)
        if self.kind not in ("paper", "author", "venue"):
            raise ValidationError(f"unknown entity kind {self.kind!r}")
        if not (1900 <= self.start_year <= 2100):
            raise ValidationError(f"implausible start year {self.start_year}")
        if yearly.size and yearly.min() < 0:
            raise ValidationError("negative citation count")


@dataclass(frozen=True)
class Example:
    """Training example: first-three-year counts and the normalized label."""

    id: str
    features: np.ndarray
    label: float
    start_year: int

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        object.__setattr__(self, "features", f)
        if f.shape != (FEATURE_HORIZON,):
            raise ValidationError(f"features must have length {FEATURE_HORIZON}")
        if f.min(initial=0.0) < 0:
            raise ValidationError("features must be nonnegative")
        if not (0.0 <= self.label <= LABEL_CAP):
            raise ValidationError(f"label {self.label} outside [0, {LABEL_CAP}]")


@dataclass(frozen=True)
class Normalizer:
    """Monotone map from raw citation totals to the [0, cap] label range."""

    strategy: str = "log2"
    cap: float = LABEL_CAP
    scale: float = 127.0  # linear strategy: count mapped to the cap

    def __post_init__(self):
        if self.strategy not in ("log2", "linear"):
            raise ValidationError(f"unknown normalization {self.strategy!r}")
        if self.cap <= 0 or self.scale <= 0:
            raise ValidationError("cap and scale must be positive")

    def apply(self, count):
        c = np.maximum(np.asarray(count, dtype=float), 0.0)
        if self.strategy == "log2":
            out = np.minimum(self.cap, np.log2(1.0 + c))
        else:
            out = np.minimum(self.cap, self.cap * c / self.scale)
        return float(out) if np.isscalar(count) or np.ndim(count) == 0 else out


# Parsing -------------------------------------------------------------------


def _finish_block(fields):
    if fields.get("id") is None or fields.get("year") is None:
        return None
    return RawEntry(
        id=fields["id"],
        title=fields.get("title", ""),
        authors=tuple(fields.get("authors", ())),
        venue=fields.get("venue", ""),
        year=fields["year"],
        refs=tuple(fields.get("refs", ())),
    )


def parse_corpus(stream):
    """Parse corpus text into raw entries.

    ``stream`` is an iterable of lines (an open file works).  Blocks missing
    an id or a parseable year are skipped and counted; more than 10%
    malformed blocks is a hard error once the corpus is large enough for the
    percentage to be meaningful (at least ten blocks).
    """
    entries = []
    malformed = 0
    fields = {}
    seen_any = False

    def close():
        nonlocal malformed, fields, seen_any
        if not fields:
            return
        seen_any = True
        entry = _finish_block(fields)
        if entry is None:
            malformed += 1
        else:
            entries.append(entry)
        fields = {}

    for raw in stream:
        line = raw.rstrip("\n")
        if not line.strip():
            close()
            continue
        if line.startswith("#index"):
            fields["id"] = line[len("#index") :].strip()
        elif line.startswith("#*"):
            fields["title"] = line[2:].strip()
        elif line.startswith("#@"):
            fields["authors"] = [
                a.strip() for a in line[2:].strip().split(";") if a.strip()
            ]
        elif line.startswith("#t"):
            try:
                fields["year"] = int(line[2:].strip())
            except ValueError:
                fields["year"] = None
        elif line.startswith("#c"):
            fields["venue"] = line[2:].strip()
        elif line.startswith("#%"):
            fields.setdefault("refs", []).append(line[2:].strip())
        # unknown tags are ignored
    close()

    total = len(entries) + malformed
    if total >= 10 and malformed / total > 0.10:
        raise ValidationError(
            f"{malformed}/{total} malformed corpus blocks (over the 10% limit)"
        )
    return ParseResult(tuple(entries), malformed)


def write_corpus(entries, fh):
    """Serialize entries back to the corpus text format."""
    for e in entries:
        fh.write(f"#index {e.id}\n")
        if e.title:
            fh.write(f"#* {e.title}\n")
        if e.authors:
            fh.write(f"#@ {';'.join(e.authors)}\n")
        fh.write(f"#t {e.year}\n")
        if e.venue:
            fh.write(f"#c {e.venue}\n")
        for r in e.refs:
            fh.write(f"#% {r}\n")
        fh.write("\n")


# Series --------------------------------------------------------------------


def _paper_series(entries):
    """Inbound citations per paper, indexed by years since publication."""
    year_of = {e.id: e.year for e in entries}
    series = {e.id: [] for e in entries}
    clamped = 0
    for e in entries:
        for ref in e.refs:
            if ref not in year_of:
                continue  # reference outside the corpus
            offset = e.year - year_of[ref]
            if offset < 0:
                offset = 0
                clamped += 1
            row = series[ref]
            if len(row) <= offset:
                row.extend([0] * (offset + 1 - len(row)))
            row[offset] += 1
    return series, clamped


def build_series(entries, kind):
    """Yearly citation series per entity of the requested kind.

    Papers count their own inbound references by the citing paper's year;
    authors and venues sum their papers' series aligned to the career start
    or first-paper year.  Citations dated before the cited entity's start are
    clamped to year zero and counted as diagnostics.

    Returns ``(records, clamped_count)``.
    """
    if kind not in ("paper", "author", "venue"):
        raise ValidationError(f"unknown entity kind {kind!r}")
    per_paper, clamped = _paper_series(entries)
    if kind == "paper":
        records = [
            CitationRecord(e.id, "paper", e.year, np.asarray(per_paper[e.id], dtype=np.int64))
            for e in entries
        ]
        return records, clamped

    groups = {}
    for e in entries:
        keys = e.authors if kind == "author" else ((e.venue,) if e.venue else ())
        for key in keys:
            groups.setdefault(key, []).append(e)
    records = []
    for key in sorted(groups):
        papers = groups[key]
        start = min(p.year for p in papers)
        length = max(
            (p.year - start + len(per_paper[p.id]) for p in papers), default=0
        )
        agg = np.zeros(max(length, 0), dtype=np.int64)
        for p in papers:
            row = per_paper[p.id]
            off = p.year - start
            agg[off : off + len(row)] += np.asarray(row, dtype=np.int64)
        records.append(CitationRecord(key, kind, start, agg))
    return records, clamped


def make_examples(
    records,
    eligibility=None,
    feature_horizon=FEATURE_HORIZON,
    label_horizon=LABEL_HORIZON,
    normalizer=None,
    corpus_end_year=None,
):
    """Turn citation records into training examples.

    Features are the raw counts of the first ``feature_horizon`` years; the
    label is the normalized total over the first ``label_horizon`` years.
    Records starting outside the eligibility window, or too recent to have a
    full label horizon before ``corpus_end_year``, are dropped.
    """
    normalizer = normalizer or Normalizer()
    out = []
    for rec in records:
        if eligibility is not None:
            lo, hi = eligibility
            if not (lo <= rec.start_year <= hi):
                continue
        if corpus_end_year is not None:
            if rec.start_year + label_horizon - 1 > corpus_end_year:
                continue
        padded = np.zeros(max(feature_horizon, label_horizon), dtype=np.int64)
        take = min(rec.yearly.size, padded.size)
        padded[:take] = rec.yearly[:take]
        features = padded[:feature_horizon].astype(float)
        label = normalizer.apply(int(padded[:label_horizon].sum()))
        out.append(Example(rec.id, features, label, rec.start_year))
    return out


# Stream schedule -------------------------------------------------------------


@dataclass(frozen=True)
class StreamSchedule:
    """Chronological split into initial set, update batches, and test set."""

    n_domains: int
    initial_features: tuple
    initial_targets: tuple
    initial_ids: tuple
    batches: tuple  # StreamBatch values
    batch_ids: tuple
    test_features: np.ndarray
    test_targets: np.ndarray
    test_ids: tuple

    @property
    def n_initial(self):
        return int(sum(f.shape[0] for f in self.initial_features))


def split_stream(examples, assignments, n_domains, initial_fraction, step_fraction, test_fraction):
    """Split examples into the streaming schedule, per domain, by start year.

    Within each domain the samples are ordered by ``(start_year, id)``; the
    most recent ``test_fraction`` are held out, the oldest
    ``initial_fraction`` form the initial training set, and the remainder is
    chopped into batches of ``step_fraction``.  Domains left without training
    samples are excluded from the batches with a warning.
    """
    for name, frac in (
        ("initial", initial_fraction),
        ("step", step_fraction),
        ("test", test_fraction),
    ):
        if not (0.0 < frac < 1.0):
            raise ValidationError(f"{name} fraction must be in (0, 1), got {frac}")
    if initial_fraction + test_fraction >= 1.0:
        raise ValidationError("initial and test fractions must leave room for updates")
    assignments = np.asarray(assignments, dtype=int)
    if assignments.shape[0] != len(examples):
        raise ValidationError("assignments length does not match examples")
    d = FEATURE_HORIZON

    init_f, init_y, init_ids = [], [], []
    per_domain_chunks = []
    test_f, test_y, test_ids = [], [], []
    for dom in range(n_domains):
        idx = np.where(assignments == dom)[0]
        ordered = sorted(idx, key=lambda i: (examples[i].start_year, examples[i].id))
        n_i = len(ordered)
        n_test = int(round(test_fraction * n_i))
        n_init = int(round(initial_fraction * n_i))
        step = int(round(step_fraction * n_i))
        train = ordered[: n_i - n_test] if n_test else ordered
        test = ordered[n_i - n_test :] if n_test else []
        if not train:
            warnings.warn(f"domain {dom} has no training samples; excluded from batches")
            n_init = 0
            chunks = []
        else:
            n_init = min(max(n_init, 0), len(train))
            rest = train[n_init:]
            if step <= 0 and rest:
                warnings.warn(f"domain {dom} step size is zero; excluded from batches")
                chunks = []
            else:
                chunks = [rest[k : k + step] for k in range(0, len(rest), step)] if rest else []
        init = train[:n_init]
        init_f.append(np.array([examples[i].features for i in init]).reshape(len(init), d))
        init_y.append(np.array([examples[i].label for i in init]))
        init_ids.append(tuple(examples[i].id for i in init))
        per_domain_chunks.append(chunks)
        test_f.extend(examples[i].features for i in test)
        test_y.extend(examples[i].label for i in test)
        test_ids.extend(examples[i].id for i in test)

    n_steps = max((len(c) for c in per_domain_chunks), default=0)
    batches, batch_ids = [], []
    for t in range(n_steps):
        feats, targs, ids = [], [], []
        for dom in range(n_domains):
            chunk = per_domain_chunks[dom][t] if t < len(per_domain_chunks[dom]) else []
            feats.append(
                np.array([examples[i].features for i in chunk]).reshape(len(chunk), d)
            )
            targs.append(np.array([examples[i].label for i in chunk]))
            ids.append(tuple(examples[i].id for i in chunk))
        batch = StreamBatch(tuple(feats), tuple(targs))
        if batch.total == 0:
            continue
        batches.append(batch)
        batch_ids.append(tuple(ids))

    return StreamSchedule(
        n_domains,
        tuple(init_f),
        tuple(init_y),
        tuple(init_ids),
        tuple(batches),
        tuple(batch_ids),
        np.array(test_f).reshape(len(test_f), d),
        np.array(test_y, dtype=float),
        tuple(test_ids),
    )


# Examples CSV ----------------------------------------------------------------

EXAMPLES_HEADER = ["id", "f1", "f2", "f3", "label", "year", "domain"]


def write_examples(path, examples, assignments=None):
    """Write the examples file: fixed header, reals with six decimals."""
    if assignments is None:
        assignments = [-1] * len(examples)
    if len(assignments) != len(examples):
        raise ValidationError("assignments length does not match examples")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXAMPLES_HEADER)
        for ex, dom in zip(examples, assignments):
            writer.writerow(
                [ex.id]
                + [f"{v:.6f}" for v in ex.features]
                + [f"{ex.label:.6f}", str(ex.start_year), str(int(dom))]
            )


def read_examples(path):
    """Read an examples file back into ``(examples, assignments)``."""
    examples, assignments = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EXAMPLES_HEADER:
            raise ValidationError(f"unexpected examples header: {header}")
        for row in reader:
            if not row:
                continue
            ident, f1, f2, f3, label, year, dom = row
            examples.append(
                Example(ident, np.array([float(f1), float(f2), float(f3)]), float(label), int(year))
            )
            assignments.append(int(dom))
    return examples, np.asarray(assignments, dtype=int)
