"""Log ingestion and per-user-day behavior features.

Five CSV logs are consumed (UTF-8, comma separated, header row,
timestamps ``MM/DD/YYYY HH:MM:SS``).  Columns are matched by header name,
so files with extra columns parse unchanged.  The expected headers are:

    login.csv    id,date,user,pc,activity            Logon / Logoff
    http.csv     id,date,user,pc,url                 every row is a visit
    device.csv   id,date,user,pc,size,activity       Connect / Disconnect
    email.csv    id,date,user,pc,to,activity         Send (View is skipped)
    file.csv     id,date,user,pc,filename,activity   File Open/Write/...

``size`` on device rows is the transferred byte count; logs without that
column still parse, with the size feature degraded to zero.

Each (user, day) with any activity becomes one 16-feature vector.  The
``_on``/``_out`` suffix splits counts by the working-time window
(default 08:00-18:00, half-open), ``weekend`` flags Saturday/Sunday, and
``size`` totals the day's device transfer bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta
from pathlib import Path

import numpy as np

from .errors import SchemaError

FEATURE_NAMES = (
    "login_on", "loginoff_on", "login_out", "loginoff_out", "weekend",
    "http_on", "http_out", "connect_on", "disconnect_on", "connect_out",
    "disconnect_out", "size", "send_on", "send_out", "file_on", "file_off",
)
N_FEATURES = len(FEATURE_NAMES)
_FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

LOG_FILES = ("login.csv", "http.csv", "device.csv", "email.csv", "file.csv")
TIMESTAMP_FMT = "%m/%d/%Y %H:%M:%S"

EVENT_KINDS = frozenset({
    "login", "logoff", "http", "device_connect", "device_disconnect",
    "email_send", "file_op",
})

LABEL_NORMAL = "normal"
LABEL_ABNORMAL = "abnormal"


@dataclass
class LogEvent:
    timestamp: datetime
    user: str
    kind: str
    attrs: dict = field(default_factory=dict)


@dataclass
class BehaviorVector:
    """One user-day: 16 features, optionally a ground-truth label."""

    user: str
    day: date
    features: np.ndarray
    label: str | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got "
                             f"{self.features.shape}")


@dataclass
class ParseReport:
    """Per-file row accounting: parsed events, malformed rows, rows with an
    unknown activity value, and known-but-unmapped rows (e.g. email View)."""

    rows: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)
    malformed: dict = field(default_factory=dict)
    unknown_activity: dict = field(default_factory=dict)
    ignored: dict = field(default_factory=dict)

    def total_events(self) -> int:
        return sum(self.events.values())

    def to_text(self) -> str:
        lines = ["qbde-parse-report"]
        for name in sorted(self.rows):
            lines.append(f"file.{name}.rows = {self.rows[name]}")
            lines.append(f"file.{name}.events = {self.events[name]}")
            lines.append(f"file.{name}.malformed = {self.malformed[name]}")
            lines.append(f"file.{name}.unknown_activity = {self.unknown_activity[name]}")
            lines.append(f"file.{name}.ignored = {self.ignored[name]}")
        lines.append(f"events.total = {self.total_events()}")
        return "\n".join(lines) + "\n"


@dataclass
class Dataset:
    """Chronological train/test rows plus per-user normalization state.

    ``stats`` maps user -> (per-feature min, per-feature max) computed on
    that user's training rows; ``excluded`` holds abnormal-labelled rows
    dropped from the training window; ``clipped`` records test values that
    fell outside [0, 1] before clipping, as (user, day, feature, value).
    """

    train: list
    test: list
    stats: dict | None = None
    excluded: list = field(default_factory=list)
    clipped: list = field(default_factory=list)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

def _parse_size(text: str) -> int:
    if text is None or text.strip() == "":
        return 0
    return int(float(text))


def _row_events(source: str, row: dict) -> list[LogEvent]:
    """Map one CSV row to events; raises ValueError for malformed rows and
    returns [] for rows that are valid but carry no mapped activity."""
    user = (row.get("user") or "").strip()
    stamp = (row.get("date") or "").strip()
    if not user or not stamp:
        raise ValueError("missing user or date")
    when = datetime.strptime(stamp, TIMESTAMP_FMT)
    activity = (row.get("activity") or "").strip().lower()

    if source == "login":
        if activity == "logon":
            return [LogEvent(when, user, "login")]
        if activity == "logoff":
            return [LogEvent(when, user, "logoff")]
        raise LookupError(activity)
    if source == "http":
        return [LogEvent(when, user, "http")]
    if source == "device":
        size = _parse_size(row.get("size", ""))
        if activity == "connect":
            return [LogEvent(when, user, "device_connect", {"size": size})]
        if activity == "disconnect":
            return [LogEvent(when, user, "device_disconnect", {"size": size})]
        raise LookupError(activity)
    if source == "email":
        if activity in ("send", ""):
            return [LogEvent(when, user, "email_send")]
        if activity == "view":
            return []  # received mail is tracked nowhere in the feature set
        raise LookupError(activity)
    if source == "file":
        if activity == "" or activity.startswith("file") or activity in (
                "open", "write", "copy", "delete"):
            return [LogEvent(when, user, "file_op")]
        raise LookupError(activity)
    raise ValueError(f"unknown source {source!r}")


def parse_logs(log_dir: str | Path) -> tuple[list[LogEvent], ParseReport]:
    """Read the five standard CSV files under ``log_dir``.

    Malformed rows (bad timestamp, missing user) and rows with unknown
    activity values are counted in the report and skipped; a missing or
    unreadable file raises ``OSError``.
    """
    log_dir = Path(log_dir)
    events: list[LogEvent] = []
    report = ParseReport()
    for filename in LOG_FILES:
        source = filename.split(".")[0]
        n_rows = n_events = n_bad = n_unknown = n_ignored = 0
        with open(log_dir / filename, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            for row in reader:
                n_rows += 1
                try:
                    mapped = _row_events(source, row)
                except LookupError:
                    n_unknown += 1
                    continue
                except ValueError:
                    n_bad += 1
                    continue
                if not mapped:
                    n_ignored += 1
                    continue
                events.extend(mapped)
                n_events += len(mapped)
        report.rows[source] = n_rows
        report.events[source] = n_events
        report.malformed[source] = n_bad
        report.unknown_activity[source] = n_unknown
        report.ignored[source] = n_ignored
    return events, report


# --------------------------------------------------------------------------
# Daily aggregation
# --------------------------------------------------------------------------

def parse_working_hours(value) -> tuple[time, time]:
    """Accepts "HH:MM-HH:MM", a (start, end) pair of hours/"HH:MM" strings,
    or datetime.time values; returns the half-open [start, end) window."""
    if isinstance(value, str):
        parts = value.split("-")
        if len(parts) != 2:
            raise ValueError(f"working hours must look like '08:00-18:00', got {value!r}")
        value = tuple(parts)
    start, end = value

    def one(v):
        if isinstance(v, time):
            return v
        if isinstance(v, int):
            return time(v, 0)
        hh, _, mm = str(v).strip().partition(":")
        return time(int(hh), int(mm or 0))

    start, end = one(start), one(end)
    if not start < end:
        raise ValueError("working hours must satisfy start < end")
    return start, end


_KIND_TO_FEATURE = {
    "login": ("login_on", "login_out"),
    "logoff": ("loginoff_on", "loginoff_out"),
    "http": ("http_on", "http_out"),
    "device_connect": ("connect_on", "connect_out"),
    "device_disconnect": ("disconnect_on", "disconnect_out"),
    "email_send": ("send_on", "send_out"),
    "file_op": ("file_on", "file_off"),
}


def extract_daily(events: list[LogEvent],
                  working_hours=("08:00", "18:00")) -> list[BehaviorVector]:
    """Aggregate events into one 16-feature vector per (user, day).

    Only days with at least one event produce a vector; output is sorted
    by (user, day) so the result is independent of event order.
    """
    start, end = parse_working_hours(working_hours)
    table: dict[tuple[str, date], np.ndarray] = {}
    for ev in events:
        key = (ev.user, ev.timestamp.date())
        vec = table.get(key)
        if vec is None:
            vec = np.zeros(N_FEATURES)
            vec[_FEATURE_INDEX["weekend"]] = 1.0 if key[1].weekday() >= 5 else 0.0
            table[key] = vec
        on = start <= ev.timestamp.time() < end
        name_on, name_out = _KIND_TO_FEATURE[ev.kind]
        vec[_FEATURE_INDEX[name_on if on else name_out]] += 1.0
        if ev.kind in ("device_connect", "device_disconnect"):
            vec[_FEATURE_INDEX["size"]] += ev.attrs.get("size", 0)
    return [BehaviorVector(user, day, table[(user, day)])
            for user, day in sorted(table)]


# --------------------------------------------------------------------------
# Split and normalization
# --------------------------------------------------------------------------

def split(rows: list[BehaviorVector], train_days: int,
          test_days: int) -> Dataset:
    """Chronological per-user split: the earliest ``train_days`` rows feed
    training (abnormal-labelled ones are excluded and reported), the next
    ``test_days`` rows form the test set, any later rows are dropped."""
    if train_days < 1 or test_days < 0:
        raise ValueError("need train_days >= 1 and test_days >= 0")
    by_user: dict[str, list[BehaviorVector]] = {}
    for row in rows:
        by_user.setdefault(row.user, []).append(row)
    train, test, excluded = [], [], []
    for user in sorted(by_user):
        user_rows = sorted(by_user[user], key=lambda r: r.day)
        if len(user_rows) < train_days + test_days:
            raise ValueError(
                f"user {user} has {len(user_rows)} rows, needs at least "
                f"{train_days + test_days}")
        for row in user_rows[:train_days]:
            (excluded if row.label == LABEL_ABNORMAL else train).append(row)
        test.extend(user_rows[train_days:train_days + test_days])
    return Dataset(train=train, test=test, excluded=excluded)


def normalize(dataset: Dataset) -> Dataset:
    """Min-max scale every feature to [0, 1] per user.

    Statistics come from the training rows only; test rows reuse them and
    are clipped into [0, 1], with each out-of-range value recorded in
    ``clipped`` since leaving the training range is itself evidence of
    anomaly.  A feature that is constant in training maps to 0.
    """
    if not dataset.train:
        raise ValueError("cannot normalize an empty training set")
    grouped: dict[str, list[np.ndarray]] = {}
    for row in dataset.train:
        grouped.setdefault(row.user, []).append(row.features)
    stats = {user: (np.min(np.stack(mats), axis=0), np.max(np.stack(mats), axis=0))
             for user, mats in grouped.items()}

    def transform(row: BehaviorVector, clip_log=None) -> BehaviorVector:
        if row.user not in stats:
            raise ValueError(f"user {row.user} has no training rows")
        lo, hi = stats[row.user]
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        scaled = np.where(span > 0, (row.features - lo) / safe, 0.0)
        if clip_log is not None:
            for j in np.nonzero((scaled < 0.0) | (scaled > 1.0))[0]:
                clip_log.append((row.user, row.day, FEATURE_NAMES[j], float(scaled[j])))
        return replace(row, features=np.clip(scaled, 0.0, 1.0))

    clipped: list = []
    return Dataset(
        train=[transform(r) for r in dataset.train],
        test=[transform(r, clipped) for r in dataset.test],
        stats=stats,
        excluded=list(dataset.excluded),
        clipped=clipped,
    )


def to_simplex(values: np.ndarray) -> tuple[np.ndarray, float]:
    """L1-normalize a [0,1]-scaled feature vector onto the probability
    simplex; returns (simplex vector, original L1 mass).  An all-zero
    vector maps to the uniform distribution."""
    values = np.asarray(values, dtype=float)
    if values.shape != (N_FEATURES,):
        raise ValueError(f"expected {N_FEATURES} values")
    scale = float(values.sum())
    if scale <= 0.0:
        return np.full(N_FEATURES, 1.0 / N_FEATURES), 0.0
    return values / scale, scale


# --------------------------------------------------------------------------
# Feature and label files
# --------------------------------------------------------------------------

def write_features_csv(path: str | Path, rows: list[BehaviorVector],
                       comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        if comment:
            handle.write(f"# {comment}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["user", "day", *FEATURE_NAMES, "label"])
        for row in rows:
            writer.writerow([row.user, row.day.isoformat(),
                             *(repr(float(x)) for x in row.features),
                             row.label or ""])


def read_features_csv(path: str | Path) -> list[BehaviorVector]:
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        filtered = (line for line in handle if not line.startswith("#"))
        reader = csv.reader(filtered)
        header = next(reader, None)
        if header is None or header[:2] != ["user", "day"] or \
                tuple(header[2:2 + N_FEATURES]) != FEATURE_NAMES:
            raise SchemaError(f"{path}: not a features CSV")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != N_FEATURES + 3:
                raise SchemaError(f"{path}: line {lineno}: expected "
                                  f"{N_FEATURES + 3} columns, got {len(rec)}")
            try:
                day = date.fromisoformat(rec[1])
                feats = np.array([float(x) for x in rec[2:2 + N_FEATURES]])
            except ValueError as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
            rows.append(BehaviorVector(rec[0], day, feats, rec[-1] or None))
    return rows


def read_labels_csv(path: str | Path) -> dict[tuple[str, date], str]:
    labels = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(line for line in handle if not line.startswith("#"))
        header = next(reader, None)
        if header != ["user", "day", "label"]:
            raise SchemaError(f"{path}: not a labels CSV")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 3:
                raise SchemaError(f"{path}: line {lineno}: expected 3 columns")
            labels[(rec[0], date.fromisoformat(rec[1]))] = rec[2]
    return labels


def attach_labels(rows: list[BehaviorVector],
                  labels: dict[tuple[str, date], str]) -> None:
    for row in rows:
        row.label = labels.get((row.user, row.day), row.label)


# --------------------------------------------------------------------------
# Synthetic log generator
# --------------------------------------------------------------------------

@dataclass
class SynthConfig:
    n_users: int = 1
    n_days: int = 300
    anomaly_rate: float = 0.05
    seed: int = 0
    out_dir: str | Path = "data"
    start_day: date = date(2011, 1, 3)
    working_hours: tuple | str = ("08:00", "18:00")

    def __post_init__(self):
        if not 0.0 <= self.anomaly_rate <= 0.2:
            raise ValueError("anomaly_rate must be in [0, 0.2]")
        if self.n_users < 1 or self.n_days < 1:
            raise ValueError("need at least one user and one day")


@dataclass
class SynthResult:
    paths: dict
    labels: dict
    truth: dict        # (user, day) -> raw 16-feature vector the logs encode
    row_counts: dict


def _window_seconds(rng: np.random.Generator, on: bool,
                    start: time, end: time) -> int:
    s0 = start.hour * 3600 + start.minute * 60
    s1 = end.hour * 3600 + end.minute * 60
    if on:
        return int(rng.integers(s0, s1))
    r = int(rng.integers(0, 86400 - (s1 - s0)))
    return r if r < s0 else r + (s1 - s0)


def synth_generate(cfg: SynthConfig) -> SynthResult:
    """Write five CSV logs plus labels.csv with per-user Poisson activity.

    Normal days concentrate activity inside working hours with a small
    out-of-hours trickle (so no feature is constant over a long training
    window).  Anomalous days, drawn per day with ``anomaly_rate``, add
    out-of-hours logins, oversized device transfers and bursts of email
    and file activity.  Byte-identical output for identical configs; the
    returned ``truth`` holds exactly the daily counts the logs encode.
    """
    rng = np.random.default_rng(cfg.seed)
    start_h, end_h = parse_working_hours(cfg.working_hours)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tables: dict[str, list] = {name.split(".")[0]: [] for name in LOG_FILES}
    labels: dict[tuple[str, date], str] = {}
    truth: dict[tuple[str, date], np.ndarray] = {}

    for u in range(cfg.n_users):
        user = f"U{u:04d}"
        pc = f"PC-{u:04d}"
        prof = {
            "login_on": rng.uniform(3.0, 6.0),
            "loginoff_on": rng.uniform(3.0, 6.0),
            "login_out": rng.uniform(0.1, 0.3),
            "loginoff_out": rng.uniform(0.1, 0.3),
            "http_on": rng.uniform(40.0, 80.0),
            "http_out": rng.uniform(0.3, 0.8),
            "connect_on": rng.uniform(2.0, 5.0),
            "connect_out": rng.uniform(0.08, 0.2),
            "send_on": rng.uniform(8.0, 20.0),
            "send_out": rng.uniform(0.1, 0.4),
            "file_on": rng.uniform(6.0, 15.0),
            "file_off": rng.uniform(0.1, 0.4),
        }
        size_lo, size_hi = 50_000, int(rng.uniform(400_000, 900_000))

        for d in range(cfg.n_days):
            day = cfg.start_day + timedelta(days=d)
            abnormal = bool(rng.random() < cfg.anomaly_rate)
            # Anomalous days are quiet during working hours: the malicious
            # activity happens off-hours while daytime use drops away.
            on_damp = 0.4 if abnormal else 1.0
            counts = {k: int(rng.poisson(rate * (on_damp if k.endswith("_on")
                                                 else 1.0)))
                      for k, rate in prof.items()}
            counts["login_on"] = max(1, counts["login_on"])  # every day has data
            counts["disconnect_on"] = counts["connect_on"]
            counts["disconnect_out"] = counts["connect_out"]

            burst_connects = 0
            if abnormal:
                counts["login_out"] += int(rng.integers(3, 8))
                counts["loginoff_out"] += int(rng.integers(2, 6))
                counts["http_out"] += int(rng.integers(10, 30))
                burst_connects = int(rng.integers(2, 5))
                counts["connect_out"] += burst_connects
                counts["disconnect_out"] += burst_connects
                counts["send_out"] += int(rng.integers(5, 15))
                counts["file_off"] += int(rng.integers(8, 20))

            vec = np.zeros(N_FEATURES)
            vec[_FEATURE_INDEX["weekend"]] = 1.0 if day.weekday() >= 5 else 0.0
            labels[(user, day)] = LABEL_ABNORMAL if abnormal else LABEL_NORMAL

            def stamp(on: bool) -> str:
                sec = _window_seconds(rng, on, start_h, end_h)
                return datetime.combine(day, time(sec // 3600, sec % 3600 // 60,
                                                  sec % 60)).strftime(TIMESTAMP_FMT)

            for feat, source, extra in (
                    ("login_on", "login", ["Logon"]),
                    ("login_out", "login", ["Logon"]),
                    ("loginoff_on", "login", ["Logoff"]),
                    ("loginoff_out", "login", ["Logoff"]),
                    ("http_on", "http", None),
                    ("http_out", "http", None),
                    ("send_on", "email", ["Send"]),
                    ("send_out", "email", ["Send"]),
                    ("file_on", "file", None),
                    ("file_off", "file", None)):
                on = feat.endswith("_on")
                for _ in range(counts[feat]):
                    vec[_FEATURE_INDEX[feat]] += 1.0
                    when = stamp(on)
                    if source == "http":
                        j = len(tables["http"])
                        tables["http"].append((when, user, pc,
                                               f"http://site{j % 7}.example.com/p{j % 13}"))
                    elif source == "file":
                        j = len(tables["file"])
                        op = ("File Open", "File Write", "File Copy",
                              "File Delete")[j % 4]
                        tables["file"].append((when, user, pc, f"doc{j % 9}.docx", op))
                    elif source == "email":
                        j = len(tables["email"])
                        tables["email"].append((when, user, pc,
                                                f"peer{j % 5}@example.com", *extra))
                    else:
                        tables["login"].append((when, user, pc, *extra))

            # Device pairs; the anomalous burst carries oversized transfers.
            for feat, active in (("connect_on", True), ("connect_out", True),
                                 ("disconnect_on", False), ("disconnect_out", False)):
                on = feat.endswith("_on")
                for k in range(counts[feat]):
                    vec[_FEATURE_INDEX[feat]] += 1.0
                    size = 0
                    if active:
                        huge = (not on) and abnormal and k < burst_connects
                        size = int(rng.integers(20_000_000, 80_000_000)) if huge \
                            else int(rng.integers(size_lo, size_hi))
                        vec[_FEATURE_INDEX["size"]] += size
                    tables["device"].append((stamp(on), user, pc, str(size),
                                             "Connect" if active else "Disconnect"))
            truth[(user, day)] = vec

    headers = {
        "login": ["id", "date", "user", "pc", "activity"],
        "http": ["id", "date", "user", "pc", "url"],
        "device": ["id", "date", "user", "pc", "size", "activity"],
        "email": ["id", "date", "user", "pc", "to", "activity"],
        "file": ["id", "date", "user", "pc", "filename", "activity"],
    }
    paths, row_counts = {}, {}
    for source, rows in tables.items():
        rows.sort(key=lambda r: (datetime.strptime(r[0], TIMESTAMP_FMT), r[1:]))
        path = out_dir / f"{source}.csv"
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(headers[source])
            for i, row in enumerate(rows):
                writer.writerow([f"{source[0].upper()}{i:07d}", *row])
        paths[source] = path
        row_counts[source] = len(rows)

    labels_path = out_dir / "labels.csv"
    with open(labels_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["user", "day", "label"])
        for (user, day), label in sorted(labels.items()):
            writer.writerow([user, day.isoformat(), label])
    paths["labels"] = labels_path
    return SynthResult(paths, labels, truth, row_counts)
