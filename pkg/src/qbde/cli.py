"""Pipeline orchestration behind the ``qbde`` command.

Subcommands mirror the pipeline phases so each is runnable and testable
on its own:

    qbde synth   --config run.cfg        write synthetic logs + labels
    qbde ingest  --config run.cfg        logs -> features, split, normalize
    qbde train   --config run.cfg        adversarial training -> checkpoint
    qbde detect  --config run.cfg        scores, thresholds, verdicts
    qbde report  --config run.cfg        human-readable summary

The config file is flat ``key = value`` text; command-line flags override
file values.  Every output file embeds a digest of the resolved
configuration, and identical (config, seed) runs produce byte-identical
outputs.  Exit codes: 0 success, 2 configuration, 3 I/O, 4 validation.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bde, features, qgan
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, SchemaError
from .qsim import MAX_QUBITS, sample, run_generator_circuit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


@dataclass
class RunConfig:
    input_dir: str = "data"
    out_dir: str = "out"
    checkpoint: str = ""          # default: <out_dir>/qgan.ckpt
    n_qubits: int = 4
    k: int = 8                    # circuit depth
    batch: int = 16
    epochs: int = 300
    lam: float = 0.1
    working_hours: str = "08:00-18:00"
    seed: int = 0
    lr_g: float = 0.05
    lr_d: float = 0.01
    hidden1: int = 64
    hidden2: int = 32
    sampled: bool = False         # score against sampled histograms
    shots: int = 1024
    reference_samples: int = 16   # candidate references in sampled mode
    train_days: int = 200
    test_days: int = 100
    n_users: int = 1
    n_days: int = 300
    anomaly_rate: float = 0.05
    bde_epochs: int = 200
    bde_batch: int = 32
    bde_lr: float = 0.01
    resume: bool = False

    def validate(self) -> None:
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ConfigError(f"n_qubits must be in 1..{MAX_QUBITS}")
        if 2**self.n_qubits != features.N_FEATURES:
            raise ConfigError(
                f"2**n_qubits must equal the feature count "
                f"({features.N_FEATURES}); got n_qubits={self.n_qubits}")
        if self.k < 1:
            raise ConfigError("k (circuit depth) must be >= 1")
        if self.batch < 1 or self.epochs < 0:
            raise ConfigError("batch must be >= 1 and epochs >= 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda must be in [0, 1]")
        if not 0.0 <= self.anomaly_rate <= 0.2:
            raise ConfigError("anomaly_rate must be in [0, 0.2]")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.reference_samples < 1:
            raise ConfigError("reference_samples must be >= 1")
        try:
            features.parse_working_hours(self.working_hours)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint \
            else Path(self.out_dir) / "qgan.ckpt"

    def digest(self) -> str:
        """Hash of the resolved settings that shape results.  Path fields
        are excluded so identical runs in different directories (or on
        different machines) produce byte-identical outputs."""
        skip = {"input_dir", "out_dir", "checkpoint"}
        blob = "\n".join(f"{f.name}={getattr(self, f.name)}"
                         for f in sorted(dataclasses.fields(self),
                                         key=lambda f: f.name)
                         if f.name not in skip)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_ALIASES = {"lambda": "lam", "depth": "k"}
_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value: str):
    kind = _FIELD_TYPES[name]
    value = value.strip()
    if kind == "bool":
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {value!r}")
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    return value


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        key = _ALIASES.get(key, key)
        if not sep or key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown setting {raw.strip()!r}")
        setattr(cfg, key, _coerce(key, value))
    return cfg


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    for flag, field_name in (("seed", "seed"), ("k", "k"), ("lam", "lam"),
                             ("out", "out_dir"), ("input_dir", "input_dir"),
                             ("epochs", "epochs")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, field_name, value)
    if getattr(args, "resume", False):
        cfg.resume = True
    return cfg


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> int:
    result = features.synth_generate(features.SynthConfig(
        n_users=cfg.n_users, n_days=cfg.n_days, anomaly_rate=cfg.anomaly_rate,
        seed=cfg.seed, out_dir=cfg.input_dir, working_hours=cfg.working_hours))
    lines = ["qbde-synth-report", f"config_digest = {cfg.digest()}"]
    for source in sorted(result.row_counts):
        lines.append(f"rows.{source} = {result.row_counts[source]}")
    n_abn = sum(1 for v in result.labels.values() if v == features.LABEL_ABNORMAL)
    lines.append(f"days.total = {len(result.labels)}")
    lines.append(f"days.abnormal = {n_abn}")
    (Path(cfg.input_dir) / "synth_report.txt").write_text(
        "\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(result.row_counts)} log files under {cfg.input_dir} "
          f"({len(result.labels)} user-days, {n_abn} abnormal)")
    return EXIT_OK


def cmd_ingest(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    events, report = features.parse_logs(cfg.input_dir)
    rows = features.extract_daily(events, cfg.working_hours)
    labels_path = Path(cfg.input_dir) / "labels.csv"
    if labels_path.exists():
        features.attach_labels(rows, features.read_labels_csv(labels_path))
    dataset = features.normalize(features.split(rows, cfg.train_days,
                                                cfg.test_days))
    digest = cfg.digest()
    features.write_features_csv(out_dir / "features_raw.csv", rows, digest)
    features.write_features_csv(out_dir / "features_train.csv", dataset.train,
                                digest)
    features.write_features_csv(out_dir / "features_test.csv", dataset.test,
                                digest)
    with open(out_dir / "norm_stats.csv", "w", newline="",
              encoding="utf-8") as handle:
        handle.write(f"# {digest}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["user", "feature", "min", "max"])
        for user in sorted(dataset.stats):
            lo, hi = dataset.stats[user]
            for j, name in enumerate(features.FEATURE_NAMES):
                writer.writerow([user, name, repr(float(lo[j])), repr(float(hi[j]))])
    extra = [f"config_digest = {digest}",
             f"split.train_rows = {len(dataset.train)}",
             f"split.test_rows = {len(dataset.test)}",
             f"split.excluded_abnormal = {len(dataset.excluded)}",
             f"normalize.clipped_values = {len(dataset.clipped)}"]
    (out_dir / "parse_report.txt").write_text(
        report.to_text() + "\n".join(extra) + "\n", encoding="utf-8")
    print(f"ingested {report.total_events()} events -> {len(dataset.train)} train "
          f"/ {len(dataset.test)} test rows "
          f"({len(dataset.excluded)} abnormal excluded from training)")
    return EXIT_OK


def _users_of(rows) -> list[str]:
    return sorted({row.user for row in rows})


def _ckpt_path(cfg: RunConfig, user: str, users: list[str]) -> Path:
    base = cfg.checkpoint_path
    if len(users) == 1:
        return base
    return base.with_name(f"{base.stem}-{user}{base.suffix}")


def _simplex_matrix(rows) -> np.ndarray:
    return np.stack([features.to_simplex(row.features)[0] for row in rows])


def _train_config(cfg: RunConfig) -> qgan.TrainConfig:
    return qgan.TrainConfig(batch=cfg.batch, epochs=cfg.epochs, lr_g=cfg.lr_g,
                            lr_d=cfg.lr_d, depth=cfg.k, seed=cfg.seed,
                            hidden=(cfg.hidden1, cfg.hidden2))


def cmd_train(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = features.read_features_csv(out_dir / "features_train.csv")
    users = _users_of(rows)
    digest = cfg.digest()
    for user in users:
        data = _simplex_matrix([r for r in rows if r.user == user])
        train_cfg = _train_config(cfg)
        ckpt = _ckpt_path(cfg, user, users)
        state = None
        if cfg.resume:
            _, state = load_checkpoint(ckpt)
        trace = qgan.train(data, train_cfg, state=state)
        save_checkpoint(ckpt, train_cfg, trace.state, digest=digest)
        loss_path = out_dir / f"loss_{user}.csv"
        fresh = not (cfg.resume and loss_path.exists())
        with open(loss_path, "w" if fresh else "a", newline="",
                  encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            if fresh:
                handle.write(f"# {digest}\n")
                writer.writerow(["epoch", "loss_g", "loss_d", "cross_entropy"])
            first = trace.state.epoch - len(trace.loss_g) + 1
            for i in range(len(trace.loss_g)):
                writer.writerow([first + i, repr(trace.loss_g[i]),
                                 repr(trace.loss_d[i]),
                                 repr(trace.cross_entropy[i])])
        final = (f"cross_entropy={trace.cross_entropy[-1]:.4f}"
                 if trace.cross_entropy else "no epochs run")
        print(f"trained {user}: {len(trace.loss_g)} epochs, {final} -> {ckpt}")
    return EXIT_OK


def _reference_distributions(state, cfg: RunConfig) -> np.ndarray:
    """Scoring references: the exact output distribution, or in sampled
    mode a stack of measured histograms (nearest one wins per test row)."""
    if not cfg.sampled:
        return qgan.generator_output(state.params)[None, :]
    rng = np.random.default_rng(cfg.seed + 2)
    psi = run_generator_circuit(state.params)
    return np.stack([sample(psi, cfg.shots, rng) / cfg.shots
                     for _ in range(cfg.reference_samples)])


def cmd_detect(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    train_rows = features.read_features_csv(out_dir / "features_train.csv")
    test_rows = features.read_features_csv(out_dir / "features_test.csv")
    users = _users_of(train_rows)
    digest = cfg.digest()

    def to_vec(row):
        return features.to_simplex(row.features)[0]

    test_records: list[bde.ScoreRecord] = []
    train_records: list[bde.ScoreRecord] = []
    thresholds: dict[str, bde.Thresholds] = {}
    for user in users:
        _, state = load_checkpoint(_ckpt_path(cfg, user, users))
        references = _reference_distributions(state, cfg)
        user_train = [r for r in train_rows if r.user == user]
        real = _simplex_matrix(user_train)
        generated = np.tile(references, (-(-len(real) // len(references)), 1))
        net = bde.train_bde(real, generated[:len(real)], bde.BdeTrainConfig(
            epochs=cfg.bde_epochs, batch=cfg.bde_batch, lr=cfg.bde_lr,
            seed=cfg.seed + 1))
        user_train_recs = bde.score_rows(user_train, references, net, cfg.lam,
                                         to_vec)
        th = bde.fit_thresholds([rec.d for rec in user_train_recs], cfg.lam)
        thresholds[user] = th
        bde.apply_verdicts(user_train_recs, th)
        user_test = [r for r in test_rows if r.user == user]
        user_test_recs = bde.score_rows(user_test, references, net, cfg.lam,
                                        to_vec)
        bde.apply_verdicts(user_test_recs, th)
        train_records.extend(user_train_recs)
        test_records.extend(user_test_recs)

    bde.write_score_csv(out_dir / "scores.csv", test_records, digest)
    bde.write_score_csv(out_dir / "scores_train.csv", train_records, digest)
    bde.write_summary(out_dir / "detect_summary.txt", test_records, thresholds,
                      train_records, digest)
    labelled = [r for r in test_records if r.label is not None]
    acc = (f", accuracy {bde.accuracy([r.verdict for r in labelled], [r.label for r in labelled]):.4f}"
           if labelled else "")
    print(f"scored {len(test_records)} test rows over {len(users)} user(s){acc}")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    records = bde.read_score_csv(out_dir / "scores.csv")
    summary = bde.read_summary(out_dir / "detect_summary.txt")
    if not records:
        print("no test records")
        return EXIT_OK
    print(f"detection report ({len(records)} user-days)")
    print(f"  lambda = {summary['lambda']}")
    for user in summary["users"].split():
        print(f"  thresholds[{user}]: abnormal > {float(summary[f'th_d.{user}']):.4f}, "
              f"threat > {float(summary[f'th_f.{user}']):.4f}")
    print("  verdicts:")
    for verdict in bde.VERDICTS:
        print(f"    {verdict:<12} {summary[f'count.{verdict}']}")
    if "accuracy" in summary:
        print(f"  accuracy: {float(summary['accuracy']):.4f}  (TP "
              f"{summary['confusion.TP']}, TN {summary['confusion.TN']}, "
              f"FP {summary['confusion.FP']}, FN {summary['confusion.FN']})")
    print("  top-scoring days:")
    top = sorted(records, key=lambda r: -r["d"])[:10]
    for rec in top:
        label = f"  [{rec['label']}]" if rec["label"] else ""
        print(f"    {rec['user']} {rec['day']}  d={rec['d']:.4f} "
              f"{rec['verdict']}{label}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "detect": cmd_detect,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbde",
        description="Model normal user behavior with a quantum-circuit GAN "
                    "and score daily activity for insider threats.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("synth", "generate synthetic logs with labelled anomalies"),
            ("ingest", "extract, split and normalize behavior features"),
            ("train", "adversarially train the generator, write a checkpoint"),
            ("detect", "score test days and classify threat levels"),
            ("report", "print a human-readable detection summary")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", metavar="FILE", help="key = value config file")
        cmd.add_argument("--seed", type=int, help="override the run seed")
        cmd.add_argument("--k", type=int, help="override the circuit depth")
        cmd.add_argument("--lambda", dest="lam", type=float,
                         help="override the score weight in [0, 1]")
        cmd.add_argument("--out", metavar="DIR", help="override the output directory")
        cmd.add_argument("--input-dir", metavar="DIR", help="override the log directory")
        cmd.add_argument("--epochs", type=int, help="override the epoch count")
        cmd.add_argument("--resume", action="store_true",
                         help="continue training from the existing checkpoint")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        cfg.validate()
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SchemaError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
