"""Cross-validated evaluation, lambda sweeps and a synthetic corpus generator.

Dataset layout::

    root/families/<family>/<sample>.grd
    root/benign/<sample>.grd

Malware samples are dealt into ``k`` buckets per family. Each bucket is
tested against families trained on the other ``k - 1``. Benign samples are
never trained on and are scored in every fold.
"""
from __future__ import annotations

import io
import json
import logging
from importlib import resources
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .detector import DEFAULT_LAMBDA, NpWeights, Verdict, VerdictRule, detect
from .family import train_family
from .grd import GrdMatrix, check_group_order, default_groups, read_grd, write_grd
from .metrics import BcMode

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (0.35, 0.42, 0.51, 0.56, 0.61, 0.67, 0.74, 0.81)
TSV_COLUMNS = ("lambda", "fold", "tp", "fn", "fp", "tn", "detection_rate", "fp_rate")


@dataclass
class DatasetIndex:
    families: dict[str, list[Path]]
    benign: list[Path] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for name, paths in self.families.items():
            if not paths:
                raise ValueError(f"family {name!r} has no samples")
        for p in self.all_paths():
            if p in seen:
                raise ValueError(f"sample {p} appears twice in the index")
            seen.add(p)

    def all_paths(self) -> list[Path]:
        out = [p for name in sorted(self.families) for p in self.families[name]]
        return out + list(self.benign)

    @property
    def malware_count(self) -> int:
        return sum(len(v) for v in self.families.values())

    def load(self, group_order: Sequence[str] | None = None) -> dict[Path, GrdMatrix]:
        """Read every sample; all must share one group order."""
        mats = {p: read_grd(p) for p in self.all_paths()}
        if mats:
            order = tuple(group_order) if group_order is not None else next(iter(mats.values())).group_order
            check_group_order(mats.values(), order)
        return mats


def index_dataset(root: str | Path) -> DatasetIndex:
    root = Path(root)
    fam_root = root / "families"
    if not fam_root.is_dir():
        raise FileNotFoundError(f"{fam_root} is not a directory")
    families = {}
    for d in sorted(p for p in fam_root.iterdir() if p.is_dir()):
        samples = sorted(d.glob("*.grd"))
        if not samples:
            raise ValueError(f"family directory {d} contains no .grd files")
        families[d.name] = samples
    if not families:
        raise ValueError(f"no family directories under {fam_root}")
    benign_dir = root / "benign"
    if benign_dir.is_dir():
        benign = sorted(benign_dir.glob("*.grd"))
    else:
        logger.warning("no benign directory under %s; false-positive rate will be 0", root)
        benign = []
    return DatasetIndex(families, benign)


def kfold_split(index: DatasetIndex, k: int, seed: int = 0) -> list[dict[str, list[Path]]]:
    """Stratified folds: each family is shuffled and dealt round-robin into ``k`` buckets."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    names = sorted(index.families)
    streams = np.random.SeedSequence(seed).spawn(len(names))
    folds: list[dict[str, list[Path]]] = [{n: [] for n in names} for _ in range(k)]
    for name, ss in zip(names, streams):
        samples = list(index.families[name])
        order = np.random.default_rng(ss).permutation(len(samples))
        for pos, i in enumerate(order):
            folds[pos % k][name].append(samples[i])
    return folds


@dataclass(frozen=True)
class FoldCounts:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def detection_rate(self) -> float | None:
        n = self.tp + self.fn
        return self.tp / n if n else None

    @property
    def fp_rate(self) -> float | None:
        n = self.fp + self.tn
        return self.fp / n if n else None


@dataclass
class EvalReport:
    lam: float
    folds: int
    per_fold: list[FoldCounts]
    detection_rate: float
    false_positive_rate: float
    seed: int
    pooled: bool = False

    @property
    def totals(self) -> FoldCounts:
        return FoldCounts(*(sum(getattr(c, f) for c in self.per_fold) for f in ("tp", "fn", "fp", "tn")))


@dataclass
class FoldScores:
    """Verdicts of one fold, computed once and re-thresholded per lambda."""

    malware: list[Verdict]
    benign: list[Verdict]
    skipped_families: list[str]

    def counts(self, lam: float) -> FoldCounts:
        tp = sum(v.is_malware_at(lam) for v in self.malware)
        fp = sum(v.is_malware_at(lam) for v in self.benign)
        return FoldCounts(tp, len(self.malware) - tp, fp, len(self.benign) - fp)


def score_folds(
    index: DatasetIndex,
    k: int = 5,
    w: NpWeights = NpWeights(),
    seed: int = 0,
    rule: VerdictRule = "filter-then-decide",
    bc_mode: BcMode = "absolute",
    matrices: dict[Path, GrdMatrix] | None = None,
    red_threshold: float = 0.95,
    white_threshold: float = 0.05,
) -> list[FoldScores]:
    mats = matrices if matrices is not None else index.load()
    folds = kfold_split(index, k, seed)
    out = []
    for fi, test in enumerate(folds):
        families, skipped = [], []
        for name in sorted(index.families):
            train = [p for j, f in enumerate(folds) if j != fi for p in f[name]]
            if not train:
                skipped.append(name)
                continue
            families.append(
                train_family(
                    name,
                    [mats[p] for p in train],
                    [p.stem for p in train],
                    red_threshold,
                    white_threshold,
                )
            )
        if skipped:
            logger.info("fold %d: no training members for %s", fi + 1, ", ".join(skipped))
        if not families:
            raise ValueError(f"fold {fi + 1}: no family has training members")
        malware = [
            detect(mats[p], families, 0.0, w, rule, bc_mode)
            for name in sorted(test)
            for p in test[name]
        ]
        benign = [detect(mats[p], families, 0.0, w, rule, bc_mode) for p in index.benign]
        out.append(FoldScores(malware, benign, skipped))
    return out


def _mean(values: Iterable[float | None]) -> float:
    vals = [v for v in values if v is not None]
    return float(sum(vals) / len(vals)) if vals else 0.0


def report_at(scores: list[FoldScores], lam: float, seed: int, pooled: bool = False) -> EvalReport:
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    per_fold = [s.counts(lam) for s in scores]
    if pooled:
        tot = FoldCounts(*(sum(getattr(c, f) for c in per_fold) for f in ("tp", "fn", "fp", "tn")))
        dr, fpr = tot.detection_rate or 0.0, tot.fp_rate or 0.0
    else:
        dr = _mean(c.detection_rate for c in per_fold)
        fpr = _mean(c.fp_rate for c in per_fold)
    return EvalReport(lam, len(scores), per_fold, dr, fpr, seed, pooled)


def evaluate(
    index: DatasetIndex,
    k: int = 5,
    lam: float = DEFAULT_LAMBDA,
    w: NpWeights = NpWeights(),
    seed: int = 0,
    rule: VerdictRule = "filter-then-decide",
    bc_mode: BcMode = "absolute",
    pooled: bool = False,
) -> EvalReport:
    return report_at(score_folds(index, k, w, seed, rule, bc_mode), lam, seed, pooled)


def sweep(
    index: DatasetIndex,
    k: int = 5,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    w: NpWeights = NpWeights(),
    seed: int = 0,
    rule: VerdictRule = "filter-then-decide",
    bc_mode: BcMode = "absolute",
    pooled: bool = False,
) -> list[EvalReport]:
    if not lambdas:
        raise ValueError("lambda list is empty")
    for lam in lambdas:
        if not 0 <= lam <= 1:
            raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    scores = score_folds(index, k, w, seed, rule, bc_mode)
    return [report_at(scores, lam, seed, pooled) for lam in lambdas]


def _fmt_rate(r: float | None) -> str:
    return f"{(r or 0.0):.6f}"


def format_tsv(reports: Sequence[EvalReport], per_fold: bool = True) -> str:
    buf = io.StringIO()
    buf.write("\t".join(TSV_COLUMNS) + "\n")
    for rep in reports:
        lam = f"{rep.lam:.6f}"
        if per_fold:
            for i, c in enumerate(rep.per_fold, start=1):
                buf.write(
                    f"{lam}\t{i}\t{c.tp}\t{c.fn}\t{c.fp}\t{c.tn}\t"
                    f"{_fmt_rate(c.detection_rate)}\t{_fmt_rate(c.fp_rate)}\n"
                )
        t = rep.totals
        buf.write(
            f"{lam}\t{'pooled' if rep.pooled else 'mean'}\t{t.tp}\t{t.fn}\t{t.fp}\t{t.tn}\t"
            f"{rep.detection_rate:.6f}\t{rep.false_positive_rate:.6f}\n"
        )
    return buf.getvalue()


def format_summary(reports: Sequence[EvalReport]) -> str:
    lines = [f"{'Threshold':<16}{'Detection Rate':>16}{'False Positives':>18}"]
    for rep in reports:
        lines.append(
            f"{'lambda = ' + format(rep.lam, '.2f'):<16}"
            f"{rep.detection_rate * 100:>14.2f} %{rep.false_positive_rate * 100:>16.2f} %"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SynthSpec:
    family_count: int = 10
    members_per_family: int = 20
    edge_density: float = 0.05
    weight_range: tuple[int, int] = (1, 10)
    mutation_rate: float = 0.01
    weight_jitter: int = 1
    benign_count: int = 50
    seed: int = 0
    n_star: int = 30

    def __post_init__(self):
        object.__setattr__(self, "weight_range", tuple(int(x) for x in self.weight_range))
        if self.n_star < 1:
            raise ValueError("synthetic corpus needs at least one group")
        if self.family_count < 1 or self.members_per_family < 1:
            raise ValueError("family_count and members_per_family must be >= 1")
        if self.benign_count < 0:
            raise ValueError("benign_count must be >= 0")
        for name in ("edge_density", "mutation_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        lo, hi = self.weight_range
        if not 1 <= lo <= hi:
            raise ValueError(f"weight_range must satisfy 1 <= lo <= hi, got {self.weight_range}")
        if self.weight_jitter < 0:
            raise ValueError("weight_jitter must be >= 0")

    @classmethod
    def from_json(cls, text: str) -> SynthSpec:
        return cls(**json.loads(text))

    @classmethod
    def reference(cls) -> SynthSpec:
        """The seeded corpus the acceptance suite evaluates."""
        return cls.from_json(
            resources.files("grdsim").joinpath("data/reference_corpus.json").read_text(encoding="utf-8")
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _synth_group_names(n: int) -> tuple[str, ...]:
    names = default_groups().group_names
    if n == len(names):
        return names
    return tuple(f"G{i:02d}" for i in range(n))


def _draw_base(rng: np.random.Generator, spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    n = spec.n_star
    lo, hi = spec.weight_range
    present = rng.random((n, n)) < spec.edge_density
    weights = rng.integers(lo, hi + 1, size=(n, n))
    return present, weights


def synth_members(spec: SynthSpec, rng: np.random.Generator) -> list[np.ndarray]:
    """One family: a base matrix and members derived by per-cell redraws and weight jitter.

    Each cell is independently redrawn from the base distribution with
    probability ``mutation_rate``; present weights then move by a uniform
    integer in ``[-weight_jitter, weight_jitter]`` and are floored at 1.
    """
    n = spec.n_star
    lo, hi = spec.weight_range
    base_present, base_w = _draw_base(rng, spec)
    out = []
    for _ in range(spec.members_per_family):
        redraw = rng.random((n, n)) < spec.mutation_rate
        fresh_present, fresh_w = _draw_base(rng, spec)
        present = np.where(redraw, fresh_present, base_present)
        w = np.where(redraw, fresh_w, base_w)
        if spec.weight_jitter:
            w = w + rng.integers(-spec.weight_jitter, spec.weight_jitter + 1, size=(n, n))
        out.append(np.where(present, np.maximum(w, 1), 0).astype(np.int64))
    return out


def synth_generate(
    spec: SynthSpec, out_dir: str | Path, group_names: Sequence[str] | None = None
) -> DatasetIndex:
    """Write a reproducible labelled corpus of ``.grd`` files under ``out_dir``."""
    out_dir = Path(out_dir)
    if group_names is not None and len(group_names) == spec.n_star:
        names = tuple(group_names)
    else:
        names = _synth_group_names(spec.n_star)
    *fam_streams, benign_stream = np.random.SeedSequence(spec.seed).spawn(spec.family_count + 1)
    families = {}
    for fi, ss in enumerate(fam_streams):
        fname = f"fam{fi:02d}"
        fdir = out_dir / "families" / fname
        fdir.mkdir(parents=True, exist_ok=True)
        paths = []
        for mi, w in enumerate(synth_members(spec, np.random.default_rng(ss))):
            p = fdir / f"{fname}_s{mi:03d}.grd"
            write_grd(GrdMatrix(w, names), p)
            paths.append(p)
        families[fname] = paths

    bdir = out_dir / "benign"
    bdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(benign_stream)
    benign = []
    for bi in range(spec.benign_count):
        present, w = _draw_base(rng, spec)
        p = bdir / f"benign_{bi:03d}.grd"
        write_grd(GrdMatrix(np.where(present, w, 0), names), p)
        benign.append(p)
    (out_dir / "synth.json").write_text(spec.to_json(), encoding="utf-8")
    return DatasetIndex(families, benign)
