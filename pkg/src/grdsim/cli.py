"""Command-line interface.

Exit codes: 0 success (``detect``: benign), 10 ``detect`` verdict malware,
1 operational error, 2 usage error.
"""
from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click

from .detector import DEFAULT_LAMBDA, VERDICT_RULES, NpWeights, detect
from .evaluation import (
    DEFAULT_LAMBDAS,
    SynthSpec,
    format_summary,
    format_tsv,
    index_dataset,
    report_at,
    score_folds,
    synth_generate,
)
from .family import DEFAULT_RED, DEFAULT_WHITE, FamilyFormatError, load_family, save_family, train_family
from .grd import (
    GrdFormatError,
    GroupOrderMismatch,
    GroupsFormatError,
    build_grd,
    check_group_order,
    read_grd,
    read_groups,
    write_grd,
)
from .trace import TraceFormatError, read_trace

EXIT_MALWARE = 10

_OPERATIONAL = (
    OSError,
    ValueError,
    TraceFormatError,
    GrdFormatError,
    GroupsFormatError,
    FamilyFormatError,
    GroupOrderMismatch,
)


def _parse_weights(ctx, param, value):
    if value is None:
        return NpWeights()
    try:
        return NpWeights.parse(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def _parse_lambdas(ctx, param, value):
    if value is None:
        return DEFAULT_LAMBDAS
    try:
        lams = tuple(float(x) for x in value.split(",") if x.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from None
    if not lams or any(not 0 <= x <= 1 for x in lams):
        raise click.BadParameter("each lambda must lie in [0, 1]")
    return lams


def global_options(f):
    """Options every subcommand accepts."""
    options = [
        click.option("--groups-file", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     envvar="GRD_GROUPS", help="System-call groups TSV (default: shipped table)."),
        click.option("--lambda", "lam", type=click.FloatRange(0, 1), default=DEFAULT_LAMBDA,
                     show_default=True, help="Detection threshold on NP-similarity."),
        click.option("--folds", type=click.IntRange(min=2), default=5, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--weights", callback=_parse_weights, metavar="A,B,C1,C2",
                     help="NP weight overrides (default 4,2,1.5,1.2)."),
        click.option("--verdict-rule", type=click.Choice(VERDICT_RULES), default=VERDICT_RULES[0],
                     show_default=True),
        click.option("--bc-mode", type=click.Choice(["absolute", "signed"]), default="absolute",
                     show_default=True, help="'signed' reproduces the printed Bray-Curtis formula."),
        click.option("--output", "-o", type=click.Path(path_type=Path), help="Output file or directory."),
    ]
    for opt in reversed(options):
        f = opt(f)

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except _OPERATIONAL as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _expand(paths, suffix: str) -> list[Path]:
    out = []
    for p in paths:
        p = Path(p)
        out.extend(sorted(p.glob(f"*{suffix}")) if p.is_dir() else [p])
    return out


def _write_text(text: str, output: Path | None) -> None:
    if output is None:
        click.echo(text, nl=False)
    else:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text, encoding="utf-8")


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
@click.version_option(package_name="grdsim", prog_name="grdsim")
def main(verbose):
    """Detect malware by NP-similarity over group dependency graphs."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@main.command("build-grd")
@click.argument("traces", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--strict", is_flag=True, help="Fail on system-calls missing from the groups file.")
@click.option("--fail-fast", is_flag=True, help="Stop at the first failing trace.")
@global_options
def build_grd_cmd(traces, strict, fail_fast, groups_file, output, **_):
    """Convert .scdep traces (files or directories) into .grd matrices."""
    gm = read_groups(groups_file)
    failures = 0
    for path in _expand(traces, ".scdep"):
        dest = (output / f"{path.stem}.grd") if output else path.with_suffix(".grd")
        try:
            m = build_grd(read_trace(path), gm, "error" if strict else "skip")
            dest.parent.mkdir(parents=True, exist_ok=True)
            write_grd(m, dest)
        except _OPERATIONAL as exc:
            failures += 1
            click.echo(f"error: {path}: {exc}", err=True)
            if fail_fast:
                break
            continue
        click.echo(str(dest))
    if failures:
        sys.exit(1)


@main.command()
@click.argument("family_dirs", nargs=-1, required=True,
                type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--red-threshold", type=float, default=DEFAULT_RED, show_default=True)
@click.option("--white-threshold", type=float, default=DEFAULT_WHITE, show_default=True)
@global_options
def train(family_dirs, red_threshold, white_threshold, groups_file, output, **_):
    """Train one .fam model per family directory of .grd samples."""
    gm = read_groups(groups_file)
    out_dir = output or Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for d in family_dirs:
        paths = sorted(d.glob("*.grd"))
        if not paths:
            raise click.ClickException(f"{d} contains no .grd files")
        grds = [read_grd(p) for p in paths]
        check_group_order(grds, gm.group_names)
        fam = train_family(d.name, grds, [p.stem for p in paths], red_threshold, white_threshold)
        dest = out_dir / f"{d.name}.fam"
        save_family(fam, dest)
        click.echo(str(dest))


@main.command("detect")
@click.argument("sample", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("model_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@global_options
def detect_cmd(sample, model_dir, groups_file, lam, weights, verdict_rule, bc_mode, output, **_):
    """Score SAMPLE (.grd or .scdep) against the .fam models in MODEL_DIR."""
    gm = read_groups(groups_file)
    if sample.suffix == ".scdep":
        T = build_grd(read_trace(sample), gm)
    else:
        T = read_grd(sample)
    check_group_order([T], gm.group_names)
    fam_paths = sorted(model_dir.glob("*.fam"))
    if not fam_paths:
        raise click.ClickException(f"no .fam models in {model_dir}")
    families = [load_family(p) for p in fam_paths]
    for f in families:
        if f.group_order != gm.group_names:
            raise GroupOrderMismatch(f"model {f.name} was trained under a different group order")
    verdict = detect(T, families, lam, weights, verdict_rule, bc_mode)
    for d in verdict.diagnostics:
        click.echo(f"note: {d}", err=True)
    _write_text(verdict.line() + "\n", output)
    sys.exit(EXIT_MALWARE if verdict.is_malware else 0)


def _scores(root, groups_file, folds, seed, weights, verdict_rule, bc_mode):
    gm = read_groups(groups_file)
    index = index_dataset(root)
    mats = index.load(gm.group_names)
    return score_folds(index, folds, weights, seed, verdict_rule, bc_mode, matrices=mats)


@main.command("evaluate")
@click.argument("dataset_root", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--pooled", is_flag=True, help="Pool counts across folds instead of averaging rates.")
@global_options
def evaluate_cmd(dataset_root, pooled, groups_file, lam, folds, seed, weights, verdict_rule, bc_mode, output):
    """k-fold evaluation at a single lambda; writes a TSV report."""
    scores = _scores(dataset_root, groups_file, folds, seed, weights, verdict_rule, bc_mode)
    rep = report_at(scores, lam, seed, pooled)
    _write_text(format_tsv([rep]), output)
    click.echo(format_summary([rep]), err=True, nl=False)


@main.command("sweep")
@click.argument("dataset_root", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--lambdas", callback=_parse_lambdas, metavar="L1,L2,...",
              help="Thresholds to evaluate (default: 0.35,0.42,0.51,0.56,0.61,0.67,0.74,0.81).")
@click.option("--per-fold", is_flag=True, help="Also emit one row per fold.")
@click.option("--pooled", is_flag=True, help="Pool counts across folds instead of averaging rates.")
@global_options
def sweep_cmd(dataset_root, lambdas, per_fold, pooled, groups_file, folds, seed, weights,
              verdict_rule, bc_mode, output, **_):
    """k-fold evaluation over a list of lambdas, scoring each fold once."""
    scores = _scores(dataset_root, groups_file, folds, seed, weights, verdict_rule, bc_mode)
    reps = [report_at(scores, lam, seed, pooled) for lam in lambdas]
    _write_text(format_tsv(reps, per_fold=per_fold), output)
    click.echo(format_summary(reps), err=True, nl=False)


@main.command("synth")
@click.argument("spec_file")
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@global_options
def synth_cmd(spec_file, out_dir, groups_file, **_):
    """Generate a seeded synthetic corpus. SPEC_FILE may be 'reference'."""
    if spec_file == "reference":
        spec = SynthSpec.reference()
    else:
        spec = SynthSpec.from_json(Path(spec_file).read_text(encoding="utf-8"))
    names = read_groups(groups_file).group_names
    index = synth_generate(spec, out_dir, names)
    click.echo(f"{index.malware_count} malware in {len(index.families)} families, "
               f"{len(index.benign)} benign -> {out_dir}")


if __name__ == "__main__":
    main()
