"""Command line: ``abductive-ecg interpret | corrupt | eval``.

Every option can also be given as an environment variable named
``ABDUCTIVE_ECG_<COMMAND>_<OPTION>`` (e.g. ``ABDUCTIVE_ECG_INTERPRET_BUDGET``);
flags win over the environment.
"""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .evaluation import (RecordRow, f1_differences, format_csv, format_table, match_beats,
                         wilcoxon_signed_rank)
from .pipeline import InterpretConfig, InvariantViolation, interpret_record
from .signal import SignalFormatError, read_annotations, read_signal_csv, write_annotations
from .synth import corrupt_annotations

ENV_PREFIX = "ABDUCTIVE_ECG"
EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3

log = logging.getLogger("abductive_ecg")


class IOFailure(click.ClickException):
    exit_code = EXIT_IO


@click.group()
@click.option("-q", "--quiet", is_flag=True, help="Only log warnings and errors.")
def main(quiet):
    """Abductive correction of QRS annotation streams."""
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _read_ann(path):
    try:
        return read_annotations(path)
    except (OSError, SignalFormatError) as exc:
        raise IOFailure(str(exc)) from exc


def _read_sig(path, channel):
    try:
        return read_signal_csv(path, channel)
    except (OSError, SignalFormatError) as exc:
        raise IOFailure(str(exc)) from exc


def _write_ann(anns, path):
    try:
        write_annotations(anns, path)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


@main.command()
@click.option("--signal", "signal_path", required=True, type=click.Path(dir_okay=False))
@click.option("--ann", "ann_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--fragment-ms", default=30_000, show_default=True, type=click.IntRange(min=1))
@click.option("--overlap-ms", default=3_000, show_default=True, type=click.IntRange(min=0))
@click.option("--k", "k", default=None, type=click.IntRange(min=1),
              help="Open-list cap; derived from the model when omitted.")
@click.option("--budget", default=10_000, show_default=True, type=click.IntRange(min=1),
              help="Node expansions per fragment before pruning to K.")
@click.option("--realtime", is_flag=True, help="Also prune once wall time exceeds the fragment length.")
@click.option("--channel", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--scale", default=4, show_default=True, type=click.Choice(["2", "4", "8", "16"]))
@click.option("--jobs", default=0, show_default=True, type=click.IntRange(min=0),
              help="Worker processes; 0 uses every processor.")
def interpret(signal_path, ann_path, out_path, fragment_ms, overlap_ms, k, budget, realtime,
              channel, scale, jobs):
    """Correct the annotations in --ann against the ECG in --signal."""
    try:
        cfg = InterpretConfig(fragment_ms=fragment_ms, overlap_ms=overlap_ms, k=k, budget=budget,
                              realtime=realtime, scale=int(scale), jobs=jobs)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    record = _read_sig(signal_path, channel)
    anns = _read_ann(ann_path)
    out, results = interpret_record(record, anns, cfg)
    _write_ann(out, out_path)
    log.info("wrote %d annotations (%d in) from %d fragments to %s",
             len(out), len(anns), len(results), out_path)


@main.command()
@click.option("--ann", "ann_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--fp", "fp_rate", default=0.0, show_default=True, type=click.FloatRange(0, 1, max_open=True))
@click.option("--fn", "fn_rate", default=0.0, show_default=True, type=click.FloatRange(0, 1, max_open=True))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--signal", "signal_path", default=None, type=click.Path(dir_okay=False),
              help="Record whose length bounds inserted beats.")
@click.option("--channel", default=0, show_default=True, type=click.IntRange(min=0))
def corrupt(ann_path, out_path, fp_rate, fn_rate, seed, signal_path, channel):
    """Delete and insert annotations at the given rates."""
    anns = _read_ann(ann_path)
    duration = _read_sig(signal_path, channel).duration_ms if signal_path else None
    out = corrupt_annotations(anns, fp_rate, fn_rate, seed=seed, duration_ms=duration)
    _write_ann(out, out_path)


def _record_set(path) -> dict[str, Path]:
    p = Path(path)
    if p.is_dir():
        return {f.stem: f for f in sorted(p.glob("*.csv"))}
    if not p.exists():
        raise IOFailure(f"{path}: no such file or directory")
    return {p.stem: p}


def _pair(test: dict, other: dict, what: str) -> list[str]:
    if len(test) == 1 and len(other) == 1:
        return list(test)
    missing = sorted(set(test) ^ set(other))
    if missing:
        raise click.UsageError(f"record sets differ ({what}); unpaired: {', '.join(missing)}")
    return sorted(test)


@main.command("eval")
@click.option("--test", "test_path", required=True, type=click.Path(),
              help="Annotation file, or directory of <record>.csv files.")
@click.option("--ref", "ref_path", required=True, type=click.Path())
@click.option("--baseline", "baseline_path", default=None, type=click.Path(),
              help="Uncorrected annotations, reported as the 'before' columns.")
@click.option("--tol-ms", default=150, show_default=True, type=click.IntRange(min=0))
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False),
              help="Also write the table as CSV.")
def evaluate(test_path, ref_path, baseline_path, tol_ms, csv_path):
    """Score --test (and --baseline) against --ref."""
    tests, refs = _record_set(test_path), _record_set(ref_path)
    names = _pair(tests, refs, "test vs ref")
    bases = None
    if baseline_path:
        bases = _record_set(baseline_path)
        _pair(tests, bases, "test vs baseline")
    single = len(names) == 1
    rows = []
    for name in names:
        ref = _read_ann(refs[name] if not single else next(iter(refs.values())))
        after = match_beats(_read_ann(tests[name]), ref, tol_ms)
        before = None
        if bases is not None:
            before = match_beats(_read_ann(bases[name] if not single else next(iter(bases.values()))),
                                 ref, tol_ms)
        rows.append(RecordRow(name, after, before))
    click.echo(format_table(rows))
    if bases is not None and len(rows) > 1:
        p = wilcoxon_signed_rank(f1_differences(rows))
        click.echo(f"Wilcoxon signed-rank on F1 differences: n={len(rows)} p={p:.6g}")
    if csv_path:
        try:
            Path(csv_path).write_text(format_csv(rows))
        except OSError as exc:
            raise IOFailure(str(exc)) from exc


def run(argv=None) -> int:
    """Entry point mapping failures to exit codes 1 (usage), 2 (I/O), 3 (invariant)."""
    try:
        main.main(args=argv, prog_name="abductive-ecg", auto_envvar_prefix=ENV_PREFIX,
                  standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except IOFailure as exc:
        exc.show()
        return EXIT_IO
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except InvariantViolation as exc:
        click.echo(f"error: invariant violated: {exc}", err=True)
        return EXIT_INVARIANT
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    return EXIT_OK


def entry():
    sys.exit(run())


if __name__ == "__main__":
    entry()
