"""Command-line driver: ``sidlab <command> [flags]``.

Settings come from defaults, then an optional JSON ``--config`` file, then
explicit flags. Exit status is 0 on success, 1 on usage errors and 2 when a
run fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import analytics
from . import experiments as ex
from .crypto_check import Scenario
from .sid_engine import Strategy

log = logging.getLogger("sidlab")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_sweep(text: str) -> tuple[float, float, float]:
    """``start:stop:step``, ``start:stop`` (step 0.5) or a single value."""
    parts = [float(p) for p in str(text).split(":")]
    if len(parts) == 1:
        return parts[0], parts[0], 1.0
    if len(parts) == 2:
        return parts[0], parts[1], 0.5
    if len(parts) == 3:
        return tuple(parts)
    raise argparse.ArgumentTypeError(f"bad sweep {text!r}; expected start:stop:step")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with the same keys as the flags")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"])


def _sim(p: argparse.ArgumentParser) -> None:
    p.add_argument("--w", type=int)
    p.add_argument("--scenario", choices=[s.value for s in Scenario])
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--code", choices=["conv", "turbo"])
    p.add_argument("--ebn0", type=parse_sweep, help="start:stop:step in dB")
    p.add_argument("--nmax", type=int, dest="n_max")
    p.add_argument("--strategy", choices=[s.value for s in Strategy])
    p.add_argument("--blocks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--key", help="hex-encoded check key")
    p.add_argument("--workers", type=int)
    p.add_argument("--noiseless", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sidlab", description="Soft Input Decryption laboratory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ccer", help="CCER with and without SID over an E_b/N_0 sweep")
    _common(p)
    _sim(p)

    p = sub.add_parser("hist", help="share of blocks corrected per |L| rank")
    _common(p)
    _sim(p)

    p = sub.add_parser("lvalues", help="L-values needed to reach a target fraction")
    _common(p)
    _sim(p)
    p.add_argument("--target", type=float)

    p = sub.add_parser("predict", help="analytic L-value estimate x0")
    _common(p)
    p.add_argument("--w", type=int)
    p.add_argument("--ebn0", type=parse_sweep)
    p.add_argument("--target", type=float)
    p.add_argument("--coeffs", help="JSON file with KA..NC overrides")

    p = sub.add_parser("minnmax", help="theoretical minimum N_max")
    _common(p)
    p.add_argument("--w", type=int)
    p.add_argument("--p", type=float, help="bit error rate after the channel decoder")
    p.add_argument("--target", type=float)

    p = sub.add_parser("fit", help="fit y = k exp(-a x) to a histogram")
    _common(p)
    _sim(p)
    p.add_argument("--input", help="histogram CSV written by 'hist'; simulate when omitted")

    p = sub.add_parser("timing", help="tag recomputations vs comparisons")
    _common(p)
    _sim(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--mode", choices=["uniform", "sid"], default="uniform")
    return parser


def _settings(args: argparse.Namespace) -> dict:
    settings: dict = {}
    if args.config:
        try:
            settings.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            settings[k] = v
    if "nmax" in settings:
        settings["n_max"] = settings.pop("nmax")
    return settings


def _config(settings: dict) -> ex.ExperimentConfig:
    names = {f.name for f in fields(ex.ExperimentConfig)}
    kw = {k: v for k, v in settings.items() if k in names}
    if isinstance(kw.get("ebn0"), (str, int, float)):
        kw["ebn0"] = parse_sweep(kw["ebn0"])
    if isinstance(kw.get("key"), str):
        kw["key"] = bytes.fromhex(kw["key"])
    scenario = Scenario(kw.get("scenario", Scenario.MESSAGE_WITH_TAG))
    w = kw.get("w", 320)
    # fill the layout from whatever subset of w, m, n was given
    if scenario is Scenario.DETACHED_SIGNATURE:
        kw.setdefault("m", 0)
        kw.setdefault("n", w)
    elif "m" in kw and "n" not in kw:
        kw["n"] = w - kw["m"]
    elif "n" in kw and "m" not in kw:
        kw["m"] = w - kw["n"]
    elif "m" not in kw and w != 320:
        kw["n"] = min(128, w // 2)
        kw["m"] = w - kw["n"]
    try:
        return ex.ExperimentConfig(**kw)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _emit(records: list, settings: dict, config=None, columns=None, **extra) -> None:
    fmt = settings.get("format", "csv")
    if fmt == "json":
        text = ex.records_to_json(records, config, **extra)
    else:
        text = ex.records_to_csv(records, columns)
    ex.write_output(text, settings.get("out"))


def _target(settings: dict) -> float:
    t = float(settings.get("target", 0.95))
    if not 0 <= t < 1:
        raise UsageError("--target must lie in [0, 1)")
    return t


def cmd_ccer(settings):
    config = _config(settings)
    records = ex.run_ccer_sweep(config)
    _emit(records, settings, config, ex.CCER_COLUMNS)


def cmd_hist(settings):
    config = _config(settings)
    hist = ex.run_histogram(config)
    _emit(ex.histogram_records(hist), settings, config,
          blocks_needing_correction=hist.blocks, first_try=hist.first_try)


def cmd_lvalues(settings):
    config = _config(settings)
    _emit(ex.run_lvalues_for_target(config, _target(settings)), settings, config)


def cmd_predict(settings):
    coeffs = analytics.DEFAULT_COEFFICIENTS
    if settings.get("coeffs"):
        coeffs = analytics.LinearCoefficients.from_file(settings["coeffs"])
    w = int(settings.get("w", 320))
    sweep = settings.get("ebn0", (3.0, 3.0, 1.0))
    if isinstance(sweep, str):
        sweep = parse_sweep(sweep)
    points = ex.ExperimentConfig(ebn0=sweep).points()
    target = _target(settings)
    rows = []
    for e in points:
        pred = analytics.predict_x0(w, e, target, coeffs)
        rows.append(ex.PredictionRow(w, e, target, pred.a, pred.x0, pred.needed, pred.extrapolated))
    _emit(rows, settings)


def cmd_minnmax(settings):
    if "p" not in settings:
        raise UsageError("minnmax needs --p")
    w = int(settings.get("w", 320))
    p = float(settings["p"])
    target = _target(settings)
    if not 0 < target < 1:
        raise UsageError("--target must lie in (0, 1)")
    _emit([ex.MinNmaxRow(w, p, target, analytics.min_nmax(w, p, target))], settings)


def cmd_fit(settings):
    if settings.get("input"):
        with open(settings["input"], newline="") as fh:
            rows = list(csv.DictReader(fh))
        w = int(settings.get("w", max((int(r["position"]) for r in rows), default=1)))
        hist = ex.histogram_from_rows(rows, w)
    else:
        hist = ex.run_histogram(_config(settings))
    k, a = analytics.fit_exponential(hist)
    _emit([ex.FitRow(hist.w, hist.ebn0_db, k, a, analytics.k_from_a(a, hist.w))], settings)


def cmd_timing(settings):
    config = _config(settings)
    report = ex.timing_report(config, int(settings.get("trials", 10_000)), settings.get("mode", "uniform"))
    _emit([report], settings, config)


COMMANDS = {
    "ccer": cmd_ccer,
    "hist": cmd_hist,
    "lvalues": cmd_lvalues,
    "predict": cmd_predict,
    "minnmax": cmd_minnmax,
    "fit": cmd_fit,
    "timing": cmd_timing,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = _settings(args)
        COMMANDS[args.command](settings)
    except UsageError as exc:
        print(f"sidlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("run failed", exc_info=True)
        print(f"sidlab: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
