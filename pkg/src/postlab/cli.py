"""Command-line front end.

``postlab run --config FILE``   execute a config document
``postlab demo``                execute the built-in suite (seed 42)
``postlab describe``            list experiments and the claims they check

Exit status: 0 when every verdict passes, 2 when some verdict is flagged
(Monte Carlo between 4 and 6 sigma, or a non-generic case), 1 on failure or error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .config import config_to_plain, demo_document, dump, flatten, parse_config, report_to_plain
from .errors import PostlabError
from .experiments import CLAIMS, DESCRIPTIONS, EXPERIMENTS, ExperimentConfig, run_experiment

log = logging.getLogger("postlab")

EXIT_OK, EXIT_ERROR, EXIT_FLAG = 0, 1, 2


@dataclass
class RunManifest:
    tool_version: str
    seed: int | None
    timestamp: str
    configs: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        statuses = {r.status for r in self.reports}
        if "fail" in statuses:
            return EXIT_ERROR
        if "flag" in statuses:
            return EXIT_FLAG
        return EXIT_OK

    def to_plain(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "seed": self.seed,
            "timestamp": self.timestamp,
            "configs": [config_to_plain(c) for c in self.configs],
            "reports": [report_to_plain(r) for r in self.reports],
        }


def _write_table(path: Path, rows, header):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run(configs: list[ExperimentConfig], output_path=None, *, seed=None) -> RunManifest:
    """Execute ``configs`` in order, and write the manifest and detail files if ``output_path`` is given.

    Detail files (``NN_name.yaml`` and ``NN_name.csv``) hold only numeric
    payloads and are byte-identical across runs with the same configs.
    """
    out = None
    if output_path is not None:
        out = Path(output_path)
        out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(__version__, seed, _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    verdict_rows = []
    for k, cfg in enumerate(configs):
        log.info("running %s (seed %d, %d trials)", cfg.name, cfg.seed, cfg.trials)
        rep = run_experiment(cfg)
        manifest.configs.append(cfg)
        manifest.reports.append(rep)
        plain = report_to_plain(rep)
        for v in plain["verdicts"]:
            verdict_rows.append([k, cfg.name, v["claim"], v["status"], v["margin"], v["detail"]])
        if out is not None:
            stem = f"{k:02d}_{cfg.name}"
            (out / f"{stem}.yaml").write_text(dump(plain))
            rows = [[section, path, value] for section in ("analytic", "empirical")
                    for path, value in flatten(plain[section])]
            _write_table(out / f"{stem}.csv", rows, ["section", "path", "value"])
    if out is not None:
        (out / "manifest.yaml").write_text(dump(manifest.to_plain()))
        _write_table(out / "verdicts.csv", verdict_rows, ["index", "experiment", "claim", "status", "margin", "detail"])
    return manifest


def _summary(manifest: RunManifest) -> str:
    lines = [f"{'experiment':<18} {'claim':<30} {'status':<12} margin"]
    for rep in manifest.reports:
        for v in rep.verdicts:
            lines.append(f"{rep.name:<18} {v.claim:<30} {v.status:<12} {v.margin:.3g}  {v.detail}")
    if not manifest.reports:
        lines.append("(no experiments)")
    return "\n".join(lines)


def describe() -> str:
    lines = []
    for name in EXPERIMENTS:
        lines.append(name)
        for claim in DESCRIPTIONS[name]:
            lines.append(f"  {claim}: {CLAIMS[claim]}")
    return "\n".join(lines)


def _seed_fallback(cli_seed):
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("POSTLAB_SEED")
    return int(env) if env else None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="base seed (default: config, then $POSTLAB_SEED)")
    common.add_argument("--trials", type=int, help="override Monte Carlo trials for every experiment")
    common.add_argument("--out", type=Path, help="directory for manifest and detail files")
    common.add_argument("--tau", type=float, help="support threshold on squared projection norms")
    common.add_argument("--format", choices=("table", "structured"), default="table",
                        help="stdout format (default: table)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="postlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="execute a config document")
    r.add_argument("--config", type=Path, required=True)
    sub.add_parser("demo", parents=[common], help="run the built-in suite with seed 42")
    sub.add_parser("describe", help="print the experiment catalog")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "describe":
        print(describe())
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        doc_seed = None
        if args.command == "demo":
            text = demo_document()
            seed = args.seed if args.seed is not None else 42
        else:
            text = args.config.read_text()
            seed = args.seed
            doc_seed = _load_doc(text).get("seed")
            if seed is None and doc_seed is None:
                seed = _seed_fallback(None)
        configs = parse_config(text, seed=seed, trials=args.trials, tau=args.tau)
        manifest = run(configs, args.out, seed=seed if seed is not None else doc_seed)
    except (PostlabError, OSError) as exc:
        print(f"postlab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.format == "structured":
        print(dump(manifest.to_plain()))
    else:
        print(_summary(manifest))
    return manifest.exit_code


def _load_doc(text):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError:
        return {}
    return doc if isinstance(doc, dict) else {}


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
