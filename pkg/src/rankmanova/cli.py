"""Command-line interface.

``rankmanova analyze`` reads a delimited file, builds groups from one or two
factor columns and tests global, main-effect, interaction or custom
hypotheses. ``rankmanova simulate`` runs a named simulation study.

Exit codes: 0 success, 2 input error, 3 configuration error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .covariance import eigen_diagnostic, sigma_hat
from .data import Dataset, FactorialLayout, validate
from .design import HypothesisDesign, all_effects, one_way
from .exceptions import (
    ConfigError,
    InputError,
    MissingColumn,
    NoCompleteRows,
    NumericalError,
    SingleGroup,
)
from .inference import MULTIPLIERS, ats, result_from_vectors, bootstrap_vectors
from .posthoc import HypothesisFamily, closed_test, hierarchical_plan
from .ranks import effects
from .simulation import M_GRID, DELTA_GRID, named_study, power_study, type1_study

log = logging.getLogger("rankmanova")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4


@dataclass
class AnalysisConfig:
    input: Path
    factors: list[str]
    outcomes: list[str]
    hypothesis: str = "one-way"
    engine: str = "wild"
    B: int = 1000
    alpha: float = 0.05
    seed: int = 1
    multipliers: str = "rademacher"
    posthoc: str | None = None
    format: str = "text"
    diagnostics: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.B < 1:
            raise ConfigError("B must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.outcomes:
            raise ConfigError("at least one outcome column is required")
        if not 1 <= len(self.factors) <= 2:
            raise ConfigError("one or two factor columns are required")
        if self.engine not in ("wild", "classical"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.multipliers not in MULTIPLIERS:
            raise ConfigError(f"unknown multiplier scheme {self.multipliers!r}")
        if self.format not in ("text", "csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")


def _level_order(values: pd.Series) -> list[str]:
    levels = sorted(set(values))
    try:
        return sorted(levels, key=float)
    except ValueError:
        return levels


def _read_table(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
    sep = "\t" if "\t" in header else ","
    return pd.read_csv(path, sep=sep, dtype=str, keep_default_na=True, encoding="utf-8")


def ingest(path, factors, outcomes) -> tuple[Dataset, FactorialLayout, int]:
    """Load a delimited file into a dataset with groups from the factor columns.

    Rows missing any selected value are dropped. Groups are the sorted
    factor-level combinations with the last factor varying fastest.

    Returns
    -------
    dataset, layout, dropped
        ``dropped`` is the number of rows removed by listwise deletion.
    """
    frame = _read_table(path)
    factors, outcomes = list(factors), list(outcomes)
    missing = [c for c in factors + outcomes if c not in frame.columns]
    if missing:
        raise MissingColumn(f"column(s) not found: {', '.join(missing)}")
    sub = frame[factors + outcomes].apply(lambda s: s.str.strip())
    sub = sub.replace("", np.nan)
    complete = sub.dropna()
    dropped = len(sub) - len(complete)
    if dropped:
        log.info("dropped %d incomplete row(s)", dropped)
    if complete.empty:
        raise NoCompleteRows("no row has all selected columns present")
    try:
        values = complete[outcomes].astype(float)
    except ValueError as exc:
        raise InputError(f"non-numeric outcome value: {exc}") from None

    levels = [_level_order(complete[f]) for f in factors]
    layout = FactorialLayout(tuple(factors), tuple(len(lv) for lv in levels),
                             tuple(tuple(lv) for lv in levels))
    if layout.n_cells < 2:
        raise SingleGroup("need at least two groups")
    groups, names = [], []
    for cell in layout.cells():
        mask = np.ones(len(complete), dtype=bool)
        for f, lv, k in zip(factors, levels, cell):
            mask &= (complete[f] == lv[k]).to_numpy()
        if not mask.any():
            combo = ", ".join(f"{f}={lv[k]}" for f, lv, k in zip(factors, levels, cell))
            raise InputError(f"empty cell {combo}")
        groups.append(values.to_numpy()[mask])
        names.append("/".join(lv[k] for lv, k in zip(levels, cell)))
    return validate(groups, labels=tuple(outcomes), group_names=tuple(names)), layout, dropped


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    sep = "\t" if "\t" in text else ","
    try:
        H = np.loadtxt(io.StringIO(text), delimiter=sep, ndmin=2)
    except ValueError as exc:
        raise InputError(f"cannot parse hypothesis matrix: {exc}") from None
    return H


def resolve_designs(spec: str, layout: FactorialLayout, d: int) -> list[HypothesisDesign]:
    a = layout.n_cells
    if spec == "one-way":
        return [one_way(a, d)]
    if spec.startswith("file:"):
        H = load_matrix(spec[5:])
        if H.shape[1] != a * d:
            raise ConfigError(f"hypothesis matrix has {H.shape[1]} columns, need {a * d}")
        return [HypothesisDesign.from_matrix(H, "custom", layout, d)]
    if len(layout.names) != 2:
        raise ConfigError(f"hypothesis {spec!r} needs two factors")
    designs = all_effects(layout, d)
    A, B = layout.names
    key = {"A": A, "B": B, "AB": f"{A}:{B}"}.get(spec)
    if spec == "all":
        return list(designs.values())
    if key is None:
        raise ConfigError(f"unknown hypothesis {spec!r}")
    return [designs[key]]


@dataclass
class Report:
    groups: list[str]
    outcomes: list[str]
    n: list[int]
    effects: np.ndarray
    tests: list[dict]
    provenance: dict
    dropped: int = 0
    posthoc: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "dropped_rows": self.dropped,
            "groups": [
                {"name": g, "n": k, "effects": dict(zip(self.outcomes, map(float, row)))}
                for g, k, row in zip(self.groups, self.n, self.effects)
            ],
            "tests": self.tests,
            "posthoc": self.posthoc,
            "diagnostics": self.diagnostics,
        }


def _family_dict(res) -> dict:
    return {
        "kind": res.family.kind,
        "adjustment": res.method,
        "hypotheses": [
            {"label": lab, "raw_p": raw, "adjusted_p": adj, "reject": rej}
            for lab, raw, adj, rej in res.rows()
        ],
    }


def _posthoc(dataset: Dataset, cfg: AnalysisConfig) -> dict:
    kw = dict(B=cfg.B, alpha=cfg.alpha, seed=cfg.seed, method=cfg.engine,
              scheme=cfg.multipliers, workers=cfg.workers)
    a, d = dataset.a, dataset.d
    if cfg.posthoc == "components":
        return {"stage1": _family_dict(closed_test(dataset, HypothesisFamily.components(a, d, adjustment="auto"), **kw))}
    if cfg.posthoc == "pairs":
        return {"stage1": _family_dict(closed_test(dataset, HypothesisFamily.pairs(a, d, adjustment="auto"), **kw))}
    if cfg.posthoc.startswith("hierarchical:"):
        rep = hierarchical_plan(dataset, cfg.posthoc.split(":", 1)[1], **kw)
        return {
            "order": rep.order,
            "global_p": rep.global_pvalue,
            "stage1": _family_dict(rep.stage1),
            "stage2_note": "conditional on stage 1; exploratory",
            "stage2": {k: _family_dict(v) for k, v in rep.stage2.items()},
        }
    raise ConfigError(f"unknown post-hoc option {cfg.posthoc!r}")


def run_analysis(cfg: AnalysisConfig) -> Report:
    dataset, layout, dropped = ingest(cfg.input, cfg.factors, cfg.outcomes)
    designs = resolve_designs(cfg.hypothesis, layout, dataset.d)
    p_hat, _ = effects(dataset)
    vectors = bootstrap_vectors(dataset, cfg.B, cfg.engine, cfg.seed, cfg.multipliers, cfg.workers)
    tests = []
    for des in designs:
        des.check(dataset)
        stat = ats(p_hat, des.T, dataset.N)
        res = result_from_vectors(stat, vectors, des.T, cfg.alpha, cfg.seed, cfg.engine)
        tests.append({
            "hypothesis": des.label, "statistic": res.statistic, "pvalue": res.pvalue,
            "critical_value": res.critical_value, "reject": res.reject,
        })
    provenance = {
        "version": __version__, "engine": cfg.engine, "B": cfg.B, "alpha": cfg.alpha,
        "seed": cfg.seed, "multipliers": cfg.multipliers if cfg.engine == "wild" else None,
        "factors": list(cfg.factors), "hypothesis": cfg.hypothesis,
    }
    report = Report([str(g) for g in dataset.group_names], list(cfg.outcomes), list(dataset.n),
                    p_hat.matrix.copy(), tests, provenance, dropped)
    if cfg.posthoc:
        report.posthoc = _posthoc(dataset, cfg)
    if cfg.diagnostics:
        sigma = sigma_hat(dataset).sigma
        report.diagnostics = {
            t["hypothesis"]: [float(v) for v in eigen_diagnostic(sigma, des.T)]
            for t, des in zip(tests, designs)
        }
    return report


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.as_dict(), indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "n"] + report.outcomes)
        for g, k, row in zip(report.groups, report.n, report.effects):
            w.writerow([g, k] + [repr(float(v)) for v in row])
        w.writerow([])
        w.writerow(["hypothesis", "statistic", "pvalue", "critical_value", "reject", "B", "seed", "engine"])
        pv = report.provenance
        for t in report.tests:
            w.writerow([t["hypothesis"], repr(t["statistic"]), repr(t["pvalue"]),
                        repr(t["critical_value"]), t["reject"], pv["B"], pv["seed"], pv["engine"]])
        return buf.getvalue()
    pv = report.provenance
    lines = [f"rankmanova {pv['version']}  engine={pv['engine']}  B={pv['B']}  seed={pv['seed']}"
             + (f"  multipliers={pv['multipliers']}" if pv["multipliers"] else "")]
    lines.append(f"dropped rows: {report.dropped}")
    lines.append("")
    lines.append("Estimated relative effects")
    width = max(len(g) for g in report.groups + ["group"])
    lines.append(f"{'group':<{width}}  {'n':>6}  " + "  ".join(f"{o:>10}" for o in report.outcomes))
    for g, k, row in zip(report.groups, report.n, report.effects):
        lines.append(f"{g:<{width}}  {k:>6}  " + "  ".join(f"{v:>10.4f}" for v in row))
    lines.append("")
    for t in report.tests:
        lines.append(f"{t['hypothesis']}: T_N = {t['statistic']:.4f}, p = {t['pvalue']:.4f}"
                     f", critical value = {t['critical_value']:.4f}"
                     f" ({'reject' if t['reject'] else 'retain'} at alpha = {pv['alpha']})")
    if report.posthoc:
        ph = report.posthoc
        lines.append("")
        if "global_p" in ph:
            lines.append(f"Post-hoc ({ph['order']}), global p = {ph['global_p']:.4f}")
        lines.extend(_family_lines("stage 1", ph["stage1"]))
        for key, fam in ph.get("stage2", {}).items():
            lines.extend(_family_lines(f"stage 2 within {key} (exploratory)", fam))
    for label, vals in report.diagnostics.items():
        lines.append(f"eigenvalues for {label}: " + " ".join(f"{v:.4g}" for v in vals))
    return "\n".join(lines) + "\n"


def _family_lines(title, fam):
    out = [f"{title}: {fam['kind']}, {fam['adjustment']} adjustment"]
    for h in fam["hypotheses"]:
        out.append(f"  {h['label']:<20} raw p = {h['raw_p']:.4f}  adjusted p = {h['adjusted_p']:.4f}"
                   f"  {'*' if h['reject'] else ''}")
    return out


def read_effect_table(text: str) -> tuple[list[str], np.ndarray]:
    """Parse the effect block of a CSV report back into group names and values."""
    rows = list(csv.reader(io.StringIO(text)))
    block = rows[1:rows.index([])]
    return [r[0] for r in block], np.array([[float(v) for v in r[2:]] for r in block])


def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankmanova", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    an = sub.add_parser("analyze", help="test hypotheses on a data file")
    an.add_argument("--input", required=True, type=Path)
    an.add_argument("--factors", required=True, type=_csv_list, help="one or two column names")
    an.add_argument("--outcomes", required=True, type=_csv_list)
    an.add_argument("--hypothesis", default="one-way",
                    help="one-way, A, B, AB, all, or file:<path> with a delimited H matrix")
    an.add_argument("--engine", choices=("wild", "classical"), default="wild")
    an.add_argument("--B", type=int, default=1000)
    an.add_argument("--alpha", type=float, default=0.05)
    an.add_argument("--seed", type=int, default=1)
    an.add_argument("--multipliers", choices=MULTIPLIERS, default="rademacher")
    an.add_argument("--posthoc", default=None,
                    help="components, pairs, hierarchical:components-first or hierarchical:pairs-first")
    an.add_argument("--format", choices=("text", "csv", "json"), default="text")
    an.add_argument("--diagnostics", action="store_true", help="report covariance eigenvalues")
    an.add_argument("--workers", type=int, default=1)
    an.add_argument("--output", type=Path, default=None)

    sim = sub.add_parser("simulate", help="run a named simulation study")
    sim.add_argument("--scenario", required=True, help="e.g. table1-normal-S1, table2-1,2, power-normal")
    sim.add_argument("--runs", type=int, default=1000)
    sim.add_argument("--B", type=int, default=500)
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--seed", type=int, default=2024)
    sim.add_argument("--m-grid", type=lambda s: [int(x) for x in _csv_list(s)], default=list(M_GRID))
    sim.add_argument("--engines", type=_csv_list, default=["wild", "classical"])
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--output", type=Path, default=None)
    return parser


def run_simulation(args) -> str:
    if args.runs < 1 or args.B < 1:
        raise ConfigError("--runs and --B must be positive")
    kind, scenarios = named_study(args.scenario, R=args.runs, B=args.B, seed=args.seed,
                                  m_grid=args.m_grid, alpha=args.alpha)
    if kind == "power":
        table = power_study(scenarios[0], DELTA_GRID, args.engines, args.workers)
    else:
        table = type1_study(scenarios, args.engines, args.workers, title=args.scenario)
    table.meta.update({"scenario": args.scenario, "seed": args.seed, "R": args.runs,
                       "B": args.B, "alpha": args.alpha, "version": __version__})
    return table.to_text()


def _emit(text: str, output: Path | None):
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        output.write_text(text, encoding="utf-8")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--") and argv[0] not in ("--help", "--version", "--verbose"):
        argv.insert(0, "analyze")
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            _emit(run_simulation(args), args.output)
            return EXIT_OK
        cfg = AnalysisConfig(
            args.input, args.factors, args.outcomes, args.hypothesis, args.engine, args.B,
            args.alpha, args.seed, args.multipliers, args.posthoc, args.format,
            args.diagnostics, args.workers,
        )
        report = run_analysis(cfg)
        if report.dropped:
            print(f"dropped {report.dropped} incomplete row(s)", file=sys.stderr)
        _emit(render(report, cfg.format), args.output)
        return EXIT_OK
    except (InputError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
