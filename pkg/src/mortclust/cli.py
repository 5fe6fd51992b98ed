"""Command-line surface: ingest, cluster, sweep, consensus.

Artifacts land under --out: the canonical panel CSV and manifest from
``ingest``, then per-pipeline partition CSVs, run reports, and SVG figures.
Exit codes: 0 success, 2 usage or configuration problems, 3 data errors,
4 numerical failures.  MORTCLUST_DATA provides the data directory when
--data-dir is absent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .clustering import write_partition_csv
from .exceptions import (
    ConfigError,
    DataFormatError,
    DegenerateDriftError,
    DegenerateFitError,
    DomainError,
    MissingDataError,
    MortclustError,
    PanelAssemblyError,
    PipelineError,
    ReducedKError,
    UndefinedScoreError,
)
from .figures import figures_for_result, save_consensus, save_sweep_curves
from .hmd import (
    REPLICATION_CODES,
    REPLICATION_YEARS,
    DataSelection,
    load_data_dir,
    panel_checksum,
    read_panel_csv,
    write_manifest,
    write_panel_csv,
)
from .pipelines import (
    DEFAULT_K,
    PipelineName,
    PipelineSpec,
    consensus,
    read_run_report,
    run_pipeline,
    sweep_pipeline,
    write_run_report,
)
from .validity import write_sweep_csv

CONFIG_KEYS = frozenset(
    {
        "data_dir",
        "out",
        "countries",
        "year_min",
        "year_max",
        "pipeline",
        "k",
        "kmin",
        "kmax",
        "seed",
    }
)

LAYOUT_SEED = 7


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(
            f"config {path} has unknown key(s): {', '.join(unknown)}"
        )
    return data


def _parse_years(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"--years wants A:B, got {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"--years wants integers, got {text!r}") from None
    if lo > hi:
        raise ConfigError(f"--years range is empty: {text!r}")
    return lo, hi


def _selection(args, config: dict) -> DataSelection:
    if args.countries:
        codes = tuple(c.strip() for c in args.countries.split(",") if c.strip())
        if not codes:
            raise ConfigError("--countries lists no codes")
    elif "countries" in config:
        raw = config["countries"]
        if isinstance(raw, str):
            codes = tuple(c.strip() for c in raw.split(",") if c.strip())
        else:
            codes = tuple(str(c) for c in raw)
        if not codes:
            raise ConfigError("config countries lists no codes")
    else:
        codes = REPLICATION_CODES
    if args.years:
        lo, hi = _parse_years(args.years)
    else:
        lo = config.get("year_min", REPLICATION_YEARS[0])
        hi = config.get("year_max", REPLICATION_YEARS[1])
    try:
        return DataSelection(codes, int(lo), int(hi))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _data_dir(args, config: dict) -> Path | None:
    candidate = (
        args.data_dir or config.get("data_dir") or os.environ.get("MORTCLUST_DATA")
    )
    return Path(candidate) if candidate else None


def _out_dir(args, config: dict) -> Path:
    out = Path(args.out or config.get("out") or "mortclust_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ingest_panel(data_dir: Path, sel: DataSelection, out: Path):
    missing = [
        code
        for code in sel.country_codes
        if not (data_dir / f"{code}.bltper_5x1.txt").is_file()
    ]
    if missing:
        for code in missing:
            print(f"missing: {data_dir / (code + '.bltper_5x1.txt')}", file=sys.stderr)
        raise ConfigError(
            f"{len(missing)} of {len(sel.country_codes)} life-table files missing"
        )
    panel = load_data_dir(data_dir, sel)
    sha = write_panel_csv(panel, out / "panel.csv")
    write_manifest(panel, sel, sha, out / "manifest.json")
    print(
        f"wrote {out / 'panel.csv'}: {len(panel.countries)} countries, "
        f"{len(panel.years)} years, {len(panel.grid)} age groups"
    )
    print(f"wrote {out / 'manifest.json'}")
    return panel, sha


def _obtain_panel(args, config: dict, out: Path):
    """Prefer an existing panel artifact in --out; otherwise ingest."""
    panel_csv = out / "panel.csv"
    if panel_csv.is_file():
        return read_panel_csv(panel_csv), panel_checksum(panel_csv)
    data_dir = _data_dir(args, config)
    if data_dir is None:
        raise ConfigError(
            f"no panel artifact at {panel_csv} and no --data-dir/MORTCLUST_DATA"
        )
    return _ingest_panel(data_dir, _selection(args, config), out)


def _cleanup(paths) -> None:
    for path in paths:
        try:
            Path(path).unlink()
        except OSError:
            pass


def cmd_ingest(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    data_dir = _data_dir(args, config)
    if data_dir is None:
        raise ConfigError("ingest needs --data-dir (or MORTCLUST_DATA)")
    _ingest_panel(data_dir, _selection(args, config), out)
    return 0


def cmd_cluster(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    panel, sha = _obtain_panel(args, config, out)
    name = PipelineName.parse(args.pipeline or config.get("pipeline", ""))
    k = args.k if args.k is not None else config.get("k", DEFAULT_K[name])
    seed_kwargs = {}
    seed = args.seed if args.seed is not None else config.get("seed")
    if seed is not None:
        seed_kwargs["seed"] = int(seed)
    spec = PipelineSpec.default(name, k=int(k), **seed_kwargs)
    result = run_pipeline(panel, spec)
    run_dir = out / name.value
    run_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        partition_csv = run_dir / "partition.csv"
        write_partition_csv(
            result.entity_ids, result.partition, partition_csv, result.fuzzy
        )
        written.append(partition_csv)
        report = run_dir / "run_report.json"
        write_run_report(result, report, panel_sha256=sha)
        written.append(report)
        written.extend(figures_for_result(panel, result, run_dir))
    except Exception:
        _cleanup(written)
        raise
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    panel, _ = _obtain_panel(args, config, out)
    name = PipelineName.parse(args.pipeline or config.get("pipeline", ""))
    k_min = args.kmin if args.kmin is not None else config.get("kmin", 2)
    k_max = args.kmax if args.kmax is not None else config.get("kmax", 8)
    seed = args.seed if args.seed is not None else config.get("seed")
    kwargs = {"seed": int(seed)} if seed is not None else {}
    sweep_result = sweep_pipeline(panel, name, int(k_min), int(k_max), **kwargs)
    run_dir = out / name.value
    run_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        csv_path = run_dir / "sweep.csv"
        write_sweep_csv(sweep_result, csv_path)
        written.append(csv_path)
        written.extend(save_sweep_curves(sweep_result, run_dir))
    except Exception:
        _cleanup(written)
        raise
    for path in written:
        print(f"wrote {path}")
    for index in sweep_result.index_names:
        print(f"{index}: prefers k={sweep_result.selected_k[index]}")
    return 0


def cmd_consensus(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    if not args.reports:
        raise ConfigError("consensus needs at least one run report")
    parts = []
    for report_path in args.reports:
        if not Path(report_path).is_file():
            raise ConfigError(f"run report not found: {report_path}")
        _, entities, partition = read_run_report(report_path)
        parts.append((entities, partition))
    seed = args.seed if args.seed is not None else config.get("seed", LAYOUT_SEED)
    graph = consensus(parts).with_layout(seed=int(seed))
    written: list[Path] = []
    try:
        json_path = out / "consensus.json"
        json_path.write_text(graph.to_json() + "\n")
        written.append(json_path)
        graphml_path = out / "consensus.graphml"
        graphml_path.write_text(graph.to_graphml())
        written.append(graphml_path)
        written.append(save_consensus(graph, out / "consensus.svg"))
    except Exception:
        _cleanup(written)
        raise
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mortclust",
        description="Cluster country-level mortality from period life tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--data-dir", help="directory of <CODE>.bltper_5x1.txt files")
        p.add_argument("--out", help="output directory (default mortclust_out)")
        p.add_argument("--countries", help="comma-separated HMD codes")
        p.add_argument("--years", help="year range A:B")
        p.add_argument("--seed", type=int, help="override the deterministic seed")
        p.add_argument("--config", help="JSON config file; flags override it")

    p_ingest = sub.add_parser("ingest", help="parse life tables into the panel artifact")
    common(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_cluster = sub.add_parser("cluster", help="run one clustering pipeline")
    common(p_cluster)
    p_cluster.add_argument("--pipeline", help="hellinger_ward | ilc_kmeans | pca_fuzzy | func_kmeans")
    p_cluster.add_argument("--k", type=int, help="number of clusters")
    p_cluster.set_defaults(func=cmd_cluster)

    p_sweep = sub.add_parser("sweep", help="score a pipeline across k")
    common(p_sweep)
    p_sweep.add_argument("--pipeline", help="pipeline to sweep")
    p_sweep.add_argument("--kmin", type=int, help="smallest k (default 2)")
    p_sweep.add_argument("--kmax", type=int, help="largest k (default 8)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_cons = sub.add_parser("consensus", help="combine run reports into the co-clustering graph")
    common(p_cons)
    p_cons.add_argument("reports", nargs="*", help="run_report.json paths")
    p_cons.set_defaults(func=cmd_consensus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, MissingDataError, PanelAssemblyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (
        PipelineError,
        DegenerateFitError,
        DegenerateDriftError,
        ReducedKError,
        UndefinedScoreError,
        FloatingPointError,
    ) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MortclustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
