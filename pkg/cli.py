"""
cli.py
======
Command-line entry point for community health assessment of a follower graph.

Subcommands:
  trust          : trust scores                 -> trust.csv
  communities    : community assignment         -> communities.tsv
  roles          : boundary/core/neighbor roles -> roles.csv, neighbors.csv, stats.csv
  vulnerability  : V(b) and V~(C) rankings      -> vulnerability.json, node_/community_vulnerability.csv
  evaluate       : ranking quality vs spreaders -> eval.json, summary.csv, spreader_vulnerability.csv
                   (stats.csv gains infected counts)
  pipeline       : every stage; evaluation runs when a spreader file is configured
  synth sbm      : seeded stochastic block model edge list (+ planted partition)
  synth plant    : seeded ground-truth spreader set
  summarize      : merge per-network summary.csv rows and append the mean row

Configuration precedence (lowest first): defaults, COMMUNITY_HEALTH_THREADS,
the flat key=value file given by --config, command-line flags.

Exit codes: 0 ok, 2 input/parse, 3 trust, 4 community, 5 roles,
6 vulnerability, 7 evaluation.
"""

import argparse
import logging
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import pandas as pd
from dotenv import dotenv_values, load_dotenv

from community import (ALGORITHMS, DEFAULT_MAX_SWEEPS, DEFAULT_RESOLUTION, assignment_table,
                       ASSIGNMENT_CSV, detect, load_assignment, modularity, partition_nmi,
                       write_assignment)
from evaluation import (DEFAULT_KS, DEFAULT_MAP_K, MAP_VARIANTS, evaluate, summarize_rows,
                        summary_row)
from graph_core import EmptyGraphError, load_edge_list, symmetrize, write_edge_list
from pdf_export import generate_pdf
from reports import ReportWriter, write_csv
from roles import (FOLLOW_OUT, SEMANTICS_ALIASES, classify_roles, community_statistics,
                   neighbor_table, role_table)
from synth import (STRATEGIES, PlantingStrategy, SbmParams, generate_sbm, load_spreaders,
                   plant_spreaders, write_spreaders)
from trust import (DEFAULT_EPSILON, DEFAULT_INVOLVEMENT, DEFAULT_LOG_FLOOR,
                   DEFAULT_MAX_ITERATIONS, TsmParams, compute_tsm, load_trust_table,
                   normalize_scores, trust_table)
from vulnerability import assess, community_table, node_table, report_to_json, spreader_table

logger = logging.getLogger(__name__)

# ── Configuration Constants ───────────────────────────────────────────────────

ENV_THREADS = "COMMUNITY_HEALTH_THREADS"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
TOP_COMMUNITIES_IN_PDF = 10

EXIT_OK = 0
EXIT_INPUT = 2
STAGE_EXIT = {"input": 2, "trust": 3, "community": 4, "roles": 5, "vulnerability": 6, "evaluate": 7}

# Stages each subcommand runs, in order
SUBCOMMAND_STAGES = {
    "trust":         ("trust",),
    "communities":   ("community",),
    "roles":         ("community", "roles"),
    "vulnerability": ("trust", "community", "roles", "vulnerability"),
    "evaluate":      ("trust", "community", "roles", "vulnerability", "evaluate"),
    "pipeline":      ("trust", "community", "roles", "vulnerability", "evaluate"),
}


class ConfigError(ValueError):
    """Configuration file or flags do not describe a runnable pipeline."""


class StageFailure(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
        self.code = STAGE_EXIT[stage]


# ── Configuration ─────────────────────────────────────────────────────────────

def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _parse_ints(value) -> Tuple[int, ...]:
    if isinstance(value, (tuple, list)):
        return tuple(int(v) for v in value)
    return tuple(int(part) for part in str(value).split(",") if part.strip())


def _optional_path(value) -> Optional[Path]:
    return Path(value) if value not in (None, "") else None


@dataclass
class PipelineConfig:
    edges: Optional[Path] = None
    edge_format: str = "tsv"
    spreaders: Optional[Path] = None
    communities_file: Optional[Path] = None
    trust_file: Optional[Path] = None
    truth: Optional[Path] = None
    involvement: float = DEFAULT_INVOLVEMENT
    max_iters: int = DEFAULT_MAX_ITERATIONS
    epsilon: float = DEFAULT_EPSILON
    log_floor: float = DEFAULT_LOG_FLOOR
    algo: str = "louvain"
    seed: int = 0
    resolution: float = DEFAULT_RESOLUTION
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    edge_semantics: str = FOLLOW_OUT
    infected_only: bool = False
    ks: Tuple[int, ...] = DEFAULT_KS
    map_k: int = DEFAULT_MAP_K
    map_variant: str = "standard"
    out_dir: Path = Path("out")
    threads: int = 1
    pdf: bool = False
    network_name: str = ""

    @property
    def tsm(self) -> TsmParams:
        return TsmParams(involvement=self.involvement, max_iterations=self.max_iters,
                         convergence_epsilon=self.epsilon, log_floor=self.log_floor)

    @property
    def network(self) -> str:
        if self.network_name:
            return self.network_name
        return self.edges.stem if self.edges is not None else "network"

    def validate(self, stages: Tuple[str, ...] = SUBCOMMAND_STAGES["pipeline"],
                 require_spreaders: bool = False) -> None:
        """Raise ConfigError (or ValueError from parameter types) for an unrunnable config."""
        if self.edges is None:
            raise ConfigError("no edge list given (--edges or 'edges' in the config file)")
        referenced = [self.edges, self.communities_file, self.trust_file, self.truth]
        for path in referenced:
            if path is not None and not path.exists():
                raise ConfigError(f"file not found: {path}")
        if self.edge_format not in ("tsv", "csv"):
            raise ConfigError(f"edge_format must be tsv or csv, got {self.edge_format!r}")
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"algo must be one of {ALGORITHMS}, got {self.algo!r}")
        if self.algo == "file" and self.communities_file is None:
            raise ConfigError("algo 'file' needs communities_file")
        if self.edge_semantics not in SEMANTICS_ALIASES:
            raise ConfigError(f"edge_semantics must be one of {sorted(SEMANTICS_ALIASES)}, "
                              f"got {self.edge_semantics!r}")
        if not self.ks or list(self.ks) != sorted(set(self.ks)) or self.ks[0] < 1:
            raise ConfigError(f"ks must be nonempty, ascending and positive, got {list(self.ks)}")
        if self.map_k < 1:
            raise ConfigError(f"map_k must be >= 1, got {self.map_k}")
        if self.map_variant not in MAP_VARIANTS:
            raise ConfigError(f"map_variant must be one of {MAP_VARIANTS}, got {self.map_variant!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.resolution <= 0:
            raise ConfigError(f"resolution must be positive, got {self.resolution}")
        if self.max_sweeps < 1:
            raise ConfigError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.infected_only and self.spreaders is None and "vulnerability" in stages:
            raise ConfigError("infected_only needs a spreader file")
        if require_spreaders and self.spreaders is None:
            raise ConfigError("evaluation needs a spreader file (--spreaders)")
        _ = self.tsm  # TsmParams validates its own ranges


_COERCE: Dict[str, Callable] = {
    "edges": _optional_path,
    "edge_format": str,
    "spreaders": _optional_path,
    "communities_file": _optional_path,
    "trust_file": _optional_path,
    "truth": _optional_path,
    "involvement": float,
    "max_iters": int,
    "epsilon": float,
    "log_floor": float,
    "algo": str,
    "seed": int,
    "resolution": float,
    "max_sweeps": int,
    "edge_semantics": str,
    "infected_only": _parse_bool,
    "ks": _parse_ints,
    "map_k": int,
    "map_variant": str,
    "out_dir": Path,
    "threads": int,
    "pdf": _parse_bool,
    "network_name": str,
}
CONFIG_KEYS = frozenset(f.name for f in fields(PipelineConfig))
assert CONFIG_KEYS == frozenset(_COERCE)


def build_config(overrides: Optional[Dict[str, object]] = None,
                 config_file: Optional[os.PathLike] = None) -> PipelineConfig:
    """Merge defaults, environment, config file and flag overrides (later wins)."""
    values: Dict[str, object] = {}
    env_threads = os.getenv(ENV_THREADS)
    if env_threads:
        values["threads"] = env_threads

    if config_file is not None:
        if not Path(config_file).exists():
            raise ConfigError(f"config file not found: {config_file}")
        for key, value in dotenv_values(config_file).items():
            name = key.strip().lower().replace("-", "_")
            if name not in CONFIG_KEYS:
                raise ConfigError(f"{config_file}: unknown config key {key!r}")
            if value is not None:
                values[name] = value

    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if values.get("communities_file") and "algo" not in values:
        values["algo"] = "file"

    try:
        return PipelineConfig(**{k: _COERCE[k](v) for k, v in values.items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration value: {e}") from e


# ── Pipeline ──────────────────────────────────────────────────────────────────

@contextmanager
def _timed_stage(writer: ReportWriter, name: str) -> Iterator[None]:
    start = time.perf_counter()
    logger.info("Stage %s: start", name)
    try:
        with writer.stage(name):
            yield
    except Exception as e:
        raise StageFailure(name, e) from e
    logger.info("Stage %s finished in %.3fs", name, time.perf_counter() - start)


def _log_statistics(stats: Dict[str, float]) -> None:
    logger.info("Community statistics:")
    for key, value in stats.items():
        logger.info("  %-22s %s", key, f"{value:.4f}" if isinstance(value, float) else value)


def _run_stages(cfg: PipelineConfig, writer: ReportWriter, stages: Tuple[str, ...]) -> None:
    with _timed_stage(writer, "input"):
        g = load_edge_list(cfg.edges, cfg.edge_format)
        if g.node_count == 0:
            raise EmptyGraphError(f"{cfg.edges}: edge list has no edges")

    ts = a = roles = report = None
    eval_doc = None

    if "trust" in stages:
        with _timed_stage(writer, "trust"):
            if cfg.trust_file is not None:
                ts = load_trust_table(cfg.trust_file, g)
                logger.info("Trust scores loaded from %s", cfg.trust_file)
            else:
                ts = normalize_scores(compute_tsm(g, cfg.tsm, threads=cfg.threads), cfg.tsm)
            writer.csv("trust.csv", trust_table(g, ts))

    if "community" in stages:
        with _timed_stage(writer, "community"):
            a = detect(g, cfg.algo, seed=cfg.seed, resolution=cfg.resolution,
                       max_sweeps=cfg.max_sweeps, assignment_path=cfg.communities_file)
            view = symmetrize(g)
            if view.adj.nnz:
                logger.info("Modularity of the assignment: %.6f", modularity(view, a, cfg.resolution))
            if cfg.truth is not None:
                planted = load_assignment(cfg.truth, g)
                logger.info("NMI against %s: %.4f", cfg.truth, partition_nmi(a, planted))
            writer.csv("communities.tsv", assignment_table(g, a), **ASSIGNMENT_CSV)

    if "roles" in stages:
        with _timed_stage(writer, "roles"):
            roles = classify_roles(g, a, cfg.edge_semantics)
            writer.csv("roles.csv", role_table(g, roles))
            writer.csv("neighbors.csv", neighbor_table(g, roles))
            stats = community_statistics(roles)
            writer.csv("stats.csv", pd.DataFrame([stats]))
            _log_statistics(stats)

    if "vulnerability" in stages:
        with _timed_stage(writer, "vulnerability"):
            infected = load_spreaders(cfg.spreaders, g) if cfg.infected_only else None
            report = assess(g, ts, a, roles, infected=infected, params={
                "edge_semantics": SEMANTICS_ALIASES[cfg.edge_semantics],
                "involvement": cfg.involvement,
                "algo": cfg.algo,
                "seed": cfg.seed,
            })
            writer.json("vulnerability.json", report_to_json(g, report))
            writer.csv("node_vulnerability.csv", node_table(g, report))
            writer.csv("community_vulnerability.csv", community_table(report))

    if "evaluate" in stages:
        if cfg.spreaders is None:
            logger.warning("No spreader file configured; evaluation skipped")
        else:
            with _timed_stage(writer, "evaluate"):
                truth = load_spreaders(cfg.spreaders, g)
                result = evaluate(report, roles, truth, ks=cfg.ks, map_k=cfg.map_k,
                                  map_variant=cfg.map_variant)
                eval_doc = result.to_dict()
                writer.json("eval.json", eval_doc)
                writer.csv("summary.csv", pd.DataFrame([summary_row(result, cfg.network)]))
                writer.csv("spreader_vulnerability.csv", spreader_table(g, ts, a, roles, truth))
                stats = community_statistics(roles, truth)
                writer.csv("stats.csv", pd.DataFrame([stats]))
                _log_statistics(stats)

    if cfg.pdf and report is not None:
        _write_pdf(cfg, writer, g, report, roles, eval_doc)


def _write_pdf(cfg, writer, g, report, roles, eval_doc) -> None:
    """The PDF is optional; a rendering failure is logged, not fatal."""
    try:
        truth = load_spreaders(cfg.spreaders, g) if eval_doc is not None else None
        doc = report_to_json(g, report)
        payload = generate_pdf(
            network=cfg.network,
            params={"edges": cfg.edges, "algo": cfg.algo, "seed": cfg.seed,
                    "involvement": cfg.involvement, "edge semantics": cfg.edge_semantics,
                    "threads": cfg.threads},
            stats=community_statistics(roles, truth),
            top_communities=doc["communities"][:TOP_COMMUNITIES_IN_PDF],
            evaluation=eval_doc,
        )
        writer.raw("report.pdf", payload)
    except Exception as e:
        logger.warning("Could not write PDF report: %s", e)


def run_pipeline(cfg: PipelineConfig, stages: Tuple[str, ...] = SUBCOMMAND_STAGES["pipeline"],
                 require_spreaders: bool = False) -> int:
    """Run ``stages`` in order and return the process exit code."""
    try:
        cfg.validate(stages, require_spreaders=require_spreaders)
    except ValueError as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_INPUT

    start = time.perf_counter()
    logger.info("Run %s: stages %s, out_dir=%s, threads=%d",
                cfg.network, ", ".join(stages), cfg.out_dir, cfg.threads)
    try:
        writer = ReportWriter(cfg.out_dir)
        _run_stages(cfg, writer, stages)
    except StageFailure as failure:
        logger.error("Stage %s failed: %s", failure.stage, failure.cause)
        return failure.code
    except OSError as e:
        logger.error("Cannot write reports: %s", e)
        return EXIT_INPUT
    logger.info("Run finished in %.3fs", time.perf_counter() - start)
    return EXIT_OK


# ── Subcommand handlers ───────────────────────────────────────────────────────

def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {k: v for k, v in vars(args).items() if k in CONFIG_KEYS}
    return build_config(overrides, getattr(args, "config", None))


def _cmd_stages(args: argparse.Namespace) -> int:
    try:
        cfg = _config_from_args(args)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_INPUT
    return run_pipeline(cfg, SUBCOMMAND_STAGES[args.command],
                        require_spreaders=args.command == "evaluate")


def _cmd_sbm(args: argparse.Namespace) -> int:
    try:
        params = SbmParams(block_sizes=_parse_ints(args.blocks), p_in=args.p_in, p_out=args.p_out,
                           seed=args.seed, directed=not args.undirected)
        g, planted = generate_sbm(params)
        write_edge_list(g, args.out)
        if args.truth_out:
            write_assignment(g, planted, args.truth_out)
    except (ValueError, OSError) as e:
        logger.error("synth sbm: %s", e)
        return EXIT_INPUT
    return EXIT_OK


def _cmd_plant(args: argparse.Namespace) -> int:
    try:
        cfg = _config_from_args(args)
        if cfg.edges is None:
            raise ConfigError("no edge list given (--edges)")
        strategy = PlantingStrategy(kind=args.strategy, rate=args.rate)
        g = load_edge_list(cfg.edges, cfg.edge_format)
        if cfg.trust_file is not None:
            ts = load_trust_table(cfg.trust_file, g)
        else:
            ts = normalize_scores(compute_tsm(g, cfg.tsm, threads=cfg.threads), cfg.tsm)
        roles = None
        if strategy.kind == "boundary":
            if cfg.communities_file is None:
                raise ConfigError("boundary planting needs --communities-file")
            roles = classify_roles(g, load_assignment(cfg.communities_file, g), cfg.edge_semantics)
        spreaders = plant_spreaders(g, ts, strategy, seed=args.seed, roles=roles)
        write_spreaders(g, spreaders, args.out)
    except (ValueError, OSError) as e:
        logger.error("synth plant: %s", e)
        return EXIT_INPUT
    return EXIT_OK


def _cmd_summarize(args: argparse.Namespace) -> int:
    try:
        rows = pd.concat([pd.read_csv(path) for path in args.files], ignore_index=True)
        write_csv(summarize_rows(rows), args.out)
    except (ValueError, OSError, KeyError) as e:
        logger.error("summarize: %s", e)
        return EXIT_INPUT
    return EXIT_OK


# ── Argument parsing ──────────────────────────────────────────────────────────

def _parent(add: Callable[[argparse.ArgumentParser], None]) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    add(parser)
    return parser


def _common_opts(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--log-level", default="INFO", help="DEBUG, INFO, WARNING, ERROR")
    p.add_argument("--threads", type=int, help=f"worker threads (env {ENV_THREADS})")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--network-name", dest="network_name")


def _input_opts(p):
    p.add_argument("--edges", help="edge list: src, dst, optional weight")
    p.add_argument("--format", dest="edge_format", choices=("tsv", "csv"))


def _trust_opts(p):
    p.add_argument("--involvement", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--log-floor", dest="log_floor", type=float)
    p.add_argument("--trust-file", dest="trust_file", help="reuse a trust.csv dump")


def _community_opts(p):
    p.add_argument("--algo", choices=ALGORITHMS)
    p.add_argument("--seed", type=int)
    p.add_argument("--resolution", type=float)
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    p.add_argument("--communities-file", dest="communities_file")
    p.add_argument("--truth", help="planted assignment; logs NMI")


def _role_opts(p):
    p.add_argument("--edge-semantics", dest="edge_semantics", choices=sorted(SEMANTICS_ALIASES))


def _vulnerability_opts(p):
    p.add_argument("--spreaders", help="ground-truth spreader ids, one per line")
    p.add_argument("--infected-only", dest="infected_only", action="store_true")


def _eval_opts(p):
    p.add_argument("--k", dest="ks", help="comma-separated cutoffs, e.g. 1,5,10,15")
    p.add_argument("--map-k", dest="map_k", type=int)
    p.add_argument("--map-variant", dest="map_variant", choices=MAP_VARIANTS)
    p.add_argument("--pdf", action="store_true", help="also write report.pdf")


def build_parser() -> argparse.ArgumentParser:
    common = _parent(_common_opts)
    inputs = _parent(_input_opts)
    trust_p = _parent(_trust_opts)
    community_p = _parent(_community_opts)
    role_p = _parent(_role_opts)
    vuln_p = _parent(_vulnerability_opts)
    eval_p = _parent(_eval_opts)

    parser = argparse.ArgumentParser(prog="community-health",
                                     description="Community health assessment of follower networks")
    sub = parser.add_subparsers(dest="command", required=True)

    parents_by_command = {
        "trust":         [common, inputs, trust_p],
        "communities":   [common, inputs, community_p],
        "roles":         [common, inputs, community_p, role_p],
        "vulnerability": [common, inputs, trust_p, community_p, role_p, vuln_p],
        "evaluate":      [common, inputs, trust_p, community_p, role_p, vuln_p, eval_p],
        "pipeline":      [common, inputs, trust_p, community_p, role_p, vuln_p, eval_p],
    }
    for command, parents in parents_by_command.items():
        p = sub.add_parser(command, parents=parents, argument_default=argparse.SUPPRESS)
        p.set_defaults(handler=_cmd_stages)

    synth = sub.add_parser("synth", help="synthetic networks and spreader sets")
    synth_sub = synth.add_subparsers(dest="synth_command", required=True)

    sbm = synth_sub.add_parser("sbm", parents=[common])
    sbm.add_argument("--blocks", required=True, help="comma-separated block sizes")
    sbm.add_argument("--p-in", dest="p_in", type=float, required=True)
    sbm.add_argument("--p-out", dest="p_out", type=float, default=0.0)
    sbm.add_argument("--seed", type=int, default=0)
    sbm.add_argument("--undirected", action="store_true")
    sbm.add_argument("--out", required=True, help="edge list to write")
    sbm.add_argument("--truth", dest="truth_out", help="planted assignment to write")
    sbm.set_defaults(handler=_cmd_sbm)

    plant = synth_sub.add_parser("plant", parents=[common, inputs, trust_p, role_p])
    plant.add_argument("--strategy", choices=STRATEGIES, required=True)
    plant.add_argument("--rate", type=float, required=True)
    plant.add_argument("--seed", type=int, default=0)
    plant.add_argument("--communities-file", dest="communities_file")
    plant.add_argument("--out", required=True, help="spreader file to write")
    plant.set_defaults(handler=_cmd_plant)

    summarize = sub.add_parser("summarize", parents=[common])
    summarize.add_argument("files", nargs="+", help="summary.csv files")
    summarize.add_argument("--out", required=True)
    summarize.set_defaults(handler=_cmd_summarize)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(args, "log_level", "INFO").upper(), format=LOG_FORMAT,
                        stream=sys.stderr, force=True)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
