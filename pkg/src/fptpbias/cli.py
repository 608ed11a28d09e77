"""Command-line entry point: ``fptpbias <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .election import DataError, atomic_write, dataset_summary, parse_dataset, serialize_dataset

BUNDLE_VERSION = 1


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


class Outputs:
    """Collects files in memory and writes them only once the command succeeded."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: dict[str, str | bytes] = {}

    def add(self, name: str, data: str | bytes):
        self.files[name] = data

    def commit(self, command: str, cfg: RunConfig):
        run = {"command": command, "seed": cfg.seed, "workers": cfg.workers,
               "config": cfg.to_dict(), "outputs": sorted(os.path.basename(n) for n in self.files)}
        self.files[f"{command}_run.json"] = _json(run)
        for name, data in sorted(self.files.items()):
            atomic_write(os.path.join(self.out_dir, name), data)


# -- subcommands --------------------------------------------------------------

def cmd_ingest(args, cfg: RunConfig, out: Outputs):
    elections = parse_dataset(args.input, tie_policy=cfg.tie_policy)
    if not elections:
        raise DataError("no contested districts in input")
    out.add("dataset.csv", serialize_dataset(elections))
    out.add("ingest_summary.json", _json(dataset_summary(elections)))


def _load_bundle(path):
    from .scoring import SeatsVotesModel
    from .thresholds import ThresholdModel

    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("version") != BUNDLE_VERSION:
        raise DataError(f"{path}: unsupported model bundle version {d.get('version')}")
    return ThresholdModel.from_dict(d["thresholds"]), SeatsVotesModel.from_dict(d["seats_votes"])


def cmd_train(args, cfg: RunConfig, out: Outputs):
    from .scoring import SeatsVotesModel, party_rows, score_dataset
    from .thresholds import train_threshold_model

    elections = parse_dataset(args.dataset, tie_policy=cfg.tie_policy)
    tc = cfg.thresholds
    thresholds = train_threshold_model(elections, c_grid=tc.c_grid, spline_folds=tc.spline_folds,
                                       seed=cfg.seed, min_group=tc.min_group, grid_size=tc.grid_size,
                                       max_interior=tc.max_interior, holdout=tc.holdout)
    k0 = args.cutoff if args.cutoff is not None else cfg.scoring.k0
    sv = SeatsVotesModel(party_rows(elections, thresholds), k0, cfg.scoring.bandwidth, cfg.seed,
                         cfg.scoring.tail)
    bundle = {"version": BUNDLE_VERSION, "seed": cfg.seed, "thresholds": thresholds.to_dict(),
              "seats_votes": sv.to_dict()}
    out.add("model.json", _json(bundle))
    if args.thresholds_out:
        out.add(os.path.abspath(args.thresholds_out), thresholds.to_json())
    ds = score_dataset(sv, thresholds, elections, cfg.scoring.alpha)
    out.add("train_summary.json", _json({"training": dataset_summary(elections), "k0": sv.k0,
                                         "strata": {str(k): v.spec.to_dict() for k, v in sv.models.items()},
                                         "self_score": ds.summary}))


def cmd_score(args, cfg: RunConfig, out: Outputs):
    from .scoring import election_scores_csv, party_scores_csv, score_dataset, summary_json

    thresholds, sv = _load_bundle(args.model)
    elections = parse_dataset(args.dataset, tie_policy=cfg.tie_policy)
    alpha = args.alpha if args.alpha is not None else cfg.scoring.alpha
    ds = score_dataset(sv, thresholds, elections, alpha)
    out.add("party_scores.csv", party_scores_csv(ds))
    out.add("election_scores.csv", election_scores_csv(ds))
    out.add("score_summary.json", summary_json(ds))


def cmd_diversity_study(args, cfg: RunConfig, out: Outputs):
    from .competition import run_diversity_study

    st = cfg.study
    n_min = args.n_min or st.n_min
    n_max = args.n_max or st.n_max
    samples = args.samples or st.samples
    results = run_diversity_study(range(n_min, n_max + 1), samples, cfg.seed, cfg.workers,
                                  st.alpha_shape, st.alpha_scale)
    for r in results:
        out.add(f"diversity_n{r.n:02d}.tsv", r.to_tsv())


def _plan_graph(cfg: RunConfig):
    from .plans.graph import graph_csvs, read_graph, synthetic_grid

    pc = cfg.plans
    if pc.nodes or pc.edges:
        if not (pc.nodes and pc.edges):
            raise ConfigError("plans.nodes and plans.edges must be given together")
        return read_graph(pc.nodes, pc.edges), None
    g = synthetic_grid(pc.rows, pc.cols, seed=cfg.seed)
    return g, graph_csvs(g)


def cmd_genplans(args, cfg: RunConfig, out: Outputs):
    from .plans.graph import evaluate_plan, plans_csv
    from .plans.mcmc import ChainParams, sample_fair_plans
    from .plans.optimize import optimize_unfair_plan

    pc = cfg.plans
    g, csvs = _plan_graph(cfg)
    if csvs:
        out.add("precincts_nodes.csv", csvs[0])
        out.add("precincts_edges.csv", csvs[1])
    chain = ChainParams(**{**vars(pc.chain), "delta": pc.delta})
    records = []
    if args.mode == "fair":
        batch = sample_fair_plans(g, args.count, pc.districts, chain, seed=cfg.seed)
        named = [(f"fair{i:03d}", p) for i, p in enumerate(batch.plans)]
        meta = {"mode": "fair", **batch.meta}
    else:
        party = args.party or pc.party
        if party not in g.parties:
            raise ConfigError(f"unknown party {party!r}; graph has {', '.join(g.parties)}")
        margins = args.margins if args.margins else [pc.margin]
        # a short fair batch seeds the local search so results dominate fair plans
        fair = sample_fair_plans(g, 16, pc.districts, chain, seed=cfg.seed)
        starts = sorted(fair.plans, key=lambda p: -evaluate_plan(g, p).seats[party])[:1]
        named = []
        for m in margins:
            res = optimize_unfair_plan(g, party, pc.districts, pc.delta, margin=m, mode=pc.optimizer,
                                       seed=cfg.seed, coarse_target=pc.coarse_target, starts=starts)
            named.append((f"unfair-{party}-{m:.3f}", res.plan))
            records.append(res.meta)
        meta = {"mode": "unfair", "party": party, "margins": list(margins), "optimizer": records}
    seats = {pid: evaluate_plan(g, p).seats for pid, p in named}
    out.add("plans.csv", plans_csv(g, named))
    out.add("plans.json", _json({"seed": cfg.seed, "districts": pc.districts, "meta": meta, "seats": seats}))


def cmd_experiment(args, cfg: RunConfig, out: Outputs):
    from .plans.experiment import run_experiment

    rep = run_experiment(cfg.experiment, seed=cfg.seed)
    out.add("experiment.json", _json(rep.to_dict()))
    lines = ["plan_id\tlabel\tparty\tmargin\tpi\tflagged"]
    for r in rep.records:
        m = "" if r.margin is None else f"{r.margin:.2f}"
        lines.append(f"{r.plan_id}\t{r.label}\t{r.party or ''}\t{m}\t{r.pi:.6g}\t{int(r.flagged)}")
    out.add("experiment_plans.tsv", "\n".join(lines) + "\n")


def cmd_report(args, cfg: RunConfig, out: Outputs):
    from .report import seat_share_surfaces, seats_votes_curves
    from .scoring import party_rows

    thresholds, sv = _load_bundle(args.model)
    rc = cfg.report
    curves = seats_votes_curves(sv, rc.v_points, rc.t_quantiles)
    rows = sv.rows
    if args.dataset:
        rows = party_rows(parse_dataset(args.dataset, tie_policy=cfg.tie_policy), thresholds)
    surf = seat_share_surfaces(sv, rows, rc.bins)
    out.add("seats_votes_curves.tsv", curves.to_tsv())
    out.add("seat_share_surfaces.tsv", surf.to_tsv())
    if rc.figures:
        from .plotting import curves_png, surfaces_png

        out.add("seats_votes_curves.png", curves_png(curves))
        out.add("seat_share_surfaces.png", surfaces_png(surf))


COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "score": cmd_score,
    "diversity-study": cmd_diversity_study,
    "genplans": cmd_genplans,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def _margins(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad margin list {text!r}") from None
    if any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("margins must be non-negative")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="overrides the configured seed")
    common.add_argument("--workers", type=int, help="worker processes (outputs do not depend on it)")
    common.add_argument("--out", default=".", help="output directory (default: current)")

    p = argparse.ArgumentParser(prog="fptpbias", parents=[common],
                                description="Electoral-bias scoring for first-past-the-post elections.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="validate a candidate CSV")
    s.add_argument("input")

    s = sub.add_parser("train", parents=[common], help="train threshold and seats-votes models")
    s.add_argument("dataset")
    s.add_argument("--thresholds-out", help="also write the threshold model JSON here")
    s.add_argument("--cutoff", type=int, help="district-count pooling cutoff k0")

    s = sub.add_parser("score", parents=[common], help="score elections with a trained bundle")
    s.add_argument("dataset")
    s.add_argument("--model", required=True)
    s.add_argument("--alpha", type=float)

    s = sub.add_parser("diversity-study", parents=[common], help="Spearman tables of diversity measures")
    s.add_argument("--n-min", type=int)
    s.add_argument("--n-max", type=int)
    s.add_argument("--samples", type=int)

    s = sub.add_parser("genplans", parents=[common], help="generate fair or optimized districting plans")
    s.add_argument("--mode", choices=("fair", "unfair"), default="fair")
    s.add_argument("--count", type=int, default=8, help="number of fair plans")
    s.add_argument("--party", help="party to favour (unfair mode)")
    s.add_argument("--margins", type=_margins, help="comma-separated margins (unfair mode)")

    sub.add_parser("experiment", parents=[common], help="fair-versus-optimized detection experiment")

    s = sub.add_parser("report", parents=[common], help="plot-ready seats-votes tables and figures")
    s.add_argument("--model", required=True)
    s.add_argument("--dataset", help="parties to tabulate (default: the training parties)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg.workers = args.workers
        out = Outputs(args.out)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](args, cfg, out)
        out.commit(args.command.replace("-", "_"), cfg)
    except (DataError, ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"fptpbias {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
