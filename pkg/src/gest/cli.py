"""Command line entry point (``gest``).

Exit codes: 0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, kernels, serde, textmetrics
from .core import GraphError
from .embed import EmbeddingError, resolve_embeddings
from .harness import HarnessError
from .matching import MODES, AffinityConfig, GestScorer, MatchingError, brute_force_match, build_affinity
from .parser import (
    ParseError,
    parse_story,
    read_aliases,
    read_personal_objects,
    read_story_file,
    read_svo_jsonl,
    svos_to_gest,
)

EXIT_USAGE = 2
EXIT_DATA = 3

DATA_ERRORS = (ParseError, serde.GestSyntaxError, EmbeddingError, HarnessError, MatchingError, GraphError, OSError)

_CONFIG_FLOATS = {"w_action", "w_entities", "w_location", "w_timeframe", "tol", "margin"}
_CONFIG_INTS = {"max_iter", "seed", "embed_limit"}
_CONFIG_BOOLS = {"include_same_entity_edges"}
_CONFIG_STRS = {"mode", "embeddings"}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        try:
            if key in _CONFIG_FLOATS:
                out[key] = float(value)
            elif key in _CONFIG_INTS:
                out[key] = int(value)
            elif key in _CONFIG_BOOLS:
                out[key] = value.lower() in ("1", "true", "yes", "on")
            elif key in _CONFIG_STRS:
                out[key] = value
            else:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}") from None
    return out


def _settings(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    for key in ("embeddings", "embed_limit", "seed", "margin", "mode"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg.setdefault("seed", 0)
    cfg.setdefault("margin", 1.0)
    cfg.setdefault("mode", "sequential")
    if cfg["mode"] not in MODES:
        raise UsageError(f"unknown matching mode {cfg['mode']!r}")
    return cfg


def _affinity(cfg) -> AffinityConfig:
    keys = ("w_action", "w_entities", "w_location", "w_timeframe", "include_same_entity_edges")
    return AffinityConfig(**{k: cfg[k] for k in keys if k in cfg})


def _scorer(cfg) -> GestScorer:
    emb = resolve_embeddings(cfg.get("embeddings"), cfg.get("embed_limit"))
    return GestScorer(emb, _affinity(cfg), cfg.get("tol", 1e-8), cfg.get("max_iter", 1000), cfg["mode"])


def _read_graph(path):
    text = Path(path).read_text(encoding="utf-8")
    fmt = serde.V2 if str(path).endswith(".gest2") else serde.sniff_format(text)
    return serde.from_text(text, fmt)


def _out_format(args):
    if args.format:
        return args.format
    return serde.format_for_path(args.output) if args.output else serde.V1


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_parse(args, cfg):
    fmt = _out_format(args)
    if args.svo or str(args.input).endswith(".jsonl"):
        svos = read_svo_jsonl(args.input)
        g = svos_to_gest(svos, same_time_margin=cfg["margin"], all_pairs=args.all_pairs)
        print(f"same_time margin: {cfg['margin']:g} s", file=sys.stderr)
        _emit(serde.serialize(g, fmt).text, args.output)
        return 0
    stories = read_story_file(args.input)
    aliases = read_aliases(args.aliases) if args.aliases else {}
    objects = read_personal_objects(args.personal_objects) if args.personal_objects else None
    kw = {"location_nodes": args.location_nodes, "same_entity_edges": args.same_entity_edges}
    if objects is not None:
        kw["personal_objects"] = objects
    if args.story is not None:
        if not 0 <= args.story < len(stories):
            raise UsageError(f"story index {args.story} out of range (file has {len(stories)})")
        stories = [stories[args.story]]
    graphs = [parse_story(s, aliases.get(s.id, aliases.get("", [])), **kw) for s in stories]
    if len(graphs) == 1:
        _emit(serde.serialize(graphs[0], fmt).text, args.output)
        return 0
    if not args.output:
        raise UsageError("the file holds several stories; pass --story K or an output directory with -o")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    ext = ".gest" if fmt == serde.V1 else ".gest2"
    for k, g in enumerate(graphs):
        (out / f"story{k:04d}{ext}").write_text(serde.serialize(g, fmt).text, encoding="utf-8")
    return 0


def cmd_serialize(args, cfg):
    g = _read_graph(args.input)
    _emit(serde.serialize(g, _out_format(args)).text, args.output)
    return 0


def cmd_match(args, cfg):
    g1, g2 = _read_graph(args.a), _read_graph(args.b)
    scorer = _scorer(cfg)
    m = scorer.compare(g1, g2)
    out = {
        "f": round(m.raw_score, 6),
        "f_hat": round(m.normalized_score, 6),
        "assignment": [list(p) for p in m.node_pairs],
        "mode": cfg["mode"],
    }
    if args.brute_force:
        bf = brute_force_match(build_affinity(g1, g2, scorer.emb, scorer.cfg))
        out["brute_force_f"] = round(bf.raw_score, 6)
    if args.json:
        print(json.dumps(out))
    else:
        print(f"f     {m.raw_score:.6f}")
        print(f"f_hat {m.normalized_score:.6f}")
        if "brute_force_f" in out:
            print(f"brute {out['brute_force_f']:.6f}")
        print("assignment " + " ".join(f"n{a}->n{b}" for a, b in m.node_pairs))
    return 0


def cmd_metrics(args, cfg):
    a = Path(args.a).read_text(encoding="utf-8")
    b = Path(args.b).read_text(encoding="utf-8")
    out = {
        "bleu4": textmetrics.bleu(a, b),
        "bleu4_sym": textmetrics.bleu4_sym(a, b),
        "rouge_l": textmetrics.rouge_l(a, b),
        "rouge_l_sym": textmetrics.rouge_l_sym(a, b),
    }
    if args.json:
        print(json.dumps({k: round(v, 6) for k, v in out.items()}))
    else:
        for k, v in out.items():
            print(f"{k:<12}{v:.6f}")
    return 0


def cmd_eval(args, cfg):
    corpus = harness.read_corpus(args.corpus)
    pairs = harness.build_pairs(corpus, args.negatives, cfg["seed"], args.positives)
    metrics = [m for m in args.metrics.split(",") if m]
    scores = {}
    if metrics:
        scorer_emb = _scorer(cfg).emb if "gest" in metrics else None
        scores = harness.score_pairs(pairs, metrics, scorer_emb, _affinity(cfg))
    if args.external:
        ext = harness.read_external_scores(args.external)
        scores.update({name: s for name, s in ext.items() if all(p.id in s for p in pairs)})
    if not scores:
        raise UsageError("no metrics to evaluate")
    report = harness.evaluate(pairs, scores, args.split, cfg["seed"], args.threshold)
    report.notes = {"mode": cfg["mode"], "margin": cfg["margin"], "backend": kernels.BACKEND}
    out = Path(args.out or args.corpus)
    report.write(out)
    if args.scores:
        with open(args.scores, "w", encoding="utf-8") as fh:
            for name in sorted(scores):
                for pid in sorted(scores[name]):
                    fh.write(f"{pid}\t{name}\t{scores[name][pid]:.6f}\n")
    if args.labels:
        Path(args.labels).write_text("".join(f"{p.id}\t{p.label}\n" for p in pairs), encoding="utf-8")
    print(report.to_json())
    return 0


def _read_labels(path):
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1].strip() not in ("0", "1"):
            raise HarnessError(f"{path}:{lineno}: expected 'pair<TAB>0|1'")
        out[parts[0]] = int(parts[1])
    return out


def _read_scores(path, metric=None):
    """One metric out of a sidecar file; ``pair<TAB>score`` lines are accepted too."""
    lines = [l for l in Path(path).read_text(encoding="utf-8").splitlines() if l.strip() and not l.startswith("#")]
    if lines and not lines[0].startswith("{") and lines[0].count("\t") == 1:
        out = {}
        for lineno, line in enumerate(lines, 1):
            pid, _, value = line.partition("\t")
            try:
                out[pid] = float(value)
            except ValueError:
                raise HarnessError(f"{path}: bad score {value!r}") from None
        return out
    by_metric = harness.read_external_scores(path)
    if metric is None:
        if len(by_metric) != 1:
            raise UsageError(f"{path} holds metrics {sorted(by_metric)}; pick one with --metric1/--metric2")
        return next(iter(by_metric.values()))
    if metric not in by_metric:
        raise HarnessError(f"{path} has no metric {metric!r}")
    return by_metric[metric]


def cmd_fuse(args, cfg):
    s1 = _read_scores(args.scores1, args.metric1)
    s2 = _read_scores(args.scores2, args.metric2)
    labels = _read_labels(args.labels)
    missing = [p for p in labels if p not in s1 or p not in s2]
    if missing:
        raise HarnessError(f"pair {missing[0]} lacks a score")
    dummy = harness.CorpusItem("", "")
    pairs = [harness.PairRecord(pid, dummy, dummy, lab) for pid, lab in sorted(labels.items())]
    model, report = harness.fuse_and_evaluate(pairs, s1, s2, args.split, cfg["seed"])
    out = {"model": json.loads(model.to_json()), "report": json.loads(report.to_json())}
    _emit(json.dumps(out, indent=2) + "\n", args.output)
    return 0


def cmd_synth(args, cfg):
    corpus = harness.generate_synthetic_corpus(args.groups, args.variants, cfg["seed"])
    harness.write_corpus(corpus, args.out, graphs=not args.no_graphs)
    print(f"wrote {len(corpus)} items in {args.groups} groups to {args.out}")
    return 0


# --------------------------------------------------------------------------


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--embeddings", default=d, help="word-per-line embeddings file (default: bundled toy table)")
    p.add_argument("--embed-limit", type=int, default=d, dest="embed_limit", help="read at most this many rows")
    p.add_argument("--config", default=d, help="key=value settings file")
    p.add_argument("--seed", type=int, default=d)
    p.add_argument("--margin", type=float, default=d, help="same_time margin in seconds for SVO input")
    p.add_argument("--mode", choices=MODES, default=d, help="spectral matching variant")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gest", description="Build, serialize and compare GEST graphs.")
    _global_flags(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("parse", parents=[common], help="story or SVO file -> graph")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--format", choices=(serde.V1, serde.V2), help="default: from the -o extension, else v1")
    s.add_argument("--svo", action="store_true", help="input is SVO JSON lines")
    s.add_argument("--all-pairs", action="store_true", help="SVO: also link overlapping non-consecutive events")
    s.add_argument("--story", type=int, help="index of the story in a bAbI file")
    s.add_argument("--aliases")
    s.add_argument("--personal-objects")
    s.add_argument("--location-nodes", action="store_true")
    s.add_argument("--same-entity-edges", action="store_true")
    s.set_defaults(fn=cmd_parse)

    s = sub.add_parser("serialize", parents=[common], help="convert between v1 and v2")
    s.add_argument("input")
    s.add_argument("--format", choices=(serde.V1, serde.V2), help="default: from the -o extension, else v1")
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_serialize)

    s = sub.add_parser("match", parents=[common], help="GEST similarity of two graph files")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--brute-force", action="store_true", help="also report the exhaustive optimum")
    s.add_argument("--json", action="store_true")
    s.set_defaults(fn=cmd_match)

    s = sub.add_parser("metrics", parents=[common], help="BLEU@4 and ROUGE-L of two text files")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--json", action="store_true")
    s.set_defaults(fn=cmd_metrics)

    s = sub.add_parser("eval", parents=[common], help="pair evaluation over a corpus directory")
    s.add_argument("corpus")
    s.add_argument("--negatives", type=int, default=174)
    s.add_argument("--positives", type=int, help="subsample this many positive pairs")
    s.add_argument("--metrics", default="gest,bleu4,rouge_l", help="comma separated (gest, bleu4, rouge_l)")
    s.add_argument("--external", help="sidecar file with externally computed scores")
    s.add_argument("--split", type=float, default=0.5, help="training fraction for threshold calibration")
    s.add_argument("--threshold", type=float, help="fixed threshold instead of calibration")
    s.add_argument("--out", help="directory for report.json and report.csv (default: the corpus)")
    s.add_argument("--scores", help="also write per-pair scores here (pair, metric, score)")
    s.add_argument("--labels", help="also write pair labels here")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("fuse", parents=[common], help="fit a linear fusion of two score files")
    s.add_argument("scores1")
    s.add_argument("scores2")
    s.add_argument("labels", help="pair<TAB>0|1 lines")
    s.add_argument("--metric1", help="metric to take from the first file")
    s.add_argument("--metric2", help="metric to take from the second file")
    s.add_argument("--split", type=float, default=0.5)
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_fuse)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic paraphrase corpus")
    s.add_argument("out")
    s.add_argument("--groups", type=int, default=30)
    s.add_argument("--variants", type=int, default=3)
    s.add_argument("--no-graphs", action="store_true", help="skip the .gest files")
    s.set_defaults(fn=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _settings(args)
        return args.fn(args, cfg)
    except UsageError as exc:
        print(f"gest {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"gest {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
