"""Command-line surface: ingest, closure, train, similarity, partition,
predict, evaluate, pipeline, synth.

Exit codes: 0 success, 1 runtime failure, 2 input/config error.  Every run
writes deterministic artifacts; the pipeline command additionally writes a
MANIFEST of config echo, input digest, and per-artifact checksums, so
identical configs yield byte-identical output trees.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .embed import ConfigError
from .kg import (
    RELATED_TO,
    KnowledgeGraph,
    ParseError,
    entity_index_tsv,
    materialize_closure,
    parse_ntriples_file,
    serialize_ntriples,
)
from .predict import (
    DEFAULT_THRESHOLDS,
    PARTITIONERS,
    PipelineSettings,
    extended_graph,
    predictions_tsv,
    run_experiment,
    run_pipeline,
)
from .sim import density_tsv, kde, matrix_tsv
from .synth import synth_ntriples

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

_MODEL_SECTIONS = {"transe": "TransE", "transh": "TransH", "transr": "TransR", "transd": "TransD"}


def load_config(path: str) -> dict:
    """Flat "key = value" config with optional per-model sections."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[pipeline]\n" + text
    cp = configparser.ConfigParser()
    cp.read_string(text)
    cfg = {k: v for k, v in cp["pipeline"].items()} if cp.has_section("pipeline") else {}
    per_model = {}
    for sec in cp.sections():
        if sec.lower() in _MODEL_SECTIONS:
            per_model[_MODEL_SECTIONS[sec.lower()]] = dict(cp[sec])
    cfg["_per_model"] = per_model
    return cfg


def _get(cfg, key, cast, default):
    if key not in cfg or cfg[key] == "":
        return default
    if cast is bool:
        return cfg[key].strip().lower() in ("1", "true", "yes", "on")
    return cast(cfg[key])


def settings_from_config(cfg: dict, model: str | None = None) -> PipelineSettings:
    model = model or _get(cfg, "model", str, "TransE")
    if model not in DEFAULT_THRESHOLDS:
        raise ConfigError(f"unknown model {model!r}")
    overrides = cfg.get("_per_model", {}).get(model, {})
    merged = dict(cfg)
    merged.update(overrides)
    s = PipelineSettings(
        model=model,
        dim=_get(merged, "dim", int, 50),
        rel_dim=_get(merged, "rel_dim", int, 20),
        epochs=_get(merged, "epochs", int, 500),
        batch_size=_get(merged, "batch_size", int, 64),
        learning_rate=_get(merged, "learning_rate", float, 0.01),
        margin=_get(merged, "margin", float, None),
        score_norm=_get(merged, "score_norm", str, None),
        seed=_get(merged, "seed", int, 0),
        use_closure=_get(merged, "use_closure", bool, True),
        threshold_level=_get(merged, "threshold_level", float, None),
        absolute_cutoff=_get(merged, "absolute_cutoff", float, None),
        partitioner=_get(merged, "partitioner", str, "semep"),
        k=_get(merged, "k", int, None),
        balance_tol=_get(merged, "balance_tol", float, 0.1),
        folds=_get(merged, "folds", int, 5),
        split_closed=_get(merged, "split_closed", bool, False),
    )
    if s.partitioner not in PARTITIONERS:
        raise ConfigError(f"unknown partitioner {s.partitioner!r}")
    return s


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class ArtifactWriter:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.checksums: dict[str, str] = {}

    def write(self, name: str, text: str) -> None:
        data = text.encode("utf-8")
        (self.out_dir / name).write_bytes(data)
        self.checksums[name] = _sha256(data)


def _fmt(values) -> str:
    return "\t".join(format(float(v), ".17g") for v in values)


def embeddings_tsv(model, iris) -> str:
    lines = [f"{iris[i]}\t{_fmt(model.entities[i])}" for i in range(model.n_entities)]
    return "\n".join(lines) + "\n"


def relations_tsv(model) -> str:
    lines = []
    for i, label in enumerate(model.relation_labels):
        lines.append(f"{label}\t{_fmt(model.relations[i])}")
        if model.normals is not None:
            lines.append(f"{label}#normal\t{_fmt(model.normals[i])}")
        if model.proj_matrices is not None:
            lines.append(f"{label}#proj\t{_fmt(model.proj_matrices[i].ravel())}")
        if model.relation_proj is not None:
            lines.append(f"{label}#proj\t{_fmt(model.relation_proj[i])}")
    if model.entity_proj is not None:
        for i in range(model.n_entities):
            lines.append(f"entity:{i}#proj\t{_fmt(model.entity_proj[i])}")
    return "\n".join(lines) + "\n"


def loss_trace_tsv(model) -> str:
    lines = ["epoch\tmean_loss"]
    lines += [f"{i}\t{loss!r}" for i, loss in enumerate(model.loss_trace)]
    return "\n".join(lines) + "\n"


def partition_tsv(partition, iris) -> str:
    lines = ["community_id\tentity_iri"]
    for ci, comm in enumerate(partition.communities):
        for e in sorted(comm):
            lines.append(f"{ci}\t{iris[e]}")
    return "\n".join(lines) + "\n"


def _load_graph(path: str) -> KnowledgeGraph:
    return parse_ntriples_file(path)


def _pipeline_stages(g, settings: PipelineSettings, writer: ArtifactWriter, upto: str) -> None:
    """Run the pipeline through the named stage, writing each stage's artifacts."""
    writer.write("index.tsv", entity_index_tsv(g))
    closed = materialize_closure(g)
    writer.write("closed.nt", serialize_ntriples(closed))
    if upto == "closure":
        return

    result = run_pipeline(g, settings)
    iris = g.iris
    writer.write("embeddings.tsv", embeddings_tsv(result.model, iris))
    writer.write("relations.tsv", relations_tsv(result.model))
    writer.write("loss_trace.tsv", loss_trace_tsv(result.model))
    if upto == "train":
        return

    writer.write("similarity.tsv", matrix_tsv(result.matrix, iris))
    writer.write("similarity_thresholded.tsv", matrix_tsv(result.thresholded, iris))
    try:
        est = kde(result.matrix.offdiag_upper())
        writer.write("density.tsv", density_tsv(est))
    except ValueError:
        pass  # fewer than 2 standards or a degenerate distribution: no density plot
    if upto == "similarity":
        return

    writer.write("partition.tsv", partition_tsv(result.partition, iris))
    writer.write(
        "partition.json",
        json.dumps(
            {
                "algorithm": result.partition.algorithm,
                "parameters": result.partition.parameters,
                "n_communities": result.partition.k,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    writer.write("quality.json", result.quality.to_json() + "\n")
    if upto == "partition":
        return

    writer.write("predictions.tsv", predictions_tsv(result.predictions, iris))
    writer.write("extended.nt", serialize_ntriples(extended_graph(g, result.predictions)))


def _run_evaluate(g, cfg, settings, writer) -> None:
    models = [m.strip() for m in cfg.get("models", settings.model).split(",")]
    partitioners = [p.strip() for p in cfg.get("partitioners", settings.partitioner).split(",")]
    ideal_pairs = None
    if cfg.get("ideal"):
        ideal = _load_graph(cfg["ideal"])
        if ideal.iris != g.iris:
            raise ConfigError("ideal graph must share the input graph's entity set and order")
        ideal_pairs = materialize_closure(ideal).related_pairs()
    report = run_experiment(g, settings, models=models, partitioners=partitioners, ideal_pairs=ideal_pairs)
    writer.write("report.json", report.to_json() + "\n")
    writer.write("report.tsv", report.tsv())


def cmd_ingest(args) -> int:
    g = _load_graph(args.input)
    out = Path(args.output_dir or ".")
    writer = ArtifactWriter(out)
    writer.write("index.tsv", entity_index_tsv(g))
    n_std = len(g.standards())
    n_rel = len(g.related_pairs(standards_only=False))
    print(f"{g.n_entities} entities, {len(g.edges)} edges")
    print(f"{n_std} standards, {n_rel} relatedTo edges")
    return EXIT_OK


def cmd_closure(args) -> int:
    g = _load_graph(args.input)
    closed = materialize_closure(g)
    out = Path(args.output_dir or ".")
    writer = ArtifactWriter(out)
    writer.write("closed.nt", serialize_ntriples(closed))
    writer.write("index.tsv", entity_index_tsv(closed))
    base_pairs = len(g.related_pairs())
    directed = sum(1 for e in closed.edges if e.label == RELATED_TO)
    print(f"base relatedTo pairs: {base_pairs}")
    print(f"closed relatedTo instances: {directed} directed, {directed // 2} undirected")
    return EXIT_OK


def _config_command(args, upto: str) -> int:
    cfg = load_config(args.config)
    settings = settings_from_config(cfg)
    out_dir = Path(
        args.output_dir or os.environ.get("KGRELATE_OUTPUT_DIR") or cfg.get("output_dir", "out")
    )
    input_path = cfg.get("input")
    if not input_path:
        raise ConfigError("config must set 'input'")
    g = _load_graph(input_path)
    writer = ArtifactWriter(out_dir)

    if upto == "evaluate":
        _run_evaluate(g, cfg, settings, writer)
    elif upto == "pipeline":
        _pipeline_stages(g, settings, writer, upto="predict")
        _run_evaluate(g, cfg, settings, writer)
        manifest = {
            "version": __version__,
            "config": {k: v for k, v in cfg.items() if not k.startswith("_")},
            "per_model": cfg.get("_per_model", {}),
            "settings": asdict(settings),
            "input_sha256": _sha256(Path(input_path).read_bytes()),
            "artifacts": dict(sorted(writer.checksums.items())),
        }
        writer.write("MANIFEST.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    else:
        _pipeline_stages(g, settings, writer, upto=upto)
    print(f"wrote {len(writer.checksums)} artifacts to {out_dir}")
    return EXIT_OK


def cmd_synth(args) -> int:
    text = synth_ntriples(args.blocks, args.block_size, args.intra, args.inter, args.seed)
    Path(args.output).write_text(text, encoding="utf-8")
    print(f"wrote {args.output}")
    return EXIT_OK


def _add_config_cmd(sub, name: str, help_: str):
    p = sub.add_parser(name, help=help_)
    p.add_argument("config", help="path to a key = value config file")
    p.add_argument("--output-dir", default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgrelate")
    parser.add_argument("--threads", type=int, default=1, help="1 guarantees bitwise reproducibility")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an N-Triples file and report entity/edge counts")
    p.add_argument("input")
    p.add_argument("--output-dir", default=None)

    p = sub.add_parser("closure", help="materialize the symmetric-transitive relatedness closure")
    p.add_argument("input")
    p.add_argument("--output-dir", default=None)

    _add_config_cmd(sub, "train", "train embeddings, write vectors and loss trace")
    _add_config_cmd(sub, "similarity", "similarity matrix, density curve, thresholded matrix")
    _add_config_cmd(sub, "partition", "detect communities, report quality metrics")
    _add_config_cmd(sub, "predict", "homophily predictions and extended graph")
    _add_config_cmd(sub, "evaluate", "k-fold cross-validation sweep")
    _add_config_cmd(sub, "pipeline", "all stages plus evaluation and MANIFEST")

    p = sub.add_parser("synth", help="generate a planted-partition synthetic KG")
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--block-size", type=int, required=True)
    p.add_argument("--intra", type=float, default=1.0)
    p.add_argument("--inter", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "closure": cmd_closure,
    "synth": cmd_synth,
    "train": lambda a: _config_command(a, "train"),
    "similarity": lambda a: _config_command(a, "similarity"),
    "partition": lambda a: _config_command(a, "partition"),
    "predict": lambda a: _config_command(a, "predict"),
    "evaluate": lambda a: _config_command(a, "evaluate"),
    "pipeline": lambda a: _config_command(a, "pipeline"),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = int(os.environ.get("KGRELATE_THREADS", args.threads))
    if threads == 1:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, "1")
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ConfigError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
