"""Command-line driver for the full pipeline and its individual stages.

Every subcommand takes ``--config`` (key = value file) and ``--out`` (working
directory). Stage commands read their inputs from the working directory, so
``fuse``, ``factorize``, ``assign`` and ``eval`` run in sequence reproduce
``run`` exactly.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cluster, fusion, harness, metrics, nmf, plotting, visualwords
from .errors import ConfigError, DataError, FuseClusterError, NumericalError
from .seeding import stage_seed
from .textcorpus import (
    TextDocument,
    Vocabulary,
    align_captions,
    build_vocabulary,
    check_unique_ids,
    count_features,
    load_stopwords,
    tokenize,
)

log = logging.getLogger("fusecluster")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

PATH_KEYS = ("manifest", "captions_dir", "woc_dir", "descriptors", "histograms", "stopwords")

# artifact names inside the working directory
VOCAB = "vocabulary.txt"
CODEBOOK = "codebook.csv"
HISTOGRAMS = "histograms.csv"
FUSED_HEADER = "fused_header.json"
FUSED_TRIPLETS = "fused_triplets.csv"
IDF = "idf.csv"
ASSIGNMENTS = "assignments.csv"
METRICS = "metrics.json"


def _bool(name, raw):
    v = str(raw).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name} must be a boolean, got {raw!r}")


@dataclass
class PipelineConfig:
    manifest: Path | None = None
    captions_dir: Path | None = None
    woc_dir: Path | None = None
    descriptors: Path | None = None
    histograms: Path | None = None
    stopwords: Path | None = None
    K: int | None = None
    k_star: int = 3
    seed: int = 0
    max_iter: int = 500
    rel_tol: float = 1e-5
    idf_doc_count_mode: str = "all_rows"
    readout: str = "argmax"
    variant: str = "M"
    stopwords_enabled: bool = False
    eval_include_woc: bool = False
    codebook_max_iter: int = 300
    codebook_tol: float = 1e-6
    mc_trials: int = 10_000
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, values: dict, base: Path = Path(".")) -> "PipelineConfig":
        kinds = {f.name: f.type for f in dataclasses.fields(cls)}
        kw, extra = {}, {}
        for key, raw in values.items():
            if key not in kinds or key == "extra":
                extra[key] = raw
                continue
            try:
                if key in PATH_KEYS:
                    kw[key] = (base / raw).resolve() if raw.strip() else None
                elif key in ("stopwords_enabled", "eval_include_woc"):
                    kw[key] = _bool(key, raw)
                elif kinds[key] in ("int", "int | None"):
                    kw[key] = int(raw)
                elif kinds[key] == "float":
                    kw[key] = float(raw)
                else:
                    kw[key] = raw.strip()
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
        return cls(**kw, extra=extra)

    def validate(self, need_manifest=True):
        if need_manifest and self.manifest is None:
            raise ConfigError("config does not name a manifest")
        for key in PATH_KEYS:
            path = getattr(self, key)
            if path is not None and not path.exists():
                raise ConfigError(f"{key} path does not exist: {path}")
        if self.k_star < 1:
            raise ConfigError(f"k_star must be positive, got {self.k_star}")
        if self.K is not None and self.K < 1:
            raise ConfigError(f"K must be positive, got {self.K}")
        if self.max_iter < 1 or self.rel_tol < 0:
            raise ConfigError("max_iter must be positive and rel_tol non-negative")
        if self.idf_doc_count_mode not in fusion.IDF_MODES:
            raise ConfigError(f"idf_doc_count_mode must be one of {fusion.IDF_MODES}")
        if self.readout not in harness.READOUTS:
            raise ConfigError(f"readout must be one of {harness.READOUTS}")
        if self.variant not in harness.VARIANTS:
            raise ConfigError(f"variant must be one of {harness.VARIANTS}")
        if self.stopwords_enabled and self.stopwords is None:
            raise ConfigError("stopwords_enabled is set but no stopwords file is configured")
        if self.variant == "M" and self.woc_dir is None:
            raise ConfigError("variant M needs woc_dir")
        if self.mc_trials < 0:
            raise ConfigError("mc_trials must be non-negative")
        return self

    def echo(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "extra":
                continue
            out[f.name] = str(value) if isinstance(value, Path) else value
        return out


def load_config(args, need_manifest=True) -> PipelineConfig:
    values, base = {}, Path(".")
    if args.config:
        path = Path(args.config)
        values = harness.read_keyvalue(path)
        base = path.parent
    cfg = PipelineConfig.from_mapping(values, base)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    if getattr(args, "readout", None):
        cfg.readout = args.readout
    if getattr(args, "k_star", None) is not None:
        cfg.k_star = args.k_star
    return cfg.validate(need_manifest)


# -- ingestion ----------------------------------------------------------------

@dataclass
class ManifestRow:
    doc_id: str
    path: Path | None
    label: str | None
    caption: Path | None


def read_manifest(cfg: PipelineConfig) -> list[ManifestRow]:
    path = cfg.manifest
    base = path.parent
    cap_base = cfg.captions_dir or base
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "doc_id" not in reader.fieldnames:
            raise DataError(f"{path}: manifest needs a doc_id column")
        rows = []
        for r in reader:
            doc_id = (r.get("doc_id") or "").strip()
            if not doc_id:
                raise DataError(f"{path}: row {reader.line_num} has no doc_id")
            p = (r.get("path") or "").strip()
            cap = (r.get("caption") or "").strip()
            label = (r.get("label") or "").strip() or None
            rows.append(ManifestRow(doc_id, base / p if p else None, label, cap_base / cap if cap else None))
    ids = [r.doc_id for r in rows]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate doc_id in manifest")
    return rows


def _stop(cfg):
    return load_stopwords(cfg.stopwords) if cfg.stopwords_enabled else frozenset()


def _read_text(path, doc_id, stop):
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read text document {path}: {exc.strerror}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not valid UTF-8") from exc
    return tokenize(raw, stop, doc_id)


def read_captions(cfg, rows) -> list[TextDocument]:
    stop = _stop(cfg)
    return [_read_text(r.caption, r.doc_id, stop) for r in rows if r.caption is not None]


def read_woc(cfg) -> list[TextDocument]:
    if cfg.woc_dir is None:
        return []
    stop = _stop(cfg)
    docs = [_read_text(p, p.stem, stop) for p in sorted(Path(cfg.woc_dir).glob("*.txt"))]
    if not docs:
        raise DataError(f"no .txt articles in {cfg.woc_dir}")
    return docs


def read_images(cfg, rows) -> list[visualwords.DescriptorSet]:
    if cfg.descriptors is not None:
        if cfg.descriptors.is_dir():
            images = [visualwords.read_descriptor_csv(cfg.descriptors / f"{r.doc_id}.csv", r.doc_id) for r in rows]
        else:
            by_id = {d.doc_id: d for d in visualwords.read_descriptor_binary(cfg.descriptors)}
            missing = [r.doc_id for r in rows if r.doc_id not in by_id]
            if missing:
                raise DataError(f"no descriptors for {missing[:5]}")
            images = [by_id[r.doc_id] for r in rows]
    else:
        if any(r.path is None for r in rows):
            raise ConfigError("manifest rows lack descriptor paths and no histograms or descriptors are configured")
        images = [visualwords.read_descriptor_csv(r.path, r.doc_id) for r in rows]
    return images


# -- stages -------------------------------------------------------------------

def stage_vocab(cfg, rows, out: Path) -> Vocabulary:
    woc = read_woc(cfg) if cfg.variant == "M" else []
    captions = read_captions(cfg, rows) if cfg.variant != "A" else []
    vocab = build_vocabulary(woc, captions)
    (out / VOCAB).write_text("".join(f"{t}\n" for t in vocab.features), encoding="utf-8")
    log.info("vocabulary: %d features", len(vocab))
    return vocab


def stage_codebook(cfg, rows, out: Path) -> visualwords.Codebook:
    if cfg.K is None:
        raise ConfigError("codebook training needs K")
    images = read_images(cfg, rows)
    pooled = visualwords.pool_descriptors(images)
    book = visualwords.train_codebook(pooled, cfg.K, stage_seed(cfg.seed, "codebook"),
                                      cfg.codebook_max_iter, cfg.codebook_tol)
    visualwords.write_codebook(out / CODEBOOK, book)
    log.info("codebook: K=%d from %d descriptors", book.K, len(pooled))
    return book


def stage_quantize(cfg, rows, out: Path, book=None):
    if book is None:
        book = visualwords.read_codebook(_need(out / CODEBOOK, "codebook"))
    A = visualwords.quantize(read_images(cfg, rows), book)
    visualwords.write_histograms(out / HISTOGRAMS, A)
    return A


def _histograms(cfg, rows, out: Path, allow_train=True):
    if cfg.histograms is not None:
        A = visualwords.read_histograms(cfg.histograms)
    elif (out / HISTOGRAMS).exists() and not allow_train:
        A = visualwords.read_histograms(out / HISTOGRAMS)
    else:
        book = stage_codebook(cfg, rows, out)
        A = stage_quantize(cfg, rows, out, book)
    ids = [r.doc_id for r in rows]
    if set(A.row_ids) != set(ids):
        raise DataError("histogram rows do not match the manifest documents")
    if list(A.row_ids) != ids:
        order = {d: i for i, d in enumerate(A.row_ids)}
        A = type(A)(A.data[[order[d] for d in ids]], tuple(ids))
    return A


def stage_fuse(cfg, rows, out: Path, allow_train=True) -> fusion.FusedMatrix:
    A = _histograms(cfg, rows, out, allow_train)
    if cfg.variant == "A":
        M = fusion.assemble_fused(A)
    else:
        vocab = stage_vocab(cfg, rows, out)
        captions = read_captions(cfg, rows)
        check_unique_ids(captions)
        B = align_captions(count_features(captions, vocab), A.row_ids)
        C = count_features(read_woc(cfg), vocab) if cfg.variant == "M" else None
        raw = fusion.assemble_fused(A, B, C, vocab.features)
        weights = fusion.compute_idf(raw, cfg.idf_doc_count_mode)
        np.savetxt(out / IDF, weights.weights, fmt="%.17g")
        M = fusion.apply_idf(raw, weights)
    fusion.write_fused(out / FUSED_HEADER, out / FUSED_TRIPLETS, M)
    log.info("fused matrix %dx%d (n=%d m=%d k=%d p=%d q=%d)", *M.shape, M.n, M.m, M.k, M.p, M.q)
    return M


def _need(path: Path, what):
    if not path.exists():
        raise DataError(f"missing {what} artifact {path}; run the earlier stage first")
    return path


def _read_fused(out: Path):
    return fusion.read_fused(_need(out / FUSED_HEADER, "fused matrix"), _need(out / FUSED_TRIPLETS, "fused matrix"))


def stage_factorize(cfg, out: Path, M=None) -> nmf.FactorPair:
    M = _read_fused(out) if M is None else M
    factors = nmf.nmf_factorize(M, cfg.k_star, seed=stage_seed(cfg.seed, "nmf"),
                                max_iter=cfg.max_iter, rel_tol=cfg.rel_tol)
    nmf.write_factors(out, factors)
    log.info("nmf: %d iterations, cost %.6g, converged=%s", factors.iterations, factors.final_cost, factors.converged)
    return factors


def stage_assign(cfg, out: Path, M=None, factors=None) -> cluster.Clustering:
    M = _read_fused(out) if M is None else M
    factors = nmf.read_factors(out) if factors is None else factors
    if factors.U.shape[0] != M.shape[0]:
        raise DataError("factor rows do not match the fused matrix")
    rows = np.arange(M.n + (M.k if cfg.eval_include_woc else 0))
    if cfg.readout == "argmax":
        clustering = cluster.assign_argmax(factors.U, rows, M.row_ids)
    else:
        clustering = cluster.assign_kmeans(factors.U, rows, factors.k_star,
                                           stage_seed(cfg.seed, "readout"), M.row_ids)
    cluster.write_assignments(out / ASSIGNMENTS, clustering)
    return clustering


def ground_truth(cfg, rows) -> cluster.GroundTruth:
    labels = {r.doc_id: r.label for r in rows}
    missing = [d for d, lab in labels.items() if lab is None]
    if missing:
        raise DataError(f"manifest rows without a class label: {missing[:5]}")
    if cfg.eval_include_woc and cfg.woc_dir is not None and cfg.variant == "M":
        # an article counts as a member of the class it is named after
        known = set(labels.values())
        for p in sorted(Path(cfg.woc_dir).glob("*.txt")):
            if p.stem not in known:
                raise DataError(f"article {p.name} does not name a class label")
            labels[p.stem] = p.stem
    return cluster.GroundTruth.from_labels(labels)


def stage_eval(cfg, rows, out: Path, clustering=None, factors=None) -> dict:
    clustering = cluster.read_assignments(_need(out / ASSIGNMENTS, "assignments")) if clustering is None else clustering
    factors = nmf.read_factors(out) if factors is None else factors
    truth = ground_truth(cfg, rows)
    report = metrics.metrics_report(truth, clustering, cfg.mc_trials, stage_seed(cfg.seed, "mc"))
    report["nmf"] = factors.report()
    report["num_documents"] = len(clustering.doc_ids)
    report["config"] = cfg.echo()
    write_json(out / METRICS, report)
    log.info("purity %.4f  z-Rand %s", report["purity"], report["zrand"])
    return report


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# -- subcommands ----------------------------------------------------------------

def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = load_config(args)
    out = _out(args)
    rows = read_manifest(cfg)
    M = stage_fuse(cfg, rows, out)
    factors = stage_factorize(cfg, out, M)
    clustering = stage_assign(cfg, out, M, factors)
    stage_eval(cfg, rows, out, clustering, factors)
    if not args.no_figures:
        plotting.plot_fused(M, out / "fused.png")
        plotting.plot_cost_trace(factors, out / "cost_trace.png")
    return EXIT_OK


def cmd_vocab(args):
    cfg = load_config(args)
    stage_vocab(cfg, read_manifest(cfg), _out(args))
    return EXIT_OK


def cmd_codebook(args):
    cfg = load_config(args)
    stage_codebook(cfg, read_manifest(cfg), _out(args))
    return EXIT_OK


def cmd_quantize(args):
    cfg = load_config(args)
    stage_quantize(cfg, read_manifest(cfg), _out(args))
    return EXIT_OK


def cmd_fuse(args):
    cfg = load_config(args)
    stage_fuse(cfg, read_manifest(cfg), _out(args), allow_train=False)
    return EXIT_OK


def cmd_factorize(args):
    stage_factorize(load_config(args, need_manifest=False), _out(args))
    return EXIT_OK


def cmd_assign(args):
    stage_assign(load_config(args, need_manifest=False), _out(args))
    return EXIT_OK


def cmd_eval(args):
    cfg = load_config(args)
    stage_eval(cfg, read_manifest(cfg), _out(args))
    return EXIT_OK


def cmd_synth(args):
    """Write one synthetic corpus as files the other subcommands can read."""
    values = harness.read_keyvalue(args.config) if args.config else {}
    spec, rest = harness.spec_from_mapping(values)
    seed = args.seed if args.seed is not None else spec.seeds[0]
    dim = int(rest.get("descriptor_dim", 0))
    out = _out(args)
    write_synth(out, spec, seed, dim)
    log.info("synthetic corpus (seed %d) written to %s", seed, out)
    return EXIT_OK


def write_synth(out: Path, spec: harness.SynthSpec, seed: int, descriptor_dim: int = 0):
    data = harness.synth_generate(spec, seed, descriptor_dim)
    (out / "captions").mkdir(exist_ok=True)
    (out / "woc").mkdir(exist_ok=True)
    for c, doc in enumerate(data.woc):
        # articles are named after their class so they can join the evaluation
        (out / "woc" / f"class{c}.txt").write_text(" ".join(doc.tokens) + "\n", encoding="utf-8")
    captioned = set()
    for doc in data.captions:
        (out / "captions" / f"{doc.id}.txt").write_text(" ".join(doc.tokens) + "\n", encoding="utf-8")
        captioned.add(doc.id)
    if descriptor_dim:
        (out / "descriptors").mkdir(exist_ok=True)
        for d in data.descriptors:
            visualwords.write_descriptor_csv(out / "descriptors" / f"{d.doc_id}.csv", d)
    else:
        visualwords.write_histograms(out / HISTOGRAMS, data.histograms)
    with open(out / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["doc_id", "path", "label", "caption"])
        for doc_id in data.histograms.row_ids:
            w.writerow([doc_id, f"descriptors/{doc_id}.csv" if descriptor_dim else "",
                        data.labels[doc_id], f"{doc_id}.txt" if doc_id in captioned else ""])
    lines = [
        "manifest = manifest.csv",
        "captions_dir = captions",
        "woc_dir = woc",
        f"k_star = {spec.num_classes}",
        f"seed = {seed}",
    ]
    lines.append(f"K = {spec.visual_words}" if descriptor_dim else f"histograms = {HISTOGRAMS}")
    (out / "pipeline.cfg").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "synth.cfg").write_text(harness.spec_to_text(spec), encoding="utf-8")


def _split_list(raw):
    return [s for s in raw.replace(",", " ").split() if s]


def cmd_experiment(args):
    values = harness.read_keyvalue(args.config) if args.config else {}
    spec, rest = harness.spec_from_mapping(values)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seeds=(args.seed,))
    variants = [args.variant] if args.variant else _split_list(rest.pop("variants", "A AB M"))
    k_star = args.k_star if args.k_star is not None else int(rest.pop("k_star", spec.num_classes))
    readout = args.readout or rest.pop("readout", "argmax").strip()
    try:
        kw = dict(
            k_star=k_star, readout=readout,
            idf_mode=rest.pop("idf_doc_count_mode", "all_rows").strip(),
            max_iter=int(rest.pop("max_iter", 500)),
            rel_tol=float(rest.pop("rel_tol", 1e-5)),
        )
        sweep = [float(f) for f in _split_list(rest.pop("sweep_fractions", ""))]
    except ValueError as exc:
        raise ConfigError(f"bad experiment parameter: {exc}") from None
    if kw["idf_mode"] not in fusion.IDF_MODES:
        raise ConfigError(f"idf_doc_count_mode must be one of {fusion.IDF_MODES}")
    if _bool("stopwords_enabled", rest.pop("stopwords_enabled", "false")):
        kw["stopwords"] = harness.COMMON_WORDS
    out = _out(args)

    report = harness.run_experiment(spec, variants, **kw)
    write_json(out / "report.json", report.to_dict())
    write_runs_csv(out / "runs.csv", report.runs)
    for variant, agg in report.aggregate().items():
        log.info("%-3s purity %.4f +- %.4f  z-Rand %.2f +- %.2f", variant,
                 agg["purity_mean"], agg["purity_std"], agg["zrand_mean"] or 0, agg["zrand_std"] or 0)
    if not args.no_figures:
        plotting.plot_variants(report.aggregate(), out / "variants.png")

    if sweep:
        variant = "M" if "M" in variants else variants[-1]
        results = harness.labeled_fraction_sweep(spec, sweep, variant, **kw)
        rows, summary = [], []
        for f, rep in results.items():
            rows.extend(rep.runs)
            agg = rep.aggregate()[variant]
            summary.append({"labeled_fraction": f, **agg})
        write_json(out / "sweep.json", {"variant": variant, "summary": summary})
        write_runs_csv(out / "sweep_runs.csv", rows)
        if not args.no_figures:
            plotting.plot_sweep(sweep, [s["purity_mean"] for s in summary],
                                [s["purity_std"] for s in summary], out / "sweep.png")
    return EXIT_OK


def write_runs_csv(path, runs):
    if not runs:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(runs[0]))
        w.writeheader()
        for r in runs:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in r.items()})


COMMANDS = {
    "run": (cmd_run, "full pipeline: fuse, factorize, assign, evaluate"),
    "vocab": (cmd_vocab, "build the text vocabulary"),
    "codebook": (cmd_codebook, "train the visual-word codebook"),
    "quantize": (cmd_quantize, "quantize descriptors into histograms"),
    "fuse": (cmd_fuse, "assemble and IDF-weight the fused matrix"),
    "factorize": (cmd_factorize, "factor the fused matrix with NMF"),
    "assign": (cmd_assign, "read clusters off the document-topic factor"),
    "eval": (cmd_eval, "score assignments with purity and z-Rand"),
    "synth": (cmd_synth, "write a synthetic corpus"),
    "experiment": (cmd_experiment, "compare variants on synthetic corpora"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fusecluster", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", default="out", help="working/output directory")
        p.add_argument("--seed", type=int, help="root seed (overrides config)")
        p.add_argument("--variant", choices=harness.VARIANTS)
        p.add_argument("--readout", choices=harness.READOUTS)
        p.add_argument("--k-star", dest="k_star", type=int)
        p.add_argument("--no-figures", action="store_true", help="skip matplotlib output")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FuseClusterError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
