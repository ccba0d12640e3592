"""Synthetic corpora and the variant-comparison experiment driver.

The generator mimics a labelled image collection with sparse captions: each
class has a block of visual words, a reference article, and images whose
histograms are drawn from the class's visual distribution (with a tunable
chance of drawing from another class instead). Each image also has a
viewpoint, shared across classes, that concentrates some of its descriptors on
a few viewpoint-specific visual words; this is the confound that text helps
undo. A fraction of the images get short captions sampled from their class
article.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import cluster, fusion, metrics, nmf
from .errors import ConfigError
from .seeding import stage_seed
from .textcorpus import (
    CountMatrix,
    TextDocument,
    align_captions,
    build_vocabulary,
    count_features,
)
from .visualwords import DescriptorSet

VARIANTS = ("A", "AB", "M")
READOUTS = ("argmax", "kmeans")

# filler words shared by every class article
COMMON_WORDS = (
    "the", "a", "is", "of", "and", "to", "in", "it", "with", "as",
    "for", "on", "was", "by", "an", "are", "at", "from", "its", "be",
)


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 3
    images_per_class: int = 100
    visual_words: int = 60
    descriptors_per_image: int = 20
    vocab_per_class: int = 40
    woc_length: int = 400
    common_words: int = 10
    common_fraction: float = 0.3
    caption_len: int = 5
    labeled_fraction: float = 0.2
    visual_noise: float = 0.3
    visual_concentration: float = 0.0
    viewpoints: int = 3
    viewpoint_fraction: float = 0.15
    viewpoint_words: int = 2
    seeds: tuple[int, ...] = tuple(range(20))

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not 0.0 <= self.labeled_fraction <= 1.0:
            raise ConfigError(f"labeled_fraction={self.labeled_fraction} outside [0, 1]")
        if not 0.0 <= self.visual_noise <= 1.0:
            raise ConfigError(f"visual_noise={self.visual_noise} outside [0, 1]")
        if not 0.0 <= self.common_fraction <= 1.0:
            raise ConfigError(f"common_fraction={self.common_fraction} outside [0, 1]")
        if self.caption_len < 0 or self.descriptors_per_image < 0:
            raise ConfigError("caption_len and descriptors_per_image must be non-negative")
        if self.num_classes < 1 or self.images_per_class < 1:
            raise ConfigError("need at least one class and one image per class")
        if self.visual_words < self.num_classes:
            raise ConfigError("need at least one visual word per class")
        if self.vocab_per_class < 1 or self.woc_length < 1:
            raise ConfigError("vocab_per_class and woc_length must be positive")
        if not 0 <= self.common_words <= len(COMMON_WORDS):
            raise ConfigError(f"common_words must be in [0, {len(COMMON_WORDS)}]")
        if self.visual_concentration < 0:
            raise ConfigError("visual_concentration must be non-negative")
        if self.caption_len > self.woc_length:
            raise ConfigError("caption_len cannot exceed woc_length")


@dataclass
class SynthData:
    histograms: CountMatrix
    captions: list[TextDocument]
    woc: list[TextDocument]
    labels: dict[str, str]
    descriptors: list[DescriptorSet] | None = None

    @property
    def truth(self) -> cluster.GroundTruth:
        return cluster.GroundTruth.from_labels(self.labels)


def _class_blocks(p, k):
    edges = np.linspace(0, p, k + 1).round().astype(int)
    return [np.arange(edges[c], edges[c + 1]) for c in range(k)]


def synth_generate(spec: SynthSpec, seed: int, descriptor_dim: int = 0) -> SynthData:
    """Draw one synthetic corpus.

    With ``descriptor_dim > 0`` each visual-word hit is also emitted as a
    descriptor vector near that word's prototype, for exercising the codebook
    path; the histograms are unchanged.
    """
    rng = np.random.default_rng([int(seed), 0x5EED])
    k, p = spec.num_classes, spec.visual_words
    nv = spec.viewpoints
    class_p = p - nv * spec.viewpoint_words
    blocks = _class_blocks(class_p, k) + [
        class_p + spec.viewpoint_words * v + np.arange(spec.viewpoint_words) for v in range(nv)
    ]
    visual = np.zeros((k + nv, p))
    for c, block in enumerate(blocks):
        if c >= k:
            visual[c, block] = 1.0 / len(block)
        elif spec.visual_concentration > 0:
            visual[c, block] = rng.dirichlet(np.full(len(block), spec.visual_concentration))
        else:
            visual[c, block] = 1.0 / len(block)

    common = list(COMMON_WORDS[:spec.common_words])
    woc, pools = [], []
    for c in range(k):
        pool = [f"class{c}term{j}" for j in range(spec.vocab_per_class)]
        use_common = rng.random(spec.woc_length) < spec.common_fraction if common else np.zeros(spec.woc_length, bool)
        tokens = [
            common[rng.integers(len(common))] if uc else pool[rng.integers(len(pool))]
            for uc in use_common
        ]
        woc.append(TextDocument(f"woc{c}", tokens))
        pools.append(tokens)

    n = k * spec.images_per_class
    classes = np.repeat(np.arange(k), spec.images_per_class)
    ids = [f"img{i:05d}" for i in range(n)]
    hist = np.zeros((n, p), dtype=np.int64)
    word_draws = []
    for i, c in enumerate(classes):
        d = spec.descriptors_per_image
        wrong = rng.random(d) < spec.visual_noise if k > 1 else np.zeros(d, bool)
        source = np.full(d, c)
        if wrong.any():
            others = rng.integers(k - 1, size=int(wrong.sum()))
            source[wrong] = others + (others >= c)
        if nv:
            view = k + rng.integers(nv)
            source[rng.random(d) < spec.viewpoint_fraction] = view
        words = np.empty(d, dtype=np.int64)
        for s in np.unique(source):
            at = source == s
            words[at] = rng.choice(p, size=int(at.sum()), p=visual[s])
        hist[i] = np.bincount(words, minlength=p)
        word_draws.append(words)

    m = int(np.floor(n * spec.labeled_fraction))
    captioned = np.sort(rng.choice(n, size=m, replace=False)) if m else np.zeros(0, int)
    captions = []
    for i in captioned:
        article = pools[classes[i]]
        picks = rng.choice(len(article), size=spec.caption_len, replace=False)
        captions.append(TextDocument(ids[i], [article[j] for j in picks]))

    descriptors = None
    if descriptor_dim > 0:
        protos = rng.normal(0.0, 10.0, size=(p, descriptor_dim))
        descriptors = [
            DescriptorSet(ids[i], protos[w] + rng.normal(0.0, 0.5, size=(len(w), descriptor_dim)))
            for i, w in enumerate(word_draws)
        ]

    labels = {ids[i]: f"class{c}" for i, c in enumerate(classes)}
    return SynthData(CountMatrix.from_dense(hist, ids), captions, woc, labels, descriptors)


def strip_stopwords(docs: Sequence[TextDocument], stopwords) -> list[TextDocument]:
    stop = set(stopwords)
    return [TextDocument(d.id, [t for t in d.tokens if t not in stop]) for d in docs]


def build_variant(data: SynthData, variant: str, idf_mode: str = "all_rows") -> fusion.FusedMatrix:
    """Matrix for one comparison arm.

    ``A``: raw visual counts only. ``AB``: visual + caption columns, IDF
    weighted. ``M``: adds the reference-article rows, IDF weighted.
    """
    A = data.histograms
    if variant == "A":
        return fusion.assemble_fused(A)
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    woc = data.woc if variant == "M" else []
    vocab = build_vocabulary(woc, data.captions)
    B = align_captions(count_features(data.captions, vocab), A.row_ids)
    C = count_features(woc, vocab) if variant == "M" else None
    raw = fusion.assemble_fused(A, B, C, vocab.features)
    return fusion.apply_idf(raw, fusion.compute_idf(raw, idf_mode))


def factor_and_assign(M: fusion.FusedMatrix, k_star: int, seed: int, readout: str = "argmax",
                      max_iter: int = 500, rel_tol: float = 1e-5, include_woc: bool = False):
    factors = nmf.nmf_factorize(M, k_star, seed=stage_seed(seed, "nmf"), max_iter=max_iter, rel_tol=rel_tol)
    rows = np.arange(M.n + (M.k if include_woc else 0))
    if readout == "argmax":
        clustering = cluster.assign_argmax(factors.U, rows, M.row_ids)
    elif readout == "kmeans":
        clustering = cluster.assign_kmeans(factors.U, rows, k_star, stage_seed(seed, "readout"), M.row_ids)
    else:
        raise ConfigError(f"unknown readout {readout!r}")
    return factors, clustering


@dataclass
class ExperimentReport:
    runs: list[dict]
    config: dict = field(default_factory=dict)

    def aggregate(self) -> dict:
        out = {}
        for variant in dict.fromkeys(r["variant"] for r in self.runs):
            rows = [r for r in self.runs if r["variant"] == variant]
            agg = {"runs": len(rows)}
            for key in ("purity", "zrand"):
                vals = [r[key] for r in rows if r[key] is not None]
                agg[f"{key}_mean"] = statistics.fmean(vals) if vals else None
                agg[f"{key}_std"] = statistics.pstdev(vals) if len(vals) > 1 else 0.0
            out[variant] = agg
        return out

    def to_dict(self) -> dict:
        return {"config": self.config, "aggregate": self.aggregate(), "runs": self.runs}


def worker_count() -> int:
    raw = os.environ.get("FUSECLUSTER_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"FUSECLUSTER_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _one_run(spec, seed, variants, k_star, readout, idf_mode, max_iter, rel_tol, stopwords):
    data = synth_generate(spec, seed)
    if stopwords:
        data.captions = strip_stopwords(data.captions, stopwords)
        data.woc = strip_stopwords(data.woc, stopwords)
    truth = data.truth
    rows = []
    for variant in variants:
        M = build_variant(data, variant, idf_mode)
        factors, clustering = factor_and_assign(M, k_star, seed, readout, max_iter, rel_tol)
        pc = metrics.pair_counts(truth, clustering)
        mu, sigma = metrics.hypergeometric_moments(pc)
        rows.append({
            "seed": seed,
            "variant": variant,
            "labeled_fraction": spec.labeled_fraction,
            "k_star": k_star,
            "readout": readout,
            "purity": metrics.purity(truth, clustering),
            "zrand": (pc.p - mu) / sigma if sigma > 0 else None,
            "nmf_iterations": factors.iterations,
            "final_cost": factors.final_cost,
        })
    return rows


def run_experiment(spec: SynthSpec, variants: Sequence[str] = VARIANTS, k_star: int | None = None,
                   readout: str = "argmax", idf_mode: str = "all_rows", max_iter: int = 500,
                   rel_tol: float = 1e-5, stopwords: Sequence[str] = (), workers: int | None = None
                   ) -> ExperimentReport:
    """Score each variant on every seed of ``spec``."""
    variants = tuple(variants)
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}")
    if readout not in READOUTS:
        raise ConfigError(f"unknown readout {readout!r}")
    k_star = spec.num_classes if k_star is None else int(k_star)
    args = (variants, k_star, readout, idf_mode, max_iter, rel_tol, tuple(stopwords))
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(spec.seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda s: _one_run(spec, s, *args), spec.seeds))
    else:
        chunks = [_one_run(spec, s, *args) for s in spec.seeds]
    runs = [row for chunk in chunks for row in chunk]
    config = {
        "spec": dataclasses.asdict(spec),
        "variants": list(variants), "k_star": k_star, "readout": readout,
        "idf_mode": idf_mode, "max_iter": max_iter, "rel_tol": rel_tol,
        "stopwords": list(stopwords),
    }
    config["spec"]["seeds"] = list(spec.seeds)
    return ExperimentReport(runs, config)


def labeled_fraction_sweep(spec: SynthSpec, fractions=(0.2, 0.4, 0.6, 0.8, 1.0), variant="M", **kwargs):
    """One experiment per caption fraction; returns ``{fraction: ExperimentReport}``."""
    return {
        f: run_experiment(dataclasses.replace(spec, labeled_fraction=f), variants=(variant,), **kwargs)
        for f in fractions
    }


# -- key = value config files -----------------------------------------------

def read_keyvalue(path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str  # keep key case (K vs k)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        parser.read_string("[config]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return dict(parser["config"])


def _parse_field(name, raw, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if name == "seeds":
            raw = raw.strip()
            if ".." in raw:
                lo, hi = raw.split("..")
                return tuple(range(int(lo), int(hi)))
            return tuple(int(s) for s in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    raise ConfigError(f"unsupported field {name}")


def spec_from_mapping(values: dict[str, str]) -> tuple[SynthSpec, dict[str, str]]:
    """Split a key/value mapping into a SynthSpec and the remaining keys."""
    kinds = {f.name: f.type for f in dataclasses.fields(SynthSpec)}
    kw, rest = {}, {}
    for key, raw in values.items():
        if key in kinds:
            kind = {"int": int, "float": float}.get(kinds[key], None)
            kw[key] = _parse_field(key, raw, kind)
        else:
            rest[key] = raw
    return SynthSpec(**kw), rest


def spec_to_text(spec: SynthSpec) -> str:
    lines = []
    for f in dataclasses.fields(spec):
        value = getattr(spec, f.name)
        if f.name == "seeds":
            value = " ".join(str(s) for s in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
