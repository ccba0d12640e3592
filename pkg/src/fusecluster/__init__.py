"""Image-document clustering by fusing visual words, captions and reference
articles into one IDF-weighted matrix and factoring it with NMF."""

from .cluster import Clustering, GroundTruth, assign_argmax, assign_kmeans
from .errors import FuseClusterError
from .fusion import FusedMatrix, IdfWeights, apply_idf, assemble_fused, compute_idf
from .harness import SynthSpec, run_experiment, synth_generate
from .metrics import pair_counts, purity, zrand
from .nmf import FactorPair, nmf_factorize, reconstruction_error
from .textcorpus import CountMatrix, TextDocument, Vocabulary, build_vocabulary, count_features, tokenize
from .visualwords import Codebook, DescriptorSet, quantize, train_codebook

__version__ = "0.1.0"
