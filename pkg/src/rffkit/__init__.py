"""rffkit: reliability analytics for radio-frequency fingerprints.

Measures how well a transmitter's RF fingerprint survives FPGA-image-reload
events: I-Q measurement corpora are turned into constellation-histogram
images, a binary discriminator scores every measurement pair with a
dissimilarity index, and threshold graphs over those scores yield the
reliability analytics (regions, clusters, degrees, temporal behavior,
observability). A synthetic fingerprint-mutation simulator provides
ground-truth-labeled corpora for verification.
"""

__version__ = "0.1.0"

from .dataset import Corpus, CorpusManifest, IqTrace, load_corpus, read_iq, write_iq
from .discriminator import (
    DissimilarityMatrix,
    DissimilarityRecord,
    ExternalDiscriminator,
    SplitSpec,
    TrainConfig,
    dissimilarity_matrix,
    evaluate_delta,
    pair_delta,
    reference_train,
    split_images,
)
from .graph import (
    RegionDecomposition,
    ReliabilityGraph,
    adjusted_rand_index,
    build_graph,
    cluster_count_vs_tau,
    clusters,
    degree_pdf,
    edge_fraction_vs_tau,
    fully_connected_ratio,
    observability_curve,
    region_decomposition,
    temporal_quantiles,
)
from .imaging import TileImage, export_png, iq_to_image, segment_measurement
from .synth import (
    FingerprintState,
    MutationModel,
    mutate_state,
    sample_state_set,
    synth_corpus,
    synth_measurement,
)

__all__ = [
    "__version__",
    "Corpus",
    "CorpusManifest",
    "IqTrace",
    "load_corpus",
    "read_iq",
    "write_iq",
    "FingerprintState",
    "MutationModel",
    "mutate_state",
    "sample_state_set",
    "synth_corpus",
    "synth_measurement",
    "TileImage",
    "iq_to_image",
    "segment_measurement",
    "export_png",
    "SplitSpec",
    "TrainConfig",
    "DissimilarityRecord",
    "DissimilarityMatrix",
    "ExternalDiscriminator",
    "split_images",
    "reference_train",
    "evaluate_delta",
    "pair_delta",
    "dissimilarity_matrix",
    "ReliabilityGraph",
    "RegionDecomposition",
    "build_graph",
    "clusters",
    "cluster_count_vs_tau",
    "edge_fraction_vs_tau",
    "degree_pdf",
    "temporal_quantiles",
    "fully_connected_ratio",
    "observability_curve",
    "region_decomposition",
    "adjusted_rand_index",
]
