"""Joint multi-domain impact predictors with a streaming low-rank update."""

from .domains import (
    DomainGraph,
    DomainPartition,
    build_knn_graph,
    domain_adjacency,
    partition_balanced,
)
from .errors import BoundNotApplicableError, NumericError, ValidationError
from .evaluation import heatmap_bins, rmse, run_streaming_benchmark, verify_bound
from .ingest import (
    CitationRecord,
    Example,
    Normalizer,
    build_series,
    make_examples,
    parse_corpus,
    split_stream,
)
from .kernel import GramBlock, KernelParams, gram, incremental_blocks, kernel_fn
from .linalg import (
    EigenPair,
    SparsePerturbation,
    apply_inverse,
    eigen_update,
    partial_qr,
    sym_eig_topr,
)
from .models import (
    FastModel,
    Hyperparams,
    JointSystem,
    KernelModel,
    LinearModel,
    StreamBatch,
    assemble_kernel_system,
    assemble_linear_system,
    fit_baseline,
    fit_closed_form,
    fit_fast_initial,
    predict,
    theorem1_bound,
    update_fast,
)

__version__ = "0.1.0"
