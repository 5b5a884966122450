"""Fill-reducing orderings for sparse symmetric matrices.

Classical baselines (RCM, minimum degree, Fiedler, spectral nested
dissection), an exact symbolic fill oracle, and a two-stage ordering that
starts from a spectral embedding and minimizes a smoothed expected 1-sum.
"""

from .bench import BenchConfig, BenchRow, emit_report, emit_spy_svg, run_benchmark
from .oracle import FillReport, elimination_fill, envelope_metrics, naive_fill_reference
from .orderings import (
    METHODS,
    fiedler_order,
    min_degree_order,
    natural_order,
    rcm_order,
    spectral_nd_order,
)
from .pipeline import OptimizerConfig, udno_order
from .rank import NodeScores, expected_one_sum, expected_one_sum_and_grad
from .sparse import (
    Graph,
    Permutation,
    SparsePattern,
    apply_permutation,
    parse_matrix_market,
    pattern_to_graph,
    read_matrix_market,
    symmetrize_pattern,
    write_matrix_market,
)
from .spectral import EmbedConfig, fiedler_eigen, train_embedding
from .synth import GenSpec, generate, generate_graph, standard_suite

__version__ = "0.1.0"
