"""Online row sampling for streamed tall matrices."""
from .errors import DimensionMismatchError, InvariantViolation, StreamFormatError
from .leverage import (
    ScoreTrace,
    offline_ridge_scores,
    online_ridge_scores,
    online_ridge_scores_inclusive,
    score_sum_bound,
)
from .linalg import Certificate, MaintainedInverse, PSDState, psd_sandwich_margins
from .samplers import (
    BSSSampler,
    OnlineSampler,
    SampleDecision,
    SlimSampler,
    batch_scores,
    run_sampler,
)
from .streams import (
    GraphStreamSpec,
    RowStream,
    gen_doubling_cliques,
    gen_gaussian,
    permute_stream,
    read_rows,
    read_weighted_rows,
    write_rows,
)
from .verify import audit_score_bound, certify, expected_count_bss

__version__ = "0.1.0"
