from .reference import (
    ContinuousParams,
    ParameterDomainError,
    SsdSequenceInputs,
    apply_matrix_form,
    bi_ssd,
    build_mask_M,
    discretize_zoh,
    lti_conv_apply,
    lti_conv_kernel,
    ssd_matrix_form,
    ssd_quadratic,
    ssd_recurrent,
)
from .noncausal import (
    ConsistencyError,
    NcssdInputs,
    RouteError,
    ScanRoute,
    apply_scan_route,
    bidir_hidden_identity,
    compute_m,
    ncssd_contraction,
    ncssd_fused,
    ncssd_hidden_state,
    ncssd_rewritten_recurrence,
)
