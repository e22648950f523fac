"""Scalar and matrix-argument special functions."""

from .hypergeometric import (
    SeriesResult,
    TruncationPolicy,
    hyp1f1_laplace_ln,
    hyp1f1_series,
    hyp2f1_laplace_ln,
    hyp2f1_series,
    laplace_validity_flags,
    scalar_series_batch,
)
from .scalar import ln_mv_gamma, reg_inc_beta, std_normal_cdf
from .zonal import gen_pochhammer, log_zonal_identity, partitions, zonal

__all__ = [
    "SeriesResult",
    "TruncationPolicy",
    "gen_pochhammer",
    "hyp1f1_laplace_ln",
    "hyp1f1_series",
    "hyp2f1_laplace_ln",
    "hyp2f1_series",
    "laplace_validity_flags",
    "ln_mv_gamma",
    "log_zonal_identity",
    "partitions",
    "reg_inc_beta",
    "scalar_series_batch",
    "std_normal_cdf",
    "zonal",
]
