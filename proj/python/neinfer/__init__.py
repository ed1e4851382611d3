"""Nonlinear expectation inference for well-response history matching."""

import json as _json

from ._core import (
    auto_sigma,
    count_subsets,
    posterior_envelope,
    prior_envelope,
    rel_perm,
    sample_h_fields,
    select_posterior,
)
from ._core import run_case_json as _run_case_json

__all__ = [
    "auto_sigma",
    "count_subsets",
    "posterior_envelope",
    "prior_envelope",
    "rel_perm",
    "run_case",
    "sample_h_fields",
    "select_posterior",
]


def run_case(config_path, out_dir=None, nei=True, predict=True, esmda=True):
    """Run a case configuration and return the run summary as a dict."""
    return _json.loads(_run_case_json(str(config_path), None if out_dir is None else str(out_dir),
                                      nei, predict, esmda))
