"""Gaussian-splat EEG super-resolution."""

import json as _json

from . import _emag
from ._emag import (
    EmagError,
    FormatError,
    Model,
    NumericError,
    ParseError,
    ValidationError,
    load_montage,
    named_subsets,
    nmse,
    pcc,
    read_eegd,
    resolve_subset,
    seed62_montage,
    snr_db,
    write_eegd,
)

__version__ = _emag.__version__

__all__ = [
    "EmagError", "FormatError", "Model", "NumericError", "ParseError", "ValidationError",
    "grid_points", "load_montage", "named_subsets", "nmse", "pcc", "read_eegd", "resolve_subset",
    "run_plan", "seed62_montage", "snr_db", "spline_upsample", "synthesize", "write_eegd",
]


def grid_points(R=12, radius_mm=90.0, variant="sphere", **kw):
    """Grid point coordinates (N x 3, mm)."""
    return _emag.grid_points(_json.dumps({"R": R, "radius_mm": radius_mm, "variant": variant, **kw}))


def spline_upsample(x_ld, ld_positions, hd_positions, order=4, lam=1e-5, n_terms=50):
    """Spherical-spline interpolation of LD channels onto HD positions."""
    cfg = {"order": order, "lambda": lam, "n_terms": n_terms}
    return _emag.spline_upsample(x_ld, ld_positions, hd_positions, _json.dumps(cfg))


def synthesize(spec, out_dir):
    """Writes a synthetic dataset described by `spec` (dict) to out_dir."""
    _emag.synthesize(_json.dumps(spec), str(out_dir))


def run_plan(plan, jobs=1):
    """Runs an experiment plan (dict) and returns its summary as a dict."""
    return _json.loads(_emag.run_plan(_json.dumps(plan), jobs))
