"""Python bindings for the spadfuse SPAD and event camera fusion toolkit."""

import json

from ._core import (
    ConfigError,
    DataError,
    Error,
    SensorParams,
    SnrParams,
    SolverError,
    bits_per_sample,
    edi_pixel,
    matched_r_bar,
    nedi_forward,
    nedi_pixel,
    office_scene,
    psnr,
    reference_grid,
    snr_camera,
    snr_event,
    snr_spad,
    spad_response,
    spad_response_inverse,
)
from . import _core

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "SensorParams",
    "SnrParams",
    "SolverError",
    "bits_per_sample",
    "config_hash",
    "default_config",
    "edi_pixel",
    "matched_r_bar",
    "nedi_forward",
    "nedi_pixel",
    "office_scene",
    "psnr",
    "reference_grid",
    "run_deblur",
    "run_e2e",
    "run_eval",
    "run_fuse",
    "run_mtf",
    "run_simulate",
    "run_snr",
    "snr_camera",
    "snr_event",
    "snr_spad",
    "spad_response",
    "spad_response_inverse",
]


def default_config():
    """Default run configuration as a dict."""
    return json.loads(_core._default_config())


def config_hash(config):
    return _core._config_hash(json.dumps(config))


def run_simulate(config):
    return json.loads(_core._run_simulate(json.dumps(config)))


def run_deblur(config):
    return json.loads(_core._run_deblur(json.dumps(config)))


def run_fuse(config):
    return json.loads(_core._run_fuse(json.dumps(config)))


def run_eval(config):
    return json.loads(_core._run_eval(json.dumps(config)))


def run_mtf(config):
    return json.loads(_core._run_mtf(json.dumps(config)))


def run_snr(config, reference_csv):
    return json.loads(_core._run_snr(json.dumps(config), str(reference_csv)))


def run_e2e(config):
    """Full pipeline. Returns method rows, the adaptive sweep and the manifest."""
    return json.loads(_core._run_e2e(json.dumps(config)))
