# Copyright 2026 The CRCL Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Robust cross-modal matching under noisy correspondence."""

import json

from . import _crcl
from ._crcl import (
    ConfigError,
    DomainError,
    EncoderParams,
    GenConfig,
    NumericError,
    PairedDataset,
    ParseError,
    StateError,
    ValidationError,
    acl_loss,
    active_loss,
    amin_amax,
    batch_loss,
    c_curve,
    cli_run,
    complementary_loss,
    dataset_hash,
    gap_lower_bound,
    gap_upper_bound_noisy,
    generate_bimodal,
    generate_split,
    inject_noise,
    load_dataset,
    load_model,
    matching_probs,
    per_query_risks,
    save_dataset,
    save_model,
    soft_margin,
    soft_margin_triplet,
    triplet_hard_negative,
)

__version__ = _crcl.__version__


def brute_force_minimizers(n, eta, q, grid=30, samples=0, seed=0):
    """Grid search of clean and noisy risk minimizers; returns a dict."""
    return json.loads(_crcl.brute_force_minimizers_json(n, eta, q, grid, samples, seed))


def evaluate(params, test):
    """Full-set recalls on a clean test set; returns a dict."""
    return json.loads(_crcl.evaluate_json(params, test))


def train(dataset, config=None):
    """Trains on `dataset` with a config dict (same schema as --config).

    Returns a dict with params, labels, history_csv and correction quality.
    """
    params, labels, history, quality = _crcl.train_json(dataset, json.dumps(config or {}))
    return {
        "params": params,
        "labels": labels,
        "history_csv": history,
        "quality": json.loads(quality),
    }
