# Copyright 2026 The DRANet Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Open-world compositional zero-shot learning with dual reversal attention.

Configs may be given as dicts or JSON text in the schema the dranet CLI
reads. Arrays are float64 numpy arrays.
"""

import json as _json

from dranet import _core
from dranet._core import ConfigError, DataError, NumericError

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "decode_pair",
    "encode_pair",
    "evaluate",
    "evaluate_scores",
    "forward",
    "fuse_predictions",
    "generate_dataset",
    "init_params",
    "load_checkpoint",
    "losses",
    "model_config",
    "render_composition",
    "train",
]


def _text(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return _json.dumps(config)


encode_pair = _core.encode_pair
decode_pair = _core.decode_pair
evaluate_scores = _core.evaluate_scores


def render_composition(attribute_id, object_id, jitter_seed, config=None):
    return _core.render_composition(attribute_id, object_id, jitter_seed, _text(config))


def generate_dataset(config, out_dir):
    return _core.generate_dataset(_text(config), str(out_dir))


def model_config(config=None):
    """Model section of an experiment config as a dict."""
    return _json.loads(_core.model_config(_text(config)))


def init_params(model):
    return _core.init_params(_text(model))


def forward(images, params, model):
    return _core.forward(images, params, _text(model))


def losses(outputs, labels, model, lambda1=1.0, lambda2=1.0):
    return _core.losses(outputs, labels, _text(model), lambda1, lambda2)


def fuse_predictions(outputs, eta1=0.1, eta2=0.3, mode="weighted_sum_product"):
    return _core.fuse_predictions(outputs, eta1, eta2, mode)


def train(config, out_dir):
    return _core.train(_text(config), str(out_dir))


def evaluate(config, checkpoint, out_dir):
    return _core.evaluate(_text(config), str(checkpoint), str(out_dir))


def load_checkpoint(path):
    params, model = _core.load_checkpoint(str(path))
    return params, _json.loads(model)
