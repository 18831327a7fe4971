# Copyright 2026 The FundusNet Authors.
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

import json

import numpy as np
import pytest

import fundusnet


def tiny_model(seed=0):
    return fundusnet.Model.build(json.dumps(fundusnet.tiny_descriptor()), seed)


def test_descriptors_round_trip():
    tiny = fundusnet.tiny_descriptor()
    assert tiny["input_shape"] == [16, 16, 1]
    assert fundusnet.default_descriptor()["input_shape"] == [224, 224, 3]
    assert json.loads(tiny_model().descriptor_json) == tiny


def test_predict_is_deterministic_probability():
    model = tiny_model(3)
    x = np.random.default_rng(0).random((4, 16, 16, 1))
    p = model.predict_proba(x)
    assert p.shape == (4, 1)
    assert np.all((p > 0) & (p < 1))
    np.testing.assert_array_equal(p, tiny_model(3).predict_proba(x))
    assert model.parameter_count == 537
    assert model.layer_names[0] == "input"


def test_save_load_bit_identical(tmp_path):
    model = tiny_model(1)
    x = np.random.default_rng(1).random((2, 16, 16, 1))
    model.save(str(tmp_path / "m.fnet"))
    back = fundusnet.Model.load(str(tmp_path / "m.fnet"))
    np.testing.assert_array_equal(model.predict_proba(x), back.predict_proba(x))


def test_errors_surface_as_fnet_error(tmp_path):
    with pytest.raises(fundusnet.FnetError):
        tiny_model().predict_proba(np.zeros((1, 8, 8, 1)))
    with pytest.raises(fundusnet.FnetError):
        fundusnet.Model.load(str(tmp_path / "missing.fnet"))


def test_evaluate_report():
    report = fundusnet.evaluate([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1])
    assert report["roc"]["auc"] == pytest.approx(0.75)
    assert report["confusion"] == {"tp": 2, "fp": 1, "tn": 1, "fn": 0}
    assert report["metrics"]["accuracy"]["value"] == pytest.approx(0.75)


def test_gradcheck_rows_pass():
    rows = fundusnet.gradcheck(seed=0, seeds=1)
    assert rows and all(r["passed"] for r in rows)
    assert rows[-1]["name"] == "model_end_to_end"


def test_run_cli_exit_codes():
    code, out, _ = fundusnet.run_cli(["gradcheck", "--seeds", "1"])
    assert code == 0 and "model_end_to_end" in out
    code, _, err = fundusnet.run_cli(["train", "--set", "no_such_key=1"])
    assert code == 2 and "no_such_key" in err
