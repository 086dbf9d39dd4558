# Copyright 2026 The voxface Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import voxface


def test_distance_and_gradient():
    v = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0], [1.0, 1.0, 1.0]])
    lm = {"a": 0, "b": 1}
    d = voxface.AmDefinition("ab", "distance", ["a", "b"])
    assert voxface.compute_am(v, lm, d) == pytest.approx(5.0)
    g = voxface.compute_am_gradient(v, lm, d)
    assert g.shape == (3, 3)
    np.testing.assert_allclose(g[1], [0.6, 0.8, 0.0])
    np.testing.assert_allclose(g[2], 0.0)


def test_angle_degrees():
    v = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    d = voxface.AmDefinition("ang", "angle", ["p", "q", "r"])
    assert voxface.compute_am(v, {"p": 0, "q": 1, "r": 2}, d) == pytest.approx(90.0)


def test_degenerate_raises():
    v = np.zeros((2, 3))
    d = voxface.AmDefinition("ab", "distance", ["a", "b"])
    with pytest.raises(voxface.DegenerateMeasurementError):
        voxface.compute_am(v, {"a": 0, "b": 1}, d)


def test_aggregate():
    means = np.array([[1.0], [3.0]])
    variances = np.array([[1.0], [1.0]])
    a = voxface.aggregate(means, variances)
    assert a["mean"][0] == pytest.approx(2.0)
    assert a["variance"][0] == pytest.approx(0.5)
    assert a["calibrated"][0] == pytest.approx(1.0)


def test_losses_and_stats():
    assert voxface.loss_plain(1.0, 3.0) == pytest.approx(4.0)
    assert voxface.loss_uncertainty(1.0, 2.0, 3.0) == pytest.approx(2.0 + math.log(2.0))
    assert voxface.student_quantile(0.975, 1e9) == pytest.approx(1.959964, abs=1e-5)
    r = [0.9, 1.0, 1.1]
    assert voxface.ci_upper(r, 0.05) > 1.0


def test_log_mel_shape():
    t = np.arange(16000) / 16000.0
    frames = voxface.log_mel(np.sin(2 * np.pi * 1000 * t).tolist())
    assert frames.shape == (98, 64)
    assert np.all(np.isfinite(frames))


def test_synthetic_basis_and_fit():
    data = voxface.generate_synthetic(speakers=40, seed=3)
    assert len(data["speakers"]) == 40
    assert data["ams"].shape == (40, len(data["am_definitions"]))
    train = [m for m, s in zip(data["meshes"], data["splits"]) if s == "D_t"]
    basis = voxface.build_basis(train, 10)
    assert basis.dim == 10
    c = basis.components
    np.testing.assert_allclose(c.T @ c, np.eye(10), atol=1e-10)
    beta = np.linspace(-1.0, 1.0, 10) * np.sqrt(basis.eigenvalues)
    target = basis.reconstruct(beta).reshape(-1, 3)
    defs = data["am_definitions"]
    targets = voxface.compute_all_ams(target, data["landmarks"], defs)
    fit = voxface.fit_shape(basis, data["landmarks"], defs, targets,
                            np.ones(len(defs)), 1e-6)
    got = voxface.compute_all_ams(fit["vertices"], data["landmarks"], defs)
    assert np.max(np.abs(got - targets)) < 0.5
