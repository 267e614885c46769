# Copyright (C) 2026 The segtext Authors
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

import math

import numpy as np
import pytest

import segtext


def test_rect_iou_identity_and_disjoint():
    r = (10.0, 10.0, 4.0, 8.0, 0.3)
    assert segtext.rect_iou(r, r) == pytest.approx(1.0)
    assert segtext.rect_iou(r, (100.0, 100.0, 4.0, 8.0, 0.0)) == 0.0


def test_polygon_iou_against_boxes():
    a = [(0, 0), (10, 0), (10, 10), (0, 10)]
    b = [(5, 0), (15, 0), (15, 10), (5, 10)]
    # Overlap 50, union 150.
    assert segtext.polygon_iou(a, b) == pytest.approx(1 / 3)
    assert segtext.is_simple(a)
    assert not segtext.is_simple([(0, 0), (10, 10), (10, 0), (0, 10)])


def test_scene_maps_and_truth():
    spec = segtext.scene_spec("train", 0, 50, 0)
    scene = segtext.realize(spec)
    tcl = scene["tcl"]
    assert isinstance(tcl, np.ndarray) and tcl.shape == (spec["rows"], spec["cols"])
    assert scene["tr"].dtype == np.uint8
    assert 0.0 <= tcl.min() and tcl.max() <= 1.0
    assert len(scene["truth"]) == len(spec["instances"])
    assert segtext.realize(spec)["tcl"].tobytes() == tcl.tobytes()


def test_train_detect_evaluate():
    params, trace = segtext.train(corpus_seed=0, count=4, iterations=30)
    assert len(trace) == 31
    assert all(math.isfinite(a) and math.isfinite(b) for a, b in trace)
    assert sum(trace[-1]) < sum(trace[0])

    restored = segtext.Params.from_text(params.to_text())
    assert restored.to_text() == params.to_text()

    scene = segtext.realize(segtext.scene_spec("train", 0, 4, 1))
    det = segtext.detect(scene, params)
    preds = segtext.kept_polygons(det)
    report = segtext.evaluate([preds], [scene["truth"]])
    assert report["truths"] == len(scene["truth"])
    assert report["preds"] == len(preds)
    assert 0.0 <= report["f"] <= 1.0
    assert segtext.detect(scene, params) == det


def test_errors_surface_as_exceptions():
    with pytest.raises(segtext.SegtextError):
        segtext.scene_spec("nope", 0, 1, 0)
    scene = segtext.realize(segtext.scene_spec("train", 0, 4, 0))
    scene["ggtr"] = np.zeros((3,))
    with pytest.raises(segtext.SegtextError):
        segtext.detect(scene, segtext.Params.init())
