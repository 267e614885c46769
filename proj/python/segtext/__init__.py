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

"""Bottom-up arbitrary-shape text detection on synthetic text maps."""

from ._core import (
    Params,
    SegtextError,
    detect,
    evaluate,
    is_simple,
    polygon_iou,
    realize,
    rect_iou,
    scene_spec,
    train,
)


def kept_polygons(detection):
    """Polygons of a detection dict that survived filtering."""
    return [p["points"] for p in detection["polygons"] if p["kept"]]


__all__ = [
    "Params",
    "SegtextError",
    "detect",
    "evaluate",
    "is_simple",
    "kept_polygons",
    "polygon_iou",
    "realize",
    "rect_iou",
    "scene_spec",
    "train",
]
