// Copyright 2026 The cmil Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <vector>

namespace cmil {

/// Axis-aligned box in corner form over continuous coordinates (no pixel
/// grid, no +1 convention). Valid when x1 <= x2 and y1 <= y2; a zero-width
/// or zero-height box is degenerate and has area 0.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x2 >= x1 && y2 >= y1; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Area of the overlap region; 0 when the boxes do not intersect.
double intersection_area(const Box& a, const Box& b);

/// Intersection over union, in [0, 1]. Returns 0 when the union has zero
/// area, so degenerate inputs are well defined.
double iou(const Box& a, const Box& b);

struct ScoredBox {
  Box box;
  double score = 0.0;
};

/// Greedy non-maximum suppression. Boxes are visited in descending score
/// order (score ties broken by lower original index); a box is suppressed
/// iff its IoU with some already-kept box exceeds `threshold`. Returns the
/// kept indices in visit order. threshold must lie in [0, 1] and all scores
/// must be finite.
std::vector<std::size_t> nms(const std::vector<ScoredBox>& boxes, double threshold);

}  // namespace cmil
