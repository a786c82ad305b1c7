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

#include "cmil/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "cmil/errors.hpp"

namespace cmil {

void warn(const std::string& message) {
  std::cerr << "[cmil] warning: " << message << "\n";
}

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) {
    return 0.0;
  }
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return inter / uni;
}

std::vector<std::size_t> nms(const std::vector<ScoredBox>& boxes, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("nms: threshold must lie in [0, 1]");
  }
  for (const ScoredBox& sb : boxes) {
    if (!std::isfinite(sb.score)) {
      throw ConfigError("nms: scores must be finite");
    }
  }

  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;  // stable sort keeps index order on ties
  });

  std::vector<std::size_t> kept;
  kept.reserve(boxes.size());
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(boxes[idx].box, boxes[k].box) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(idx);
    }
  }
  return kept;
}

}  // namespace cmil
