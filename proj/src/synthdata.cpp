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

#include "cmil/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cmil/errors.hpp"
#include "cmil/io_util.hpp"
#include "cmil/rng.hpp"

namespace cmil {

namespace {

using nlohmann::json;

constexpr std::uint64_t kBagStream = 0x5A060000ULL;

}  // namespace

void validate(const SynthConfig& c) {
  if (c.num_bags < 1 || c.proposals_per_bag < 1 || c.num_classes < 1 || c.feature_dim < 1) {
    throw ConfigError("synth: counts must be positive");
  }
  if (c.feature_dim < 3 * c.num_classes) {
    throw ConfigError("synth: feature_dim must be at least 3 * num_classes (got " +
                      std::to_string(c.feature_dim) + " for " + std::to_string(c.num_classes) +
                      " classes)");
  }
  if (!(c.part_strength > c.extent_strength) || c.extent_strength < 0.0) {
    throw ConfigError("synth: requires part_strength > extent_strength >= 0");
  }
  if (c.noise_sigma < 0.0) {
    throw ConfigError("synth: noise_sigma must be non-negative");
  }
  if (c.positive_fraction < 0.0 || c.positive_fraction > 1.0) {
    throw ConfigError("synth: positive_fraction must lie in [0, 1]");
  }
  if (c.extent_fraction < 0.0 || c.part_fraction < 0.0 || c.partial_fraction < 0.0 ||
      c.extent_fraction + c.part_fraction + c.partial_fraction > 1.0 + 1e-12) {
    throw ConfigError("synth: proposal mixture fractions must be non-negative and sum to <= 1");
  }
  if (c.distractor_fraction < 0.0 || c.distractor_fraction > 1.0) {
    throw ConfigError("synth: distractor_fraction must lie in [0, 1]");
  }
  if (c.distractor_strength < 0.0 || c.distractor_strength > 1.0) {
    throw ConfigError("synth: distractor_strength must lie in [0, 1]");
  }
  if (c.background_side_min <= 0.0 || c.background_side_min > c.background_side_max ||
      c.background_side_max > 1.0) {
    throw ConfigError("synth: background side range must satisfy 0 < min <= max <= 1");
  }
  if (c.min_proposal_side <= 0.0 || c.min_proposal_side >= 0.5) {
    throw ConfigError("synth: min_proposal_side must lie in (0, 0.5)");
  }
  if (c.part_area_fraction <= 0.0 || c.part_area_fraction >= 1.0) {
    throw ConfigError("synth: part_area_fraction must lie in (0, 1)");
  }
  if (c.partial_t_min < 0.0 || c.partial_t_max > 1.0 || c.partial_t_min > c.partial_t_max) {
    throw ConfigError("synth: partial_t range must satisfy 0 <= t_min <= t_max <= 1");
  }
}

int part_axis(int class_index) { return 3 * class_index; }
int extent_axis(int class_index) { return 3 * class_index + 1; }
int class_axis(int class_index) { return 3 * class_index + 2; }

namespace {

Box clamp_to_unit(Box b, double min_side) {
  b.x1 = std::clamp(b.x1, 0.0, 1.0);
  b.y1 = std::clamp(b.y1, 0.0, 1.0);
  b.x2 = std::clamp(b.x2, 0.0, 1.0);
  b.y2 = std::clamp(b.y2, 0.0, 1.0);
  if (b.x2 < b.x1) {
    std::swap(b.x1, b.x2);
  }
  if (b.y2 < b.y1) {
    std::swap(b.y1, b.y2);
  }
  if (b.width() < min_side) {
    b.x2 = std::min(1.0, b.x1 + min_side);
    b.x1 = b.x2 - min_side;
  }
  if (b.height() < min_side) {
    b.y2 = std::min(1.0, b.y1 + min_side);
    b.y1 = b.y2 - min_side;
  }
  return b;
}

Box jitter_box(const Box& base, double rel, double min_side, Rng& rng) {
  const double jx = rel * base.width();
  const double jy = rel * base.height();
  Box b{base.x1 + rng.uniform(-jx, jx), base.y1 + rng.uniform(-jy, jy),
        base.x2 + rng.uniform(-jx, jx), base.y2 + rng.uniform(-jy, jy)};
  return clamp_to_unit(b, min_side);
}

Box random_box(double side_lo, double side_hi, double min_side, Rng& rng) {
  const double w = rng.uniform(side_lo, side_hi);
  const double h = rng.uniform(side_lo, side_hi);
  const double x1 = rng.uniform(0.0, 1.0 - w);
  const double y1 = rng.uniform(0.0, 1.0 - h);
  return clamp_to_unit(Box{x1, y1, x1 + w, y1 + h}, min_side);
}

Box lerp_box(const Box& a, const Box& b, double t) {
  return Box{a.x1 + t * (b.x1 - a.x1), a.y1 + t * (b.y1 - a.y1), a.x2 + t * (b.x2 - a.x2),
             a.y2 + t * (b.y2 - a.y2)};
}

std::vector<double> proposal_features(const SynthConfig& c, int class_index, const Box& proposal,
                                      const Box& gt, const Box& part, Rng& rng) {
  std::vector<double> f(static_cast<std::size_t>(c.feature_dim));
  for (double& v : f) {
    v = c.noise_sigma > 0.0 ? rng.normal(0.0, c.noise_sigma) : 0.0;
  }
  const double part_overlap = iou(proposal, part);
  const double extent_overlap = iou(proposal, gt);
  f[part_axis(class_index)] += c.part_strength * part_overlap;
  f[extent_axis(class_index)] += c.extent_strength * extent_overlap;
  f[class_axis(class_index)] += c.class_strength * std::max(part_overlap, extent_overlap);
  return f;
}

// Negative bag: mostly pure-noise background proposals, plus a few phantom
// distractors around a false object box of a random class. Distractors carry
// extent and class signal but never part signal.
Bag make_negative_bag(const SynthConfig& c, std::size_t index, Rng& rng, BagGeometry& geom) {
  geom = BagGeometry{};
  Bag bag;
  bag.id = "bag" + std::to_string(index);
  bag.labels.assign(static_cast<std::size_t>(c.num_classes), -1);
  bag.gt_boxes.assign(static_cast<std::size_t>(c.num_classes), {});

  const Box phantom = random_box(0.35, 0.55, c.min_proposal_side, rng);
  const int phantom_class = static_cast<int>(rng.uniform_index(c.num_classes));
  const int n = c.proposals_per_bag;
  int n_distract = static_cast<int>(std::lround(c.distractor_fraction * n));
  n_distract = std::min(std::max(n_distract, c.distractor_fraction > 0.0 ? 1 : 0), n);

  std::vector<Box> boxes;
  boxes.reserve(static_cast<std::size_t>(n));
  for (int p = 0; p < n_distract; ++p) {
    boxes.push_back(jitter_box(phantom, c.extent_jitter, c.min_proposal_side, rng));
  }
  for (int p = n_distract; p < n; ++p) {
    boxes.push_back(random_box(std::max(c.min_proposal_side, c.background_side_min),
                               c.background_side_max, c.min_proposal_side, rng));
  }
  rng.shuffle(boxes);

  for (const Box& b : boxes) {
    Instance inst;
    inst.box = b;
    inst.features.assign(static_cast<std::size_t>(c.feature_dim), 0.0);
    for (double& v : inst.features) {
      v = c.noise_sigma > 0.0 ? rng.normal(0.0, c.noise_sigma) : 0.0;
    }
    const double overlap = c.distractor_strength * iou(b, phantom);
    inst.features[extent_axis(phantom_class)] += c.extent_strength * overlap;
    inst.features[class_axis(phantom_class)] += c.class_strength * overlap;
    bag.instances.push_back(std::move(inst));
  }
  return bag;
}

Bag make_positive_bag(const SynthConfig& c, std::size_t index, int class_index, Rng& rng,
                      BagGeometry& geom) {
  Bag bag;
  bag.id = "bag" + std::to_string(index);
  bag.labels.assign(static_cast<std::size_t>(c.num_classes), -1);
  bag.labels[class_index] = 1;
  bag.gt_boxes.assign(static_cast<std::size_t>(c.num_classes), {});

  // object box, then a part box fully inside it
  const Box gt = random_box(0.35, 0.55, c.min_proposal_side, rng);
  const double scale = std::sqrt(c.part_area_fraction);
  const double pw = gt.width() * scale;
  const double ph = gt.height() * scale;
  const double px1 = rng.uniform(gt.x1, gt.x2 - pw);
  const double py1 = rng.uniform(gt.y1, gt.y2 - ph);
  const Box part = clamp_to_unit(Box{px1, py1, px1 + pw, py1 + ph}, c.min_proposal_side);
  bag.gt_boxes[class_index].push_back(gt);
  geom = BagGeometry{true, class_index, gt, part};

  const int n = c.proposals_per_bag;
  int n_extent = static_cast<int>(std::lround(c.extent_fraction * n));
  int n_part = static_cast<int>(std::lround(c.part_fraction * n));
  int n_partial = static_cast<int>(std::lround(c.partial_fraction * n));
  n_extent = std::max(n_extent, c.extent_fraction > 0.0 ? 1 : 0);
  n_part = std::max(n_part, c.part_fraction > 0.0 ? 1 : 0);
  while (n_extent + n_part + n_partial > n) {
    if (n_partial > 0) {
      --n_partial;
    } else if (n_extent > 1) {
      --n_extent;
    } else {
      --n_part;
    }
  }
  const int n_background = n - n_extent - n_part - n_partial;

  std::vector<Box> boxes;
  boxes.reserve(static_cast<std::size_t>(n));
  for (int p = 0; p < n_extent; ++p) {
    boxes.push_back(jitter_box(gt, c.extent_jitter, c.min_proposal_side, rng));
  }
  for (int p = 0; p < n_part; ++p) {
    boxes.push_back(jitter_box(part, c.part_jitter, c.min_proposal_side, rng));
  }
  for (int p = 0; p < n_partial; ++p) {
    const double t = rng.uniform(c.partial_t_min, c.partial_t_max);
    boxes.push_back(jitter_box(lerp_box(part, gt, t), c.partial_jitter, c.min_proposal_side, rng));
  }
  for (int p = 0; p < n_background; ++p) {
    Box b;
    for (int attempt = 0; attempt < 20; ++attempt) {
      b = random_box(std::max(c.min_proposal_side, c.background_side_min),
                     c.background_side_max, c.min_proposal_side, rng);
      if (iou(b, gt) <= c.background_max_gt_iou) {
        break;
      }
    }
    boxes.push_back(b);
  }
  rng.shuffle(boxes);

  bag.instances.reserve(boxes.size());
  for (const Box& b : boxes) {
    Instance inst;
    inst.box = b;
    inst.features = proposal_features(c, class_index, b, gt, part, rng);
    bag.instances.push_back(std::move(inst));
  }
  return bag;
}

}  // namespace

std::vector<Bag> generate(const SynthConfig& config, std::vector<BagGeometry>* geometry) {
  validate(config);
  std::vector<Bag> bags;
  bags.reserve(static_cast<std::size_t>(config.num_bags));
  if (geometry != nullptr) {
    geometry->assign(static_cast<std::size_t>(config.num_bags), BagGeometry{});
  }
  BagGeometry scratch;
  for (int i = 0; i < config.num_bags; ++i) {
    Rng rng(mix_seed(config.seed, kBagStream + static_cast<std::uint64_t>(i)));
    BagGeometry& geom = geometry != nullptr ? (*geometry)[i] : scratch;
    const bool positive = rng.uniform() < config.positive_fraction;
    if (positive) {
      const int class_index = static_cast<int>(rng.uniform_index(config.num_classes));
      bags.push_back(
          make_positive_bag(config, static_cast<std::size_t>(i), class_index, rng, geom));
    } else {
      bags.push_back(make_negative_bag(config, static_cast<std::size_t>(i), rng, geom));
    }
  }
  return bags;
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

namespace {

constexpr int kDatasetVersion = 1;
constexpr char kBinaryMagic[8] = {'C', 'M', 'I', 'L', 'D', 'S', '1', '\n'};

bool is_binary_path(const std::string& path) { return path.size() >= 4 && path.ends_with(".bin"); }

void check_bags(const std::vector<Bag>& bags) {
  if (bags.empty()) {
    throw ConfigError("write_dataset: dataset must hold at least one bag");
  }
  const std::size_t classes = bags.front().labels.size();
  std::size_t dim = 0;
  for (const Bag& bag : bags) {
    if (bag.labels.size() != classes || bag.gt_boxes.size() != classes) {
      throw ConfigError("write_dataset: inconsistent class count in bag " + bag.id);
    }
    for (const Instance& inst : bag.instances) {
      if (dim == 0) {
        dim = inst.features.size();
      }
      if (inst.features.size() != dim) {
        throw ConfigError("write_dataset: inconsistent feature dimension in bag " + bag.id);
      }
    }
  }
}

json box_to_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw ParseError("box must be an array of 4 numbers");
  }
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void write_text_dataset(std::ostream& out, const std::vector<Bag>& bags, std::size_t classes,
                        std::size_t dim) {
  json header{{"format", "cmil-dataset"},
              {"version", kDatasetVersion},
              {"num_classes", classes},
              {"feature_dim", dim},
              {"num_bags", bags.size()}};
  out << header.dump() << "\n";
  for (const Bag& bag : bags) {
    json jb;
    jb["id"] = bag.id;
    jb["labels"] = bag.labels;
    json gts = json::array();
    for (const auto& class_boxes : bag.gt_boxes) {
      json arr = json::array();
      for (const Box& b : class_boxes) {
        arr.push_back(box_to_json(b));
      }
      gts.push_back(std::move(arr));
    }
    jb["gt"] = std::move(gts);
    json insts = json::array();
    for (const Instance& inst : bag.instances) {
      insts.push_back(json{{"box", box_to_json(inst.box)}, {"f", inst.features}});
    }
    jb["instances"] = std::move(insts);
    out << jb.dump() << "\n";
  }
}

std::vector<Bag> read_text_dataset(const std::string& path, const std::string& content) {
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;

  auto parse_line = [&](const std::string& text, const char* what) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + what + " at line " + std::to_string(line_no) + ", byte " +
                       std::to_string(e.byte) + ": " + e.what());
    }
  };

  if (!std::getline(in, line)) {
    throw ParseError(path + ": empty dataset file");
  }
  ++line_no;
  const json header = parse_line(line, "malformed header");
  if (!header.is_object() || header.value("format", "") != "cmil-dataset") {
    throw ParseError(path + ": not a cmil dataset (bad header)");
  }
  if (header.value("version", -1) != kDatasetVersion) {
    throw ParseError(path + ": unsupported dataset version");
  }
  const std::size_t classes = header.at("num_classes").get<std::size_t>();
  const std::size_t dim = header.at("feature_dim").get<std::size_t>();
  const std::size_t expected_bags = header.at("num_bags").get<std::size_t>();

  std::vector<Bag> bags;
  bags.reserve(expected_bags);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const json jb = parse_line(line, "malformed record");
    try {
      Bag bag;
      bag.id = jb.at("id").get<std::string>();
      bag.labels = jb.at("labels").get<std::vector<int>>();
      if (bag.labels.size() != classes) {
        throw ParseError("label count does not match header");
      }
      for (const json& arr : jb.at("gt")) {
        std::vector<Box> class_boxes;
        for (const json& bj : arr) {
          class_boxes.push_back(box_from_json(bj));
        }
        bag.gt_boxes.push_back(std::move(class_boxes));
      }
      if (bag.gt_boxes.size() != classes) {
        throw ParseError("gt class count does not match header");
      }
      for (const json& ij : jb.at("instances")) {
        Instance inst;
        inst.box = box_from_json(ij.at("box"));
        inst.features = ij.at("f").get<std::vector<double>>();
        if (inst.features.size() != dim) {
          throw ParseError("feature dimension does not match header");
        }
        bag.instances.push_back(std::move(inst));
      }
      if (bag.instances.empty()) {
        throw ParseError("bag holds no instances");
      }
      bags.push_back(std::move(bag));
    } catch (const json::exception& e) {
      throw ParseError(path + ": record at line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path + ": record at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (bags.size() != expected_bags) {
    throw ParseError(path + ": header promises " + std::to_string(expected_bags) + " bags, found " +
                     std::to_string(bags.size()));
  }
  return bags;
}

class BinaryReader {
 public:
  BinaryReader(const std::string& path, const std::string& content)
      : path_(path), data_(content) {}

  template <typename T>
  T read(const char* what) {
    T value{};
    if (offset_ + sizeof(T) > data_.size()) {
      throw ParseError(path_ + ": truncated reading " + what + " at byte " +
                       std::to_string(offset_));
    }
    std::memcpy(&value, data_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }

  std::string read_string(std::size_t len, const char* what) {
    if (offset_ + len > data_.size()) {
      throw ParseError(path_ + ": truncated reading " + what + " at byte " +
                       std::to_string(offset_));
    }
    std::string s(data_.data() + offset_, len);
    offset_ += len;
    return s;
  }

  std::size_t offset() const { return offset_; }
  bool exhausted() const { return offset_ == data_.size(); }

 private:
  const std::string& path_;
  const std::string& data_;
  std::size_t offset_ = 0;
};

void write_binary_dataset(std::ostream& out, const std::vector<Bag>& bags, std::uint32_t classes,
                          std::uint32_t dim) {
  auto put = [&out](const auto& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(value));
  };
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  put(static_cast<std::uint32_t>(kDatasetVersion));
  put(classes);
  put(dim);
  put(static_cast<std::uint64_t>(bags.size()));
  for (const Bag& bag : bags) {
    put(static_cast<std::uint32_t>(bag.id.size()));
    out.write(bag.id.data(), static_cast<std::streamsize>(bag.id.size()));
    for (int label : bag.labels) {
      put(static_cast<std::int8_t>(label));
    }
    for (const auto& class_boxes : bag.gt_boxes) {
      put(static_cast<std::uint32_t>(class_boxes.size()));
      for (const Box& b : class_boxes) {
        put(b.x1);
        put(b.y1);
        put(b.x2);
        put(b.y2);
      }
    }
    put(static_cast<std::uint32_t>(bag.instances.size()));
    for (const Instance& inst : bag.instances) {
      put(inst.box.x1);
      put(inst.box.y1);
      put(inst.box.x2);
      put(inst.box.y2);
      for (double f : inst.features) {
        put(f);
      }
    }
  }
}

std::vector<Bag> read_binary_dataset(const std::string& path, const std::string& content) {
  BinaryReader reader(path, content);
  const std::string magic = reader.read_string(sizeof(kBinaryMagic), "magic");
  if (std::memcmp(magic.data(), kBinaryMagic, sizeof(kBinaryMagic)) != 0) {
    throw ParseError(path + ": not a cmil binary dataset");
  }
  const auto version = reader.read<std::uint32_t>("version");
  if (version != static_cast<std::uint32_t>(kDatasetVersion)) {
    throw ParseError(path + ": unsupported dataset version " + std::to_string(version));
  }
  const auto classes = reader.read<std::uint32_t>("class count");
  const auto dim = reader.read<std::uint32_t>("feature dim");
  const auto num_bags = reader.read<std::uint64_t>("bag count");

  std::vector<Bag> bags;
  bags.reserve(num_bags);
  for (std::uint64_t i = 0; i < num_bags; ++i) {
    const std::string record = "record " + std::to_string(i);
    Bag bag;
    const auto id_len = reader.read<std::uint32_t>(record.c_str());
    bag.id = reader.read_string(id_len, record.c_str());
    for (std::uint32_t c = 0; c < classes; ++c) {
      bag.labels.push_back(reader.read<std::int8_t>(record.c_str()));
    }
    for (std::uint32_t c = 0; c < classes; ++c) {
      const auto count = reader.read<std::uint32_t>(record.c_str());
      std::vector<Box> class_boxes(count);
      for (auto& b : class_boxes) {
        b.x1 = reader.read<double>(record.c_str());
        b.y1 = reader.read<double>(record.c_str());
        b.x2 = reader.read<double>(record.c_str());
        b.y2 = reader.read<double>(record.c_str());
      }
      bag.gt_boxes.push_back(std::move(class_boxes));
    }
    const auto n_instances = reader.read<std::uint32_t>(record.c_str());
    if (n_instances == 0) {
      throw ParseError(path + ": " + record + " holds no instances");
    }
    for (std::uint32_t p = 0; p < n_instances; ++p) {
      Instance inst;
      inst.box.x1 = reader.read<double>(record.c_str());
      inst.box.y1 = reader.read<double>(record.c_str());
      inst.box.x2 = reader.read<double>(record.c_str());
      inst.box.y2 = reader.read<double>(record.c_str());
      inst.features.resize(dim);
      for (auto& f : inst.features) {
        f = reader.read<double>(record.c_str());
      }
      bag.instances.push_back(std::move(inst));
    }
    bags.push_back(std::move(bag));
  }
  if (!reader.exhausted()) {
    throw ParseError(path + ": trailing bytes after last record at byte " +
                     std::to_string(reader.offset()));
  }
  return bags;
}

}  // namespace

void write_dataset(const std::string& path, const std::vector<Bag>& bags) {
  check_bags(bags);
  const std::size_t classes = bags.front().labels.size();
  std::size_t dim = 0;
  for (const Bag& bag : bags) {
    if (!bag.instances.empty()) {
      dim = bag.instances.front().features.size();
      break;
    }
  }
  atomic_write_file(path, [&](std::ostream& out) {
    if (is_binary_path(path)) {
      write_binary_dataset(out, bags, static_cast<std::uint32_t>(classes),
                           static_cast<std::uint32_t>(dim));
    } else {
      write_text_dataset(out, bags, classes, dim);
    }
  });
}

std::vector<Bag> read_dataset(const std::string& path) {
  const std::string content = read_file(path);
  return is_binary_path(path) ? read_binary_dataset(path, content)
                              : read_text_dataset(path, content);
}

}  // namespace cmil
