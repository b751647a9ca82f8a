#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gnnseg/image.hpp"

namespace gnnseg {

// Per-pixel membership for one tissue class.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> member;

  bool at(int x, int y) const { return member[static_cast<std::size_t>(y) * width + x] != 0; }
  std::int64_t count() const;

  static BinaryMask from_class(const LabelMask& mask, int class_id);
};

// Mask pixels touching the outside: a non-member 4-neighbor or the image
// border. Row-major order.
struct BoundarySet {
  std::vector<std::pair<int, int>> points;  // (x, y)
};

// |P ∩ T| / |T|. Undefined for empty T.
double tp_rate(const BinaryMask& pred, const BinaryMask& truth);

// |P ∩ T| / ((|T| + |P|) / 2). Undefined when both are empty.
double dice(const BinaryMask& pred, const BinaryMask& truth);

BoundarySet extract_boundary(const BinaryMask& mask);

// Mean over prediction-boundary pixels of the minimum Euclidean distance to
// the truth boundary. Asymmetric by definition.
double apd(const BoundarySet& pred_boundary, const BoundarySet& truth_boundary);

struct ClassMetrics {
  int class_id = 0;
  std::string class_name;
  std::optional<double> dice;
  std::optional<double> tp;
  std::optional<double> apd;
  std::string flag;  // empty when all metrics apply
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;

  std::string to_json() const;
  // columns: class,dice,tp,apd,flags ; one row per class
  std::string to_csv() const;
};

// Per-class Dice/TP/APD over the tissue classes (CSF, GM, WM). Classes
// absent from both masks are reported as not-applicable rather than zero.
MetricsReport evaluate(const LabelMask& pred, const LabelMask& truth);

}  // namespace gnnseg
