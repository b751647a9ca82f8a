#include "gnnseg/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gnnseg/errors.hpp"

namespace gnnseg {

std::int64_t BinaryMask::count() const {
  std::int64_t c = 0;
  for (std::uint8_t m : member) c += m != 0;
  return c;
}

BinaryMask BinaryMask::from_class(const LabelMask& mask, int class_id) {
  BinaryMask out;
  out.width = mask.width;
  out.height = mask.height;
  out.member.resize(mask.labels.size());
  for (std::size_t i = 0; i < mask.labels.size(); ++i)
    out.member[i] = mask.labels[i] == class_id ? 1 : 0;
  return out;
}

namespace {

void check_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height)
    throw ValidationError("mask dimensions differ");
}

std::int64_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  std::int64_t c = 0;
  for (std::size_t i = 0; i < a.member.size(); ++i) c += (a.member[i] && b.member[i]) ? 1 : 0;
  return c;
}

}  // namespace

double tp_rate(const BinaryMask& pred, const BinaryMask& truth) {
  check_same_dims(pred, truth);
  const std::int64_t t = truth.count();
  if (t == 0) throw ValidationError("TP undefined: truth mask is empty");
  return static_cast<double>(intersection_count(pred, truth)) / static_cast<double>(t);
}

double dice(const BinaryMask& pred, const BinaryMask& truth) {
  check_same_dims(pred, truth);
  const std::int64_t p = pred.count(), t = truth.count();
  if (p + t == 0) throw ValidationError("Dice undefined: both masks are empty");
  return static_cast<double>(intersection_count(pred, truth)) /
         (static_cast<double>(t + p) / 2.0);
}

BoundarySet extract_boundary(const BinaryMask& mask) {
  if (mask.count() == 0) throw ValidationError("boundary undefined: mask is empty");
  BoundarySet out;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      bool boundary = x == 0 || y == 0 || x == mask.width - 1 || y == mask.height - 1;
      if (!boundary)
        boundary = !mask.at(x - 1, y) || !mask.at(x + 1, y) || !mask.at(x, y - 1) ||
                   !mask.at(x, y + 1);
      if (boundary) out.points.emplace_back(x, y);
    }
  }
  return out;
}

double apd(const BoundarySet& pred_boundary, const BoundarySet& truth_boundary) {
  if (pred_boundary.points.empty() || truth_boundary.points.empty())
    throw ValidationError("APD undefined: empty boundary");
  double total = 0;
  for (auto [px, py] : pred_boundary.points) {
    double best = std::numeric_limits<double>::infinity();
    for (auto [tx, ty] : truth_boundary.points) {
      const double dx = px - tx, dy = py - ty;
      best = std::min(best, dx * dx + dy * dy);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(pred_boundary.points.size());
}

MetricsReport evaluate(const LabelMask& pred, const LabelMask& truth) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw ValidationError("prediction and truth dimensions differ");
  MetricsReport report;
  for (int cls = 1; cls < kNumClasses; ++cls) {
    ClassMetrics cm;
    cm.class_id = cls;
    cm.class_name = kClassNames[cls];
    const BinaryMask p = BinaryMask::from_class(pred, cls);
    const BinaryMask t = BinaryMask::from_class(truth, cls);
    const std::int64_t pc = p.count(), tc = t.count();
    if (pc == 0 && tc == 0) {
      cm.flag = "absent-both";
      report.per_class.push_back(std::move(cm));
      continue;
    }
    cm.dice = dice(p, t);
    if (tc > 0) {
      cm.tp = tp_rate(p, t);
    } else {
      cm.flag = "empty-truth";
    }
    if (pc > 0 && tc > 0) {
      cm.apd = apd(extract_boundary(p), extract_boundary(t));
    } else if (cm.flag.empty()) {
      cm.flag = pc == 0 ? "empty-prediction" : "empty-truth";
    }
    report.per_class.push_back(std::move(cm));
  }
  return report;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& cm : per_class) {
    nlohmann::ordered_json row;
    row["class"] = cm.class_id;
    row["name"] = cm.class_name;
    row["dice"] = cm.dice ? nlohmann::ordered_json(*cm.dice) : nlohmann::ordered_json(nullptr);
    row["tp"] = cm.tp ? nlohmann::ordered_json(*cm.tp) : nlohmann::ordered_json(nullptr);
    row["apd"] = cm.apd ? nlohmann::ordered_json(*cm.apd) : nlohmann::ordered_json(nullptr);
    row["flags"] = cm.flag;
    j.push_back(std::move(row));
  }
  return j.dump(2);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "class,dice,tp,apd,flags\n";
  out.precision(17);
  for (const auto& cm : per_class) {
    out << cm.class_name << ",";
    if (cm.dice) out << *cm.dice;
    out << ",";
    if (cm.tp) out << *cm.tp;
    out << ",";
    if (cm.apd) out << *cm.apd;
    out << "," << cm.flag << "\n";
  }
  return out.str();
}

}  // namespace gnnseg
