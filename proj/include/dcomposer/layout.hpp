#pragma once

#include <map>

#include "dcomposer/model.hpp"

namespace dcomposer {

struct Point {
  double x = 0;
  double y = 0;
  bool operator==(const Point&) const = default;
};

struct Size {
  double w = 0;
  double h = 0;
  bool operator==(const Size&) const = default;
};

struct Diagram {
  std::map<ArtifactId, Point> positions;
  std::map<ArtifactId, Size> node_sizes;
  Size canvas;
  bool operator==(const Diagram&) const = default;
};

struct LayoutConfig {
  double h_gap = 100;
  double v_gap = 40;
  double band_gap = 120;
  double margin = 40;
};

// Fixed per class; services are drawn larger than the resources they use.
[[nodiscard]] Size node_size(ArtifactClass cls) noexcept;

// Services are placed in columns by dependency depth (dependencies to the
// left, members of one cycle share a column) and rows by insertion order.
// Volumes, networks, configs and secrets follow in a single row below.
[[nodiscard]] Diagram auto_layout(const Stack& stack, const LayoutConfig& config = {});

// Throws Error(UnknownArtifact) if `id` has no entry in the diagram.
[[nodiscard]] Diagram apply_user_position(Diagram diagram, ArtifactId id,
                                          double x, double y);

// Adds any artifact missing from the diagram (to the right of the existing
// extents), drops entries for ids no longer in the stack, and grows the
// canvas to fit.
void reconcile(Diagram& diagram, const Stack& stack, const LayoutConfig& config = {});

}  // namespace dcomposer
