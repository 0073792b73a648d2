#include "dcomposer/layout.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>

#include "dcomposer/error.hpp"
#include "dcomposer/validation.hpp"

namespace dcomposer {

namespace {

void fit_canvas(Diagram& d, double margin) {
  d.canvas = {};
  for (const auto& [id, p] : d.positions) {
    const auto s = d.node_sizes.at(id);
    d.canvas.w = std::max(d.canvas.w, p.x + s.w + margin);
    d.canvas.h = std::max(d.canvas.h, p.y + s.h + margin);
  }
}

// Column index per service over the condensation of the DependsOn graph.
std::unordered_map<ArtifactId, int> depths(const Stack& stack) {
  std::unordered_map<ArtifactId, ArtifactId> rep;
  for (const auto& s : stack.services()) rep[s.id] = s.id;
  for (const auto& comp : detect_cycles(stack)) {
    for (const auto id : comp) rep[id] = comp.front();
  }
  std::unordered_map<ArtifactId, std::vector<ArtifactId>> deps;
  for (const auto& e : stack.edges()) {
    if (tag_of(e.kind) != EdgeKindTag::DependsOn) continue;
    const auto a = rep.at(e.from);
    const auto b = rep.at(e.to);
    if (a != b) deps[a].push_back(b);
  }
  std::unordered_map<ArtifactId, int> memo;
  std::function<int(ArtifactId)> depth = [&](ArtifactId c) -> int {
    if (const auto it = memo.find(c); it != memo.end()) return it->second;
    int d = 0;
    for (const auto b : deps[c]) d = std::max(d, depth(b) + 1);
    memo[c] = d;
    return d;
  };
  std::unordered_map<ArtifactId, int> out;
  for (const auto& s : stack.services()) out[s.id] = depth(rep.at(s.id));
  return out;
}

std::vector<std::pair<ArtifactId, ArtifactClass>> lower_band(const Stack& stack) {
  std::vector<std::pair<ArtifactId, ArtifactClass>> out;
  for (const auto& n : stack.volumes()) out.emplace_back(n.id, ArtifactClass::Volume);
  for (const auto& n : stack.networks()) out.emplace_back(n.id, ArtifactClass::Network);
  for (const auto& n : stack.configs()) out.emplace_back(n.id, ArtifactClass::Config);
  for (const auto& n : stack.secrets()) out.emplace_back(n.id, ArtifactClass::Secret);
  return out;
}

}  // namespace

Size node_size(ArtifactClass cls) noexcept {
  return cls == ArtifactClass::Service ? Size{200, 120} : Size{140, 60};
}

Diagram auto_layout(const Stack& stack, const LayoutConfig& config) {
  Diagram d;
  const auto service = node_size(ArtifactClass::Service);
  const auto depth = depths(stack);

  std::map<int, int> rows;
  double services_bottom = config.margin;
  for (const auto& s : stack.services()) {
    const int col = depth.at(s.id);
    const int row = rows[col]++;
    const Point p{config.margin + col * (service.w + config.h_gap),
                  config.margin + row * (service.h + config.v_gap)};
    d.positions[s.id] = p;
    d.node_sizes[s.id] = service;
    services_bottom = std::max(services_bottom, p.y + service.h);
  }

  const double band_y =
      stack.services().empty() ? config.margin : services_bottom + config.band_gap;
  double x = config.margin;
  for (const auto& [id, cls] : lower_band(stack)) {
    const auto size = node_size(cls);
    d.positions[id] = Point{x, band_y};
    d.node_sizes[id] = size;
    x += size.w + config.h_gap;
  }

  fit_canvas(d, config.margin);
  return d;
}

Diagram apply_user_position(Diagram diagram, ArtifactId id, double x, double y) {
  const auto it = diagram.positions.find(id);
  if (it == diagram.positions.end()) {
    throw Error(Errc::UnknownArtifact,
                "no diagram entry for artifact " + std::to_string(id.value));
  }
  it->second = Point{x, y};
  const auto s = diagram.node_sizes.at(id);
  diagram.canvas.w = std::max(diagram.canvas.w, x + s.w);
  diagram.canvas.h = std::max(diagram.canvas.h, y + s.h);
  return diagram;
}

void reconcile(Diagram& diagram, const Stack& stack, const LayoutConfig& config) {
  std::erase_if(diagram.positions,
                [&](const auto& kv) { return !stack.contains(kv.first); });
  std::erase_if(diagram.node_sizes,
                [&](const auto& kv) { return !stack.contains(kv.first); });

  double right = config.margin - config.h_gap;
  double services_bottom = config.margin;
  for (const auto& [id, p] : diagram.positions) {
    const auto s = diagram.node_sizes.at(id);
    right = std::max(right, p.x + s.w);
    if (stack.class_of(id) == ArtifactClass::Service) {
      services_bottom = std::max(services_bottom, p.y + s.h);
    }
  }
  if (!stack.services().empty() &&
      services_bottom == config.margin) {
    services_bottom += node_size(ArtifactClass::Service).h;
  }

  for (const auto id : stack.artifact_ids()) {
    if (diagram.positions.count(id)) continue;
    const auto cls = *stack.class_of(id);
    const auto size = node_size(cls);
    const double y = cls == ArtifactClass::Service
                         ? config.margin
                         : services_bottom + config.band_gap;
    diagram.positions[id] = Point{right + config.h_gap, y};
    diagram.node_sizes[id] = size;
    right += config.h_gap + size.w;
  }

  for (const auto& [id, p] : diagram.positions) {
    const auto s = diagram.node_sizes.at(id);
    diagram.canvas.w = std::max(diagram.canvas.w, p.x + s.w + config.margin);
    diagram.canvas.h = std::max(diagram.canvas.h, p.y + s.h + config.margin);
  }
}

}  // namespace dcomposer
