#include "dcomposer/report.hpp"

#include "dcomposer/layout.hpp"

namespace dcomposer {

namespace {

std::string_view class_color(ArtifactClass cls) {
  switch (cls) {
    case ArtifactClass::Service: return "#5b6b7a";
    case ArtifactClass::Volume: return "#8e44ad";
    case ArtifactClass::Network: return "#27ae60";
    case ArtifactClass::Config: return "#e67e22";
    case ArtifactClass::Secret: return "#c0392b";
  }
  return "#5b6b7a";
}

}  // namespace

json to_json(const Warning& w) {
  return {{"code", to_string(w.code)},
          {"artifact", w.artifact.value},
          {"property", w.property ? json(*w.property) : json(nullptr)},
          {"message", w.message}};
}

json to_json(const std::vector<Warning>& warnings) {
  json out = json::array();
  for (const auto& w : warnings) out.push_back(to_json(w));
  return out;
}

json to_json(const ParseNotice& n) {
  return {{"severity", to_string(n.severity)},
          {"code", to_string(n.code)},
          {"path", n.path},
          {"line", n.line},
          {"column", n.column},
          {"message", n.message}};
}

json to_json(const std::vector<ParseNotice>& notices) {
  json out = json::array();
  for (const auto& n : notices) out.push_back(to_json(n));
  return out;
}

json to_json(const StackStatus& s) {
  json per = json::object();
  for (const auto& [key, state] : s.per_service) per[key] = to_string(state);
  return {{"aggregate", to_string(s.aggregate)},
          {"color", status_color(s.aggregate)},
          {"per_service", per},
          {"last_transition_us", s.last_transition_us}};
}

json to_json(const ImageSummary& i) {
  return {{"repository", i.repository},
          {"description", i.description},
          {"is_official", i.is_official},
          {"star_count", i.star_count},
          {"pull_count", i.pull_count}};
}

json to_json(const LogEvent& e) {
  return {{"service", e.service ? json(*e.service) : json(nullptr)},
          {"line", e.line},
          {"timestamp_us", e.timestamp_us}};
}

json meta_json() {
  json classes = json::array();
  for (const auto cls : kAllClasses) {
    const auto size = node_size(cls);
    classes.push_back({{"class", to_string(cls)},
                       {"section", section_name(cls)},
                       {"color", class_color(cls)},
                       {"width", size.w},
                       {"height", size.h}});
  }
  json edges = json::array();
  for (const auto tag : kAllEdgeKinds) {
    std::string_view color = class_color(target_class(tag));
    if (tag == EdgeKindTag::DependsOn) color = "#f1c40f";
    if (tag == EdgeKindTag::Link) color = "#3498db";
    edges.push_back({{"kind", to_string(tag)},
                     {"compose_key", compose_key(tag)},
                     {"source", to_string(ArtifactClass::Service)},
                     {"target", to_string(target_class(tag))},
                     {"anchor_color", color}});
  }
  json status = json::object();
  for (const auto a : {Aggregate::Stopped, Aggregate::Starting, Aggregate::Running,
                       Aggregate::Degraded, Aggregate::Error}) {
    status[std::string(to_string(a))] = status_color(a);
  }
  return {{"classes", classes}, {"edge_kinds", edges}, {"status_colors", status}};
}

}  // namespace dcomposer
