#include "dcomposer/graph.hpp"

#include <map>
#include <set>
#include <sstream>

#include "dcomposer/error.hpp"

namespace dcomposer {

namespace {

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

json to_json(const Diagram& diagram) {
  json nodes = json::array();
  for (const auto& [id, p] : diagram.positions) {
    const auto s = diagram.node_sizes.at(id);
    nodes.push_back({{"id", id.value}, {"x", p.x}, {"y", p.y}, {"w", s.w}, {"h", s.h}});
  }
  return {{"nodes", nodes},
          {"canvas", {{"w", diagram.canvas.w}, {"h", diagram.canvas.h}}}};
}

Diagram diagram_from_json(const json& value, const Stack& stack) {
  try {
    Diagram d;
    for (const auto& n : value.at("nodes")) {
      const ArtifactId id{n.at("id").get<std::uint64_t>()};
      if (!stack.contains(id)) {
        throw Error(Errc::CorruptProject,
                    "diagram refers to unknown artifact " + std::to_string(id.value));
      }
      if (d.positions.count(id)) {
        throw Error(Errc::CorruptProject,
                    "diagram lists artifact " + std::to_string(id.value) + " twice");
      }
      d.positions[id] = Point{n.at("x").get<double>(), n.at("y").get<double>()};
      d.node_sizes[id] = Size{n.at("w").get<double>(), n.at("h").get<double>()};
    }
    const auto& canvas = value.at("canvas");
    d.canvas = Size{canvas.at("w").get<double>(), canvas.at("h").get<double>()};
    return d;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptProject, std::string("bad diagram: ") + e.what());
  }
}

json graph_json(const Stack& stack, const Diagram& diagram) {
  json nodes = json::array();
  for (const auto id : stack.artifact_ids()) {
    json n{{"id", id.value},
           {"class", to_string(*stack.class_of(id))},
           {"key", stack.key_of(id)}};
    if (const auto it = diagram.positions.find(id); it != diagram.positions.end()) {
      const auto s = diagram.node_sizes.at(id);
      n["x"] = it->second.x;
      n["y"] = it->second.y;
      n["w"] = s.w;
      n["h"] = s.h;
    }
    nodes.push_back(std::move(n));
  }
  json edges = json::array();
  for (const auto& e : stack.edges()) edges.push_back(to_json(e));
  return {{"nodes", nodes},
          {"edges", edges},
          {"canvas", {{"w", diagram.canvas.w}, {"h", diagram.canvas.h}}}};
}

std::string graph_dot(const Stack& stack) {
  std::map<ArtifactId, std::string> names;
  std::set<std::string> taken;
  for (const auto id : stack.artifact_ids()) {
    const auto cls = *stack.class_of(id);
    std::string base(stack.key_of(id));
    if (cls != ArtifactClass::Service) base = std::string(to_string(cls)) + ":" + base;
    std::string name = base;
    for (int n = 2; taken.count(name); ++n) name = base + "-" + std::to_string(n);
    taken.insert(name);
    names[id] = name;
  }

  std::ostringstream out;
  out << "digraph " << dot_quote(stack.name().empty() ? "stack" : stack.name()) << " {\n";
  for (const auto& [id, name] : names) {
    const auto cls = *stack.class_of(id);
    out << "  " << dot_quote(name) << " [shape="
        << (cls == ArtifactClass::Service ? "box" : "ellipse") << ", class="
        << dot_quote(to_string(cls)) << "];\n";
  }
  for (const auto& e : stack.edges()) {
    out << "  " << dot_quote(names.at(e.from)) << " -> " << dot_quote(names.at(e.to))
        << " [label=" << dot_quote(compose_key(tag_of(e.kind))) << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace dcomposer
