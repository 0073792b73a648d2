#include "dcomposer/ops.hpp"

#include "dcomposer/error.hpp"

namespace dcomposer {

namespace {

[[noreturn]] void bad_op(const std::string& why) {
  throw Error(Errc::InvalidValue, "malformed op: " + why);
}

const json& field(const json& op, const char* name) {
  const auto it = op.find(name);
  if (it == op.end()) bad_op(std::string("missing '") + name + "'");
  return *it;
}

std::uint64_t id_field(const json& op, const char* name) {
  const auto& v = field(op, name);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    bad_op(std::string("'") + name + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double number_field(const json& op, const char* name) {
  const auto& v = field(op, name);
  if (!v.is_number()) bad_op(std::string("'") + name + "' must be a number");
  return v.get<double>();
}

}  // namespace

json apply_op(Stack& stack, Diagram& diagram, const json& op) {
  if (!op.is_object()) bad_op("op must be an object");
  const auto& type_field = field(op, "type");
  if (!type_field.is_string()) bad_op("'type' must be a string");
  const auto type = type_field.get<std::string>();

  if (type == "add_artifact") {
    const auto& cls_field = field(op, "class");
    const auto& key_field = field(op, "key");
    if (!cls_field.is_string() || !key_field.is_string()) {
      bad_op("'class' and 'key' must be strings");
    }
    const auto cls = parse_artifact_class(cls_field.get<std::string>());
    if (!cls) bad_op("unknown class '" + cls_field.get<std::string>() + "'");
    const bool placed = op.contains("x") || op.contains("y");
    const double x = placed ? number_field(op, "x") : 0;
    const double y = placed ? number_field(op, "y") : 0;
    const auto props = op.value("properties", json::object());
    const auto id = stack.add_artifact(*cls, key_field.get<std::string>(), props);
    if (placed) {
      diagram.positions[id] = Point{x, y};
      diagram.node_sizes[id] = node_size(*cls);
    }
    reconcile(diagram, stack);
    return {{"id", id.value}};
  }
  if (type == "remove_artifact") {
    const ArtifactId id{id_field(op, "id")};
    stack.remove_artifact(id);
    reconcile(diagram, stack);
    return json::object();
  }
  if (type == "set_property") {
    const ArtifactId id{id_field(op, "id")};
    const auto& path = field(op, "path");
    if (!path.is_string()) bad_op("'path' must be a string");
    stack.set_property(id, path.get<std::string>(), field(op, "value"));
    return json::object();
  }
  if (type == "connect") {
    const ArtifactId from{id_field(op, "from")};
    const ArtifactId to{id_field(op, "to")};
    const auto kind = edge_kind_from_json(field(op, "kind"));
    const auto& edge = stack.connect(from, kind, to);
    return {{"edge", edge.id.value}};
  }
  if (type == "disconnect") {
    stack.disconnect(EdgeId{id_field(op, "edge")});
    return json::object();
  }
  if (type == "move_node") {
    const ArtifactId id{id_field(op, "id")};
    const double x = number_field(op, "x");
    const double y = number_field(op, "y");
    diagram = apply_user_position(diagram, id, x, y);
    return json::object();
  }
  bad_op("unknown type '" + type + "'");
}

}  // namespace dcomposer
