#include "dcomposer/json_codec.hpp"

#include "dcomposer/error.hpp"

namespace dcomposer {

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

[[noreturn]] void invalid(const std::string& why) {
  throw Error(Errc::InvalidValue, why);
}

std::uint16_t port_number(const json& v, const char* field) {
  if (!v.is_number_integer()) {
    invalid(std::string(field) + " must be an integer");
  }
  const auto n = v.get<long long>();
  if (n < 1 || n > 65535) {
    invalid(std::string(field) + " must be within 1-65535");
  }
  return static_cast<std::uint16_t>(n);
}

std::optional<std::string> opt_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) invalid(std::string(field) + " must be a string");
  return it->get<std::string>();
}

std::optional<std::uint32_t> opt_u32(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer() || it->get<long long>() < 0 ||
      it->get<long long>() > UINT32_MAX) {
    invalid(std::string(field) + " must be a non-negative integer");
  }
  return it->get<std::uint32_t>();
}

std::optional<std::vector<std::string>> opt_strings(const json& obj,
                                                    const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) invalid(std::string(field) + " must be a list");
  std::vector<std::string> out;
  for (const auto& s : *it) {
    if (!s.is_string()) invalid(std::string(field) + " must hold strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

void require_object(const json& v, const char* what) {
  if (!v.is_object()) invalid(std::string(what) + " must be an object");
}

json data_source_json(const std::optional<DataSource>& source) {
  if (!source) return nullptr;
  if (const auto* f = std::get_if<FileSource>(&*source)) {
    return {{"file", f->path}};
  }
  return {{"external", true}};
}

std::optional<DataSource> data_source_from_json(const json& v) {
  if (v.is_null()) return std::nullopt;
  require_object(v, "source");
  if (v.contains("file")) {
    auto path = opt_string(v, "file").value_or("");
    if (path.empty()) invalid("file source path must not be empty");
    return FileSource{path};
  }
  if (v.value("external", false)) return ExternalSource{};
  invalid("source must be a file or external");
}

ArtifactId id_from(const json& v) {
  return ArtifactId{v.at("id").get<std::uint64_t>()};
}

template <typename Node>
void fill_data(Node& node, const json& v) {
  node.id = id_from(v);
  node.key = v.at("key").get<std::string>();
  node.source = data_source_from_json(v.value("source", json(nullptr)));
  node.extras = sidecar_from_json(v.value("extras", json::array()));
}

}  // namespace

json to_json(const ImageRef& image) {
  return {{"repository", image.repository}, {"tag", image.tag}};
}

json to_json(const PortMapping& port) {
  json j = {{"container_port", port.container_port},
            {"protocol", to_string(port.protocol)}};
  if (port.host_port) j["host_port"] = *port.host_port;
  return j;
}

json to_json(const EnvVar& env) {
  return {{"name", env.name}, {"value", optional_json(env.value)}};
}

json to_json(const Healthcheck& check) {
  return {{"test", check.test},
          {"interval", optional_json(check.interval)},
          {"timeout", optional_json(check.timeout)},
          {"retries", optional_json(check.retries)},
          {"extras", to_json(check.extras)}};
}

json to_json(const Sidecar& sidecar) {
  json arr = json::array();
  for (const auto& e : sidecar) arr.push_back({{"key", e.key}, {"yaml", e.yaml}});
  return arr;
}

json to_json(const EdgeKind& kind) {
  json j = {{"type", to_string(tag_of(kind))}};
  std::visit(
      [&j](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Link>) {
          j["alias"] = optional_json(k.alias);
        } else if constexpr (std::is_same_v<K, NetworkAttachment>) {
          j["aliases"] = k.aliases;
        } else if constexpr (std::is_same_v<K, VolumeMount>) {
          j["target"] = k.target;
          j["read_only"] = k.read_only;
        } else if constexpr (std::is_same_v<K, ConfigGrant> ||
                             std::is_same_v<K, SecretGrant>) {
          j["target"] = optional_json(k.target);
          j["mode"] = optional_json(k.mode);
        }
      },
      kind);
  return j;
}

json to_json(const Edge& edge) {
  return {{"id", edge.id.value},
          {"kind", to_json(edge.kind)},
          {"from", edge.from.value},
          {"to", edge.to.value}};
}

json to_json(const ServiceNode& node) {
  json env = json::array();
  for (const auto& e : node.environment) env.push_back(to_json(e));
  json ports = json::array();
  for (const auto& p : node.ports) ports.push_back(to_json(p));
  return {{"id", node.id.value},
          {"class", "service"},
          {"key", node.key},
          {"image", node.image ? to_json(*node.image) : json(nullptr)},
          {"container_name", optional_json(node.container_name)},
          {"command", optional_json(node.command)},
          {"entrypoint", optional_json(node.entrypoint)},
          {"environment", env},
          {"ports", ports},
          {"hostname", optional_json(node.hostname)},
          {"restart", to_string(node.restart)},
          {"stdin_open", node.stdin_open},
          {"tty", node.tty},
          {"healthcheck",
           node.healthcheck ? to_json(*node.healthcheck) : json(nullptr)},
          {"mem_limit", optional_json(node.mem_limit)},
          {"extras", to_json(node.extras)}};
}

json to_json(const VolumeNode& node) {
  return {{"id", node.id.value},
          {"class", "volume"},
          {"key", node.key},
          {"driver", optional_json(node.driver)},
          {"extras", to_json(node.extras)}};
}

json to_json(const NetworkNode& node) {
  return {{"id", node.id.value},
          {"class", "network"},
          {"key", node.key},
          {"driver", optional_json(node.driver)},
          {"internal", node.internal},
          {"extras", to_json(node.extras)}};
}

json to_json(const DataNode& node, ArtifactClass cls) {
  return {{"id", node.id.value},
          {"class", to_string(cls)},
          {"key", node.key},
          {"source", data_source_json(node.source)},
          {"extras", to_json(node.extras)}};
}

json to_json(const Stack& stack) {
  json j;
  j["name"] = stack.name();
  j["version"] = optional_json(stack.compose_version());
  j["services"] = json::array();
  for (const auto& n : stack.services()) j["services"].push_back(to_json(n));
  j["volumes"] = json::array();
  for (const auto& n : stack.volumes()) j["volumes"].push_back(to_json(n));
  j["networks"] = json::array();
  for (const auto& n : stack.networks()) j["networks"].push_back(to_json(n));
  j["configs"] = json::array();
  for (const auto& n : stack.configs()) {
    j["configs"].push_back(to_json(n, ArtifactClass::Config));
  }
  j["secrets"] = json::array();
  for (const auto& n : stack.secrets()) {
    j["secrets"].push_back(to_json(n, ArtifactClass::Secret));
  }
  j["edges"] = json::array();
  for (const auto& e : stack.edges()) j["edges"].push_back(to_json(e));
  j["extras"] = to_json(stack.extras());
  j["next_id"] = stack.next_id();
  return j;
}

PortMapping port_from_json(const json& value) {
  require_object(value, "port mapping");
  const auto container = value.find("container_port");
  const auto host = value.find("host_port");
  const bool has_container =
      container != value.end() && !container->is_null();
  const bool has_host = host != value.end() && !host->is_null();
  if (!has_container) {
    if (has_host) {
      throw Error(Errc::StructuralViolation,
                  "a host port requires a container port");
    }
    invalid("container_port is required");
  }
  PortMapping port;
  port.container_port = port_number(*container, "container_port");
  if (has_host) port.host_port = port_number(*host, "host_port");
  if (auto proto = opt_string(value, "protocol")) {
    auto parsed = parse_protocol(*proto);
    if (!parsed) invalid("protocol must be tcp or udp");
    port.protocol = *parsed;
  }
  return port;
}

std::vector<PortMapping> ports_from_json(const json& value) {
  if (!value.is_array()) invalid("ports must be a list");
  std::vector<PortMapping> out;
  for (const auto& item : value) out.push_back(port_from_json(item));
  return out;
}

std::vector<EnvVar> environment_from_json(const json& value) {
  std::vector<EnvVar> out;
  auto push = [&out](std::string name, const json& v) {
    if (name.empty()) invalid("environment names must not be empty");
    EnvVar env{std::move(name), std::nullopt};
    if (v.is_string()) {
      env.value = v.get<std::string>();
    } else if (v.is_number() || v.is_boolean()) {
      env.value = v.dump();
    } else if (!v.is_null()) {
      invalid("environment values must be scalars");
    }
    out.push_back(std::move(env));
  };
  if (value.is_object()) {
    for (const auto& [k, v] : value.items()) push(k, v);
  } else if (value.is_array()) {
    for (const auto& item : value) {
      require_object(item, "environment entry");
      if (!item.contains("name") || !item["name"].is_string()) {
        invalid("environment entries need a string name");
      }
      push(item["name"].get<std::string>(), item.value("value", json(nullptr)));
    }
  } else {
    invalid("environment must be a list or an object");
  }
  return out;
}

Healthcheck healthcheck_from_json(const json& value) {
  require_object(value, "healthcheck");
  Healthcheck check;
  check.test = opt_strings(value, "test").value_or(std::vector<std::string>{});
  check.interval = opt_string(value, "interval");
  check.timeout = opt_string(value, "timeout");
  check.retries = opt_u32(value, "retries");
  check.extras = sidecar_from_json(value.value("extras", json::array()));
  return check;
}

Sidecar sidecar_from_json(const json& value) {
  if (!value.is_array()) invalid("extras must be a list");
  Sidecar out;
  for (const auto& e : value) {
    require_object(e, "extras entry");
    out.push_back(
        OpaqueEntry{e.at("key").get<std::string>(), e.at("yaml").get<std::string>()});
  }
  return out;
}

EdgeKind edge_kind_from_json(const json& raw) {
  const json value = raw.is_string() ? json{{"type", raw}} : raw;
  require_object(value, "edge kind");
  const auto type = value.value("type", std::string{});
  const auto tag = parse_edge_kind(type);
  if (!tag) invalid("unknown edge kind '" + type + "'");
  switch (*tag) {
    case EdgeKindTag::DependsOn: return DependsOn{};
    case EdgeKindTag::Link: return Link{opt_string(value, "alias")};
    case EdgeKindTag::NetworkAttachment:
      return NetworkAttachment{
          opt_strings(value, "aliases").value_or(std::vector<std::string>{})};
    case EdgeKindTag::VolumeMount: {
      auto target = opt_string(value, "target");
      if (!target || target->empty()) invalid("a volume mount needs a target");
      return VolumeMount{*target, value.value("read_only", false)};
    }
    case EdgeKindTag::ConfigGrant:
      return ConfigGrant{opt_string(value, "target"), opt_u32(value, "mode")};
    case EdgeKindTag::SecretGrant:
      return SecretGrant{opt_string(value, "target"), opt_u32(value, "mode")};
  }
  invalid("unknown edge kind");
}

Stack stack_from_json(const json& value) {
  try {
    require_object(value, "stack");
    Stack stack(value.value("name", std::string{}));
    if (auto v = value.find("version"); v != value.end() && !v->is_null()) {
      stack.set_compose_version(v->get<std::string>());
    }
    for (const auto& j : value.at("services")) {
      ServiceNode n;
      n.id = id_from(j);
      n.key = j.at("key").get<std::string>();
      if (auto img = j.find("image"); img != j.end() && !img->is_null()) {
        n.image = ImageRef{img->at("repository").get<std::string>(),
                           img->at("tag").get<std::string>()};
      }
      n.container_name = opt_string(j, "container_name");
      n.command = opt_strings(j, "command");
      n.entrypoint = opt_strings(j, "entrypoint");
      n.environment = environment_from_json(j.value("environment", json::array()));
      n.ports = ports_from_json(j.value("ports", json::array()));
      n.hostname = opt_string(j, "hostname");
      auto restart = parse_restart(j.value("restart", std::string("no")));
      if (!restart) invalid("unknown restart policy");
      n.restart = *restart;
      n.stdin_open = j.value("stdin_open", false);
      n.tty = j.value("tty", false);
      if (auto hc = j.find("healthcheck"); hc != j.end() && !hc->is_null()) {
        n.healthcheck = healthcheck_from_json(*hc);
      }
      n.mem_limit = opt_string(j, "mem_limit");
      n.extras = sidecar_from_json(j.value("extras", json::array()));
      stack.restore(std::move(n));
    }
    for (const auto& j : value.at("volumes")) {
      VolumeNode n;
      n.id = id_from(j);
      n.key = j.at("key").get<std::string>();
      n.driver = opt_string(j, "driver");
      n.extras = sidecar_from_json(j.value("extras", json::array()));
      stack.restore(std::move(n));
    }
    for (const auto& j : value.at("networks")) {
      NetworkNode n;
      n.id = id_from(j);
      n.key = j.at("key").get<std::string>();
      n.driver = opt_string(j, "driver");
      n.internal = j.value("internal", false);
      n.extras = sidecar_from_json(j.value("extras", json::array()));
      stack.restore(std::move(n));
    }
    for (const auto& j : value.at("configs")) {
      ConfigNode n;
      fill_data(n, j);
      stack.restore(std::move(n));
    }
    for (const auto& j : value.at("secrets")) {
      SecretNode n;
      fill_data(n, j);
      stack.restore(std::move(n));
    }
    for (const auto& j : value.at("edges")) {
      stack.restore(Edge{EdgeId{j.at("id").get<std::uint64_t>()},
                         edge_kind_from_json(j.at("kind")),
                         ArtifactId{j.at("from").get<std::uint64_t>()},
                         ArtifactId{j.at("to").get<std::uint64_t>()}});
    }
    stack.extras() = sidecar_from_json(value.value("extras", json::array()));
    if (auto next = value.find("next_id"); next != value.end()) {
      stack.reserve_ids(next->get<std::uint64_t>());
    }
    return stack;
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptProject) throw;
    throw Error(Errc::CorruptProject, e.what());
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptProject, e.what());
  }
}

}  // namespace dcomposer
