#include "dcomposer/model.hpp"

#include <algorithm>
#include <string>

#include "dcomposer/error.hpp"
#include "dcomposer/json_codec.hpp"

namespace dcomposer {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Nodes>
auto find_in(Nodes& nodes, ArtifactId id) noexcept -> decltype(&nodes[0]) {
  auto it = std::find_if(nodes.begin(), nodes.end(),
                         [id](const auto& n) { return n.id == id; });
  return it == nodes.end() ? nullptr : &*it;
}

template <typename Nodes>
bool erase_in(Nodes& nodes, ArtifactId id) {
  auto it = std::find_if(nodes.begin(), nodes.end(),
                         [id](const auto& n) { return n.id == id; });
  if (it == nodes.end()) return false;
  nodes.erase(it);
  return true;
}

[[noreturn]] void unknown_property(std::string_view cls, std::string_view path) {
  throw Error(Errc::UnknownProperty, "no property '" + std::string(path) +
                                         "' on " + std::string(cls));
}

[[noreturn]] void invalid_value(std::string_view path, std::string_view why) {
  throw Error(Errc::InvalidValue,
              "invalid value for '" + std::string(path) + "': " +
                  std::string(why));
}

// Text-valued properties accept strings and scalars (stored verbatim as text).
std::string as_text(const json& v, std::string_view path) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  invalid_value(path, "expected a string");
}

std::optional<std::string> as_optional_text(const json& v,
                                            std::string_view path) {
  if (v.is_null()) return std::nullopt;
  return as_text(v, path);
}

bool as_bool(const json& v, std::string_view path) {
  if (!v.is_boolean()) invalid_value(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_key(const json& v, std::string_view path) {
  auto key = as_text(v, path);
  if (trim(key).empty()) invalid_value(path, "key must not be blank");
  return key;
}

std::optional<std::vector<std::string>> as_string_list(const json& v,
                                                       std::string_view path) {
  if (v.is_null()) return std::nullopt;
  if (v.is_string()) return std::vector<std::string>{v.get<std::string>()};
  if (!v.is_array()) invalid_value(path, "expected a list of strings");
  std::vector<std::string> out;
  for (const auto& item : v) out.push_back(as_text(item, path));
  return out;
}

void set_service_property(ServiceNode& svc, std::string_view path,
                          const json& value) {
  if (path == "key") {
    svc.key = as_key(value, path);
  } else if (path == "image") {
    if (value.is_null()) {
      svc.image.reset();
    } else {
      svc.image = ImageRef::parse(as_text(value, path));
    }
  } else if (path == "image.repository") {
    auto repo = as_text(value, path);
    if (!svc.image) svc.image = ImageRef{};
    svc.image->repository = std::move(repo);
  } else if (path == "image.tag") {
    auto tag = value.is_null() ? std::string("latest") : as_text(value, path);
    if (!svc.image) svc.image = ImageRef{};
    svc.image->tag = std::move(tag);
  } else if (path == "container_name") {
    svc.container_name = as_optional_text(value, path);
  } else if (path == "hostname") {
    svc.hostname = as_optional_text(value, path);
  } else if (path == "command") {
    svc.command = as_string_list(value, path);
  } else if (path == "entrypoint") {
    svc.entrypoint = as_string_list(value, path);
  } else if (path == "environment") {
    svc.environment =
        value.is_null() ? std::vector<EnvVar>{} : environment_from_json(value);
  } else if (path == "ports") {
    svc.ports =
        value.is_null() ? std::vector<PortMapping>{} : ports_from_json(value);
  } else if (path == "restart") {
    if (value.is_null()) {
      svc.restart = RestartPolicy::No;
    } else {
      auto policy = parse_restart(as_text(value, path));
      if (!policy) invalid_value(path, "unknown restart policy");
      svc.restart = *policy;
    }
  } else if (path == "stdin_open") {
    svc.stdin_open = as_bool(value, path);
  } else if (path == "tty") {
    svc.tty = as_bool(value, path);
  } else if (path == "healthcheck") {
    if (value.is_null()) {
      svc.healthcheck.reset();
    } else {
      svc.healthcheck = healthcheck_from_json(value);
    }
  } else if (path.starts_with("healthcheck.")) {
    const auto field = path.substr(std::string_view("healthcheck.").size());
    Healthcheck check = svc.healthcheck.value_or(Healthcheck{});
    if (field == "test") {
      check.test = as_string_list(value, path).value_or(
          std::vector<std::string>{});
    } else if (field == "interval") {
      check.interval = as_optional_text(value, path);
    } else if (field == "timeout") {
      check.timeout = as_optional_text(value, path);
    } else if (field == "retries") {
      if (value.is_null()) {
        check.retries.reset();
      } else if (value.is_number_integer() && value.get<long long>() >= 0 &&
                 value.get<long long>() <= UINT32_MAX) {
        check.retries = value.get<std::uint32_t>();
      } else {
        invalid_value(path, "expected a non-negative integer");
      }
    } else {
      unknown_property("service", path);
    }
    svc.healthcheck = std::move(check);
  } else if (path == "mem_limit") {
    svc.mem_limit = as_optional_text(value, path);
  } else if (path.starts_with("ports.") && path.ends_with(".host_port")) {
    // Standalone host ports do not exist in the model.
    throw Error(Errc::StructuralViolation,
                "host_port can only be set as part of a port mapping");
  } else {
    unknown_property("service", path);
  }
}

void set_data_property(DataNode& node, std::string_view cls,
                       std::string_view path, const json& value) {
  if (path == "key") {
    node.key = as_key(value, path);
  } else if (path == "file") {
    if (value.is_null()) {
      if (node.source && std::holds_alternative<FileSource>(*node.source)) {
        node.source.reset();
      }
      return;
    }
    auto file = as_text(value, path);
    if (file.empty()) invalid_value(path, "file path must not be empty");
    node.source = FileSource{std::move(file)};
  } else if (path == "external") {
    if (as_bool(value, path)) {
      node.source = ExternalSource{};
    } else if (node.source &&
               std::holds_alternative<ExternalSource>(*node.source)) {
      node.source.reset();
    }
  } else {
    unknown_property(cls, path);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Enum helpers
// ---------------------------------------------------------------------------

std::string_view to_string(ArtifactClass cls) noexcept {
  switch (cls) {
    case ArtifactClass::Service: return "service";
    case ArtifactClass::Volume: return "volume";
    case ArtifactClass::Network: return "network";
    case ArtifactClass::Config: return "config";
    case ArtifactClass::Secret: return "secret";
  }
  return "service";
}

std::optional<ArtifactClass> parse_artifact_class(
    std::string_view text) noexcept {
  for (auto cls : kAllClasses) {
    if (text == to_string(cls) || text == section_name(cls)) return cls;
  }
  return std::nullopt;
}

std::string_view section_name(ArtifactClass cls) noexcept {
  switch (cls) {
    case ArtifactClass::Service: return "services";
    case ArtifactClass::Volume: return "volumes";
    case ArtifactClass::Network: return "networks";
    case ArtifactClass::Config: return "configs";
    case ArtifactClass::Secret: return "secrets";
  }
  return "services";
}

const OpaqueEntry* find_entry(const Sidecar& sidecar,
                              std::string_view key) noexcept {
  auto it = std::find_if(sidecar.begin(), sidecar.end(),
                         [key](const auto& e) { return e.key == key; });
  return it == sidecar.end() ? nullptr : &*it;
}

ImageRef ImageRef::parse(std::string_view text) {
  ImageRef ref;
  if (text.find('@') != std::string_view::npos) {
    ref.repository = std::string(text);
    ref.tag.clear();
    return ref;
  }
  const auto colon = text.rfind(':');
  const auto slash = text.rfind('/');
  if (colon != std::string_view::npos &&
      (slash == std::string_view::npos || colon > slash)) {
    ref.repository = std::string(text.substr(0, colon));
    ref.tag = std::string(text.substr(colon + 1));
  } else {
    ref.repository = std::string(text);
  }
  return ref;
}

std::string ImageRef::text(bool omit_default_tag) const {
  if (tag.empty() || (omit_default_tag && tag == "latest")) return repository;
  return repository + ":" + tag;
}

std::string_view to_string(Protocol p) noexcept {
  return p == Protocol::Udp ? "udp" : "tcp";
}

std::string_view to_string(RestartPolicy r) noexcept {
  switch (r) {
    case RestartPolicy::No: return "no";
    case RestartPolicy::Always: return "always";
    case RestartPolicy::OnFailure: return "on-failure";
    case RestartPolicy::UnlessStopped: return "unless-stopped";
  }
  return "no";
}

std::optional<Protocol> parse_protocol(std::string_view text) noexcept {
  if (text == "tcp") return Protocol::Tcp;
  if (text == "udp") return Protocol::Udp;
  return std::nullopt;
}

std::optional<RestartPolicy> parse_restart(std::string_view text) noexcept {
  for (auto r : {RestartPolicy::No, RestartPolicy::Always,
                 RestartPolicy::OnFailure, RestartPolicy::UnlessStopped}) {
    if (text == to_string(r)) return r;
  }
  return std::nullopt;
}

EdgeKindTag tag_of(const EdgeKind& kind) noexcept {
  return static_cast<EdgeKindTag>(kind.index());
}

std::string_view to_string(EdgeKindTag tag) noexcept {
  switch (tag) {
    case EdgeKindTag::DependsOn: return "DependsOn";
    case EdgeKindTag::Link: return "Link";
    case EdgeKindTag::NetworkAttachment: return "NetworkAttachment";
    case EdgeKindTag::VolumeMount: return "VolumeMount";
    case EdgeKindTag::ConfigGrant: return "ConfigGrant";
    case EdgeKindTag::SecretGrant: return "SecretGrant";
  }
  return "DependsOn";
}

std::optional<EdgeKindTag> parse_edge_kind(std::string_view text) noexcept {
  for (auto tag : kAllEdgeKinds) {
    if (text == to_string(tag) || text == compose_key(tag)) return tag;
  }
  return std::nullopt;
}

std::string_view compose_key(EdgeKindTag tag) noexcept {
  switch (tag) {
    case EdgeKindTag::DependsOn: return "depends_on";
    case EdgeKindTag::Link: return "links";
    case EdgeKindTag::NetworkAttachment: return "networks";
    case EdgeKindTag::VolumeMount: return "volumes";
    case EdgeKindTag::ConfigGrant: return "configs";
    case EdgeKindTag::SecretGrant: return "secrets";
  }
  return "depends_on";
}

ArtifactClass target_class(EdgeKindTag tag) noexcept {
  switch (tag) {
    case EdgeKindTag::DependsOn:
    case EdgeKindTag::Link: return ArtifactClass::Service;
    case EdgeKindTag::NetworkAttachment: return ArtifactClass::Network;
    case EdgeKindTag::VolumeMount: return ArtifactClass::Volume;
    case EdgeKindTag::ConfigGrant: return ArtifactClass::Config;
    case EdgeKindTag::SecretGrant: return ArtifactClass::Secret;
  }
  return ArtifactClass::Service;
}

// ---------------------------------------------------------------------------
// Stack
// ---------------------------------------------------------------------------

Stack new_stack(std::string name) { return Stack(std::move(name)); }

std::size_t Stack::artifact_count() const noexcept {
  return services_.size() + volumes_.size() + networks_.size() +
         configs_.size() + secrets_.size();
}

ArtifactId Stack::add(ServiceNode node) {
  node.id = take_id();
  services_.push_back(std::move(node));
  return services_.back().id;
}
ArtifactId Stack::add(VolumeNode node) {
  node.id = take_id();
  volumes_.push_back(std::move(node));
  return volumes_.back().id;
}
ArtifactId Stack::add(NetworkNode node) {
  node.id = take_id();
  networks_.push_back(std::move(node));
  return networks_.back().id;
}
ArtifactId Stack::add(ConfigNode node) {
  node.id = take_id();
  configs_.push_back(std::move(node));
  return configs_.back().id;
}
ArtifactId Stack::add(SecretNode node) {
  node.id = take_id();
  secrets_.push_back(std::move(node));
  return secrets_.back().id;
}

ArtifactId Stack::add_artifact(ArtifactClass cls, std::string key) {
  switch (cls) {
    case ArtifactClass::Service: {
      ServiceNode n;
      n.key = std::move(key);
      return add(std::move(n));
    }
    case ArtifactClass::Volume: {
      VolumeNode n;
      n.key = std::move(key);
      return add(std::move(n));
    }
    case ArtifactClass::Network: {
      NetworkNode n;
      n.key = std::move(key);
      return add(std::move(n));
    }
    case ArtifactClass::Config: {
      ConfigNode n;
      n.key = std::move(key);
      return add(std::move(n));
    }
    case ArtifactClass::Secret: {
      SecretNode n;
      n.key = std::move(key);
      return add(std::move(n));
    }
  }
  throw Error(Errc::InvalidValue, "unknown artifact class");
}

ArtifactId Stack::add_artifact(ArtifactClass cls, std::string key,
                               const json& properties) {
  if (!properties.is_null() && !properties.is_object()) {
    throw Error(Errc::InvalidValue, "initial properties must be an object");
  }
  const auto id = add_artifact(cls, std::move(key));
  try {
    if (properties.is_object()) {
      for (const auto& [path, value] : properties.items()) {
        set_property(id, path, value);
      }
    }
  } catch (...) {
    remove_artifact(id);
    throw;
  }
  return id;
}

std::vector<Edge> Stack::remove_artifact(ArtifactId id) {
  const bool removed = erase_in(services_, id) || erase_in(volumes_, id) ||
                       erase_in(networks_, id) || erase_in(configs_, id) ||
                       erase_in(secrets_, id);
  if (!removed) {
    throw Error(Errc::UnknownArtifact,
                "unknown artifact id " + std::to_string(id.value));
  }
  std::vector<Edge> incident;
  auto keep = std::stable_partition(
      edges_.begin(), edges_.end(),
      [id](const Edge& e) { return e.from != id && e.to != id; });
  incident.assign(std::make_move_iterator(keep),
                  std::make_move_iterator(edges_.end()));
  edges_.erase(keep, edges_.end());
  return incident;
}

void Stack::check_edge(ArtifactId from, const EdgeKind& kind,
                       ArtifactId to) const {
  const auto from_cls = class_of(from);
  const auto to_cls = class_of(to);
  if (!from_cls) {
    throw Error(Errc::UnknownArtifact,
                "unknown artifact id " + std::to_string(from.value));
  }
  if (!to_cls) {
    throw Error(Errc::UnknownArtifact,
                "unknown artifact id " + std::to_string(to.value));
  }
  const auto tag = tag_of(kind);
  if (*from_cls != ArtifactClass::Service) {
    throw Error(Errc::TypeMismatch, "connections must start at a service");
  }
  if (*to_cls != target_class(tag)) {
    throw Error(Errc::TypeMismatch,
                std::string(to_string(tag)) + " cannot target a " +
                    std::string(to_string(*to_cls)));
  }
  if ((tag == EdgeKindTag::DependsOn || tag == EdgeKindTag::Link) &&
      from == to) {
    throw Error(Errc::SelfEdge,
                std::string(to_string(tag)) + " cannot target itself");
  }
  const bool duplicate =
      std::any_of(edges_.begin(), edges_.end(), [&](const Edge& e) {
        return e.from == from && e.to == to && tag_of(e.kind) == tag;
      });
  if (duplicate) {
    throw Error(Errc::DuplicateEdge, "an identical " +
                                         std::string(to_string(tag)) +
                                         " connection already exists");
  }
}

const Edge& Stack::connect(ArtifactId from, EdgeKind kind, ArtifactId to) {
  check_edge(from, kind, to);
  edges_.push_back(Edge{EdgeId{next_id_++}, std::move(kind), from, to});
  return edges_.back();
}

Edge Stack::disconnect(EdgeId id) {
  auto it = std::find_if(edges_.begin(), edges_.end(),
                         [id](const Edge& e) { return e.id == id; });
  if (it == edges_.end()) {
    throw Error(Errc::UnknownEdge, "unknown edge id " + std::to_string(id.value));
  }
  Edge removed = std::move(*it);
  edges_.erase(it);
  return removed;
}

void Stack::set_property(ArtifactId id, std::string_view path,
                         const json& value) {
  if (auto* svc = find_service(id)) {
    set_service_property(*svc, path, value);
  } else if (auto* vol = find_volume(id)) {
    if (path == "key") {
      vol->key = as_key(value, path);
    } else if (path == "driver") {
      vol->driver = as_optional_text(value, path);
    } else {
      unknown_property("volume", path);
    }
  } else if (auto* net = find_network(id)) {
    if (path == "key") {
      net->key = as_key(value, path);
    } else if (path == "driver") {
      net->driver = as_optional_text(value, path);
    } else if (path == "internal") {
      net->internal = as_bool(value, path);
    } else {
      unknown_property("network", path);
    }
  } else if (auto* data = find_data(id)) {
    set_data_property(*data, to_string(*class_of(id)), path, value);
  } else {
    throw Error(Errc::UnknownArtifact,
                "unknown artifact id " + std::to_string(id.value));
  }
}

bool Stack::contains(ArtifactId id) const noexcept {
  return class_of(id).has_value();
}

std::optional<ArtifactClass> Stack::class_of(ArtifactId id) const noexcept {
  if (find_in(services_, id)) return ArtifactClass::Service;
  if (find_in(volumes_, id)) return ArtifactClass::Volume;
  if (find_in(networks_, id)) return ArtifactClass::Network;
  if (find_in(configs_, id)) return ArtifactClass::Config;
  if (find_in(secrets_, id)) return ArtifactClass::Secret;
  return std::nullopt;
}

std::string_view Stack::key_of(ArtifactId id) const noexcept {
  if (auto* n = find_in(services_, id)) return n->key;
  if (auto* n = find_in(volumes_, id)) return n->key;
  if (auto* n = find_in(networks_, id)) return n->key;
  if (auto* n = find_in(configs_, id)) return n->key;
  if (auto* n = find_in(secrets_, id)) return n->key;
  return {};
}

const ServiceNode* Stack::find_service(ArtifactId id) const noexcept {
  return find_in(services_, id);
}
ServiceNode* Stack::find_service(ArtifactId id) noexcept {
  return find_in(services_, id);
}
const VolumeNode* Stack::find_volume(ArtifactId id) const noexcept {
  return find_in(volumes_, id);
}
VolumeNode* Stack::find_volume(ArtifactId id) noexcept {
  return find_in(volumes_, id);
}
const NetworkNode* Stack::find_network(ArtifactId id) const noexcept {
  return find_in(networks_, id);
}
NetworkNode* Stack::find_network(ArtifactId id) noexcept {
  return find_in(networks_, id);
}
const DataNode* Stack::find_data(ArtifactId id) const noexcept {
  if (const auto* c = find_in(configs_, id)) return c;
  return find_in(secrets_, id);
}
DataNode* Stack::find_data(ArtifactId id) noexcept {
  if (auto* c = find_in(configs_, id)) return c;
  return find_in(secrets_, id);
}

const Edge* Stack::find_edge(EdgeId id) const noexcept {
  auto it = std::find_if(edges_.begin(), edges_.end(),
                         [id](const Edge& e) { return e.id == id; });
  return it == edges_.end() ? nullptr : &*it;
}

std::vector<ArtifactId> Stack::artifact_ids() const {
  std::vector<ArtifactId> ids;
  ids.reserve(artifact_count());
  for (const auto& n : services_) ids.push_back(n.id);
  for (const auto& n : volumes_) ids.push_back(n.id);
  for (const auto& n : networks_) ids.push_back(n.id);
  for (const auto& n : configs_) ids.push_back(n.id);
  for (const auto& n : secrets_) ids.push_back(n.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void Stack::note_restored(std::uint64_t id) {
  if (id == 0) throw Error(Errc::CorruptProject, "artifact id 0 is reserved");
  next_id_ = std::max(next_id_, id + 1);
}

namespace {
template <typename Node>
void restore_into(Stack& stack, std::vector<Node>& nodes, Node node) {
  if (stack.contains(node.id) || stack.find_edge(EdgeId{node.id.value})) {
    throw Error(Errc::CorruptProject,
                "duplicate artifact id " + std::to_string(node.id.value));
  }
  nodes.push_back(std::move(node));
}
}  // namespace

void Stack::restore(ServiceNode node) {
  note_restored(node.id.value);
  restore_into(*this, services_, std::move(node));
}
void Stack::restore(VolumeNode node) {
  note_restored(node.id.value);
  restore_into(*this, volumes_, std::move(node));
}
void Stack::restore(NetworkNode node) {
  note_restored(node.id.value);
  restore_into(*this, networks_, std::move(node));
}
void Stack::restore(ConfigNode node) {
  note_restored(node.id.value);
  restore_into(*this, configs_, std::move(node));
}
void Stack::restore(SecretNode node) {
  note_restored(node.id.value);
  restore_into(*this, secrets_, std::move(node));
}

void Stack::restore(Edge edge) {
  try {
    check_edge(edge.from, edge.kind, edge.to);
  } catch (const Error& e) {
    throw Error(Errc::CorruptProject, std::string("invalid edge: ") + e.what());
  }
  if (find_edge(edge.id) || contains(ArtifactId{edge.id.value})) {
    throw Error(Errc::CorruptProject,
                "duplicate edge id " + std::to_string(edge.id.value));
  }
  note_restored(edge.id.value);
  edges_.push_back(std::move(edge));
}

}  // namespace dcomposer
