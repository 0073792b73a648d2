#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace dcomposer {

// Opaque, process-local identifiers. Never reused within one Stack.
struct ArtifactId {
  std::uint64_t value = 0;
  auto operator<=>(const ArtifactId&) const = default;
};

struct EdgeId {
  std::uint64_t value = 0;
  auto operator<=>(const EdgeId&) const = default;
};

enum class ArtifactClass { Service, Volume, Network, Config, Secret };

inline constexpr ArtifactClass kAllClasses[] = {
    ArtifactClass::Service, ArtifactClass::Volume, ArtifactClass::Network,
    ArtifactClass::Config, ArtifactClass::Secret};

[[nodiscard]] std::string_view to_string(ArtifactClass cls) noexcept;
[[nodiscard]] std::optional<ArtifactClass> parse_artifact_class(
    std::string_view text) noexcept;
// Top-level Compose section name ("services", "volumes", ...).
[[nodiscard]] std::string_view section_name(ArtifactClass cls) noexcept;

// A key outside the supported property subset, kept verbatim as canonical
// YAML text so it can be re-emitted on serialization.
struct OpaqueEntry {
  std::string key;
  std::string yaml;
  bool operator==(const OpaqueEntry&) const = default;
};
using Sidecar = std::vector<OpaqueEntry>;

[[nodiscard]] const OpaqueEntry* find_entry(const Sidecar& sidecar,
                                            std::string_view key) noexcept;

struct ImageRef {
  std::string repository;
  std::string tag = "latest";

  // "repo[:tag]"; a colon inside a registry host ("host:5000/repo") is not a
  // tag separator. Digest references keep the whole text as repository.
  static ImageRef parse(std::string_view text);
  [[nodiscard]] std::string text(bool omit_default_tag = false) const;
  bool operator==(const ImageRef&) const = default;
};

enum class Protocol { Tcp, Udp };
enum class RestartPolicy { No, Always, OnFailure, UnlessStopped };

[[nodiscard]] std::string_view to_string(Protocol p) noexcept;
[[nodiscard]] std::string_view to_string(RestartPolicy r) noexcept;
[[nodiscard]] std::optional<Protocol> parse_protocol(std::string_view) noexcept;
[[nodiscard]] std::optional<RestartPolicy> parse_restart(
    std::string_view) noexcept;

// A host port cannot exist without its container port: it is a field of the
// mapping, never a standalone value.
struct PortMapping {
  std::uint16_t container_port = 0;
  std::optional<std::uint16_t> host_port;
  Protocol protocol = Protocol::Tcp;
  bool operator==(const PortMapping&) const = default;
};

// An unset value means "take it from the host environment" (list form "NAME").
struct EnvVar {
  std::string name;
  std::optional<std::string> value;
  bool operator==(const EnvVar&) const = default;
};

// interval/timeout are raw text; format checks happen in validation.
struct Healthcheck {
  std::vector<std::string> test;
  std::optional<std::string> interval;
  std::optional<std::string> timeout;
  std::optional<std::uint32_t> retries;
  Sidecar extras;
  bool operator==(const Healthcheck&) const = default;
};

struct ServiceNode {
  ArtifactId id;
  std::string key;
  std::optional<ImageRef> image;
  std::optional<std::string> container_name;
  std::optional<std::vector<std::string>> command;
  std::optional<std::vector<std::string>> entrypoint;
  std::vector<EnvVar> environment;
  std::vector<PortMapping> ports;
  std::optional<std::string> hostname;
  RestartPolicy restart = RestartPolicy::No;
  bool stdin_open = false;
  bool tty = false;
  std::optional<Healthcheck> healthcheck;
  std::optional<std::string> mem_limit;
  Sidecar extras;
  bool operator==(const ServiceNode&) const = default;
};

struct VolumeNode {
  ArtifactId id;
  std::string key;
  std::optional<std::string> driver;
  Sidecar extras;
  bool operator==(const VolumeNode&) const = default;
};

struct NetworkNode {
  ArtifactId id;
  std::string key;
  std::optional<std::string> driver;
  bool internal = false;
  Sidecar extras;
  bool operator==(const NetworkNode&) const = default;
};

struct FileSource {
  std::string path;
  bool operator==(const FileSource&) const = default;
};
struct ExternalSource {
  bool operator==(const ExternalSource&) const = default;
};
using DataSource = std::variant<FileSource, ExternalSource>;

// Configs and secrets share one shape. A missing source means the entry uses
// a form outside the model (e.g. `content:`), which lives in extras.
struct DataNode {
  ArtifactId id;
  std::string key;
  std::optional<DataSource> source;
  Sidecar extras;
  bool operator==(const DataNode&) const = default;
};
struct ConfigNode : DataNode {};
struct SecretNode : DataNode {};

// ---------------------------------------------------------------------------
// Edges
// ---------------------------------------------------------------------------

struct DependsOn {
  bool operator==(const DependsOn&) const = default;
};
struct Link {
  std::optional<std::string> alias;
  bool operator==(const Link&) const = default;
};
struct NetworkAttachment {
  std::vector<std::string> aliases;
  bool operator==(const NetworkAttachment&) const = default;
};
struct VolumeMount {
  std::string target;
  bool read_only = false;
  bool operator==(const VolumeMount&) const = default;
};
struct ConfigGrant {
  std::optional<std::string> target;
  std::optional<std::uint32_t> mode;
  bool operator==(const ConfigGrant&) const = default;
};
struct SecretGrant {
  std::optional<std::string> target;
  std::optional<std::uint32_t> mode;
  bool operator==(const SecretGrant&) const = default;
};

using EdgeKind = std::variant<DependsOn, Link, NetworkAttachment, VolumeMount,
                              ConfigGrant, SecretGrant>;

enum class EdgeKindTag {
  DependsOn,
  Link,
  NetworkAttachment,
  VolumeMount,
  ConfigGrant,
  SecretGrant
};

inline constexpr EdgeKindTag kAllEdgeKinds[] = {
    EdgeKindTag::DependsOn,   EdgeKindTag::Link,
    EdgeKindTag::NetworkAttachment, EdgeKindTag::VolumeMount,
    EdgeKindTag::ConfigGrant, EdgeKindTag::SecretGrant};

[[nodiscard]] EdgeKindTag tag_of(const EdgeKind& kind) noexcept;
[[nodiscard]] std::string_view to_string(EdgeKindTag tag) noexcept;
[[nodiscard]] std::optional<EdgeKindTag> parse_edge_kind(
    std::string_view text) noexcept;
// The Compose key under a service that carries this kind of reference.
[[nodiscard]] std::string_view compose_key(EdgeKindTag tag) noexcept;
// The single artifact class an edge of this kind may point at.
[[nodiscard]] ArtifactClass target_class(EdgeKindTag tag) noexcept;

struct Edge {
  EdgeId id;
  EdgeKind kind;
  ArtifactId from;
  ArtifactId to;
  bool operator==(const Edge&) const = default;
};

// ---------------------------------------------------------------------------
// Stack
// ---------------------------------------------------------------------------

class Stack {
 public:
  explicit Stack(std::string name = {}) : name_(std::move(name)) {}

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  [[nodiscard]] const std::vector<ServiceNode>& services() const noexcept {
    return services_;
  }
  [[nodiscard]] const std::vector<VolumeNode>& volumes() const noexcept {
    return volumes_;
  }
  [[nodiscard]] const std::vector<NetworkNode>& networks() const noexcept {
    return networks_;
  }
  [[nodiscard]] const std::vector<ConfigNode>& configs() const noexcept {
    return configs_;
  }
  [[nodiscard]] const std::vector<SecretNode>& secrets() const noexcept {
    return secrets_;
  }
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept {
    return edges_;
  }

  // Top-level `version:` key, kept only when it was present on input.
  [[nodiscard]] const std::optional<std::string>& compose_version()
      const noexcept {
    return version_;
  }
  void set_compose_version(std::optional<std::string> v) {
    version_ = std::move(v);
  }
  [[nodiscard]] const Sidecar& extras() const noexcept { return extras_; }
  [[nodiscard]] Sidecar& extras() noexcept { return extras_; }

  [[nodiscard]] std::size_t artifact_count() const noexcept;

  // Appends a fully built node and assigns it a fresh id (node.id is ignored).
  ArtifactId add(ServiceNode node);
  ArtifactId add(VolumeNode node);
  ArtifactId add(NetworkNode node);
  ArtifactId add(ConfigNode node);
  ArtifactId add(SecretNode node);

  // Generic creation used by the editor surface. `properties` is a JSON
  // object of property-path → value pairs applied through set_property.
  ArtifactId add_artifact(ArtifactClass cls, std::string key,
                          const nlohmann::json& properties);
  ArtifactId add_artifact(ArtifactClass cls, std::string key);

  // Removes the artifact and every incident edge; returns the removed edges.
  std::vector<Edge> remove_artifact(ArtifactId id);

  // Throws Errc::TypeMismatch / SelfEdge / DuplicateEdge / UnknownArtifact.
  const Edge& connect(ArtifactId from, EdgeKind kind, ArtifactId to);
  Edge disconnect(EdgeId id);

  // Stores `value` at `path` (e.g. "hostname", "healthcheck.interval").
  // Format checks are not performed here; only shape/type checks are.
  void set_property(ArtifactId id, std::string_view path,
                    const nlohmann::json& value);

  [[nodiscard]] bool contains(ArtifactId id) const noexcept;
  [[nodiscard]] std::optional<ArtifactClass> class_of(
      ArtifactId id) const noexcept;
  // Empty view for unknown ids.
  [[nodiscard]] std::string_view key_of(ArtifactId id) const noexcept;

  [[nodiscard]] const ServiceNode* find_service(ArtifactId id) const noexcept;
  [[nodiscard]] ServiceNode* find_service(ArtifactId id) noexcept;
  [[nodiscard]] const VolumeNode* find_volume(ArtifactId id) const noexcept;
  [[nodiscard]] VolumeNode* find_volume(ArtifactId id) noexcept;
  [[nodiscard]] const NetworkNode* find_network(ArtifactId id) const noexcept;
  [[nodiscard]] NetworkNode* find_network(ArtifactId id) noexcept;
  [[nodiscard]] const DataNode* find_data(ArtifactId id) const noexcept;
  [[nodiscard]] DataNode* find_data(ArtifactId id) noexcept;
  [[nodiscard]] const Edge* find_edge(EdgeId id) const noexcept;

  // Every artifact id in insertion order (ids are monotonically assigned).
  [[nodiscard]] std::vector<ArtifactId> artifact_ids() const;

  // Restores nodes and edges with their persisted ids (project loading).
  // Throws Errc::CorruptProject on id reuse or invalid edges.
  void restore(ServiceNode node);
  void restore(VolumeNode node);
  void restore(NetworkNode node);
  void restore(ConfigNode node);
  void restore(SecretNode node);
  void restore(Edge edge);

  [[nodiscard]] std::uint64_t next_id() const noexcept { return next_id_; }
  // Raises the id counter so ids handed out before a save stay retired.
  void reserve_ids(std::uint64_t next) noexcept { next_id_ = std::max(next_id_, next); }

  bool operator==(const Stack&) const = default;

 private:
  ArtifactId take_id() { return ArtifactId{next_id_++}; }
  void check_edge(ArtifactId from, const EdgeKind& kind, ArtifactId to) const;
  void note_restored(std::uint64_t id);

  std::string name_;
  std::optional<std::string> version_;
  std::vector<ServiceNode> services_;
  std::vector<VolumeNode> volumes_;
  std::vector<NetworkNode> networks_;
  std::vector<ConfigNode> configs_;
  std::vector<SecretNode> secrets_;
  std::vector<Edge> edges_;
  Sidecar extras_;
  std::uint64_t next_id_ = 1;
};

[[nodiscard]] Stack new_stack(std::string name);

}  // namespace dcomposer

template <>
struct std::hash<dcomposer::ArtifactId> {
  std::size_t operator()(dcomposer::ArtifactId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
