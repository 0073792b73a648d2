#pragma once

#include <json.hpp>

#include "dcomposer/model.hpp"

// JSON encodings shared by the project file, the HTTP API and the CLI.
// Decoders throw dcomposer::Error (InvalidValue / StructuralViolation).
namespace dcomposer {

using nlohmann::json;

json to_json(const ImageRef& image);
json to_json(const PortMapping& port);
json to_json(const EnvVar& env);
json to_json(const Healthcheck& check);
json to_json(const Sidecar& sidecar);
json to_json(const EdgeKind& kind);
json to_json(const Edge& edge);
json to_json(const ServiceNode& node);
json to_json(const VolumeNode& node);
json to_json(const NetworkNode& node);
json to_json(const DataNode& node, ArtifactClass cls);
json to_json(const Stack& stack);

PortMapping port_from_json(const json& value);
std::vector<PortMapping> ports_from_json(const json& value);
std::vector<EnvVar> environment_from_json(const json& value);
Healthcheck healthcheck_from_json(const json& value);
Sidecar sidecar_from_json(const json& value);
EdgeKind edge_kind_from_json(const json& value);

// Rebuilds a Stack from to_json(stack) output, keeping persisted ids.
// Throws Errc::CorruptProject on any schema mismatch.
Stack stack_from_json(const json& value);

}  // namespace dcomposer
