#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcomposer/model.hpp"

namespace dcomposer {

// Stable names; part of the HTTP and CLI output contract.
enum class WarningCode {
  DuplicateKey,
  InvalidDuration,
  InvalidByteSize,
  DanglingReference,
  DependencyCycle,
  DuplicateEnvName,
  HostPortCollision,
};

[[nodiscard]] std::string_view to_string(WarningCode code) noexcept;

// Advisory finding. Never blocks serialization or lifecycle operations.
struct Warning {
  WarningCode code = WarningCode::DuplicateKey;
  ArtifactId artifact;
  std::optional<std::string> property;
  std::string message;
  bool operator==(const Warning&) const = default;
};

struct ValidationOptions {
  // Statically detectable host-port clashes between services. Off by default
  // since it goes beyond duplicate-key and value-format checks.
  bool host_port_collisions = false;
};

// Findings ordered by artifact insertion order, then by rule code.
[[nodiscard]] std::vector<Warning> validate(const Stack& stack,
                                            ValidationOptions options = {});

// Strongly connected components of the DependsOn subgraph that contain a
// cycle (size >= 2, or a single node with a self edge). Each component is
// sorted by id; components are ordered by their smallest id.
[[nodiscard]] std::vector<std::vector<ArtifactId>> detect_cycles(
    const Stack& stack);

}  // namespace dcomposer
