#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcomposer {

// Every failure the engine reports carries one of these codes. The string
// names are part of the HTTP and CLI contract and must not change.
enum class Errc {
  UnknownArtifact,
  UnknownEdge,
  UnknownProperty,
  TypeMismatch,
  SelfEdge,
  DuplicateEdge,
  StructuralViolation,
  InvalidValue,
  InvalidFormat,
  YamlSyntaxError,
  NotAMapping,
  IoError,
  UnsupportedVersion,
  CorruptProject,
  EmptyQuery,
  UnknownRepository,
  NetworkError,
  RegistryError,
  AlreadyRunning,
  NotRunning,
  SpawnError,
  AdapterError,
  UnknownService,
  BindError,
};

[[nodiscard]] std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dcomposer
