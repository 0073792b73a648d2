#include "dcomposer/error.hpp"

namespace dcomposer {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownArtifact: return "UnknownArtifact";
    case Errc::UnknownEdge: return "UnknownEdge";
    case Errc::UnknownProperty: return "UnknownProperty";
    case Errc::TypeMismatch: return "TypeMismatch";
    case Errc::SelfEdge: return "SelfEdge";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::StructuralViolation: return "StructuralViolation";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::InvalidFormat: return "InvalidFormat";
    case Errc::YamlSyntaxError: return "YamlSyntaxError";
    case Errc::NotAMapping: return "NotAMapping";
    case Errc::IoError: return "IoError";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::CorruptProject: return "CorruptProject";
    case Errc::EmptyQuery: return "EmptyQuery";
    case Errc::UnknownRepository: return "UnknownRepository";
    case Errc::NetworkError: return "NetworkError";
    case Errc::RegistryError: return "RegistryError";
    case Errc::AlreadyRunning: return "AlreadyRunning";
    case Errc::NotRunning: return "NotRunning";
    case Errc::SpawnError: return "SpawnError";
    case Errc::AdapterError: return "AdapterError";
    case Errc::UnknownService: return "UnknownService";
    case Errc::BindError: return "BindError";
  }
  return "Unknown";
}

}  // namespace dcomposer
