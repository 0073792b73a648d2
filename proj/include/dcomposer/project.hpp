#pragma once

#include <filesystem>
#include <string>

#include "dcomposer/json_codec.hpp"
#include "dcomposer/layout.hpp"

namespace dcomposer {

inline constexpr int kProjectFormatVersion = 1;

struct ExportSettings {
  bool omit_defaults = true;
  std::string file_name = "docker-compose.yml";
  bool operator==(const ExportSettings&) const = default;
};

struct ProjectSettings {
  std::string working_directory;
  ExportSettings export_settings;
  bool operator==(const ProjectSettings&) const = default;
};

struct Project {
  Stack stack;
  Diagram diagram;
  ProjectSettings settings;
};

json to_json(const ProjectSettings& settings);
ProjectSettings settings_from_json(const json& value);

json project_to_json(const Stack& stack, const Diagram& diagram,
                     const ProjectSettings& settings);
// Throws UnsupportedVersion or CorruptProject.
Project project_from_json(const json& value);

// Conventionally "<name>.dcproj.json". Throws IoError.
void save_project(const Stack& stack, const Diagram& diagram,
                  const ProjectSettings& settings,
                  const std::filesystem::path& path);
// Throws IoError, UnsupportedVersion, CorruptProject.
Project load_project(const std::filesystem::path& path);

}  // namespace dcomposer
