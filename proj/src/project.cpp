#include "dcomposer/project.hpp"

#include <fstream>
#include <sstream>

#include "dcomposer/error.hpp"
#include "dcomposer/graph.hpp"

namespace dcomposer {

json to_json(const ProjectSettings& settings) {
  return {{"working_directory", settings.working_directory},
          {"export",
           {{"omit_defaults", settings.export_settings.omit_defaults},
            {"file_name", settings.export_settings.file_name}}}};
}

ProjectSettings settings_from_json(const json& value) {
  try {
    ProjectSettings s;
    s.working_directory = value.value("working_directory", std::string{});
    if (value.contains("export")) {
      const auto& e = value.at("export");
      s.export_settings.omit_defaults = e.value("omit_defaults", true);
      s.export_settings.file_name = e.value("file_name", std::string("docker-compose.yml"));
    }
    if (s.export_settings.file_name.empty() ||
        s.export_settings.file_name.find('/') != std::string::npos) {
      throw Error(Errc::CorruptProject, "export file name must be a plain file name");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptProject, std::string("bad settings: ") + e.what());
  }
}

json project_to_json(const Stack& stack, const Diagram& diagram,
                     const ProjectSettings& settings) {
  return {{"format_version", kProjectFormatVersion},
          {"stack", to_json(stack)},
          {"diagram", to_json(diagram)},
          {"settings", to_json(settings)}};
}

Project project_from_json(const json& value) {
  if (!value.is_object() || !value.contains("format_version")) {
    throw Error(Errc::CorruptProject, "missing format_version");
  }
  const auto& version = value.at("format_version");
  if (!version.is_number_integer()) {
    throw Error(Errc::CorruptProject, "format_version must be an integer");
  }
  if (version.get<long long>() != kProjectFormatVersion) {
    throw Error(Errc::UnsupportedVersion,
                "project format_version " + version.dump() + " is not supported");
  }
  for (const char* key : {"stack", "diagram", "settings"}) {
    if (!value.contains(key)) {
      throw Error(Errc::CorruptProject, std::string("missing '") + key + "'");
    }
  }
  Project p{stack_from_json(value.at("stack")), {}, {}};
  p.diagram = diagram_from_json(value.at("diagram"), p.stack);
  p.settings = settings_from_json(value.at("settings"));
  return p;
}

void save_project(const Stack& stack, const Diagram& diagram,
                  const ProjectSettings& settings,
                  const std::filesystem::path& path) {
  const auto text = project_to_json(stack, diagram, settings).dump(2) + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

Project load_project(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  json value;
  try {
    value = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error(Errc::CorruptProject, std::string("not JSON: ") + e.what());
  }
  return project_from_json(value);
}

}  // namespace dcomposer
