#pragma once

#include "dcomposer/compose_io.hpp"
#include "dcomposer/json_codec.hpp"
#include "dcomposer/registry.hpp"
#include "dcomposer/runtime.hpp"
#include "dcomposer/validation.hpp"

// JSON shapes shared by the HTTP API and the CLI's --json output.
namespace dcomposer {

// {code, artifact, property, message}; property is null when absent.
json to_json(const Warning& warning);
json to_json(const std::vector<Warning>& warnings);
// {severity, code, path, line, column, message}
json to_json(const ParseNotice& notice);
json to_json(const std::vector<ParseNotice>& notices);
// {aggregate, color, per_service, last_transition_us}
json to_json(const StackStatus& status);
json to_json(const ImageSummary& image);
// {service, line, timestamp_us}; service is null for General-only lines.
json to_json(const LogEvent& event);

// Anchor and class colours plus the edge type table, for the editor.
json meta_json();

}  // namespace dcomposer
