#pragma once

#include <string>

#include "dcomposer/json_codec.hpp"
#include "dcomposer/layout.hpp"

namespace dcomposer {

// {"nodes": [{id, x, y, w, h}], "canvas": {w, h}}
json to_json(const Diagram& diagram);

// Throws Errc::CorruptProject on schema mismatch or on an id that `stack`
// does not contain.
Diagram diagram_from_json(const json& value, const Stack& stack);

// Nodes carry class and key alongside geometry; edges use the Stack encoding.
json graph_json(const Stack& stack, const Diagram& diagram);

// Edges point from the dependent service to the artifact it uses and are
// labelled with their compose key. Services are named by key, other classes
// as "class:key"; a repeated name gets a "-2", "-3", ... suffix.
std::string graph_dot(const Stack& stack);

}  // namespace dcomposer
