#pragma once

#include "dcomposer/json_codec.hpp"
#include "dcomposer/layout.hpp"

namespace dcomposer {

// One editor mutation, as carried by the ops endpoint:
//   {"type": "add_artifact", "class", "key", "properties"?, "x"?, "y"?}
//   {"type": "remove_artifact", "id"}
//   {"type": "set_property", "id", "path", "value"}
//   {"type": "connect", "from", "kind", "to"}   kind: name or object
//   {"type": "disconnect", "edge"}
//   {"type": "move_node", "id", "x", "y"}
// Returns {"id": n} for add_artifact, {"edge": n} for connect, {} otherwise.
// Malformed ops throw Error(InvalidValue); model errors propagate as thrown.
// On failure neither the stack nor the diagram is modified.
json apply_op(Stack& stack, Diagram& diagram, const json& op);

}  // namespace dcomposer
