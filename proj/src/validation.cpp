#include "dcomposer/validation.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "dcomposer/error.hpp"
#include "dcomposer/formats.hpp"
#include "yaml_support.hpp"

namespace dcomposer {

namespace {

template <typename Nodes>
void duplicate_keys(const Nodes& nodes, ArtifactClass cls,
                    std::vector<Warning>& out) {
  std::map<std::string, int> counts;
  for (const auto& n : nodes) ++counts[n.key];
  for (const auto& n : nodes) {
    if (counts[n.key] < 2) continue;
    out.push_back(Warning{WarningCode::DuplicateKey, n.id, "key",
                          std::string(to_string(cls)) + " key '" + n.key +
                              "' is defined " + std::to_string(counts[n.key]) +
                              " times"});
  }
}

void check_duration(const ServiceNode& s, const std::optional<std::string>& v,
                    const char* property, std::vector<Warning>& out) {
  if (!v) return;
  try {
    (void)parse_duration(*v);
  } catch (const Error& e) {
    out.push_back(
        Warning{WarningCode::InvalidDuration, s.id, property, e.what()});
  }
}

class ReferenceScan {
 public:
  explicit ReferenceScan(const Stack& stack) {
    for (const auto& n : stack.services()) keys_[ArtifactClass::Service].insert(n.key);
    for (const auto& n : stack.volumes()) keys_[ArtifactClass::Volume].insert(n.key);
    for (const auto& n : stack.networks()) keys_[ArtifactClass::Network].insert(n.key);
    for (const auto& n : stack.configs()) keys_[ArtifactClass::Config].insert(n.key);
    for (const auto& n : stack.secrets()) keys_[ArtifactClass::Secret].insert(n.key);
  }

  void scan(const ServiceNode& s, std::vector<Warning>& out) const {
    for (const auto& entry : s.extras) {
      const auto tag = parse_edge_kind(entry.key);
      if (!tag || compose_key(*tag) != entry.key) continue;
      YAML::Node node;
      try {
        node = yaml::load_text(entry.yaml);
      } catch (const YAML::Exception&) {
        continue;
      }
      for (const auto& ref : references(*tag, node)) {
        const auto cls = target_class(*tag);
        if (keys_.count(cls) && keys_.at(cls).count(ref)) continue;
        out.push_back(Warning{WarningCode::DanglingReference, s.id, entry.key,
                              "'" + entry.key + "' refers to unknown " +
                                  std::string(to_string(cls)) + " '" + ref + "'"});
      }
    }
  }

 private:
  static std::vector<std::string> references(EdgeKindTag tag,
                                             const YAML::Node& node) {
    std::vector<std::string> refs;
    switch (tag) {
      case EdgeKindTag::DependsOn:
      case EdgeKindTag::NetworkAttachment:
        if (node.IsMap()) {
          for (const auto& kv : node) {
            if (kv.first.IsScalar()) refs.push_back(kv.first.Scalar());
          }
        } else if (node.IsSequence()) {
          for (const auto& item : node) {
            if (item.IsScalar()) refs.push_back(item.Scalar());
          }
        }
        break;
      case EdgeKindTag::Link:
        if (!node.IsSequence()) break;
        for (const auto& item : node) {
          if (!item.IsScalar()) continue;
          const auto& s = item.Scalar();
          refs.push_back(s.substr(0, s.find(':')));
        }
        break;
      case EdgeKindTag::VolumeMount:
        if (!node.IsSequence()) break;
        for (const auto& item : node) {
          std::string source;
          if (item.IsScalar()) {
            const auto& s = item.Scalar();
            const auto colon = s.find(':');
            if (colon == std::string::npos) continue;
            source = s.substr(0, colon);
          } else if (item.IsMap() && item["source"] && item["source"].IsScalar()) {
            const auto type = item["type"];
            if (type && type.IsScalar() && type.Scalar() != "volume") continue;
            source = item["source"].Scalar();
          }
          const bool named = !source.empty() && source.front() != '/' &&
                             source.front() != '.' && source.front() != '~' &&
                             source.find('/') == std::string::npos &&
                             source.find('$') == std::string::npos;
          if (named) refs.push_back(source);
        }
        break;
      case EdgeKindTag::ConfigGrant:
      case EdgeKindTag::SecretGrant:
        if (!node.IsSequence()) break;
        for (const auto& item : node) {
          if (item.IsScalar()) {
            refs.push_back(item.Scalar());
          } else if (item.IsMap() && item["source"] && item["source"].IsScalar()) {
            refs.push_back(item["source"].Scalar());
          }
        }
        break;
    }
    return refs;
  }

  std::map<ArtifactClass, std::set<std::string>> keys_;
};

// Tarjan's algorithm over DependsOn edges.
class Components {
 public:
  explicit Components(const Stack& stack) {
    for (const auto& s : stack.services()) {
      nodes_.push_back(s.id);
      adjacency_[s.id];
    }
    for (const auto& e : stack.edges()) {
      if (tag_of(e.kind) == EdgeKindTag::DependsOn) {
        adjacency_[e.from].push_back(e.to);
        if (e.from == e.to) self_loops_.insert(e.from);
      }
    }
  }

  std::vector<std::vector<ArtifactId>> run() {
    for (const auto id : nodes_) {
      if (!index_.count(id)) visit(id);
    }
    std::vector<std::vector<ArtifactId>> cycles;
    for (auto& comp : components_) {
      if (comp.size() >= 2 || self_loops_.count(comp.front())) {
        std::sort(comp.begin(), comp.end());
        cycles.push_back(comp);
      }
    }
    std::sort(cycles.begin(), cycles.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return cycles;
  }

 private:
  void visit(ArtifactId v) {
    index_[v] = low_[v] = counter_++;
    stack_.push_back(v);
    on_stack_.insert(v);
    for (const auto w : adjacency_[v]) {
      if (!index_.count(w)) {
        visit(w);
        low_[v] = std::min(low_[v], low_[w]);
      } else if (on_stack_.count(w)) {
        low_[v] = std::min(low_[v], index_[w]);
      }
    }
    if (low_[v] == index_[v]) {
      std::vector<ArtifactId> comp;
      ArtifactId w;
      do {
        w = stack_.back();
        stack_.pop_back();
        on_stack_.erase(w);
        comp.push_back(w);
      } while (w != v);
      components_.push_back(std::move(comp));
    }
  }

  std::vector<ArtifactId> nodes_;
  std::unordered_map<ArtifactId, std::vector<ArtifactId>> adjacency_;
  std::set<ArtifactId> self_loops_;
  std::unordered_map<ArtifactId, int> index_;
  std::unordered_map<ArtifactId, int> low_;
  std::vector<ArtifactId> stack_;
  std::set<ArtifactId> on_stack_;
  std::vector<std::vector<ArtifactId>> components_;
  int counter_ = 0;
};

}  // namespace

std::string_view to_string(WarningCode code) noexcept {
  switch (code) {
    case WarningCode::DuplicateKey: return "DuplicateKey";
    case WarningCode::InvalidDuration: return "InvalidDuration";
    case WarningCode::InvalidByteSize: return "InvalidByteSize";
    case WarningCode::DanglingReference: return "DanglingReference";
    case WarningCode::DependencyCycle: return "DependencyCycle";
    case WarningCode::DuplicateEnvName: return "DuplicateEnvName";
    case WarningCode::HostPortCollision: return "HostPortCollision";
  }
  return "DuplicateKey";
}

std::vector<std::vector<ArtifactId>> detect_cycles(const Stack& stack) {
  return Components(stack).run();
}

std::vector<Warning> validate(const Stack& stack, ValidationOptions options) {
  std::vector<Warning> out;

  duplicate_keys(stack.services(), ArtifactClass::Service, out);
  duplicate_keys(stack.volumes(), ArtifactClass::Volume, out);
  duplicate_keys(stack.networks(), ArtifactClass::Network, out);
  duplicate_keys(stack.configs(), ArtifactClass::Config, out);
  duplicate_keys(stack.secrets(), ArtifactClass::Secret, out);

  const ReferenceScan references(stack);
  for (const auto& s : stack.services()) {
    if (s.healthcheck) {
      check_duration(s, s.healthcheck->interval, "healthcheck.interval", out);
      check_duration(s, s.healthcheck->timeout, "healthcheck.timeout", out);
    }
    if (s.mem_limit) {
      try {
        (void)parse_byte_size(*s.mem_limit);
      } catch (const Error& e) {
        out.push_back(
            Warning{WarningCode::InvalidByteSize, s.id, "mem_limit", e.what()});
      }
    }
    references.scan(s, out);

    std::map<std::string, int> names;
    for (const auto& env : s.environment) ++names[env.name];
    for (const auto& [name, count] : names) {
      if (count < 2) continue;
      out.push_back(Warning{WarningCode::DuplicateEnvName, s.id, "environment",
                            "environment variable '" + name + "' is set " +
                                std::to_string(count) + " times"});
    }
  }

  for (const auto& comp : detect_cycles(stack)) {
    std::string members;
    for (const auto id : comp) {
      if (!members.empty()) members += " -> ";
      members += std::string(stack.key_of(id));
    }
    for (const auto id : comp) {
      out.push_back(Warning{WarningCode::DependencyCycle, id, "depends_on",
                            "dependency cycle among: " + members});
    }
  }

  if (options.host_port_collisions) {
    std::map<std::pair<std::uint16_t, Protocol>, std::vector<ArtifactId>> owners;
    for (const auto& s : stack.services()) {
      for (const auto& p : s.ports) {
        if (p.host_port) owners[{*p.host_port, p.protocol}].push_back(s.id);
      }
    }
    for (const auto& [port, ids] : owners) {
      if (ids.size() < 2) continue;
      std::set<ArtifactId> unique(ids.begin(), ids.end());
      for (const auto id : unique) {
        out.push_back(Warning{
            WarningCode::HostPortCollision, id, "ports",
            "host port " + std::to_string(port.first) + "/" +
                std::string(to_string(port.second)) + " is published " +
                std::to_string(ids.size()) + " times"});
      }
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const Warning& a, const Warning& b) {
    if (a.artifact != b.artifact) return a.artifact < b.artifact;
    return a.code < b.code;
  });
  return out;
}

}  // namespace dcomposer
