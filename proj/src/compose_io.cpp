#include "dcomposer/compose_io.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <unordered_map>

#include "dcomposer/error.hpp"
#include "dcomposer/json_codec.hpp"
#include "yaml_support.hpp"

namespace dcomposer {

namespace {

using yaml::canonical_text;
using yaml::emit_node;
using yaml::emit_string;

// Service keys whose sidecar entries merge with edges or model fields instead
// of being emitted verbatim.
constexpr std::string_view kMergedKeys[] = {"ports",    "depends_on", "links",
                                            "networks", "volumes",    "configs",
                                            "secrets"};

bool is_merged_key(std::string_view key) {
  return std::find(std::begin(kMergedKeys), std::end(kMergedKeys), key) !=
         std::end(kMergedKeys);
}

void set_entry(Sidecar& sidecar, std::string key, std::string text) {
  auto it = std::find_if(sidecar.begin(), sidecar.end(),
                         [&](const OpaqueEntry& e) { return e.key == key; });
  if (it != sidecar.end()) {
    it->yaml = std::move(text);
  } else {
    sidecar.push_back(OpaqueEntry{std::move(key), std::move(text)});
  }
}

std::string format_mode(std::uint32_t mode) {
  if (mode == 0) return "0";
  std::string digits;
  for (auto m = mode; m != 0; m /= 8) {
    digits.insert(digits.begin(), static_cast<char>('0' + m % 8));
  }
  return "0" + digits;
}

// "0440" and "0o440" are octal; other digit strings are decimal.
std::optional<std::uint32_t> parse_mode(const YAML::Node& node) {
  if (!node.IsScalar()) return std::nullopt;
  std::string s = node.Scalar();
  int base = 10;
  if (s.starts_with("0o")) {
    s = s.substr(2);
    base = 8;
  } else if (s.size() > 1 && s.front() == '0') {
    base = 8;
  }
  if (s.empty() || s.size() > 10) return std::nullopt;
  for (char c : s) {
    if (c < '0' || c > (base == 8 ? '7' : '9')) return std::nullopt;
  }
  const auto v = std::stoull(s, nullptr, base);
  if (v > 07777) return std::nullopt;
  return static_cast<std::uint32_t>(v);
}

std::optional<std::uint16_t> port_of(const YAML::Node& node) {
  const auto n = yaml::as_count(node);
  if (!n || *n < 1 || *n > 65535) return std::nullopt;
  return static_cast<std::uint16_t>(*n);
}

std::optional<std::uint16_t> port_of_text(const std::string& s) {
  if (s.empty() || s.size() > 5 ||
      !std::all_of(s.begin(), s.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  const auto n = std::stoi(s);
  if (n < 1 || n > 65535) return std::nullopt;
  return static_cast<std::uint16_t>(n);
}

bool keys_within(const YAML::Node& map,
                 std::initializer_list<std::string_view> allowed) {
  for (const auto& kv : map) {
    if (!kv.first.IsScalar()) return false;
    const auto& k = kv.first.Scalar();
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      return false;
    }
  }
  return true;
}

bool is_named_volume_source(std::string_view src) {
  return !src.empty() && src.front() != '/' && src.front() != '.' &&
         src.front() != '~' && src.find('/') == std::string_view::npos &&
         src.find('$') == std::string_view::npos;
}

class Parser {
 public:
  explicit Parser(std::string name) : stack_(std::move(name)) {}

  ParseResult run(const YAML::Node& root) {
    for_each_entry(root, "", [&](const std::string& key, const YAML::Node& k,
                                 const YAML::Node& v) {
      top_level(key, k, v);
    });
    for (auto& pending : pending_) resolve_references(pending);
    return ParseResult{std::move(stack_), std::move(notices_)};
  }

 private:
  struct PendingService {
    ArtifactId id;
    std::string path;
    std::vector<std::pair<std::string, YAML::Node>> references;
  };

  void notice(NoticeSeverity sev, NoticeCode code, std::string path,
              const YAML::Node& at, std::string message) {
    ParseNotice n{sev, code, std::move(path), 0, 0, std::move(message)};
    const auto mark = at.Mark();
    if (mark.line >= 0) {
      n.line = mark.line + 1;
      n.column = mark.column + 1;
    }
    notices_.push_back(std::move(n));
  }

  void unsupported(const std::string& path, const YAML::Node& at,
                   const std::string& what) {
    notice(NoticeSeverity::Info, NoticeCode::UnsupportedKey, path, at,
           what + " kept verbatim");
  }

  template <typename Fn>
  void for_each_entry(const YAML::Node& map, const std::string& path, Fn fn) {
    std::set<std::string> seen;
    for (const auto& kv : map) {
      const std::string key =
          kv.first.IsScalar() ? kv.first.Scalar() : canonical_text(kv.first);
      const auto child = path.empty() ? key : path + "." + key;
      if (!seen.insert(key).second) {
        notice(NoticeSeverity::Warn, NoticeCode::DuplicateYamlKey, child,
               kv.first, "duplicate key '" + key + "'");
      }
      fn(key, kv.first, kv.second);
    }
  }

  void top_level(const std::string& key, const YAML::Node& key_node,
                 const YAML::Node& value) {
    if (key == "version" && value.IsScalar()) {
      stack_.set_compose_version(value.Scalar());
      return;
    }
    for (auto cls : kAllClasses) {
      if (key != section_name(cls)) continue;
      if (value.IsNull()) return;
      if (!value.IsMap()) {
        notice(NoticeSeverity::Warn, NoticeCode::UnsupportedKey, key, key_node,
               "section '" + key + "' is not a mapping and was ignored");
        return;
      }
      for_each_entry(value, key,
                     [&](const std::string& k, const YAML::Node& kn,
                         const YAML::Node& v) { artifact(cls, k, kn, v); });
      return;
    }
    set_entry(stack_.extras(), key, canonical_text(value));
  }

  void artifact(ArtifactClass cls, const std::string& key,
                const YAML::Node& key_node, const YAML::Node& value) {
    const auto path = std::string(section_name(cls)) + "." + key;
    YAML::Node body = value;
    if (!value.IsNull() && !value.IsMap()) {
      notice(NoticeSeverity::Warn, NoticeCode::UnsupportedKey, path, key_node,
             "definition is not a mapping and was ignored");
      body = YAML::Node(YAML::NodeType::Map);
    }
    if (body.IsNull()) body = YAML::Node(YAML::NodeType::Map);
    switch (cls) {
      case ArtifactClass::Service: service(key, path, body); break;
      case ArtifactClass::Volume: volume(key, path, body); break;
      case ArtifactClass::Network: network(key, path, body); break;
      case ArtifactClass::Config: {
        ConfigNode n;
        data(n, key, path, body);
        stack_.add(std::move(n));
        break;
      }
      case ArtifactClass::Secret: {
        SecretNode n;
        data(n, key, path, body);
        stack_.add(std::move(n));
        break;
      }
    }
  }

  void volume(const std::string& key, const std::string& path,
              const YAML::Node& body) {
    VolumeNode n;
    n.key = key;
    for_each_entry(body, path, [&](const std::string& k, const YAML::Node&,
                                   const YAML::Node& v) {
      if (k == "driver" && v.IsScalar()) {
        n.driver = v.Scalar();
      } else {
        set_entry(n.extras, k, canonical_text(v));
      }
    });
    stack_.add(std::move(n));
  }

  void network(const std::string& key, const std::string& path,
               const YAML::Node& body) {
    NetworkNode n;
    n.key = key;
    for_each_entry(body, path, [&](const std::string& k, const YAML::Node&,
                                   const YAML::Node& v) {
      if (k == "driver" && v.IsScalar()) {
        n.driver = v.Scalar();
      } else if (k == "internal" && yaml::as_bool(v)) {
        n.internal = *yaml::as_bool(v);
      } else {
        set_entry(n.extras, k, canonical_text(v));
      }
    });
    stack_.add(std::move(n));
  }

  void data(DataNode& n, const std::string& key, const std::string& path,
            const YAML::Node& body) {
    n.key = key;
    for_each_entry(body, path, [&](const std::string& k, const YAML::Node&,
                                   const YAML::Node& v) {
      if (k == "file" && v.IsScalar() && !v.Scalar().empty() && !n.source) {
        n.source = FileSource{v.Scalar()};
      } else if (k == "external" && yaml::as_bool(v).value_or(false) &&
                 !n.source) {
        n.source = ExternalSource{};
      } else {
        set_entry(n.extras, k, canonical_text(v));
      }
    });
  }

  static std::optional<std::vector<std::string>> string_list(
      const YAML::Node& v) {
    if (v.IsScalar()) return yaml::split_words(v.Scalar());
    if (!v.IsSequence()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& item : v) {
      if (!item.IsScalar()) return std::nullopt;
      out.push_back(item.Scalar());
    }
    return out;
  }

  static std::optional<std::vector<EnvVar>> environment(const YAML::Node& v) {
    std::vector<EnvVar> out;
    if (v.IsMap()) {
      for (const auto& kv : v) {
        if (!kv.first.IsScalar() || kv.first.Scalar().empty()) {
          return std::nullopt;
        }
        if (kv.second.IsNull()) {
          out.push_back(EnvVar{kv.first.Scalar(), std::nullopt});
        } else if (kv.second.IsScalar()) {
          out.push_back(EnvVar{kv.first.Scalar(), kv.second.Scalar()});
        } else {
          return std::nullopt;
        }
      }
      return out;
    }
    if (v.IsSequence()) {
      for (const auto& item : v) {
        if (!item.IsScalar()) return std::nullopt;
        const auto& s = item.Scalar();
        const auto eq = s.find('=');
        if (eq == 0 || s.empty()) return std::nullopt;
        if (eq == std::string::npos) {
          out.push_back(EnvVar{s, std::nullopt});
        } else {
          out.push_back(EnvVar{s.substr(0, eq), s.substr(eq + 1)});
        }
      }
      return out;
    }
    return std::nullopt;
  }

  static std::optional<PortMapping> short_port(const std::string& s) {
    static const std::regex kShort(R"(^(?:([0-9]+):)?([0-9]+)(?:/(tcp|udp))?$)");
    std::smatch m;
    if (!std::regex_match(s, m, kShort)) return std::nullopt;
    PortMapping p;
    auto container = port_of_text(m[2].str());
    if (!container) return std::nullopt;
    p.container_port = *container;
    if (m[1].matched) {
      auto host = port_of_text(m[1].str());
      if (!host) return std::nullopt;
      p.host_port = host;
    }
    if (m[3].matched) p.protocol = *parse_protocol(m[3].str());
    return p;
  }

  static std::optional<PortMapping> long_port(const YAML::Node& v) {
    if (!keys_within(v, {"target", "published", "protocol"})) {
      return std::nullopt;
    }
    PortMapping p;
    auto target = port_of(v["target"]);
    if (!target) return std::nullopt;
    p.container_port = *target;
    if (v["published"]) {
      auto host = port_of(v["published"]);
      if (!host) return std::nullopt;
      p.host_port = host;
    }
    if (v["protocol"]) {
      auto proto = yaml::as_text(v["protocol"]);
      if (!proto || !parse_protocol(*proto)) return std::nullopt;
      p.protocol = *parse_protocol(*proto);
    }
    return p;
  }

  void ports(ServiceNode& n, const std::string& path, const YAML::Node& v) {
    if (!v.IsSequence()) {
      unsupported(path, v, "ports definition");
      set_entry(n.extras, "ports", canonical_text(v));
      return;
    }
    YAML::Node raw(YAML::NodeType::Sequence);
    for (const auto& item : v) {
      std::optional<PortMapping> p;
      if (item.IsScalar()) p = short_port(item.Scalar());
      if (item.IsMap()) p = long_port(item);
      if (p) {
        n.ports.push_back(*p);
      } else {
        unsupported(path, item, "port mapping form");
        raw.push_back(item);
      }
    }
    if (raw.size() > 0) set_entry(n.extras, "ports", canonical_text(raw));
  }

  void healthcheck(ServiceNode& n, const std::string& path,
                   const YAML::Node& v) {
    if (!v.IsMap()) {
      unsupported(path, v, "healthcheck definition");
      set_entry(n.extras, "healthcheck", canonical_text(v));
      return;
    }
    Healthcheck check;
    for_each_entry(v, path, [&](const std::string& k, const YAML::Node&,
                                const YAML::Node& f) {
      if (k == "test" && f.IsScalar()) {
        check.test = {"CMD-SHELL", f.Scalar()};
      } else if (k == "test" && string_list(f) && f.IsSequence()) {
        check.test = *string_list(f);
      } else if (k == "interval" && f.IsScalar()) {
        check.interval = f.Scalar();
      } else if (k == "timeout" && f.IsScalar()) {
        check.timeout = f.Scalar();
      } else if (k == "retries" && yaml::as_count(f) &&
                 *yaml::as_count(f) <= UINT32_MAX) {
        check.retries = static_cast<std::uint32_t>(*yaml::as_count(f));
      } else {
        set_entry(check.extras, k, canonical_text(f));
      }
    });
    n.healthcheck = std::move(check);
  }

  void service(const std::string& key, const std::string& path,
               const YAML::Node& body) {
    ServiceNode n;
    n.key = key;
    PendingService pending{ArtifactId{}, path, {}};
    for_each_entry(body, path, [&](const std::string& k, const YAML::Node& kn,
                                   const YAML::Node& v) {
      const auto field = path + "." + k;
      bool handled = true;
      if (k == "image" && v.IsScalar()) {
        n.image = ImageRef::parse(v.Scalar());
      } else if (k == "container_name" && v.IsScalar()) {
        n.container_name = v.Scalar();
      } else if (k == "hostname" && v.IsScalar()) {
        n.hostname = v.Scalar();
      } else if ((k == "command" || k == "entrypoint") && string_list(v)) {
        (k == "command" ? n.command : n.entrypoint) = *string_list(v);
      } else if (k == "environment" && environment(v)) {
        n.environment = *environment(v);
      } else if (k == "ports") {
        ports(n, field, v);
      } else if (k == "restart" && v.IsScalar() && parse_restart(v.Scalar())) {
        n.restart = *parse_restart(v.Scalar());
      } else if (k == "stdin_open" && yaml::as_bool(v)) {
        n.stdin_open = *yaml::as_bool(v);
      } else if (k == "tty" && yaml::as_bool(v)) {
        n.tty = *yaml::as_bool(v);
      } else if (k == "healthcheck") {
        healthcheck(n, field, v);
      } else if (k == "mem_limit" && v.IsScalar()) {
        n.mem_limit = v.Scalar();
      } else if (parse_edge_kind(k) && compose_key(*parse_edge_kind(k)) == k) {
        pending.references.emplace_back(k, v);
      } else {
        handled = false;
      }
      if (!handled) {
        const bool supported_name =
            k == "image" || k == "container_name" || k == "hostname" ||
            k == "command" || k == "entrypoint" || k == "environment" ||
            k == "restart" || k == "stdin_open" || k == "tty" ||
            k == "mem_limit";
        if (supported_name) unsupported(field, kn, "value of '" + k + "'");
        set_entry(n.extras, k, canonical_text(v));
      }
    });
    pending.id = stack_.add(std::move(n));
    if (!pending.references.empty()) pending_.push_back(std::move(pending));
  }

  std::optional<ArtifactId> resolve(ArtifactClass cls, const std::string& key,
                                    std::string* why) const {
    std::vector<ArtifactId> hits;
    auto scan = [&](const auto& nodes) {
      for (const auto& node : nodes) {
        if (node.key == key) hits.push_back(node.id);
      }
    };
    switch (cls) {
      case ArtifactClass::Service: scan(stack_.services()); break;
      case ArtifactClass::Volume: scan(stack_.volumes()); break;
      case ArtifactClass::Network: scan(stack_.networks()); break;
      case ArtifactClass::Config: scan(stack_.configs()); break;
      case ArtifactClass::Secret: scan(stack_.secrets()); break;
    }
    if (hits.size() == 1) return hits.front();
    *why = hits.empty() ? "no " + std::string(to_string(cls)) + " named '" +
                              key + "'"
                        : "'" + key + "' names more than one " +
                              std::string(to_string(cls));
    return std::nullopt;
  }

  // Creates the edge or explains why not. Returns true on success.
  bool try_connect(ArtifactId from, EdgeKind kind, ArtifactClass cls,
                   const std::string& key, const std::string& path,
                   const YAML::Node& at) {
    std::string why;
    auto target = resolve(cls, key, &why);
    if (!target) {
      notice(NoticeSeverity::Warn, NoticeCode::DanglingReference, path, at,
             "unresolved reference: " + why);
      return false;
    }
    try {
      stack_.connect(from, std::move(kind), *target);
      return true;
    } catch (const Error& e) {
      unsupported(path, at, std::string("reference (") + e.what() + ")");
      return false;
    }
  }

  void resolve_references(PendingService& p) {
    for (auto& [key, v] : p.references) {
      const auto path = p.path + "." + key;
      const auto tag = *parse_edge_kind(key);
      bool ok = false;
      switch (tag) {
        case EdgeKindTag::DependsOn: ok = depends_on(p.id, path, v); break;
        case EdgeKindTag::Link: ok = links(p.id, path, v); break;
        case EdgeKindTag::NetworkAttachment: ok = networks(p.id, path, v); break;
        case EdgeKindTag::VolumeMount: ok = mounts(p.id, path, v); break;
        case EdgeKindTag::ConfigGrant:
        case EdgeKindTag::SecretGrant: ok = grants(p.id, tag, path, v); break;
      }
      if (!ok) {
        unsupported(path, v, "'" + key + "' definition");
        set_entry(stack_.find_service(p.id)->extras, key, canonical_text(v));
      }
    }
  }

  Sidecar& extras_of(ArtifactId id) { return stack_.find_service(id)->extras; }

  bool depends_on(ArtifactId id, const std::string& path, const YAML::Node& v) {
    YAML::Node side(YAML::NodeType::Map);
    auto one = [&](const YAML::Node& target_node, const YAML::Node& attrs) {
      const auto& target = target_node.Scalar();
      // `condition: service_started` is the Compose default; treat it as no
      // attributes so the short form round-trips.
      const bool default_condition =
          attrs.IsMap() && attrs.size() == 1 && attrs["condition"] &&
          attrs["condition"].IsScalar() &&
          attrs["condition"].Scalar() == "service_started";
      const bool has_attrs =
          !default_condition &&
          (attrs.IsMap() ? attrs.size() > 0 : !attrs.IsNull());
      std::string why;
      auto resolved = resolve(ArtifactClass::Service, target, &why);
      if (!resolved) {
        notice(NoticeSeverity::Warn, NoticeCode::DanglingReference, path,
               target_node, "unresolved reference: " + why);
        side[target] = has_attrs ? attrs : YAML::Node(YAML::NodeType::Map);
        return;
      }
      try {
        stack_.connect(id, DependsOn{}, *resolved);
      } catch (const Error& e) {
        if (e.code() == Errc::DuplicateEdge) {
          notice(NoticeSeverity::Info, NoticeCode::UnsupportedKey, path,
                 target_node, "repeated dependency dropped");
          return;
        }
        unsupported(path, target_node, std::string("dependency (") + e.what() + ")");
        side[target] = has_attrs ? attrs : YAML::Node(YAML::NodeType::Map);
        return;
      }
      if (has_attrs) side[target] = attrs;
    };
    if (v.IsSequence()) {
      for (const auto& item : v) {
        if (!item.IsScalar()) return false;
      }
      for (const auto& item : v) one(item, YAML::Node());
    } else if (v.IsMap()) {
      for (const auto& kv : v) {
        if (!kv.first.IsScalar()) return false;
      }
      for (const auto& kv : v) one(kv.first, kv.second);
    } else {
      return false;
    }
    if (side.size() > 0) {
      set_entry(extras_of(id), "depends_on", canonical_text(side));
    }
    return true;
  }

  bool links(ArtifactId id, const std::string& path, const YAML::Node& v) {
    if (!v.IsSequence()) return false;
    YAML::Node raw(YAML::NodeType::Sequence);
    for (const auto& item : v) {
      if (!item.IsScalar()) {
        raw.push_back(item);
        continue;
      }
      const auto& s = item.Scalar();
      const auto colon = s.find(':');
      Link link;
      std::string target = s;
      if (colon != std::string::npos) {
        target = s.substr(0, colon);
        link.alias = s.substr(colon + 1);
      }
      if (!try_connect(id, link, ArtifactClass::Service, target, path, item)) {
        raw.push_back(item);
      }
    }
    if (raw.size() > 0) set_entry(extras_of(id), "links", canonical_text(raw));
    return true;
  }

  bool networks(ArtifactId id, const std::string& path, const YAML::Node& v) {
    YAML::Node side(YAML::NodeType::Map);
    auto one = [&](const YAML::Node& name_node, const YAML::Node& attrs) {
      const auto& name = name_node.Scalar();
      NetworkAttachment attach;
      YAML::Node rest(YAML::NodeType::Map);
      bool aliases_ok = true;
      if (attrs.IsMap()) {
        for (const auto& kv : attrs) {
          if (kv.first.IsScalar() && kv.first.Scalar() == "aliases" &&
              kv.second.IsSequence()) {
            for (const auto& a : kv.second) {
              if (!a.IsScalar()) aliases_ok = false;
            }
            if (aliases_ok) {
              for (const auto& a : kv.second) attach.aliases.push_back(a.Scalar());
              continue;
            }
          }
          rest[kv.first] = kv.second;
        }
      }
      const bool odd_attrs = !attrs.IsNull() && !attrs.IsMap();
      if (!odd_attrs &&
          try_connect(id, attach, ArtifactClass::Network, name, path, name_node)) {
        if (rest.size() > 0) side[name] = rest;
      } else {
        side[name] = attrs.IsNull() ? YAML::Node(YAML::NodeType::Map) : attrs;
      }
    };
    if (v.IsSequence()) {
      for (const auto& item : v) {
        if (!item.IsScalar()) return false;
      }
      for (const auto& item : v) one(item, YAML::Node());
    } else if (v.IsMap()) {
      for (const auto& kv : v) {
        if (!kv.first.IsScalar()) return false;
      }
      for (const auto& kv : v) one(kv.first, kv.second);
    } else {
      return false;
    }
    if (side.size() > 0) {
      set_entry(extras_of(id), "networks", canonical_text(side));
    }
    return true;
  }

  bool mounts(ArtifactId id, const std::string& path, const YAML::Node& v) {
    if (!v.IsSequence()) return false;
    YAML::Node raw(YAML::NodeType::Sequence);
    for (const auto& item : v) {
      std::optional<std::pair<std::string, VolumeMount>> mount;
      if (item.IsScalar()) {
        const auto& s = item.Scalar();
        const auto first = s.find(':');
        if (first != std::string::npos) {
          const auto source = s.substr(0, first);
          auto rest = s.substr(first + 1);
          bool read_only = false;
          bool mode_ok = true;
          if (const auto second = rest.find(':'); second != std::string::npos) {
            const auto mode = rest.substr(second + 1);
            rest = rest.substr(0, second);
            read_only = mode == "ro";
            mode_ok = mode == "ro" || mode == "rw";
          }
          if (mode_ok && is_named_volume_source(source) && !rest.empty()) {
            mount.emplace(source, VolumeMount{rest, read_only});
          }
        }
      } else if (item.IsMap() &&
                 keys_within(item, {"type", "source", "target", "read_only"})) {
        const auto type = yaml::as_text(item["type"]);
        const auto source = yaml::as_text(item["source"]);
        const auto target = yaml::as_text(item["target"]);
        std::optional<bool> ro = false;
        if (item["read_only"]) ro = yaml::as_bool(item["read_only"]);
        if (type && *type == "volume" && source &&
            is_named_volume_source(*source) && target && !target->empty() &&
            ro) {
          mount.emplace(*source, VolumeMount{*target, *ro});
        }
      }
      if (mount && try_connect(id, mount->second, ArtifactClass::Volume,
                               mount->first, path, item)) {
        continue;
      }
      raw.push_back(item);
    }
    if (raw.size() > 0) set_entry(extras_of(id), "volumes", canonical_text(raw));
    return true;
  }

  bool grants(ArtifactId id, EdgeKindTag tag, const std::string& path,
              const YAML::Node& v) {
    if (!v.IsSequence()) return false;
    const auto cls = target_class(tag);
    YAML::Node raw(YAML::NodeType::Sequence);
    for (const auto& item : v) {
      std::optional<std::string> source;
      std::optional<std::string> target;
      std::optional<std::uint32_t> mode;
      bool ok = true;
      if (item.IsScalar()) {
        source = item.Scalar();
      } else if (item.IsMap() && keys_within(item, {"source", "target", "mode"})) {
        source = yaml::as_text(item["source"]);
        if (item["target"]) {
          target = yaml::as_text(item["target"]);
          ok = target.has_value();
        }
        if (item["mode"]) {
          mode = parse_mode(item["mode"]);
          ok = ok && mode.has_value();
        }
      }
      ok = ok && source && !source->empty();
      EdgeKind kind = tag == EdgeKindTag::ConfigGrant
                          ? EdgeKind(ConfigGrant{target, mode})
                          : EdgeKind(SecretGrant{target, mode});
      if (ok && try_connect(id, kind, cls, *source, path, item)) continue;
      raw.push_back(item);
    }
    if (raw.size() > 0) {
      set_entry(extras_of(id), std::string(compose_key(tag)), canonical_text(raw));
    }
    return true;
  }

  Stack stack_;
  std::vector<ParseNotice> notices_;
  std::vector<PendingService> pending_;
};

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

class Writer {
 public:
  Writer(const Stack& stack, SerializeOptions options)
      : stack_(stack), options_(options), keys_(emitted_keys(stack)) {}

  SerializeResult run() {
    SerializeResult result;
    disambiguation_notices(result.notices);
    out_ << YAML::BeginMap;
    if (stack_.compose_version()) {
      out_ << YAML::Key << "version" << YAML::Value;
      emit_string(out_, *stack_.compose_version());
    }
    out_ << YAML::Key << "services" << YAML::Value << YAML::BeginMap;
    for (const auto& s : stack_.services()) {
      key(s.id);
      service(s);
    }
    out_ << YAML::EndMap;
    section(ArtifactClass::Volume, stack_.volumes(), [&](const VolumeNode& n) {
      if (n.driver) field("driver", *n.driver);
      extras(n.extras);
    });
    section(ArtifactClass::Network, stack_.networks(), [&](const NetworkNode& n) {
      if (n.driver) field("driver", *n.driver);
      if (n.internal || !options_.omit_defaults) {
        out_ << YAML::Key << "internal" << YAML::Value << n.internal;
      }
      extras(n.extras);
    });
    section(ArtifactClass::Config, stack_.configs(),
            [&](const ConfigNode& n) { data(n); });
    section(ArtifactClass::Secret, stack_.secrets(),
            [&](const SecretNode& n) { data(n); });
    extras(stack_.extras());
    out_ << YAML::EndMap;
    // yaml-cpp puts empty flow collections on their own line; fold them back
    // onto the key line ("key: {}").
    static const std::regex kEmpty(R"(:\n +(\{\}|\[\])(\n|$))");
    result.yaml =
        std::regex_replace(std::string(out_.c_str()), kEmpty, ": $1$2") + "\n";
    return result;
  }

 private:
  void disambiguation_notices(std::vector<ParseNotice>& notices) const {
    for (const auto id : stack_.artifact_ids()) {
      const auto original = stack_.key_of(id);
      const auto& written = keys_.at(id);
      if (original != written) {
        const auto cls = *stack_.class_of(id);
        notices.push_back(ParseNotice{
            NoticeSeverity::Warn, NoticeCode::DuplicateYamlKey,
            std::string(section_name(cls)) + "." + written, 0, 0,
            "duplicate " + std::string(to_string(cls)) + " key '" +
                std::string(original) + "' written as '" + written + "'"});
      }
    }
  }

  void key(ArtifactId id) {
    out_ << YAML::Key;
    emit_string(out_, keys_.at(id));
    out_ << YAML::Value;
  }

  void field(const char* name, std::string_view value) {
    out_ << YAML::Key << name << YAML::Value;
    emit_string(out_, value);
  }

  void string_seq(const std::vector<std::string>& items) {
    out_ << YAML::BeginSeq;
    for (const auto& s : items) emit_string(out_, s);
    out_ << YAML::EndSeq;
  }

  void extras(const Sidecar& sidecar, bool skip_merged = false) {
    for (const auto& e : sidecar) {
      if (skip_merged && is_merged_key(e.key)) continue;
      out_ << YAML::Key;
      emit_string(out_, e.key);
      out_ << YAML::Value;
      emit_node(out_, yaml::load_text(e.yaml));
    }
  }

  template <typename Nodes, typename Body>
  void section(ArtifactClass cls, const Nodes& nodes, Body body) {
    if (nodes.empty()) return;
    out_ << YAML::Key << std::string(section_name(cls)) << YAML::Value
         << YAML::BeginMap;
    for (const auto& n : nodes) {
      key(n.id);
      out_ << YAML::BeginMap;
      body(n);
      out_ << YAML::EndMap;
    }
    out_ << YAML::EndMap;
  }

  void data(const DataNode& n) {
    if (n.source) {
      if (const auto* f = std::get_if<FileSource>(&*n.source)) {
        field("file", f->path);
      } else {
        out_ << YAML::Key << "external" << YAML::Value << true;
      }
    }
    extras(n.extras);
  }

  std::vector<const Edge*> edges_of(ArtifactId from, EdgeKindTag tag) const {
    std::vector<const Edge*> out;
    for (const auto& e : stack_.edges()) {
      if (e.from == from && tag_of(e.kind) == tag) out.push_back(&e);
    }
    return out;
  }

  // Undefined node when the sidecar has no entry under `key`.
  static YAML::Node sidecar_node(const Sidecar& sidecar, std::string_view key) {
    if (const auto* e = find_entry(sidecar, key)) return yaml::load_text(e->yaml);
    return YAML::Node(YAML::NodeType::Map)["absent"];
  }

  void service(const ServiceNode& s) {
    out_ << YAML::BeginMap;
    if (s.image) field("image", s.image->text(options_.omit_defaults));
    if (s.container_name) field("container_name", *s.container_name);
    if (s.hostname) field("hostname", *s.hostname);
    if (s.command) {
      out_ << YAML::Key << "command" << YAML::Value;
      string_seq(*s.command);
    }
    if (s.entrypoint) {
      out_ << YAML::Key << "entrypoint" << YAML::Value;
      string_seq(*s.entrypoint);
    }
    if (!s.environment.empty()) {
      out_ << YAML::Key << "environment" << YAML::Value << YAML::BeginSeq;
      for (const auto& env : s.environment) {
        emit_string(out_, env.value ? env.name + "=" + *env.value : env.name);
      }
      out_ << YAML::EndSeq;
    }
    ports(s);
    if (s.restart != RestartPolicy::No || !options_.omit_defaults) {
      field("restart", to_string(s.restart));
    }
    if (s.stdin_open || !options_.omit_defaults) {
      out_ << YAML::Key << "stdin_open" << YAML::Value << s.stdin_open;
    }
    if (s.tty || !options_.omit_defaults) {
      out_ << YAML::Key << "tty" << YAML::Value << s.tty;
    }
    if (s.healthcheck) healthcheck(*s.healthcheck);
    if (s.mem_limit) field("mem_limit", *s.mem_limit);
    depends_on(s);
    links(s);
    networks(s);
    mounts(s);
    grants(s, EdgeKindTag::ConfigGrant);
    grants(s, EdgeKindTag::SecretGrant);
    extras(s.extras, /*skip_merged=*/true);
    out_ << YAML::EndMap;
  }

  void ports(const ServiceNode& s) {
    const auto raw = sidecar_node(s.extras, "ports");
    const bool raw_seq = raw.IsSequence();
    if (s.ports.empty() && !raw) return;
    out_ << YAML::Key << "ports" << YAML::Value;
    if (!raw_seq && raw && s.ports.empty()) {
      emit_node(out_, raw);
      return;
    }
    out_ << YAML::BeginSeq;
    for (const auto& p : s.ports) {
      std::string text;
      if (p.host_port) text = std::to_string(*p.host_port) + ":";
      text += std::to_string(p.container_port);
      if (p.protocol != Protocol::Tcp) text += "/" + std::string(to_string(p.protocol));
      out_ << YAML::DoubleQuoted << text;
    }
    if (raw_seq) {
      for (const auto& item : raw) emit_node(out_, item);
    }
    out_ << YAML::EndSeq;
  }

  void healthcheck(const Healthcheck& h) {
    out_ << YAML::Key << "healthcheck" << YAML::Value << YAML::BeginMap;
    if (!h.test.empty()) {
      out_ << YAML::Key << "test" << YAML::Value;
      string_seq(h.test);
    }
    if (h.interval) field("interval", *h.interval);
    if (h.timeout) field("timeout", *h.timeout);
    if (h.retries) {
      out_ << YAML::Key << "retries" << YAML::Value << *h.retries;
    }
    extras(h.extras);
    out_ << YAML::EndMap;
  }

  // Map-shaped reference sections (depends_on, networks) merge edge entries
  // with sidecar attributes keyed by the target key.
  void depends_on(const ServiceNode& s) {
    const auto edges = edges_of(s.id, EdgeKindTag::DependsOn);
    const auto side = sidecar_node(s.extras, "depends_on");
    if (side && !side.IsMap()) {
      if (edges.empty()) {
        out_ << YAML::Key << "depends_on" << YAML::Value;
        emit_node(out_, side);
        return;
      }
    }
    const bool has_side = side.IsMap() && side.size() > 0;
    if (edges.empty() && !has_side) return;
    bool long_form = false;
    if (has_side) {
      for (const auto& kv : side) {
        const auto& attrs = kv.second;
        if (attrs.IsMap() ? attrs.size() > 0 : !attrs.IsNull()) long_form = true;
      }
    }
    std::set<std::string> written;
    out_ << YAML::Key << "depends_on" << YAML::Value;
    out_ << (long_form ? YAML::BeginMap : YAML::BeginSeq);
    auto entry = [&](const std::string& target, const YAML::Node& attrs) {
      if (!written.insert(target).second) return;
      if (long_form) {
        out_ << YAML::Key;
        emit_string(out_, target);
        out_ << YAML::Value;
        if (attrs && (attrs.IsMap() ? attrs.size() > 0 : !attrs.IsNull())) {
          emit_node(out_, attrs);
        } else {
          out_ << YAML::BeginMap << YAML::Key << "condition" << YAML::Value
               << "service_started" << YAML::EndMap;
        }
      } else {
        emit_string(out_, target);
      }
    };
    for (const auto* e : edges) {
      const auto& target = keys_.at(e->to);
      YAML::Node attrs;
      if (has_side) {
        const std::string original(stack_.key_of(e->to));
        for (const auto& kv : side) {
          if (kv.first.Scalar() == original) attrs = kv.second;
        }
      }
      entry(target, attrs);
    }
    if (has_side) {
      std::set<std::string> consumed;
      for (const auto* e : edges) consumed.insert(std::string(stack_.key_of(e->to)));
      for (const auto& kv : side) {
        if (consumed.count(kv.first.Scalar()) == 0) {
          entry(kv.first.Scalar(), kv.second);
        }
      }
    }
    out_ << (long_form ? YAML::EndMap : YAML::EndSeq);
  }

  void networks(const ServiceNode& s) {
    const auto edges = edges_of(s.id, EdgeKindTag::NetworkAttachment);
    const auto side = sidecar_node(s.extras, "networks");
    if (side && !side.IsMap()) {
      if (edges.empty()) {
        out_ << YAML::Key << "networks" << YAML::Value;
        emit_node(out_, side);
        return;
      }
    }
    const bool has_side = side.IsMap() && side.size() > 0;
    if (edges.empty() && !has_side) return;
    bool map_form = false;
    for (const auto* e : edges) {
      if (!std::get<NetworkAttachment>(e->kind).aliases.empty()) map_form = true;
    }
    if (has_side) {
      for (const auto& kv : side) {
        if (kv.second.IsMap() ? kv.second.size() > 0 : !kv.second.IsNull()) {
          map_form = true;
        }
      }
    }
    std::set<std::string> written;
    std::set<std::string> consumed;
    out_ << YAML::Key << "networks" << YAML::Value;
    out_ << (map_form ? YAML::BeginMap : YAML::BeginSeq);
    for (const auto* e : edges) {
      const auto& name = keys_.at(e->to);
      if (!written.insert(name).second) continue;
      const std::string original(stack_.key_of(e->to));
      consumed.insert(original);
      if (!map_form) {
        emit_string(out_, name);
        continue;
      }
      out_ << YAML::Key;
      emit_string(out_, name);
      out_ << YAML::Value << YAML::BeginMap;
      const auto& aliases = std::get<NetworkAttachment>(e->kind).aliases;
      if (!aliases.empty()) {
        out_ << YAML::Key << "aliases" << YAML::Value;
        string_seq(aliases);
      }
      if (has_side) {
        for (const auto& kv : side) {
          if (kv.first.Scalar() != original || !kv.second.IsMap()) continue;
          for (const auto& attr : kv.second) {
            out_ << YAML::Key;
            emit_node(out_, attr.first);
            out_ << YAML::Value;
            emit_node(out_, attr.second);
          }
        }
      }
      out_ << YAML::EndMap;
    }
    if (has_side) {
      for (const auto& kv : side) {
        const auto& name = kv.first.Scalar();
        if (consumed.count(name) || !written.insert(name).second) continue;
        if (map_form) {
          out_ << YAML::Key;
          emit_string(out_, name);
          out_ << YAML::Value;
          emit_node(out_, kv.second.IsNull() ? YAML::Node(YAML::NodeType::Map)
                                             : kv.second);
        } else {
          emit_string(out_, name);
        }
      }
    }
    out_ << (map_form ? YAML::EndMap : YAML::EndSeq);
  }

  // List-shaped sections: edges first, then verbatim items from the sidecar.
  template <typename EmitEdge>
  void list_section(const ServiceNode& s, EdgeKindTag tag, EmitEdge emit_edge) {
    const auto edges = edges_of(s.id, tag);
    const std::string name(compose_key(tag));
    const auto raw = sidecar_node(s.extras, name);
    if (edges.empty() && !raw) return;
    out_ << YAML::Key << name << YAML::Value;
    if (raw && !raw.IsSequence() && edges.empty()) {
      emit_node(out_, raw);
      return;
    }
    out_ << YAML::BeginSeq;
    for (const auto* e : edges) emit_edge(*e);
    if (raw.IsSequence()) {
      for (const auto& item : raw) emit_node(out_, item);
    }
    out_ << YAML::EndSeq;
  }

  void links(const ServiceNode& s) {
    list_section(s, EdgeKindTag::Link, [&](const Edge& e) {
      const auto& link = std::get<Link>(e.kind);
      auto text = keys_.at(e.to);
      if (link.alias) text += ":" + *link.alias;
      emit_string(out_, text);
    });
  }

  void mounts(const ServiceNode& s) {
    list_section(s, EdgeKindTag::VolumeMount, [&](const Edge& e) {
      const auto& m = std::get<VolumeMount>(e.kind);
      emit_string(out_, keys_.at(e.to) + ":" + m.target + (m.read_only ? ":ro" : ""));
    });
  }

  void grants(const ServiceNode& s, EdgeKindTag tag) {
    list_section(s, tag, [&](const Edge& e) {
      std::optional<std::string> target;
      std::optional<std::uint32_t> mode;
      std::visit(
          [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, ConfigGrant> ||
                          std::is_same_v<K, SecretGrant>) {
              target = k.target;
              mode = k.mode;
            }
          },
          e.kind);
      if (!target && !mode) {
        emit_string(out_, keys_.at(e.to));
        return;
      }
      out_ << YAML::BeginMap;
      field("source", keys_.at(e.to));
      if (target) field("target", *target);
      if (mode) out_ << YAML::Key << "mode" << YAML::Value << format_mode(*mode);
      out_ << YAML::EndMap;
    });
  }

  const Stack& stack_;
  SerializeOptions options_;
  std::map<ArtifactId, std::string> keys_;
  YAML::Emitter out_;
};

json canonical_sidecar(const Sidecar& sidecar) {
  json out = json::object();
  for (const auto& e : sidecar) out[e.key] = e.yaml;
  return out;
}

json canonical_artifact(const json& node) {
  json j = node;
  j.erase("id");
  if (j.contains("extras")) j["extras"] = canonical_sidecar(sidecar_from_json(j["extras"]));
  if (j.contains("healthcheck") && j["healthcheck"].is_object()) {
    j["healthcheck"]["extras"] =
        canonical_sidecar(sidecar_from_json(j["healthcheck"]["extras"]));
  }
  return j;
}

}  // namespace

std::string_view to_string(NoticeSeverity s) noexcept {
  return s == NoticeSeverity::Warn ? "warn" : "info";
}

std::string_view to_string(NoticeCode c) noexcept {
  switch (c) {
    case NoticeCode::UnsupportedKey: return "UnsupportedKey";
    case NoticeCode::DanglingReference: return "DanglingReference";
    case NoticeCode::DuplicateYamlKey: return "DuplicateYamlKey";
  }
  return "UnsupportedKey";
}

ParseResult parse_compose(std::string_view yaml_text, std::string stack_name) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw Error(Errc::YamlSyntaxError, e.what());
  }
  if (!root.IsMap()) {
    throw Error(Errc::NotAMapping, "top level of a compose file must be a mapping");
  }
  try {
    return Parser(std::move(stack_name)).run(root);
  } catch (const YAML::Exception& e) {
    throw Error(Errc::YamlSyntaxError, e.what());
  }
}

SerializeResult serialize_compose(const Stack& stack, SerializeOptions options) {
  return Writer(stack, options).run();
}

std::map<ArtifactId, std::string> emitted_keys(const Stack& stack) {
  std::map<ArtifactId, std::string> out;
  auto assign = [&out](const auto& nodes) {
    std::set<std::string> taken;
    for (const auto& n : nodes) taken.insert(n.key);
    std::set<std::string> used;
    for (const auto& n : nodes) {
      if (used.insert(n.key).second) {
        out[n.id] = n.key;
        continue;
      }
      for (int suffix = 2;; ++suffix) {
        auto candidate = n.key + "-" + std::to_string(suffix);
        if (taken.count(candidate) == 0 && used.count(candidate) == 0) {
          used.insert(candidate);
          out[n.id] = std::move(candidate);
          break;
        }
      }
    }
  };
  assign(stack.services());
  assign(stack.volumes());
  assign(stack.networks());
  assign(stack.configs());
  assign(stack.secrets());
  return out;
}

std::string canonical_form(const Stack& stack) {
  const json full = to_json(stack);
  std::unordered_map<std::uint64_t, std::string> label;
  std::vector<std::string> artifacts;
  for (const char* section :
       {"services", "volumes", "networks", "configs", "secrets"}) {
    for (const auto& node : full[section]) {
      label[node["id"].get<std::uint64_t>()] =
          node["class"].get<std::string>() + ":" + node["key"].get<std::string>();
      artifacts.push_back(canonical_artifact(node).dump());
    }
  }
  std::vector<std::string> edges;
  for (const auto& e : full["edges"]) {
    json j = {{"kind", e["kind"]},
              {"from", label[e["from"].get<std::uint64_t>()]},
              {"to", label[e["to"].get<std::uint64_t>()]}};
    edges.push_back(j.dump());
  }
  std::sort(artifacts.begin(), artifacts.end());
  std::sort(edges.begin(), edges.end());
  json out = {{"version", full["version"]},
              {"extras", canonical_sidecar(stack.extras())},
              {"artifacts", artifacts},
              {"edges", edges}};
  return out.dump();
}

bool model_equal(const Stack& a, const Stack& b) {
  return canonical_form(a) == canonical_form(b);
}

}  // namespace dcomposer
