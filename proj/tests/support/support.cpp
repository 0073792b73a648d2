#include "support.hpp"

#include "dcomposer/error.hpp"
#include "dcomposer/ops.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <atomic>
#include <functional>
#include <limits>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace dcomposer;

namespace testsupport {

fs::path data_dir() { return fs::path(DCOMPOSER_TEST_DATA); }
fs::path corpus_dir() { return data_dir() / "fixtures" / "corpus"; }

std::vector<fs::path> corpus_files() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(corpus_dir())) {
    if (e.path().extension() == ".yml") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

fs::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = fs::temp_directory_path() /
             ("dcomposer-test-" + std::to_string(::getpid()) + "-" + tag + "-" +
              std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---- random stacks --------------------------------------------------------

namespace {

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

bool coin(std::mt19937_64& rng, double p = 0.5) {
  return std::bernoulli_distribution(p)(rng);
}

int upto(std::mt19937_64& rng, int n) {
  return std::uniform_int_distribution<int>(0, n)(rng);
}

const std::vector<std::string> kImages = {"nginx", "redis", "postgres", "alpine",
                                          "mongo", "node", "example/tool"};
const std::vector<std::string> kTags = {"latest", "1.25", "7", "15-alpine", "4.4"};
const std::vector<std::string> kDurations = {"10s", "1m30s", "500ms", "2.5s", "1h",
                                             "bogus", "90"};
const std::vector<std::string> kSizes = {"512mb", "1gb", "300", "64kb", "1.5gb"};
const std::vector<std::string> kWords = {"alpha", "beta", "gamma", "delta", "omega",
                                         "x1", "data", "main"};

}  // namespace

Stack random_stack(std::mt19937_64& rng, RandomStackOptions opts) {
  Stack stack("random");
  std::vector<ArtifactId> services, volumes, networks, configs, secrets;

  const int n_services = upto(rng, opts.max_services);
  for (int i = 0; i < n_services; ++i) {
    ServiceNode s;
    s.key = "svc" + std::to_string(i);
    if (coin(rng, 0.8)) s.image = ImageRef{pick(rng, kImages), pick(rng, kTags)};
    if (coin(rng, 0.2)) s.container_name = "c" + std::to_string(i);
    if (coin(rng, 0.2)) s.command = std::vector<std::string>{"run", pick(rng, kWords)};
    if (coin(rng, 0.1)) s.entrypoint = std::vector<std::string>{"/bin/sh", "-c"};
    for (int e = upto(rng, 3); e > 0; --e) {
      EnvVar v{"VAR_" + pick(rng, kWords), std::nullopt};
      if (coin(rng, 0.8)) v.value = pick(rng, kWords);
      s.environment.push_back(v);
    }
    for (int p = upto(rng, 2); p > 0; --p) {
      PortMapping m;
      m.container_port = static_cast<std::uint16_t>(
          std::uniform_int_distribution<int>(1, 65535)(rng));
      if (coin(rng)) m.host_port = static_cast<std::uint16_t>(8000 + upto(rng, 50));
      if (coin(rng, 0.2)) m.protocol = Protocol::Udp;
      s.ports.push_back(m);
    }
    if (coin(rng, 0.2)) s.hostname = "host" + std::to_string(i);
    s.restart = static_cast<RestartPolicy>(upto(rng, 3));
    s.stdin_open = coin(rng, 0.2);
    s.tty = coin(rng, 0.2);
    if (coin(rng, 0.3)) {
      Healthcheck h;
      h.test = {"CMD", "true"};
      if (coin(rng)) h.interval = pick(rng, kDurations);
      if (coin(rng)) h.timeout = pick(rng, kDurations);
      if (coin(rng)) h.retries = static_cast<std::uint32_t>(upto(rng, 5));
      s.healthcheck = h;
    }
    if (coin(rng, 0.3)) s.mem_limit = pick(rng, kSizes);
    services.push_back(stack.add(s));
  }
  for (int i = upto(rng, opts.max_resources); i > 0; --i) {
    VolumeNode v;
    v.key = "vol" + std::to_string(i);
    if (coin(rng, 0.3)) v.driver = "local";
    volumes.push_back(stack.add(v));
  }
  for (int i = upto(rng, opts.max_resources); i > 0; --i) {
    NetworkNode n;
    n.key = "net" + std::to_string(i);
    if (coin(rng, 0.3)) n.driver = "bridge";
    n.internal = coin(rng, 0.3);
    networks.push_back(stack.add(n));
  }
  auto data_source = [&](int i) -> std::optional<DataSource> {
    if (coin(rng, 0.3)) return ExternalSource{};
    return FileSource{"./file" + std::to_string(i) + ".txt"};
  };
  for (int i = upto(rng, opts.max_resources); i > 0; --i) {
    ConfigNode c;
    c.key = "cfg" + std::to_string(i);
    c.source = data_source(i);
    configs.push_back(stack.add(c));
  }
  for (int i = upto(rng, opts.max_resources); i > 0; --i) {
    SecretNode s;
    s.key = "sec" + std::to_string(i);
    s.source = data_source(i);
    secrets.push_back(stack.add(s));
  }

  if (services.empty()) return stack;
  for (int e = upto(rng, opts.max_edges); e > 0; --e) {
    const ArtifactId from = pick(rng, services);
    const int kind = upto(rng, 5);
    try {
      switch (kind) {
        case 0:
          stack.connect(from, DependsOn{}, pick(rng, services));
          break;
        case 1: {
          Link l;
          if (coin(rng)) l.alias = pick(rng, kWords);
          stack.connect(from, l, pick(rng, services));
          break;
        }
        case 2: {
          if (networks.empty()) break;
          NetworkAttachment a;
          if (coin(rng, 0.3)) a.aliases = {pick(rng, kWords)};
          stack.connect(from, a, pick(rng, networks));
          break;
        }
        case 3: {
          if (volumes.empty()) break;
          VolumeMount m{"/mnt/" + pick(rng, kWords) + std::to_string(e), coin(rng, 0.3)};
          stack.connect(from, m, pick(rng, volumes));
          break;
        }
        case 4: {
          if (configs.empty()) break;
          ConfigGrant g;
          if (coin(rng, 0.4)) g.target = "/etc/" + pick(rng, kWords);
          if (coin(rng, 0.3)) g.mode = 0440;
          stack.connect(from, g, pick(rng, configs));
          break;
        }
        default: {
          if (secrets.empty()) break;
          SecretGrant g;
          if (coin(rng, 0.4)) g.target = pick(rng, kWords);
          if (coin(rng, 0.3)) g.mode = 0400;
          stack.connect(from, g, pick(rng, secrets));
          break;
        }
      }
    } catch (const Error&) {
      // self edge or duplicate; skip
    }
  }
  return stack;
}

Stack random_dependency_graph(std::mt19937_64& rng, int nodes, double density) {
  Stack stack("graph");
  std::vector<ArtifactId> ids;
  for (int i = 0; i < nodes; ++i) {
    ServiceNode s;
    s.key = "n" + std::to_string(i);
    ids.push_back(stack.add(s));
  }
  for (int a = 0; a < nodes; ++a) {
    for (int b = 0; b < nodes; ++b) {
      if (a != b && coin(rng, density)) stack.connect(ids[a], DependsOn{}, ids[b]);
    }
  }
  return stack;
}

// ---- oracles --------------------------------------------------------------

namespace {

using Wide = __int128;

// number := digits ('.' digits)? ; returns value scaled by unit, truncated.
std::optional<Wide> eval_term(const std::string& num, const std::string& unit) {
  static const std::map<std::string, Wide> units = {
      {"us", 1}, {"ms", 1000}, {"s", 1000000}, {"m", 60000000}, {"h", 3600000000LL}};
  auto u = units.find(unit);
  if (u == units.end()) return std::nullopt;
  static const std::regex number(R"(^([0-9]+)(\.([0-9]+))?$)");
  std::smatch m;
  if (!std::regex_match(num, m, number)) return std::nullopt;
  std::string whole = m[1].str();
  std::string frac = m[3].matched ? m[3].str() : "";
  whole.erase(0, std::min(whole.find_first_not_of('0'), whole.size()));
  if (whole.size() > 20) return Wide(1) << 100;  // far beyond int64 either way
  frac = frac.substr(0, 18);
  Wide w = 0;
  for (char c : whole) w = w * 10 + (c - '0');
  Wide f = 0, scale = 1;
  for (char c : frac) {
    f = f * 10 + (c - '0');
    scale *= 10;
  }
  return w * u->second + f * u->second / scale;
}

}  // namespace

std::optional<std::int64_t> oracle_duration(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const Wide limit = std::numeric_limits<std::int64_t>::max();
  // best[i]: the set of totals for parses of text[0..i). The grammar is
  // unambiguous, so every complete parse must agree.
  std::vector<std::set<Wide>> totals(text.size() + 1);
  std::vector<bool> overflow(text.size() + 1, false);
  totals[0].insert(0);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (totals[i].empty() && !overflow[i]) continue;
    for (std::size_t j = i + 1; j < text.size(); ++j) {
      for (std::size_t k = j + 1; k <= text.size(); ++k) {
        auto term = eval_term(text.substr(i, j - i), text.substr(j, k - j));
        if (!term) continue;
        if (overflow[i]) {
          overflow[k] = true;
          continue;
        }
        for (Wide t : totals[i]) {
          if (t + *term > limit) {
            overflow[k] = true;
          } else {
            totals[k].insert(t + *term);
          }
        }
      }
    }
  }
  if (overflow[text.size()] || totals[text.size()].size() != 1) return std::nullopt;
  return static_cast<std::int64_t>(*totals[text.size()].begin());
}

std::optional<std::uint64_t> oracle_byte_size(const std::string& text) {
  static const std::regex grammar(R"(^([0-9]+)(b|kb|mb|gb)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(text, m, grammar)) return std::nullopt;
  std::string digits = m[1].str();
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size()));
  if (digits.size() > 25) return std::nullopt;
  Wide value = 0;
  for (char c : digits) value = value * 10 + (c - '0');
  std::string unit = m[2].str();
  for (auto& c : unit) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  Wide mult = 1;
  if (unit == "kb") mult = 1024;
  if (unit == "mb") mult = 1024 * 1024;
  if (unit == "gb") mult = 1024 * 1024 * 1024;
  value *= mult;
  if (value > static_cast<Wide>(std::numeric_limits<std::uint64_t>::max())) {
    return std::nullopt;
  }
  return static_cast<std::uint64_t>(value);
}

std::vector<std::vector<ArtifactId>> oracle_cycles(const Stack& stack) {
  std::vector<ArtifactId> nodes;
  for (const auto& s : stack.services()) nodes.push_back(s.id);
  std::map<ArtifactId, std::vector<ArtifactId>> adj;
  std::set<ArtifactId> self_loop;
  for (const auto& e : stack.edges()) {
    if (!std::holds_alternative<DependsOn>(e.kind)) continue;
    adj[e.from].push_back(e.to);
    if (e.from == e.to) self_loop.insert(e.from);
  }
  auto reach = [&](ArtifactId start) {
    std::set<ArtifactId> seen;
    std::function<void(ArtifactId)> dfs = [&](ArtifactId u) {
      for (ArtifactId v : adj[u]) {
        if (seen.insert(v).second) dfs(v);
      }
    };
    dfs(start);
    return seen;
  };
  std::map<ArtifactId, std::set<ArtifactId>> reachable;
  for (ArtifactId n : nodes) reachable[n] = reach(n);

  std::vector<std::vector<ArtifactId>> out;
  std::set<ArtifactId> assigned;
  std::sort(nodes.begin(), nodes.end());
  for (ArtifactId u : nodes) {
    if (assigned.count(u)) continue;
    std::vector<ArtifactId> group{u};
    for (ArtifactId v : nodes) {
      if (v != u && reachable[u].count(v) && reachable[v].count(u)) group.push_back(v);
    }
    if (group.size() < 2 && !self_loop.count(u)) continue;
    std::sort(group.begin(), group.end());
    for (ArtifactId v : group) assigned.insert(v);
    out.push_back(group);
  }
  return out;
}

std::size_t oracle_duplicate_keys(const Stack& stack) {
  std::vector<std::pair<int, std::string>> keys;
  for (const auto& s : stack.services()) keys.emplace_back(0, s.key);
  for (const auto& s : stack.volumes()) keys.emplace_back(1, s.key);
  for (const auto& s : stack.networks()) keys.emplace_back(2, s.key);
  for (const auto& s : stack.configs()) keys.emplace_back(3, s.key);
  for (const auto& s : stack.secrets()) keys.emplace_back(4, s.key);
  std::size_t n = 0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (i != j && keys[i] == keys[j]) {
        ++n;
        break;
      }
    }
  }
  return n;
}

std::vector<nlohmann::json> record_op_script(Stack& stack, Diagram& diagram,
                                             std::mt19937_64& rng, int count) {
  using nlohmann::json;
  static const std::vector<std::string> classes = {"service", "volume", "network", "config",
                                                   "secret"};
  static const std::vector<json> kinds = {
      "DependsOn",
      json{{"type", "Link"}, {"alias", "peer"}},
      json{{"type", "NetworkAttachment"}, {"aliases", {"a1"}}},
      json{{"type", "VolumeMount"}, {"target", "/var/data"}, {"read_only", true}},
      json{{"type", "ConfigGrant"}, {"target", "/etc/app.conf"}},
      "SecretGrant"};
  std::vector<json> script;
  int attempts = 0;
  while (static_cast<int>(script.size()) < count && attempts++ < count * 100) {
    const auto ids = stack.artifact_ids();
    json op;
    const int pick_type = upto(rng, 9);
    if (ids.size() < 3 || pick_type <= 2) {
      op = {{"type", "add_artifact"},
            {"class", pick(rng, classes)},
            {"key", pick(rng, kWords) + std::to_string(upto(rng, 3))}};
      if (coin(rng, 0.3)) {
        op["x"] = 40 * upto(rng, 30);
        op["y"] = 40 * upto(rng, 30);
      }
    } else if (pick_type == 3) {
      op = {{"type", "remove_artifact"}, {"id", pick(rng, ids).value}};
    } else if (pick_type <= 5) {
      std::vector<ArtifactId> services;
      for (const auto& sv : stack.services()) services.push_back(sv.id);
      if (services.empty()) continue;
      op = {{"type", "connect"},
            {"from", pick(rng, services).value},
            {"kind", pick(rng, kinds)},
            {"to", pick(rng, ids).value}};
    } else if (pick_type == 6) {
      if (stack.edges().empty()) continue;
      op = {{"type", "disconnect"}, {"edge", pick(rng, stack.edges()).id.value}};
    } else if (pick_type == 7) {
      std::vector<ArtifactId> services;
      for (const auto& sv : stack.services()) services.push_back(sv.id);
      if (services.empty()) continue;
      static const std::vector<std::pair<std::string, json>> props = {
          {"image", "redis:7"},
          {"hostname", "app-host"},
          {"healthcheck.interval", "2.5x"},
          {"mem_limit", "256mb"},
          {"environment", json::array({json{{"name", "A"}, {"value", "1"}}})},
          {"ports", json::array({json{{"container_port", 80}, {"host_port", 8080}}})},
          {"restart", "always"},
          {"stdin_open", true}};
      const auto& [path, value] = pick(rng, props);
      op = {{"type", "set_property"},
            {"id", pick(rng, services).value},
            {"path", path},
            {"value", value}};
    } else {
      op = {{"type", "move_node"},
            {"id", pick(rng, ids).value},
            {"x", 10 * upto(rng, 100)},
            {"y", 10 * upto(rng, 100)}};
    }
    try {
      dcomposer::apply_op(stack, diagram, op);
      script.push_back(op);
    } catch (const Error&) {
      // rejected ops are not part of the script
    }
  }
  return script;
}

std::vector<std::string> layout_violations(const Stack& s, const Diagram& d,
                                           const LayoutConfig& cfg) {
  std::set<std::string> bad;
  const auto ids = s.artifact_ids();
  if (d.positions.size() != ids.size() || d.node_sizes.size() != ids.size()) {
    bad.insert("coverage");
  }
  for (auto id : ids) {
    if (!d.positions.count(id) || !d.node_sizes.count(id)) {
      bad.insert("coverage");
      return {bad.begin(), bad.end()};
    }
  }
  auto rect = [&](ArtifactId id) {
    const auto p = d.positions.at(id);
    const auto z = d.node_sizes.at(id);
    return std::array<double, 4>{p.x, p.y, p.x + z.w, p.y + z.h};
  };
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto a = rect(ids[i]);
    if (a[0] < 0 || a[1] < 0 || a[2] > d.canvas.w || a[3] > d.canvas.h) bad.insert("canvas");
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const auto b = rect(ids[j]);
      const bool apart = a[2] <= b[0] || b[2] <= a[0] || a[3] <= b[1] || b[3] <= a[1];
      if (!apart) bad.insert("overlap");
    }
  }
  double service_bottom = -1e300, other_top = 1e300;
  for (auto id : ids) {
    const auto r = rect(id);
    if (s.class_of(id) == ArtifactClass::Service) {
      service_bottom = std::max(service_bottom, r[3]);
    } else {
      other_top = std::min(other_top, r[1]);
    }
  }
  if (service_bottom + cfg.band_gap > other_top) bad.insert("band");
  std::map<ArtifactId, std::size_t> component;
  const auto groups = oracle_cycles(s);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto id : groups[g]) component[id] = g;
  }
  for (const auto& e : s.edges()) {
    if (!std::holds_alternative<DependsOn>(e.kind)) continue;
    if (component.count(e.from) && component.count(e.to) &&
        component[e.from] == component[e.to]) {
      continue;  // edge on a cycle
    }
    if (!(d.positions.at(e.to).x < d.positions.at(e.from).x)) bad.insert("monotonic");
  }
  return {bad.begin(), bad.end()};
}

}  // namespace testsupport
