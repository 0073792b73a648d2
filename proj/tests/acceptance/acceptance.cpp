// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dcomposer/cli.hpp"
#include "dcomposer/compose_io.hpp"
#include "dcomposer/error.hpp"
#include "dcomposer/formats.hpp"
#include "dcomposer/graph.hpp"
#include "dcomposer/json_codec.hpp"
#include "dcomposer/layout.hpp"
#include "dcomposer/ops.hpp"
#include "dcomposer/runtime.hpp"
#include "dcomposer/server.hpp"
#include "dcomposer/validation.hpp"
#include "support.hpp"

using namespace dcomposer;
using namespace std::chrono_literals;
namespace fs = std::filesystem;
namespace ts = testsupport;

namespace {

using Clock = std::chrono::steady_clock;
using Argv = std::vector<std::string>;

// Collects failure details for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
};

int failed = 0;

void report(const std::string& name, const std::function<std::string(Check&)>& body) {
  Check c;
  std::string detail;
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  if (c.failures.empty()) {
    std::cout << "PASS " << name << ": " << detail << "\n";
  } else {
    ++failed;
    std::cout << "FAIL " << name << ":";
    for (const auto& f : c.failures) std::cout << " [" << f << "]";
    std::cout << "\n";
  }
  std::cout.flush();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_seconds(double s) {
  std::ostringstream o;
  o.precision(3);
  o << std::fixed << s << "s";
  return o.str();
}

std::multiset<std::string> edge_strings(const Stack& s) {
  std::multiset<std::string> out;
  for (const auto& e : s.edges()) {
    out.insert(std::string(s.key_of(e.from)) + " " + std::string(compose_key(tag_of(e.kind))) +
               " " + std::string(s.key_of(e.to)));
  }
  return out;
}

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args, const CliEnv& env = {}) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err, env);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct InDir {
  fs::path saved = fs::current_path();
  explicit InDir(const fs::path& dir) { fs::current_path(dir); }
  ~InDir() { fs::current_path(saved); }
};

bool round_trips(const Stack& s) {
  const auto yaml = serialize_compose(s).yaml;
  return model_equal(s, parse_compose(yaml).stack);
}

// ---- criteria -------------------------------------------------------------

std::string round_trip(Check& c) {
  const auto t0 = Clock::now();
  const auto files = ts::corpus_files();
  c.expect(files.size() >= 20, "corpus has " + std::to_string(files.size()) + " files");
  std::set<ArtifactClass> classes;
  std::set<EdgeKindTag> kinds;
  for (const auto& f : files) {
    const auto s = parse_compose(ts::read_file(f)).stack;
    if (!s.services().empty()) classes.insert(ArtifactClass::Service);
    if (!s.volumes().empty()) classes.insert(ArtifactClass::Volume);
    if (!s.networks().empty()) classes.insert(ArtifactClass::Network);
    if (!s.configs().empty()) classes.insert(ArtifactClass::Config);
    if (!s.secrets().empty()) classes.insert(ArtifactClass::Secret);
    for (const auto& e : s.edges()) kinds.insert(tag_of(e.kind));
    c.expect(round_trips(s), f.filename().string());
  }
  c.expect(classes.size() == 5, "classes covered " + std::to_string(classes.size()));
  c.expect(kinds.size() == 6, "edge kinds covered " + std::to_string(kinds.size()));
  c.expect(fs::exists(ts::corpus_dir() / "nodejs_mongodb.yml"), "nodejs/mongodb file");
  c.expect(fs::exists(ts::corpus_dir() / "client_server_db.yml"), "client/server/db file");

  std::mt19937_64 rng(20241016);
  for (int i = 0; i < 1000; ++i) {
    c.expect(round_trips(ts::random_stack(rng)), "random stack " + std::to_string(i));
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "took " + fmt_seconds(secs));
  return std::to_string(files.size()) + " files + 1000 random stacks in " + fmt_seconds(secs);
}

std::string client_server_db(Check& c) {
  const std::multiset<std::string> expected = {
      "client networks public", "server networks public",  "server networks private",
      "db networks private",    "db volumes mongo-data",   "client depends_on server",
      "server depends_on db"};
  const auto s = parse_compose(ts::read_file(ts::corpus_dir() / "client_server_db.yml")).stack;
  auto shape = [&](const Stack& x, const std::string& tag) {
    c.expect(x.services().size() == 3, tag + " services");
    c.expect(x.networks().size() == 2, tag + " networks");
    c.expect(x.volumes().size() == 1, tag + " volumes");
    c.expect(x.configs().empty() && x.secrets().empty(), tag + " no data nodes");
    c.expect(edge_strings(x) == expected, tag + " edge set");
  };
  shape(s, "parsed");
  shape(parse_compose(serialize_compose(s).yaml).stack, "re-parsed");
  return "3 services, 2 networks, 1 volume, 7 edges";
}

std::string duplicate_key(Check& c) {
  const auto dir = ts::data_dir() / "fixtures" / "validation";
  const auto s = parse_compose(ts::read_file(dir / "duplicate_key.yml")).stack;
  const auto w = validate(s);
  std::set<ArtifactId> flagged;
  std::size_t dup = 0;
  for (const auto& x : w) {
    if (x.code == WarningCode::DuplicateKey) {
      ++dup;
      flagged.insert(x.artifact);
    } else {
      c.expect(false, "unexpected " + std::string(to_string(x.code)));
    }
  }
  c.expect(dup == 2, std::to_string(dup) + " DuplicateKey warnings");
  c.expect(flagged.size() == 2 && s.services().size() == 2, "one warning per service");
  InDir in(dir);
  const auto r = cli({"validate", "duplicate_key.yml"});
  c.expect(r.code == kExitOk, "validate exit " + std::to_string(r.code));
  return "2 DuplicateKey warnings, validate exit 0";
}

std::vector<std::string> duration_cases() {
  std::vector<std::string> v = {
      "",        "s",      "1",       "1s",      "10s",     "1m30s",   "2.5s",    "1.5h",
      "100ms",   "250us",  "1h2m3s",  "0s",      "0.5ms",   "1.0000001s", "-1s",  "+1s",
      " 1s",     "1s ",    "1 s",     "1S",      "1sec",    "1d",      "1w",      "1.s",
      ".5s",     "1..5s",  "1m1",     "ms",      "1ms1us",  "1s1s",    "1h1h1h",  "9223372036854775807us",
      "9223372036854775808us", "3000000000h", "2562047h", "2562048h", "10 seconds", "1h30",
      "1e3s",    "0x10s",  "01s",     "00.1s",   "1.23456789s", "5m0s", "1m-1s", "1_000ms",
      "1,5s",    "1.5.5s", "30",      "1mm",     "1us1ms",  "1sm",     "1.9us",   "0.0000001s"};
  for (const char* n : {"0", "1", "7", "12", "0.25", "3.5"}) {
    for (const char* u : {"us", "ms", "s", "m", "h", "x", ""}) v.push_back(std::string(n) + u);
  }
  return v;
}

std::vector<std::string> size_cases() {
  std::vector<std::string> v = {
      "",      "0",       "1",      "1024",   "1b",     "1B",     "1kb",    "1KB",   "1Kb",
      "512mb", "2gb",     "2GB",    "1.5gb",  "1 gb",   " 1gb",   "1gb ",   "-1",    "+1",
      "1k",    "1m",      "1g",     "1tb",    "1gib",   "gb",     "b",      "0x10",  "01kb",
      "1e3",   "1_000",   "1,000",  "18446744073709551615", "18446744073709551616",
      "17179869183gb", "17179869184gb", "16777216tb", "99999999999999999999b", "1bb",
      "1kbb",  "1mbgb",   "64MB",   "256Mb",  "10mB"};
  for (const char* n : {"0", "1", "9", "100", "4096"}) {
    for (const char* u : {"", "b", "kb", "mb", "gb", "KB", "x"}) v.push_back(std::string(n) + u);
  }
  return v;
}

std::string parsers(Check& c) {
  const auto d = duration_cases();
  const auto b = size_cases();
  c.expect(d.size() >= 50, "duration cases " + std::to_string(d.size()));
  c.expect(b.size() >= 50, "size cases " + std::to_string(b.size()));
  std::size_t d_valid = 0, b_valid = 0;
  for (const auto& text : d) {
    std::optional<std::int64_t> got;
    try {
      got = parse_duration(text).microseconds;
    } catch (const Error& e) {
      c.expect(e.code() == Errc::InvalidFormat, "duration error code for '" + text + "'");
    }
    const auto want = ts::oracle_duration(text);
    d_valid += want.has_value();
    c.expect(got == want, "duration '" + text + "'");
  }
  for (const auto& text : b) {
    std::optional<std::uint64_t> got;
    try {
      got = parse_byte_size(text).bytes;
    } catch (const Error& e) {
      c.expect(e.code() == Errc::InvalidFormat, "size error code for '" + text + "'");
    }
    const auto want = ts::oracle_byte_size(text);
    b_valid += want.has_value();
    c.expect(got == want, "size '" + text + "'");
  }
  c.expect(d_valid > 0 && d_valid < d.size(), "duration suite mixes valid and invalid");
  c.expect(b_valid > 0 && b_valid < b.size(), "size suite mixes valid and invalid");
  return std::to_string(d.size()) + " duration (" + std::to_string(d_valid) + " valid) and " +
         std::to_string(b.size()) + " size (" + std::to_string(b_valid) +
         " valid) cases, 100% agreement";
}

std::string cycles(Check& c) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> nodes(1, 8);
  std::uniform_real_distribution<double> density(0.0, 0.5);
  std::size_t with_cycle = 0;
  for (int i = 0; i < 500; ++i) {
    const auto s = ts::random_dependency_graph(rng, nodes(rng), density(rng));
    const auto got = detect_cycles(s);
    with_cycle += !got.empty();
    c.expect(got == ts::oracle_cycles(s), "graph " + std::to_string(i));
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 5.0, "took " + fmt_seconds(secs));
  return "500 graphs (" + std::to_string(with_cycle) + " cyclic) agree in " + fmt_seconds(secs);
}

std::string layout(Check& c) {
  std::vector<std::pair<std::string, Stack>> stacks;
  for (const auto& f : ts::corpus_files()) {
    stacks.emplace_back(f.filename().string(), parse_compose(ts::read_file(f)).stack);
  }
  std::mt19937_64 rng(200);
  for (int i = 0; i < 200; ++i) {
    ts::RandomStackOptions o;
    o.max_services = 10;
    o.max_edges = 20;
    stacks.emplace_back("random " + std::to_string(i), ts::random_stack(rng, o));
  }
  for (const auto& [name, s] : stacks) {
    const auto a = auto_layout(s);
    const auto b = auto_layout(s);
    c.expect(to_json(a).dump() == to_json(b).dump(), name + " determinism");
    for (const auto& v : ts::layout_violations(s, a)) c.expect(false, name + " " + v);
  }
  return std::to_string(stacks.size()) + " stacks";
}

std::string lifecycle(Check& c) {
  const auto dir = ts::scratch_dir("acceptance-life");
  const auto stack =
      parse_compose(ts::read_file(ts::corpus_dir() / "nodejs_mongodb.yml")).stack;
  const std::string ps =
      R"([{"Service":"nodejs","State":"running","ExitCode":0},)"
      R"({"Service":"mongodb","State":"running","ExitCode":0}])";
  auto fake = std::make_shared<FakeRuntimeAdapter>([&](const Argv& a) {
    FakeRuntimeAdapter::Reply r;
    if (a[1] == "logs") r.follow = true;
    if (a[1] == "ps") r.out = {ps};
    return r;
  });
  std::mutex m;
  std::vector<Aggregate> seen;
  RuntimeOptions opts;
  opts.poll_interval = 0ms;
  opts.log_capacity = 10'000;
  opts.on_status = [&](const StackStatus& s) {
    std::lock_guard lock(m);
    if (seen.empty() || seen.back() != s.aggregate) seen.push_back(s.aggregate);
  };
  RuntimeController rc(fake, opts);
  {
    std::lock_guard lock(m);
    seen.push_back(rc.status().aggregate);
  }
  auto h = rc.up(stack, dir);
  h->wait_started();

  // 10 000 numbered lines split across the two services, read while they flow.
  constexpr int kPerService = 5'000;
  const std::vector<std::string> names = {"nodejs", "mongodb"};
  std::vector<std::vector<std::string>> per_source(2);
  std::vector<std::string> general;
  auto reader = [](LogSubscription sub, std::vector<std::string>& out, std::size_t want) {
    LogEvent ev;
    while (out.size() < want && sub.next(ev, 5s) == LogSubscription::Status::Item) {
      out.push_back(ev.line);
    }
  };
  std::vector<std::thread> readers;
  readers.emplace_back(reader, h->subscribe_logs(names[0]), std::ref(per_source[0]), kPerService);
  readers.emplace_back(reader, h->subscribe_logs(names[1]), std::ref(per_source[1]), kPerService);
  // General also carries controller lines, so read it until the last
  // numbered line of both sources has shown up.
  std::thread general_reader([&, sub = h->subscribe_logs(std::nullopt)]() mutable {
    LogEvent ev;
    int done = 0;
    while (done < 2 && sub.next(ev, 5s) == LogSubscription::Status::Item) {
      general.push_back(ev.line);
      if (ev.line.ends_with("#" + std::to_string(kPerService - 1))) ++done;
    }
  });
  std::vector<std::thread> writers;
  for (const auto& name : names) {
    writers.emplace_back([&fake, name] {
      for (int i = 0; i < kPerService; ++i) fake->emit(name, name + " #" + std::to_string(i));
    });
  }
  for (auto& t : writers) t.join();
  for (auto& t : readers) t.join();
  general_reader.join();

  h->poll_status();
  c.expect(h->status().aggregate == Aggregate::Running, "Running after poll");
  rc.stop();

  std::size_t lost = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    lost += kPerService - per_source[k].size();
    for (std::size_t i = 0; i < per_source[k].size(); ++i) {
      if (per_source[k][i] != names[k] + " #" + std::to_string(i)) {
        c.expect(false, names[k] + " out of order at " + std::to_string(i));
        break;
      }
    }
    // General keeps each source's order too.
    std::size_t next = 0;
    for (const auto& line : general) {
      if (line == names[k] + " #" + std::to_string(next)) ++next;
    }
    c.expect(next == kPerService, "General has " + std::to_string(next) + " in order for " + names[k]);
  }
  c.expect(lost == 0, std::to_string(lost) + " lines lost");

  std::vector<Argv> expected = {{"compose", "up", "--detach"}};
  for (const auto& name : h->services()) {
    expected.push_back({"compose", "logs", "--follow", "--no-color", "--no-log-prefix", name});
  }
  expected.push_back({"compose", "ps", "--all", "--format", "json"});
  expected.push_back({"compose", "stop"});
  c.expect(fake->transcript() == expected, "argv transcript");
  c.expect(fake->live_processes() == 0, "followers left running");

  const auto written = ts::read_file(dir / "docker-compose.yml");
  c.expect(written == serialize_compose(stack).yaml, "written YAML is canonical");
  c.expect(written == h->compose_yaml(), "handle keeps the written bytes");

  std::lock_guard lock(m);
  c.expect(seen == std::vector<Aggregate>{Aggregate::Stopped, Aggregate::Starting,
                                          Aggregate::Running, Aggregate::Stopped},
           "status sequence");
  return std::to_string(expected.size()) + "-command transcript, 10000 lines, 0 lost";
}

std::string api_replay(Check& c) {
  const auto root = ts::scratch_dir("acceptance-api");
  ServerConfig cfg;
  cfg.port = 0;
  cfg.root = root;
  cfg.adapter = std::make_shared<FakeRuntimeAdapter>();
  ApiServer server(cfg);
  server.bind();
  server.start();
  const int port = server.port();

  std::mt19937_64 rng(50);
  std::vector<std::string> yamls = {
      ts::read_file(ts::corpus_dir() / "nodejs_mongodb.yml"),
      ts::read_file(ts::corpus_dir() / "all_kinds.yml")};
  for (int i = 0; i < 3; ++i) yamls.push_back(serialize_compose(ts::random_stack(rng)).yaml);

  std::size_t ops_sent = 0;
  for (std::size_t round = 0; round < yamls.size(); ++round) {
    const auto tag = "script " + std::to_string(round);
    Stack local = parse_compose(yamls[round]).stack;
    Diagram diagram = auto_layout(local);
    const auto script = ts::record_op_script(local, diagram, rng, 50);
    c.expect(script.size() == 50, tag + " recorded " + std::to_string(script.size()));

    const auto created = ts::http_post(port, "/v1/projects", json{{"yaml", yamls[round]}}.dump());
    if (created.status != 201) {
      c.expect(false, tag + " create status " + std::to_string(created.status));
      continue;
    }
    const auto id = json::parse(created.body)["id"].get<std::string>();
    const auto url = "/v1/projects/" + id + "/ops";
    int revision = 0;
    for (const auto& op : script) {
      const auto r = ts::http_post(port, url, json{{"base_revision", revision}, {"op", op}}.dump());
      ++ops_sent;
      if (r.status != 200) {
        c.expect(false, tag + " op " + std::to_string(revision) + " status " +
                            std::to_string(r.status) + " " + r.body);
        break;
      }
      revision = json::parse(r.body)["revision"].get<int>();
    }
    const auto stale = ts::http_post(
        port, url,
        json{{"base_revision", revision - 1},
             {"op", {{"type", "add_artifact"}, {"class", "volume"}, {"key", "late"}}}}
            .dump());
    c.expect(stale.status == 409, tag + " stale op status " + std::to_string(stale.status));

    const auto snap = json::parse(ts::http_get(port, "/v1/projects/" + id).body);
    c.expect(snap["revision"] == revision, tag + " revision after stale op");
    const auto remote = stack_from_json(snap["stack"]);
    c.expect(model_equal(remote, local), tag + " final stack");
    c.expect(remote == local, tag + " final stack ids");
    c.expect(diagram_from_json(snap["diagram"], remote) == diagram, tag + " final diagram");
  }
  server.shutdown();
  return std::to_string(yamls.size()) + " scripts, " + std::to_string(ops_sent) +
         " ops over HTTP, stale op rejected with 409";
}

std::string cli_goldens(Check& c) {
  const auto golden = ts::data_dir() / "golden";
  const auto scratch = ts::scratch_dir("acceptance-cli");
  auto inputs = ts::corpus_files();
  inputs.push_back(ts::data_dir() / "fixtures" / "validation" / "duplicate_key.yml");
  for (const auto& f : inputs) {
    const auto name = f.filename().string();
    const auto once = cli({"fmt", f.string()});
    c.expect(once.code == kExitOk, "fmt " + name + " exit " + std::to_string(once.code));
    c.expect(once.out == ts::read_file(golden / "fmt" / name), "fmt golden " + name);
    ts::write_file(scratch / name, once.out);
    const auto twice = cli({"fmt", (scratch / name).string()});
    c.expect(twice.out == once.out, "fmt idempotence " + name);
    c.expect(cli({"fmt", "--check", (scratch / name).string()}).code == kExitOk,
             "fmt --check " + name);
  }
  std::size_t validated = 0;
  for (const auto& entry : fs::directory_iterator(golden / "validate")) {
    const auto stem = entry.path().stem().string();
    fs::path dir = ts::corpus_dir();
    if (!fs::exists(dir / (stem + ".yml"))) dir = ts::data_dir() / "fixtures" / "validation";
    InDir in(dir);
    const auto r = cli({"validate", "--json", stem + ".yml"});
    c.expect(r.code == kExitOk, "validate " + stem + " exit " + std::to_string(r.code));
    c.expect(r.out == ts::read_file(entry.path()), "validate --json golden " + stem);
    ++validated;
  }
  c.expect(validated >= 5, "validate goldens " + std::to_string(validated));
  return std::to_string(inputs.size()) + " fmt goldens, " + std::to_string(validated) +
         " validate goldens";
}

}  // namespace

int main() {
  report("round-trip", round_trip);
  report("client-server-db-fidelity", client_server_db);
  report("duplicate-key-validation", duplicate_key);
  report("format-parsers-vs-oracle", parsers);
  report("cycle-detection-vs-oracle", cycles);
  report("layout-properties", layout);
  report("lifecycle-transcript", lifecycle);
  report("api-replay", api_replay);
  report("cli-goldens", cli_goldens);
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << "\n";
  return failed == 0 ? 0 : 1;
}
