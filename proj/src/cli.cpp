#include "dcomposer/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "dcomposer/compose_io.hpp"
#include "dcomposer/error.hpp"
#include "dcomposer/graph.hpp"
#include "dcomposer/report.hpp"
#include "dcomposer/server.hpp"
#include "dcomposer/validation.hpp"

namespace dcomposer {

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

std::string position(const ParseNotice& n) {
  std::string s = n.path;
  if (n.line > 0) s += " (line " + std::to_string(n.line) + ", column " + std::to_string(n.column) + ")";
  return s;
}

void print_notices(std::ostream& err, const std::vector<ParseNotice>& notices) {
  for (const auto& n : notices) {
    err << "notice: " << to_string(n.severity) << " " << to_string(n.code) << " at "
        << position(n) << ": " << n.message << "\n";
  }
}

struct Options {
  std::string file;
  bool json_output = false;
  bool strict = false;
  bool host_ports = false;
  bool write = false;
  bool check = false;
  std::string format = "json";
  std::string workdir;
  bool detach = false;
  std::string query;
  int page = 1;
  int limit = 25;
  std::string addr = "127.0.0.1:8080";
  std::string root = ".";
  std::string static_dir;
};

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  const auto parsed = parse_compose(read_file(o.file));
  ValidationOptions vo;
  vo.host_port_collisions = o.host_ports;
  const auto warnings = validate(parsed.stack, vo);
  if (o.json_output) {
    json ws = json::array();
    for (const auto& w : warnings) {
      auto j = to_json(w);
      j["class"] = to_string(*parsed.stack.class_of(w.artifact));
      j["key"] = parsed.stack.key_of(w.artifact);
      ws.push_back(std::move(j));
    }
    out << json{{"file", o.file}, {"warnings", ws}, {"notices", to_json(parsed.notices)}}.dump(2)
        << "\n";
  } else {
    print_notices(err, parsed.notices);
    for (const auto& w : warnings) {
      out << "warning: " << to_string(w.code) << " "
          << to_string(*parsed.stack.class_of(w.artifact)) << " '"
          << parsed.stack.key_of(w.artifact) << "'";
      if (w.property) out << " [" << *w.property << "]";
      out << ": " << w.message << "\n";
    }
  }
  return o.strict && !warnings.empty() ? kExitWarnings : kExitOk;
}

int cmd_fmt(const Options& o, std::ostream& out, std::ostream& err) {
  const auto original = read_file(o.file);
  const auto parsed = parse_compose(original);
  const auto result = serialize_compose(parsed.stack);
  for (const auto& n : result.notices) {
    err << "notice: " << to_string(n.severity) << " " << to_string(n.code) << ": " << n.message
        << "\n";
  }
  if (o.check) {
    if (result.yaml == original) return kExitOk;
    err << o.file << " is not canonically formatted\n";
    return kExitFmtDiff;
  }
  if (o.write) {
    if (result.yaml != original) write_file(o.file, result.yaml);
    return kExitOk;
  }
  out << result.yaml;
  return kExitOk;
}

int cmd_graph(const Options& o, std::ostream& out) {
  const auto parsed = parse_compose(read_file(o.file));
  if (o.format == "dot") {
    out << graph_dot(parsed.stack);
  } else {
    out << graph_json(parsed.stack, auto_layout(parsed.stack)).dump(2) << "\n";
  }
  return kExitOk;
}

void print_log(std::ostream& out, const LogEvent& ev) {
  if (ev.service) out << *ev.service << " | ";
  out << ev.line << "\n";
}

// Prints everything retained so far; with `follow`, keeps going until the
// stream ends or the user interrupts.
void drain_logs(LogSubscription& sub, std::ostream& out, bool follow, const CliEnv& env) {
  LogEvent ev;
  while (true) {
    const auto st = sub.next(ev, std::chrono::milliseconds(follow ? 200 : 0));
    if (st == LogSubscription::Status::Item) {
      print_log(out, ev);
      out.flush();
      continue;
    }
    if (st == LogSubscription::Status::End || !follow || env.interrupted()) break;
  }
}

int run_lifecycle(const std::string& verb, RuntimeController& controller, const Stack& stack,
                  const fs::path& workdir, const Options& o, std::ostream& out,
                  std::ostream& err, const CliEnv& env);

int cmd_lifecycle(const std::string& verb, const Options& o, std::ostream& out,
                  std::ostream& err, const CliEnv& env) {
  const fs::path file(o.file);
  const auto text = read_file(file);
  const auto parsed = parse_compose(text, file.stem().string());
  print_notices(err, parsed.notices);
  const fs::path workdir =
      o.workdir.empty() ? fs::absolute(file).parent_path() : fs::path(o.workdir);

  RuntimeOptions options;
  options.poll_interval = verb == "up" && !o.detach ? std::chrono::seconds(1)
                                                    : std::chrono::milliseconds(0);
  // Never clobber a hand-written file with its canonical rewrite.
  const auto target = workdir / options.file_name;
  std::error_code ec;
  if (fs::exists(target, ec) && fs::equivalent(target, file, ec) &&
      serialize_compose(parsed.stack, options.serialize).yaml != text) {
    err << "refusing to overwrite " << file.string()
        << " with its canonical form; run 'fmt --write' first or pass --workdir\n";
    return kExitRuntime;
  }

  auto adapter = env.adapter ? env.adapter : make_process_adapter(compose_command_from_env());
  RuntimeController controller(adapter, options);
  try {
    return run_lifecycle(verb, controller, parsed.stack, workdir, o, out, err, env);
  } catch (const Error& e) {
    if (e.code() != Errc::IoError) throw;
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_lifecycle(const std::string& verb, RuntimeController& controller, const Stack& stack,
                  const fs::path& workdir, const Options& o, std::ostream& out,
                  std::ostream& err, const CliEnv& env) {
  if (verb == "up") {
    auto handle = controller.up(stack, workdir);
    auto logs = handle->subscribe_logs(std::nullopt);
    handle->wait_started();
    drain_logs(logs, out, false, env);
    if (handle->phase() == RunPhase::Failed) {
      err << "compose up failed\n";
      return kExitRuntime;
    }
    if (o.detach) return kExitOk;
    drain_logs(logs, out, true, env);
    if (env.interrupted()) {
      // Foreground runs end like `compose up` does on Ctrl-C.
      err << "stopping\n";
      controller.stop();
      drain_logs(logs, out, false, env);
    }
    return kExitOk;
  }
  auto handle = controller.attach(stack, workdir);
  auto logs = handle->subscribe_logs(std::nullopt);
  try {
    if (verb == "stop") {
      controller.stop();
    } else {
      controller.down();
    }
  } catch (const Error&) {
    drain_logs(logs, out, false, env);
    throw;
  }
  drain_logs(logs, out, false, env);
  return kExitOk;
}

int cmd_search(const Options& o, std::ostream& out, const CliEnv& env) {
  std::shared_ptr<HttpTransport> transport = env.registry;
  if (!transport) transport = make_http_transport(registry_url_from_env());
  RegistryClient client(transport);
  const auto result = client.search_images(o.query, o.page, o.limit);
  out << std::left << std::setw(32) << "NAME" << std::setw(10) << "OFFICIAL" << std::setw(10)
      << "STARS" << std::setw(14) << "PULLS"
      << "DESCRIPTION\n";
  for (const auto& i : result.images) {
    auto desc = i.description;
    std::replace(desc.begin(), desc.end(), '\n', ' ');
    if (desc.size() > 60) desc = desc.substr(0, 57) + "...";
    out << std::left << std::setw(32) << i.repository << std::setw(10)
        << (i.is_official ? "[OK]" : "") << std::setw(10) << i.star_count << std::setw(14)
        << i.pull_count << desc << "\n";
  }
  if (result.stale) out << "(offline: showing cached results)\n";
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out, const CliEnv& env) {
  ServerConfig config = server_config_from_env();
  const auto colon = o.addr.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidValue, "--addr must be host:port");
  config.host = o.addr.substr(0, colon);
  try {
    config.port = std::stoi(o.addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(Errc::InvalidValue, "--addr must be host:port");
  }
  config.root = o.root;
  config.static_dir = o.static_dir;
  config.adapter = env.adapter;
  config.registry_transport = env.registry;
  ApiServer server(config);
  server.bind();
  server.start();
  out << "listening on http://" << config.host << ":" << server.port() << "\n";
  out.flush();
  while (!env.interrupted()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.shutdown();
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::YamlSyntaxError:
    case Errc::NotAMapping:
    case Errc::IoError: return kExitParse;
    case Errc::NetworkError:
    case Errc::RegistryError:
    case Errc::UnknownRepository: return kExitNetwork;
    case Errc::EmptyQuery:
    case Errc::InvalidValue: return kExitUsage;
    default: return kExitRuntime;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnv& env) {
  CLI::App app{"Compose stack editor engine", "dcomposer"};
  app.require_subcommand(1);
  Options o;

  auto* validate_cmd = app.add_subcommand("validate", "Print advisory warnings for a compose file");
  validate_cmd->add_option("file", o.file, "Compose file")->required();
  validate_cmd->add_flag("--json", o.json_output, "Machine-readable output");
  validate_cmd->add_flag("--strict", o.strict, "Exit 1 when there are warnings");
  validate_cmd->add_flag("--host-ports", o.host_ports, "Also report host port collisions");

  auto* fmt_cmd = app.add_subcommand("fmt", "Print the canonical form of a compose file");
  fmt_cmd->add_option("file", o.file, "Compose file")->required();
  auto* write_flag = fmt_cmd->add_flag("--write", o.write, "Rewrite the file in place");
  fmt_cmd->add_flag("--check", o.check, "Exit 3 if the file is not canonical")->excludes(write_flag);

  auto* graph_cmd = app.add_subcommand("graph", "Export the artifact graph");
  graph_cmd->add_option("file", o.file, "Compose file")->required();
  graph_cmd->add_option("--format", o.format, "json or dot")
      ->check(CLI::IsMember({"json", "dot"}));

  for (const auto* verb : {"up", "stop", "down"}) {
    auto* cmd = app.add_subcommand(verb, std::string("Run compose ") + verb + " for a file");
    cmd->add_option("file", o.file, "Compose file")->required();
    cmd->add_option("--workdir", o.workdir, "Directory for docker-compose.yml");
    if (std::string(verb) == "up") {
      cmd->add_flag("--detach", o.detach, "Return once the stack has been started");
    }
  }

  auto* search_cmd = app.add_subcommand("search", "Search Docker Hub images");
  search_cmd->add_option("query", o.query, "Search text")->required();
  search_cmd->add_option("--page", o.page, "Result page")->check(CLI::PositiveNumber);
  search_cmd->add_option("--limit", o.limit, "Results per page")->check(CLI::Range(1, 100));

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--addr", o.addr, "host:port to listen on");
  serve_cmd->add_option("--root", o.root, "Directory for projects and working directories");
  serve_cmd->add_option("--static", o.static_dir, "Directory served at /");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  }

  const auto* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    if (name == "validate") return cmd_validate(o, out, err);
    if (name == "fmt") return cmd_fmt(o, out, err);
    if (name == "graph") return cmd_graph(o, out);
    if (name == "up" || name == "stop" || name == "down") {
      return cmd_lifecycle(name, o, out, err, env);
    }
    if (name == "search") return cmd_search(o, out, env);
    if (name == "serve") return cmd_serve(o, out, env);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  return kExitUsage;
}

}  // namespace dcomposer
