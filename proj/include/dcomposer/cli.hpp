#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dcomposer/registry.hpp"
#include "dcomposer/runtime.hpp"

namespace dcomposer {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitWarnings = 1;  // validate --strict with findings
inline constexpr int kExitParse = 2;
inline constexpr int kExitFmtDiff = 3;
inline constexpr int kExitRuntime = 4;
inline constexpr int kExitNetwork = 5;
inline constexpr int kExitUsage = 64;

// Injection points; defaults talk to the real compose binary and registry.
struct CliEnv {
  std::shared_ptr<RuntimeAdapter> adapter;
  std::shared_ptr<HttpTransport> registry;
  // Polled by long-running commands (serve, up without --detach).
  std::function<bool()> interrupted = [] { return false; };
};

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnv& env = {});

}  // namespace dcomposer
