#ifndef RICCI_CLI_HPP
#define RICCI_CLI_HPP

#include "ricci/io.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ricci {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitSolver = 2, kExitAssertion = 3 };

/// Reads a JSON config file; malformed JSON raises ConfigError.
Json load_config(const std::string& path);
/// Applies "a.b.c=value"; the value is parsed as JSON when possible, else taken as a string.
void apply_override(Json& cfg, const std::string& assignment);
/// Rejects unknown top-level keys and wrongly typed scalars.
void validate_config(const Json& cfg);

ExperimentSpec experiment_spec_from_config(const Json& cfg);
WalkConfig walk_config_from_config(const Json& cfg, const FlowManifold& flow);

/// Built-in flows used by `verify`: flat, sphere, hyperbolic, product.
std::vector<std::pair<std::string, FlowManifold>> default_flows();

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ricci

#endif
