#pragma once

#include <filesystem>
#include <string>

#include "mdelab/model.hpp"

namespace mdelab {

struct RunContext {
  std::filesystem::path out;
  uint64_t seed = 1;
  bool seed_overridden = false;
  int threads = 1;
  bool check = false;   // gate on pass/fail and reflect in exit code
};

// each command reads a strict-schema JSON config, writes CSV/JSON artifacts
// into ctx.out and returns the number of failed checks (0 in measure mode
// unless the config itself is invalid)
int cmd_density(const std::string& config_json, const RunContext& ctx);
int cmd_flow(const std::string& config_json, const RunContext& ctx);
int cmd_locallaw(const std::string& config_json, const RunContext& ctx);
int cmd_rigidity(const std::string& config_json, const RunContext& ctx);
int cmd_exclusion(const std::string& config_json, const RunContext& ctx);
int cmd_deloc(const std::string& config_json, const RunContext& ctx);
int cmd_cusp(const std::string& config_json, const RunContext& ctx);
int cmd_zigzag(const std::string& config_json, const RunContext& ctx);

// model sub-config shared by all commands (strict: unknown keys rejected)
Model parse_model_json(const std::string& json_text);

}  // namespace mdelab
