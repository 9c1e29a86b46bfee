#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sos/config.hpp"
#include "sos/netsim.hpp"

namespace sos {

inline constexpr int kScenarioVersion = 1;

/// A parsed, validated scenario file. Exactly one of `subsystem` and
/// `network` is set.
struct Scenario {
  int version = kScenarioVersion;
  std::string source;
  std::optional<SubsystemConfig> subsystem;
  std::optional<NetworkSpec> network;
  /// Keys whose documented default was applied, in key order. Network files
  /// list subsystem defaults as "<file>:<key>" after their own keys.
  std::vector<std::string> defaults_applied;
};

/// Scenario text format: one `key = value` per logical line, where value is
/// a JSON literal (number, string, or nested array) and may continue over
/// several lines while brackets are open. `#` starts a comment. Keys are
/// dotted `section.name`; unknown and duplicate keys are errors.
Scenario parse_scenario(const std::filesystem::path& path);
Scenario parse_scenario_text(std::string_view text, const std::string& source_name,
                             const std::filesystem::path& base_dir = {});

nlohmann::ordered_json to_json(const SubsystemConfig& cfg);
nlohmann::ordered_json to_json(const NetworkSpec& spec);
/// Fully resolved configuration, suitable for a run manifest.
nlohmann::ordered_json resolved_config(const Scenario& scenario);

/// Builds Q^{ij} from the parametric transition description:
///  - attack i >= 1 moves nominal to attack_mode[i-1] at breach_rate[i-1],
///    unless defense j == i;
///  - every non-nominal mode m returns to nominal at
///    recovery_rate[j] * recovery_weight[m];
///  - escalation[m][m'] adds rates among non-nominal modes.
struct TransitionParams {
  std::vector<int> attack_mode;
  Vec breach_rate;
  Vec recovery_rate;
  Mat escalation;
  Vec recovery_weight;
};
TransitionModel build_transitions(const TransitionParams& params, int modes);

}  // namespace sos
