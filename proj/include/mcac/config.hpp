#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcac/harness.hpp"

namespace mcac {

// Fully resolved run configuration. `resolved` holds every key with its
// final textual value and is echoed at the top of each output file.
struct RunConfig {
    harness::ExperimentSpec spec;
    std::string out_dir = "results";
    std::string checkpoint;       // save path (train)
    std::string load_checkpoint;  // resume path (train)
    bool seed_from_entropy = false;
    std::map<std::string, std::string> resolved;

    harness::Metadata metadata() const;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Splits "KEY=VALUE"; throws ConfigError when there is no '='.
std::pair<std::string, std::string> split_assignment(const std::string& text);

// Parses the key=value format: one assignment per line, '#' starts a
// comment, blank lines ignored. Overrides are applied after the text.
// Unknown keys, malformed values and constraint violations throw
// ConfigError naming the key (and the line for file input).
RunConfig parse_config_text(const std::string& text, const Overrides& overrides = {});
RunConfig parse_config(const std::optional<std::string>& path, const Overrides& overrides = {});

// Every accepted key with its default, in documentation order.
std::vector<std::pair<std::string, std::string>> config_defaults();

}  // namespace mcac
