#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "sqbc/harness.hpp"

namespace sqbc {

// Parses the TOML subset used by sweep configs into a JSON tree: comments,
// bare or quoted keys, [tables], [[arrays of tables]], basic and literal
// strings, integers, floats, booleans, arrays and inline tables.
nlohmann::json parse_toml(std::string_view text);

// Keys: kappas, seeds, split_ratio, variants, soft_pseudo_labels,
// parallelism, [train] {learning_rate, epochs, l2, seed} and one
// [[questions]] entry per question with either `data` or `xstance` +
// `question` (+ `language`), plus `embeddings`, `synth`, `synth_embeddings`.
// Relative paths resolve against the config file's directory.
SweepConfig load_sweep_config(const std::filesystem::path& path);
SweepConfig sweep_config_from_json(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir);

}  // namespace sqbc
