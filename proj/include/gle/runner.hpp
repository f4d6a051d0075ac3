#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "gle/config.hpp"

namespace gle {

const std::vector<std::string>& subcommands();

/// Runs one subcommand and writes manifest.json plus its CSV/JSON artifacts
/// into cfg.output_dir. Requires cfg.seed. Progress lines go to `log`.
/// Returns the list of files written (relative to output_dir).
std::vector<std::string> run_subcommand(const std::string& name, const RunConfig& cfg,
                                        unsigned threads, std::ostream& log);

/// Machine-readable error record; also returned as text.
std::string error_json(const std::exception& e);
/// Writes error.json into dir (created if needed); never throws.
void write_error_json(const std::string& dir, const std::exception& e);

std::string version();

}  // namespace gle
