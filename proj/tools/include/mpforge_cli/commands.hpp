#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace mpforge::cli {

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, numeric_failure = 3 };

struct Options {
  std::string config_path;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out_dir;       // empty: output.dir from the config
  std::string summary_path;  // plotdata input
};

int cmd_run(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_se(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_concentrate(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_check_translation(const Options& opt, std::ostream& out, std::ostream& err);
int cmd_plotdata(const Options& opt, std::ostream& out, std::ostream& err);

/// Parses argv (subcommand plus flags) and dispatches. Errors go to `err` as one JSON object.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mpforge::cli
