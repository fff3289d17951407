#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fsdc::cli {

// Flat dotted-key merge: every key of `overrides` replaces the same key of
// `base`. Both inputs may be nested; the result is flat.
nlohmann::json merge_settings(const nlohmann::json& base, const nlohmann::json& overrides);

// Runs the command line `args` (args[0] is the program name). Returns the
// process exit code: 0 on success, 2 on usage errors, 1 on other failures.
// Failures print a single "error[<kind>]: <message>" line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fsdc::cli
