#pragma once

// Command-line front end: CSV ingestion, subcommand dispatch and result emission.

#include "segwise/series.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace segwise::cli {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int { ok = 0, data_error = 1, config_error = 2 };

/// Splits one CSV record (comma separated, double-quote escaping).
std::vector<std::string> split_csv_line(const std::string& line);

/// Reads the selected columns (0-based indices or header names; all columns
/// when empty). `header` unset means: the first row is a header iff any of its
/// cells is non-numeric. Throws DataError naming the 1-based line of a bad cell.
TimeSeries ingest_csv(const std::string& path, const std::vector<std::string>& columns,
                      std::optional<bool> header = std::nullopt);

TimeSeries parse_csv(std::istream& in, const std::vector<std::string>& columns, std::optional<bool> header);

/// Runs one command line (argv[0] is the program name). Results go to `out`
/// (or the --output file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace segwise::cli
