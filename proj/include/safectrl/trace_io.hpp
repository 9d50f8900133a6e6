#pragma once

#include <string>

#include "safectrl/simulate.hpp"

namespace safectrl {

// CSV with the documented column order; values printed with %.17g so that
// equal traces are byte-identical.
void write_trace_csv(const SimTrace& trace, const std::string& path);

// Reads a trace back; throws ConfigError naming any column that is missing
// when `required` columns are given.
SimTrace read_trace_csv(const std::string& path,
                        const std::vector<std::string>& required = {});

// FNV-1a content hash, hex-encoded; used by the run manifest so metric
// comparisons across machines can verify they used the same model file.
std::string file_hash_hex(const std::string& path);

}  // namespace safectrl
