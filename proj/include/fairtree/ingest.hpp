#pragma once
// Delimiter-separated text ingestion into an ObservationTable.

#include <cstddef>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairtree/config.hpp"
#include "fairtree/table.hpp"

namespace fairtree {

/// Missing column, unparseable number, malformed file. The message carries
/// file, data line and column where they apply.
class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RejectedRow {
    std::size_t line = 0;  // 1-based line in the file, header is line 1
    std::string reason;
};

struct IngestResult {
    ObservationTable table;
    std::size_t input_rows = 0;
    std::vector<RejectedRow> rejected;
};

/// Splits one record, honouring double quotes ("" is an escaped quote).
std::vector<std::string> split_record(const std::string& line, char delimiter);

/// Reads the columns the config refers to. Rows with a missing outcome,
/// prediction or group are rejected with a diagnostic; all other problems
/// throw IngestError. The table keeps every group level present; use
/// restrict_to_pair for a binary audit. When the config carries no outcome,
/// the table has none.
IngestResult ingest(std::istream& in, const AuditConfig& config, const std::string& source = "<stream>");
IngestResult ingest(const std::string& path, const AuditConfig& config);

}  // namespace fairtree
