#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"

namespace hydra {

/// Comma-separated, UTF-8, header row required. A field is quoted when it
/// holds a comma, a double quote, CR or LF; quotes inside are doubled.
/// Lines end in LF; a CRLF ending is accepted on input.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);
std::string csv_escape(const std::string& field);

/// "name:kind,name:kind,..." in column order.
Schema parse_schema_declaration(const std::string& declaration, const std::vector<std::string>& key_columns = {});
std::string schema_declaration(const Schema& schema);

struct IngestOptions {
    /// Cells equal to this string are missing, as are empty cells.
    std::string missing_sentinel = "NA";
};

/// Typed frame from a CSV whose header contains every declared column;
/// extra columns are ignored. Parse failures name the 1-based data row and
/// the column.
FeatureFrame ingest_csv(std::istream& in, const Schema& schema, const IngestOptions& options = {});
FeatureFrame ingest_csv(const std::string& path, const Schema& schema, const IngestOptions& options = {});

/// Writes the frame in schema column order; missing cells are empty and
/// numbers use the shortest round-trip form.
void write_frame_csv(std::ostream& out, const FeatureFrame& frame);

}  // namespace hydra
