#include "hydra/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hydra/format.hpp"

namespace hydra {

CsvTable parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    bool any = false;
    char ch;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };
    while (in.get(ch)) {
        any = true;
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (ch == ',') {
            end_field();
        } else if (ch == '\n') {
            end_record();
            any = false;
        } else if (ch == '\r' && in.peek() == '\n') {
            // CRLF: the LF ends the record
        } else {
            field.push_back(ch);
            field_started = true;
        }
    }
    if (quoted) throw DataError("CSV ends inside a quoted field");
    if (any) end_record();
    if (records.empty()) throw DataError("CSV has no header row");
    CsvTable table;
    table.header = std::move(records.front());
    table.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.header.size()) {
            throw DataError("row " + std::to_string(r + 1) + ": expected " + std::to_string(table.header.size()) +
                            " fields, found " + std::to_string(table.rows[r].size()));
        }
    }
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open \"" + path + "\"");
    return parse_csv(in);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(fields[i]);
    }
    out << '\n';
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Schema parse_schema_declaration(const std::string& declaration, const std::vector<std::string>& key_columns) {
    Schema schema;
    std::stringstream ss(declaration);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) throw ConfigError("schema entry \"" + item + "\" needs the form name:kind");
        const std::string name = trim(std::string_view(item).substr(0, colon));
        const std::string kind_text = trim(std::string_view(item).substr(colon + 1));
        const auto kind = parse_column_kind(kind_text);
        if (!kind) throw ConfigError("schema entry \"" + item + "\": unknown kind \"" + kind_text + "\"");
        schema.columns.push_back({name, *kind});
    }
    schema.key_columns = key_columns;
    const auto errors = schema.validate();
    if (!errors.empty()) throw ConfigError("invalid schema: " + errors.front());
    return schema;
}

std::string schema_declaration(const Schema& schema) {
    std::string out;
    for (const auto& c : schema.columns) {
        if (!out.empty()) out += ',';
        out += c.name + ":" + std::string(to_string(c.kind));
    }
    return out;
}

FeatureFrame ingest_csv(std::istream& in, const Schema& schema, const IngestOptions& options) {
    const auto errors = schema.validate();
    if (!errors.empty()) throw ConfigError("invalid schema: " + errors.front());
    const CsvTable table = parse_csv(in);
    std::vector<std::size_t> source;
    for (const auto& c : schema.columns) {
        auto it = std::find(table.header.begin(), table.header.end(), c.name);
        if (it == table.header.end()) throw DataError("declared column \"" + c.name + "\" is missing from the header");
        source.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    FeatureFrame frame = FeatureFrame::allocate(schema, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        Eigen::Index num = 0, cat = 0;
        std::size_t id = 0;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const auto& spec = schema.columns[c];
            const std::string& cell = row[source[c]];
            const bool missing = cell.empty() || cell == options.missing_sentinel;
            auto fail = [&](const std::string& why) -> DataError {
                return DataError("row " + std::to_string(i + 1) + ", column \"" + spec.name + "\": " + why);
            };
            try {
                switch (spec.kind) {
                    case ColumnKind::Numeric:
                        frame.numeric(i, num++) = missing ? std::nan("") : parse_double(cell);
                        break;
                    case ColumnKind::Categorical:
                        frame.categorical(i, cat) =
                            missing ? kMissingCode : frame.vocabularies[static_cast<std::size_t>(cat)].add(cell);
                        ++cat;
                        break;
                    case ColumnKind::Identifier: frame.identifiers[id++][static_cast<std::size_t>(i)] = cell; break;
                    case ColumnKind::Label: {
                        if (missing) throw fail("label is missing");
                        const int y = parse_int<int>(cell);
                        if (y != 0 && y != 1) throw fail("label must be 0 or 1, found \"" + cell + "\"");
                        (*frame.label)(i) = y;
                        break;
                    }
                    case ColumnKind::Week: {
                        if (missing) throw fail("week is missing");
                        const int w = parse_int<int>(cell);
                        if (w < 0) throw fail("week must be a non-negative integer");
                        frame.week(i) = w;
                        break;
                    }
                    case ColumnKind::Group:
                        if (missing) throw fail("group is missing");
                        frame.group(i) = parse_int<int>(cell);
                        break;
                }
            } catch (const DataError& e) {
                const std::string what = e.what();
                if (what.rfind("row ", 0) == 0) throw;
                throw fail(what);
            }
        }
    }
    frame.refresh_missing_mask();
    return frame;
}

FeatureFrame ingest_csv(const std::string& path, const Schema& schema, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open \"" + path + "\"");
    return ingest_csv(in, schema, options);
}

void write_frame_csv(std::ostream& out, const FeatureFrame& frame) {
    std::vector<std::string> fields;
    for (const auto& c : frame.schema.columns) fields.push_back(c.name);
    write_csv_row(out, fields);
    for (Eigen::Index i = 0; i < frame.rows(); ++i) {
        fields.clear();
        Eigen::Index num = 0, cat = 0;
        std::size_t id = 0;
        for (const auto& c : frame.schema.columns) {
            switch (c.kind) {
                case ColumnKind::Numeric: {
                    const double v = frame.numeric(i, num++);
                    fields.push_back(std::isnan(v) ? "" : format_double(v));
                    break;
                }
                case ColumnKind::Categorical: {
                    const auto code = frame.categorical(i, cat);
                    fields.push_back(code == kMissingCode ? "" : frame.vocabularies[static_cast<std::size_t>(cat)].token(code));
                    ++cat;
                    break;
                }
                case ColumnKind::Identifier: fields.push_back(frame.identifiers[id++][static_cast<std::size_t>(i)]); break;
                case ColumnKind::Label: fields.push_back(std::to_string(frame.labels()(i))); break;
                case ColumnKind::Week: fields.push_back(std::to_string(frame.week(i))); break;
                case ColumnKind::Group: fields.push_back(std::to_string(frame.group(i))); break;
            }
        }
        write_csv_row(out, fields);
    }
}

}  // namespace hydra
