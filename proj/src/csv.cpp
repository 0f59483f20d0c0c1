#include "qtokens/csv.hpp"

#include <charconv>
#include <istream>

#include "qtokens/error.hpp"

namespace qtokens::csv {

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

Table::Table(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split(line);
        for (auto& f : fields) f = trim(std::move(f));
        if (!have_header) {
            for (std::size_t i = 0; i < fields.size(); ++i) index_[fields[i]] = i;
            width = fields.size();
            have_header = true;
            continue;
        }
        if (fields.size() != width)
            throw Error("row " + std::to_string(rows_.size() + 1) + ": expected " + std::to_string(width) +
                        " fields, found " + std::to_string(fields.size()));
        rows_.push_back(std::move(fields));
        line_numbers_.push_back(line_no);
    }
    if (!have_header) throw Error("CSV input has no header");
}

const std::string& Table::cell(std::size_t row, const std::string& column) const {
    auto it = index_.find(column);
    if (it == index_.end()) throw Error("missing CSV column " + column);
    return rows_.at(row)[it->second];
}

std::string Table::text(std::size_t row, const std::string& column) const {
    const auto& v = cell(row, column);
    if (v.empty()) throw Error("row " + std::to_string(row + 1) + ": empty " + column);
    return v;
}

double Table::number(std::size_t row, const std::string& column) const {
    auto v = optional_number(row, column);
    if (!v) throw Error("row " + std::to_string(row + 1) + ": empty " + column);
    return *v;
}

std::optional<double> Table::optional_number(std::size_t row, const std::string& column) const {
    if (!has_column(column)) return std::nullopt;
    std::string v = cell(row, column);
    if (v.empty()) return std::nullopt;
    std::erase(v, '_');
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw Error("row " + std::to_string(row + 1) + ": " + column + " is not a number: '" + cell(row, column) +
                    "'");
    return out;
}

long long Table::integer(std::size_t row, const std::string& column) const {
    const double v = number(row, column);
    const auto i = static_cast<long long>(v);
    if (static_cast<double>(i) != v)
        throw Error("row " + std::to_string(row + 1) + ": " + column + " must be an integer");
    return i;
}

}  // namespace qtokens::csv
