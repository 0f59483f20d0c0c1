#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qtokens::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split(std::string_view line);

/// Quotes a field only when needed.
std::string escape(std::string_view field);

/// Header-indexed reader. Data rows are numbered from 1 (the header is row 0)
/// and errors carry that number.
class Table {
public:
    explicit Table(std::istream& in);

    bool has_column(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t rows() const { return rows_.size(); }

    const std::string& cell(std::size_t row, const std::string& column) const;
    std::string text(std::size_t row, const std::string& column) const;
    double number(std::size_t row, const std::string& column) const;
    std::optional<double> optional_number(std::size_t row, const std::string& column) const;
    long long integer(std::size_t row, const std::string& column) const;
    std::size_t line_of(std::size_t row) const { return line_numbers_[row]; }

private:
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::size_t> line_numbers_;
};

}  // namespace qtokens::csv
