#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace flatlab {

// Shortest round-trip decimal form; "nan" / "inf" / "-inf" for non-finite values.
std::string format_number(double x);
std::string format_bool(bool b);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    int column(const std::string& name) const;  // -1 when absent
    void write(const std::string& path) const;
    std::string to_string() const;
    static CsvTable read(const std::string& path);
};

struct ComparisonLine {
    std::string key;
    std::string column;
    double a = 0.0, b = 0.0, deviation = 0.0, tolerance = 0.0;
    bool pass = true;
};

struct ComparisonReport {
    std::vector<ComparisonLine> lines;
    std::map<std::string, double> max_deviation;
    long failures = 0;

    bool passed() const { return failures == 0; }
    CsvTable to_table() const;
    std::string summary() const;
};

class KeyMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parses "col=v,col2=v2".
std::map<std::string, double> parse_tolerances(const std::string& spec);

// Joins rows on the key columns (positionally when keys is empty) and checks
// |a - b| <= tol for each toleranced column. Non-finite values on either side fail.
// With keys, every row of b needs a partner in a; unmatched rows of a are skipped.
ComparisonReport compare_tables(const CsvTable& a, const CsvTable& b, const std::map<std::string, double>& tolerances,
                                const std::vector<std::string>& keys);

}  // namespace flatlab
