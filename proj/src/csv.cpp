#include "flatlab/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flatlab {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string format_bool(bool b) { return b ? "true" : "false"; }

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw std::invalid_argument("CsvTable: row width does not match header");
    rows.push_back(std::move(row));
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return int(i);
    return -1;
}

std::string CsvTable::to_string() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

void CsvTable::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_string();
}

CsvTable CsvTable::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size()) throw std::runtime_error(path + ": ragged row '" + line + "'");
            t.rows.push_back(std::move(cells));
        }
    }
    if (first) throw std::runtime_error(path + ": missing header");
    return t;
}

std::map<std::string, double> parse_tolerances(const std::string& spec) {
    std::map<std::string, double> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw std::invalid_argument("tolerance '" + item + "' must be col=value");
        double v;
        try {
            v = std::stod(item.substr(eq + 1));
        } catch (const std::logic_error&) {
            throw std::invalid_argument("tolerance '" + item + "' has a bad value");
        }
        if (!(v >= 0.0)) throw std::invalid_argument("tolerance '" + item + "' must be nonnegative");
        out[item.substr(0, eq)] = v;
    }
    if (out.empty()) throw std::invalid_argument("empty tolerance specification");
    return out;
}

namespace {

double parse_cell(const std::string& s) {
    if (s == "nan") return NAN;
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    try {
        return std::stod(s);
    } catch (const std::logic_error&) {
        return NAN;
    }
}

std::string row_key(const CsvTable& t, const std::vector<int>& cols, const std::vector<std::string>& row) {
    std::string k;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) k += ';';
        k += t.header[cols[i]] + "=" + row[cols[i]];
    }
    return k;
}

}  // namespace

ComparisonReport compare_tables(const CsvTable& a, const CsvTable& b, const std::map<std::string, double>& tolerances,
                                const std::vector<std::string>& keys) {
    for (const auto& [col, tol] : tolerances) {
        if (a.column(col) < 0 || b.column(col) < 0) throw KeyMismatch("column '" + col + "' missing from an input");
    }
    std::vector<int> ka, kb;
    for (const auto& k : keys) {
        if (a.column(k) < 0 || b.column(k) < 0) throw KeyMismatch("key column '" + k + "' missing from an input");
        ka.push_back(a.column(k));
        kb.push_back(b.column(k));
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::string> labels;
    if (keys.empty()) {
        if (a.rows.size() != b.rows.size()) throw KeyMismatch("positional comparison needs equal row counts");
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            pairs.emplace_back(i, i);
            labels.push_back("row=" + std::to_string(i + 1));
        }
    } else {
        // The first input may be denser (a theory curve); every row of the second must have a partner.
        std::map<std::string, std::size_t> index_a;
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            if (!index_a.emplace(row_key(a, ka, a.rows[i]), i).second)
                throw KeyMismatch("duplicate key in first input: " + row_key(a, ka, a.rows[i]));
        }
        std::map<std::string, std::size_t> seen;
        for (std::size_t j = 0; j < b.rows.size(); ++j) {
            std::string k = row_key(b, kb, b.rows[j]);
            auto it = index_a.find(k);
            if (it == index_a.end()) throw KeyMismatch("key missing from first input: " + k);
            if (!seen.emplace(k, j).second) throw KeyMismatch("duplicate key in second input: " + k);
            pairs.emplace_back(it->second, j);
            labels.push_back(k);
        }
    }
    ComparisonReport rep;
    for (std::size_t n = 0; n < pairs.size(); ++n) {
        for (const auto& [col, tol] : tolerances) {
            ComparisonLine l;
            l.key = labels[n];
            l.column = col;
            l.a = parse_cell(a.rows[pairs[n].first][a.column(col)]);
            l.b = parse_cell(b.rows[pairs[n].second][b.column(col)]);
            l.tolerance = tol;
            l.deviation = std::abs(l.a - l.b);
            if (l.a == l.b) l.deviation = 0.0;  // equal infinities
            l.pass = std::isfinite(l.deviation) && l.deviation <= tol;
            if (!l.pass) ++rep.failures;
            double& mx = rep.max_deviation[col];
            if (std::isnan(l.deviation) || l.deviation > mx || std::isnan(mx)) mx = l.deviation;
            rep.lines.push_back(l);
        }
    }
    return rep;
}

CsvTable ComparisonReport::to_table() const {
    CsvTable t;
    t.header = {"key", "column", "a", "b", "deviation", "tolerance", "pass"};
    for (const auto& l : lines)
        t.add_row({l.key, l.column, format_number(l.a), format_number(l.b), format_number(l.deviation),
                   format_number(l.tolerance), format_bool(l.pass)});
    return t;
}

std::string ComparisonReport::summary() const {
    std::ostringstream os;
    os << "column,max_deviation\n";
    for (const auto& [col, dev] : max_deviation) os << col << ',' << format_number(dev) << '\n';
    os << "compared " << lines.size() << " values, " << failures << " failed\n";
    for (const auto& l : lines)
        if (!l.pass)
            os << "FAIL " << l.key << " " << l.column << ": " << format_number(l.a) << " vs " << format_number(l.b)
               << " (tol " << format_number(l.tolerance) << ")\n";
    return os.str();
}

}  // namespace flatlab
