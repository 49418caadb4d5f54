#include "flatlab/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace flatlab {

namespace {

struct Parser {
    const std::string& s;
    std::size_t pos = 0;
    int line = 1;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("config line " + std::to_string(line) + ": " + msg);
    }

    void skip_space(bool newlines) {
        while (pos < s.size()) {
            char c = s[pos];
            if (c == '#') {
                while (pos < s.size() && s[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r') {
                ++pos;
            } else if (newlines && c == '\n') {
                ++line;
                ++pos;
            } else {
                break;
            }
        }
    }

    ConfigValue value() {
        skip_space(false);
        if (pos >= s.size()) fail("missing value");
        char c = s[pos];
        ConfigValue v;
        if (c == '"') {
            ++pos;
            v.type = ConfigValue::Type::String;
            while (pos < s.size() && s[pos] != '"') {
                if (s[pos] == '\n') fail("unterminated string");
                if (s[pos] == '\\' && pos + 1 < s.size()) ++pos;
                v.text += s[pos++];
            }
            if (pos >= s.size()) fail("unterminated string");
            ++pos;
            return v;
        }
        if (c == '[') {
            ++pos;
            v.type = ConfigValue::Type::Array;
            for (;;) {
                skip_space(true);
                if (pos >= s.size()) fail("unterminated array");
                if (s[pos] == ']') {
                    ++pos;
                    return v;
                }
                v.items.push_back(value());
                skip_space(true);
                if (pos < s.size() && s[pos] == ',') {
                    ++pos;
                } else if (pos < s.size() && s[pos] == ']') {
                    continue;
                } else {
                    fail("expected ',' or ']' in array");
                }
            }
        }
        std::size_t start = pos;
        while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != ',' && s[pos] != ']' &&
               s[pos] != '#')
            ++pos;
        std::string tok = s.substr(start, pos - start);
        if (tok == "true" || tok == "false") {
            v.type = ConfigValue::Type::Bool;
            v.boolean = tok == "true";
            return v;
        }
        std::string cleaned;
        for (char ch : tok)
            if (ch != '_') cleaned += ch;
        if (cleaned == "inf" || cleaned == "+inf") {
            v.number = INFINITY;
            return v;
        }
        try {
            std::size_t used = 0;
            v.number = std::stod(cleaned, &used);
            if (used != cleaned.size()) fail("bad number '" + tok + "'");
        } catch (const std::logic_error&) {
            fail("bad value '" + tok + "'");
        }
        return v;
    }
};

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
}

std::string trim(const std::string& x) {
    std::size_t a = x.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = x.find_last_not_of(" \t\r");
    return x.substr(a, b - a + 1);
}

nlohmann::json value_json(const ConfigValue& v) {
    switch (v.type) {
        case ConfigValue::Type::Number: return std::isfinite(v.number) ? nlohmann::json(v.number) : nlohmann::json("inf");
        case ConfigValue::Type::Bool: return v.boolean;
        case ConfigValue::Type::String: return v.text;
        case ConfigValue::Type::Array: {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& x : v.items) a.push_back(value_json(x));
            return a;
        }
    }
    return nullptr;
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    Parser p{text};
    std::string section;
    for (;;) {
        p.skip_space(true);
        if (p.pos >= text.size()) break;
        if (text[p.pos] == '[') {
            std::size_t end = text.find(']', p.pos);
            std::size_t nl = text.find('\n', p.pos);
            if (end == std::string::npos || (nl != std::string::npos && end > nl)) p.fail("unterminated table header");
            section = trim(text.substr(p.pos + 1, end - p.pos - 1));
            if (!valid_key(section)) p.fail("bad table name '" + section + "'");
            p.pos = end + 1;
        } else {
            std::size_t eq = text.find('=', p.pos);
            std::size_t nl = text.find('\n', p.pos);
            if (eq == std::string::npos || (nl != std::string::npos && eq > nl)) p.fail("expected key = value");
            std::string key = trim(text.substr(p.pos, eq - p.pos));
            if (!valid_key(key)) p.fail("bad key '" + key + "'");
            p.pos = eq + 1;
            std::string full = section.empty() ? key : section + "." + key;
            if (cfg.has(full)) p.fail("duplicate key '" + full + "'");
            cfg.entries_[full] = p.value();
        }
        p.skip_space(false);
        if (p.pos < text.size() && text[p.pos] != '\n') p.fail("unexpected trailing characters");
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

const ConfigValue& Config::at(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
}

double Config::number(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.type != ConfigValue::Type::Number) throw ConfigError("key '" + key + "' must be a number");
    return v.number;
}

double Config::number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

bool Config::boolean_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& v = at(key);
    if (v.type != ConfigValue::Type::Bool) throw ConfigError("key '" + key + "' must be true or false");
    return v.boolean;
}

std::string Config::string(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.type != ConfigValue::Type::String) throw ConfigError("key '" + key + "' must be a string");
    return v.text;
}

std::string Config::string_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
}

std::vector<double> linspace(double a, double b, long n) {
    if (n < 1) throw ConfigError("linspace: need at least one point");
    if (n == 1) return {a};
    std::vector<double> out(n);
    for (long i = 0; i < n; ++i) out[i] = a + (b - a) * double(i) / double(n - 1);
    return out;
}

std::vector<double> logspace(double a, double b, long n) {
    std::vector<double> out = linspace(a, b, n);
    for (double& x : out) x = std::pow(10.0, x);
    return out;
}

std::vector<double> Config::numbers(const std::string& key) const {
    const ConfigValue& v = at(key);
    switch (v.type) {
        case ConfigValue::Type::Number: return {v.number};
        case ConfigValue::Type::Array: {
            std::vector<double> out;
            for (const auto& x : v.items) {
                if (x.type != ConfigValue::Type::Number) throw ConfigError("key '" + key + "' must hold numbers");
                out.push_back(x.number);
            }
            return out;
        }
        case ConfigValue::Type::String: {
            const std::string& t = v.text;
            std::size_t open = t.find('('), close = t.rfind(')');
            if (open == std::string::npos || close == std::string::npos || close < open)
                throw ConfigError("key '" + key + "': expected linspace(a, b, n) or logspace(a, b, n)");
            std::string fn = trim(t.substr(0, open));
            std::vector<double> args;
            std::stringstream ss(t.substr(open + 1, close - open - 1));
            std::string part;
            while (std::getline(ss, part, ',')) {
                try {
                    args.push_back(std::stod(trim(part)));
                } catch (const std::logic_error&) {
                    throw ConfigError("key '" + key + "': bad grid argument '" + part + "'");
                }
            }
            if (args.size() != 3 || args[2] < 1 || args[2] != std::floor(args[2]))
                throw ConfigError("key '" + key + "': grid needs (start, stop, count)");
            if (fn == "linspace") return linspace(args[0], args[1], long(args[2]));
            if (fn == "logspace") return logspace(args[0], args[1], long(args[2]));
            throw ConfigError("key '" + key + "': unknown grid function '" + fn + "'");
        }
        case ConfigValue::Type::Bool: break;
    }
    throw ConfigError("key '" + key + "' must be numeric");
}

std::vector<std::string> Config::strings(const std::string& key) const {
    const ConfigValue& v = at(key);
    if (v.type == ConfigValue::Type::String) return {v.text};
    if (v.type != ConfigValue::Type::Array) throw ConfigError("key '" + key + "' must be a string or array of strings");
    std::vector<std::string> out;
    for (const auto& x : v.items) {
        if (x.type != ConfigValue::Type::String) throw ConfigError("key '" + key + "' must hold strings");
        out.push_back(x.text);
    }
    return out;
}

std::vector<std::string> Config::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

nlohmann::json Config::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : entries_) j[k] = value_json(v);
    return j;
}

}  // namespace flatlab
