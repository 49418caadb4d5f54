#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace flatlab {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConfigValue {
    enum class Type { Number, Bool, String, Array };
    Type type = Type::Number;
    double number = 0.0;
    bool boolean = false;
    std::string text;
    std::vector<ConfigValue> items;
};

// TOML subset: [section] / [a.b] tables, key = value with numbers, booleans,
// quoted strings and (possibly multi-line) arrays, '#' comments.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    const ConfigValue& at(const std::string& key) const;

    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    bool boolean_or(const std::string& key, bool fallback) const;
    std::string string(const std::string& key) const;
    std::string string_or(const std::string& key, const std::string& fallback) const;

    // A number, an array of numbers, or "linspace(a, b, n)" / "logspace(a, b, n)" (base-10 exponents).
    std::vector<double> numbers(const std::string& key) const;
    std::vector<std::string> strings(const std::string& key) const;

    std::vector<std::string> keys() const;
    void set(const std::string& key, ConfigValue v) { entries_[key] = std::move(v); }
    nlohmann::json to_json() const;

private:
    std::map<std::string, ConfigValue> entries_;
};

std::vector<double> linspace(double a, double b, long n);
std::vector<double> logspace(double a, double b, long n);

}  // namespace flatlab
