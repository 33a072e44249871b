#pragma once

#include <map>
#include <string>

#include "anyprot/common.hpp"

namespace anyprot {

// Minimal INI: [section] headers, key = value lines, # or ; comments.
// Values keep inner whitespace; keys/values are trimmed.
class Ini {
  public:
    static Ini parse(const std::string& text);
    static Ini parse_file(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    const std::string& get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_int(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    // required variants: throw InputError when the key is missing
    double get_double(const std::string& section, const std::string& key) const;
    long get_int(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    std::string dump() const;  // stable ordering; reparses to an equal table
    void save(const std::string& path) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace anyprot
