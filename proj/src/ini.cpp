#include "anyprot/ini.hpp"

#include <fstream>
#include <sstream>

namespace anyprot {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Ini Ini::parse(const std::string& text) {
    Ini ini;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw InputError("ini line " + std::to_string(lineno) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            ini.sections_[section];  // keep empty sections visible
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw InputError("ini line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw InputError("ini line " + std::to_string(lineno) + ": empty key");
        ini.sections_[section][key] = trim(t.substr(eq + 1));
    }
    return ini;
}

Ini Ini::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool Ini::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) != 0;
}

const std::string& Ini::get(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key))
        throw InputError("config missing [" + section + "] " + key);
    return s->second.at(key);
}

std::string Ini::get_or(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double Ini::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get(section, key);
    size_t used = 0;
    double out;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw InputError("config [" + section + "] " + key + ": not a number: " + v);
    }
    if (used != v.size()) throw InputError("config [" + section + "] " + key + ": not a number: " + v);
    return out;
}

long Ini::get_int(const std::string& section, const std::string& key, long fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get(section, key);
    size_t used = 0;
    long out;
    try {
        out = std::stol(v, &used);
    } catch (const std::exception&) {
        throw InputError("config [" + section + "] " + key + ": not an integer: " + v);
    }
    if (used != v.size())
        throw InputError("config [" + section + "] " + key + ": not an integer: " + v);
    return out;
}

bool Ini::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get(section, key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InputError("config [" + section + "] " + key + ": not a boolean: " + v);
}

double Ini::get_double(const std::string& section, const std::string& key) const {
    (void)get(section, key);  // throws when missing
    return get_double(section, key, 0.0);
}

long Ini::get_int(const std::string& section, const std::string& key) const {
    (void)get(section, key);
    return get_int(section, key, 0);
}

bool Ini::get_bool(const std::string& section, const std::string& key) const {
    (void)get(section, key);
    return get_bool(section, key, false);
}

void Ini::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}

std::string Ini::dump() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [name, kv] : sections_) {
        if (!first) out << "\n";
        first = false;
        out << "[" << name << "]\n";
        for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
    }
    return out.str();
}

void Ini::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << dump();
    if (!out.good()) throw IoError("write failed: " + path);
}

}  // namespace anyprot
