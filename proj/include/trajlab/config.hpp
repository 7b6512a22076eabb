#pragma once

// Experiment configs: '#' starts a comment, 'key = value' pairs, one level of
// named blocks 'name { ... }'. Values stay strings until a reader coerces
// them, so error messages can name the offending key. The canonical form
// (sorted keys, normalized spacing) feeds a 64-bit FNV-1a hash that is stamped
// into every report, tying outputs to the exact inputs that produced them.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trajlab {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

class Config {
  public:
    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line, block;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t comment = line.find('#');
            if (comment != std::string::npos) line.erase(comment);
            trim(line);
            if (line.empty()) continue;
            if (line == "}") {
                if (block.empty()) fail(lineno, "unmatched '}'");
                block.clear();
                continue;
            }
            if (line.back() == '{') {
                if (!block.empty()) fail(lineno, "blocks do not nest");
                block = line.substr(0, line.size() - 1);
                trim(block);
                if (!is_ident(block)) fail(lineno, "block needs a bare name before '{'");
                if (cfg.blocks_.count(block)) fail(lineno, "duplicate block '" + block + "'");
                cfg.blocks_[block];
                continue;
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
            std::string key = line.substr(0, eq);
            std::string value = line.substr(eq + 1);
            trim(key);
            trim(value);
            // dotted form "block.key = value" is what canonical() emits; accepting
            // it makes canonical text round-trip through parse()
            std::string target = block;
            const std::size_t dot = key.find('.');
            if (dot != std::string::npos) {
                if (!block.empty()) fail(lineno, "dotted keys cannot appear inside a block");
                target = key.substr(0, dot);
                key = key.substr(dot + 1);
                if (!is_ident(target)) fail(lineno, "block part of a dotted key must be a bare name");
            }
            if (!is_ident(key)) fail(lineno, "key must be a bare identifier");
            const std::string qualified = target.empty() ? key : target + "." + key;
            if (value.empty()) fail(lineno, "empty value for '" + qualified + "'");
            auto& dst = target.empty() ? cfg.top_ : cfg.blocks_[target];
            if (dst.count(key)) fail(lineno, "duplicate key '" + qualified + "'");
            dst[key] = value;
        }
        if (!block.empty())
            throw std::invalid_argument("config: block '" + block + "' is never closed");
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("config: cannot read file '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }

    // Command-line overrides land here before hashing, so the recorded hash
    // always reflects the effective configuration.
    void set(const std::string& key, std::string value) { top_[key] = std::move(value); }

    bool has(const std::string& key) const { return top_.count(key) > 0; }
    bool has(const std::string& block, const std::string& key) const {
        const auto b = blocks_.find(block);
        return b != blocks_.end() && b->second.count(key) > 0;
    }
    bool has_block(const std::string& block) const { return blocks_.count(block) > 0; }

    const std::string& str(const std::string& key) const { return fetch(top_, key, key); }
    const std::string& str(const std::string& block, const std::string& key) const {
        const auto b = blocks_.find(block);
        if (b == blocks_.end())
            throw std::invalid_argument("config: missing block '" + block + "'");
        return fetch(b->second, key, block + "." + key);
    }

    std::string str_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? top_.at(key) : fallback;
    }
    std::string str_or(const std::string& block, const std::string& key,
                       const std::string& fallback) const {
        return has(block, key) ? blocks_.at(block).at(key) : fallback;
    }

    double num(const std::string& key) const { return to_num(str(key), key); }
    double num(const std::string& block, const std::string& key) const {
        return to_num(str(block, key), block + "." + key);
    }
    double num_or(const std::string& key, double fallback) const {
        return has(key) ? num(key) : fallback;
    }
    double num_or(const std::string& block, const std::string& key, double fallback) const {
        return has(block, key) ? num(block, key) : fallback;
    }

    std::int64_t integer(const std::string& block, const std::string& key) const {
        const double v = num(block, key);
        if (v != double(std::int64_t(v)))
            throw std::invalid_argument("config: '" + block + "." + key + "' must be an integer");
        return std::int64_t(v);
    }
    std::int64_t integer_or(const std::string& block, const std::string& key,
                            std::int64_t fallback) const {
        return has(block, key) ? integer(block, key) : fallback;
    }

    // comma-separated doubles: "t1, t2, t3"
    std::vector<double> list(const std::string& block, const std::string& key) const {
        const std::string& raw = str(block, key);
        std::vector<double> out;
        std::istringstream in(raw);
        std::string item;
        while (std::getline(in, item, ','))
            out.push_back(to_num(item, block + "." + key));
        if (out.empty())
            throw std::invalid_argument("config: '" + block + "." + key + "' lists no numbers");
        return out;
    }

    // comma-separated pairs "a:b, c:d"
    std::vector<std::pair<double, double>> pair_list(const std::string& block,
                                                     const std::string& key) const {
        const std::string& raw = str(block, key);
        std::vector<std::pair<double, double>> out;
        std::istringstream in(raw);
        std::string item;
        while (std::getline(in, item, ',')) {
            const std::size_t colon = item.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("config: '" + block + "." + key +
                                            "' expects 'a:b' pairs");
            out.push_back({to_num(item.substr(0, colon), block + "." + key),
                           to_num(item.substr(colon + 1), block + "." + key)});
        }
        return out;
    }

    bool flag_or(const std::string& block, const std::string& key, bool fallback) const {
        if (!has(block, key)) return fallback;
        const std::string& v = blocks_.at(block).at(key);
        if (v == "on" || v == "true") return true;
        if (v == "off" || v == "false") return false;
        throw std::invalid_argument("config: '" + block + "." + key + "' must be on or off");
    }

    // Typo guard: every present key must appear in the allowed list.
    void require_known_keys(const std::string& block,
                            const std::vector<std::string>& allowed) const {
        const auto b = blocks_.find(block);
        if (b == blocks_.end()) return;
        for (const auto& [key, value] : b->second) {
            bool ok = false;
            for (const auto& a : allowed) ok = ok || a == key;
            if (!ok)
                throw std::invalid_argument("config: unrecognized key '" + block + "." + key +
                                            "'");
        }
    }

    void require_known_top(const std::vector<std::string>& allowed) const {
        for (const auto& [key, value] : top_) {
            bool ok = false;
            for (const auto& a : allowed) ok = ok || a == key;
            if (!ok) throw std::invalid_argument("config: unrecognized key '" + key + "'");
        }
    }

    void require_known_blocks(const std::vector<std::string>& allowed) const {
        for (const auto& [name, kv] : blocks_) {
            bool ok = false;
            for (const auto& a : allowed) ok = ok || a == name;
            if (!ok) throw std::invalid_argument("config: unrecognized block '" + name + "'");
        }
    }

    // Sorted "key = value" / "block.key = value" lines: comments and spacing
    // never influence the hash, any semantic edit does.
    std::string canonical() const {
        std::ostringstream out;
        for (const auto& [k, v] : top_) out << k << " = " << v << "\n";
        for (const auto& [b, kv] : blocks_)
            for (const auto& [k, v] : kv) out << b << "." << k << " = " << v << "\n";
        return out.str();
    }

    std::uint64_t hash() const { return fnv1a64(canonical()); }

  private:
    static void trim(std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        s = s.substr(a, b - a);
    }

    static bool is_ident(const std::string& s) {
        if (s.empty()) return false;
        for (char c : s)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
                return false;
        return true;
    }

    [[noreturn]] static void fail(int lineno, const std::string& what) {
        throw std::invalid_argument("config: line " + std::to_string(lineno) + ": " + what);
    }

    static const std::string& fetch(const std::map<std::string, std::string>& kv,
                                    const std::string& key, const std::string& qualified) {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw std::invalid_argument("config: missing key '" + qualified + "'");
        return it->second;
    }

    static double to_num(const std::string& raw, const std::string& qualified) {
        std::string s = raw;
        trim(s);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("config: '" + qualified + "' is not a number: '" + s +
                                        "'");
        }
        if (used != s.size())
            throw std::invalid_argument("config: '" + qualified + "' has trailing text: '" + s +
                                        "'");
        return v;
    }

    std::map<std::string, std::string> top_;
    std::map<std::string, std::map<std::string, std::string>> blocks_;
};

}  // namespace trajlab
