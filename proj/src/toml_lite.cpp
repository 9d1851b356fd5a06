#include "ruler/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "ruler/errors.hpp"

namespace ruler::cfg {

namespace {

struct Cursor {
    const std::string& text;
    std::size_t pos = 0;
    std::size_t line = 1;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char take() {
        char c = text[pos++];
        if (c == '\n') ++line;
        return c;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("config line " + std::to_string(line) + ": " + what);
    }
    void skip_ws_inline() {
        while (!done() && (peek() == ' ' || peek() == '\t')) ++pos;
    }
    // Whitespace, newlines and comments.
    void skip_ws_and_comments() {
        while (!done()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                take();
            } else if (c == '#') {
                while (!done() && peek() != '\n') ++pos;
            } else {
                break;
            }
        }
    }
};

bool is_bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string parse_key_part(Cursor& c) {
    c.skip_ws_inline();
    std::string key;
    if (!c.done() && c.peek() == '"') {
        c.take();
        while (!c.done() && c.peek() != '"') key.push_back(c.take());
        if (c.done()) c.fail("unterminated quoted key");
        c.take();
    } else {
        while (!c.done() && is_bare_key_char(c.peek())) key.push_back(c.take());
    }
    if (key.empty()) c.fail("expected a key");
    c.skip_ws_inline();
    return key;
}

std::vector<std::string> parse_dotted_key(Cursor& c) {
    std::vector<std::string> parts{parse_key_part(c)};
    while (!c.done() && c.peek() == '.') {
        c.take();
        parts.push_back(parse_key_part(c));
    }
    return parts;
}

nlohmann::json parse_value(Cursor& c);

nlohmann::json parse_string(Cursor& c) {
    c.take();  // opening quote
    std::string out;
    while (true) {
        if (c.done()) c.fail("unterminated string");
        char ch = c.take();
        if (ch == '"') break;
        if (ch == '\n') c.fail("newline inside string");
        if (ch == '\\') {
            if (c.done()) c.fail("dangling escape");
            char esc = c.take();
            switch (esc) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                default: c.fail(std::string("unsupported escape \\") + esc);
            }
        } else {
            out.push_back(ch);
        }
    }
    return nlohmann::json(out);
}

nlohmann::json parse_array(Cursor& c) {
    c.take();  // '['
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
        c.skip_ws_and_comments();
        if (c.done()) c.fail("unterminated array");
        if (c.peek() == ']') {
            c.take();
            return arr;
        }
        arr.push_back(parse_value(c));
        c.skip_ws_and_comments();
        if (c.done()) c.fail("unterminated array");
        if (c.peek() == ',') {
            c.take();
        } else if (c.peek() != ']') {
            c.fail("expected ',' or ']' in array");
        }
    }
}

nlohmann::json parse_scalar(Cursor& c) {
    std::string token;
    while (!c.done()) {
        char ch = c.peek();
        if (ch == ',' || ch == ']' || ch == '#' || ch == '\n' || ch == '\r' || ch == ' ' ||
            ch == '\t')
            break;
        token.push_back(c.take());
    }
    if (token.empty()) c.fail("expected a value");
    if (token == "true") return nlohmann::json(true);
    if (token == "false") return nlohmann::json(false);

    bool looks_float = token.find_first_of(".eE") != std::string::npos;
    if (!looks_float) {
        long long iv = 0;
        auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), iv);
        if (ec == std::errc() && p == token.data() + token.size()) return nlohmann::json(iv);
    }
    double dv = 0.0;
    auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), dv);
    if (ec == std::errc() && p == token.data() + token.size()) return nlohmann::json(dv);
    c.fail("cannot parse value '" + token + "'");
}

nlohmann::json parse_value(Cursor& c) {
    c.skip_ws_inline();
    if (c.done()) c.fail("expected a value");
    char ch = c.peek();
    if (ch == '"') return parse_string(c);
    if (ch == '[') return parse_array(c);
    return parse_scalar(c);
}

}  // namespace

nlohmann::json parse_toml_lite(const std::string& text) {
    nlohmann::json root = nlohmann::json::object();
    Cursor c{text};
    nlohmann::json* current = &root;

    while (true) {
        c.skip_ws_and_comments();
        if (c.done()) break;
        if (c.peek() == '[') {
            c.take();
            bool array_of_tables = !c.done() && c.peek() == '[';
            if (array_of_tables) c.take();
            std::vector<std::string> path = parse_dotted_key(c);
            if (c.done() || c.take() != ']') c.fail("expected ']' after table name");
            if (array_of_tables && (c.done() || c.take() != ']'))
                c.fail("expected ']]' after array-of-tables name");
            nlohmann::json* parent = &root;
            for (std::size_t i = 0; i + 1 < path.size(); ++i) {
                if (parent->is_array()) parent = &parent->back();
                parent = &(*parent)[path[i]];
                if (parent->is_null()) *parent = nlohmann::json::object();
            }
            if (parent->is_array()) parent = &parent->back();
            nlohmann::json& slot = (*parent)[path.back()];
            if (array_of_tables) {
                if (slot.is_null()) slot = nlohmann::json::array();
                if (!slot.is_array()) c.fail("table array clashes with existing key");
                slot.push_back(nlohmann::json::object());
                current = &slot.back();
            } else {
                if (slot.is_null()) slot = nlohmann::json::object();
                if (!slot.is_object()) c.fail("table clashes with existing key");
                current = &slot;
            }
            continue;
        }
        std::vector<std::string> path = parse_dotted_key(c);
        if (c.done() || c.take() != '=') c.fail("expected '=' after key");
        nlohmann::json value = parse_value(c);
        nlohmann::json* node = current;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            node = &(*node)[path[i]];
            if (node->is_null()) *node = nlohmann::json::object();
            if (!node->is_object()) c.fail("key path crosses a non-table");
        }
        if (!(*node)[path.back()].is_null()) c.fail("duplicate key '" + path.back() + "'");
        (*node)[path.back()] = std::move(value);
        c.skip_ws_inline();
        if (!c.done() && c.peek() == '#')
            while (!c.done() && c.peek() != '\n') c.take();
        if (!c.done() && c.peek() != '\n' && c.peek() != '\r')
            c.fail("trailing characters after value");
    }
    return root;
}

nlohmann::json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string ext = path.extension().string();
    if (ext == ".json") {
        try {
            return nlohmann::json::parse(ss.str());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    if (ext == ".toml") return parse_toml_lite(ss.str());
    throw ConfigError("config file must end in .json or .toml: " + path.string());
}

}  // namespace ruler::cfg
