#include "labelflux/xml.hpp"

#include <cctype>
#include <cstdint>

#include "labelflux/error.hpp"

namespace labelflux::xml {

std::optional<std::string> Element::attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
        if (k == key) return v;
    }
    return std::nullopt;
}

const Element* Element::child(std::string_view local) const {
    for (const auto& c : children) {
        if (local_name(c.name) == local) return &c;
    }
    return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view local) const {
    std::vector<const Element*> out;
    for (const auto& c : children) {
        if (local_name(c.name) == local) out.push_back(&c);
    }
    return out;
}

std::string Element::all_text() const {
    std::string out = text;
    for (const auto& c : children) {
        out += ' ';
        out += c.all_text();
    }
    return out;
}

std::string_view local_name(std::string_view qualified) {
    auto colon = qualified.find(':');
    return colon == std::string_view::npos ? qualified : qualified.substr(colon + 1);
}

std::string escape(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

namespace {

class Reader {
public:
    explicit Reader(std::string_view text) : s_(text) {}

    Element document() {
        skip_misc();
        if (eof() || peek() != '<') fail("expected root element");
        Element root = element();
        skip_misc();
        if (!eof()) fail("content after root element");
        return root;
    }

private:
    std::string_view s_;
    std::size_t i_ = 0;

    bool eof() const { return i_ >= s_.size(); }
    char peek() const { return s_[i_]; }
    bool starts_with(std::string_view p) const { return s_.substr(i_, p.size()) == p; }

    [[noreturn]] void fail(const std::string& msg) const {
        std::size_t line = 1;
        for (std::size_t k = 0; k < i_ && k < s_.size(); ++k) {
            if (s_[k] == '\n') ++line;
        }
        throw ParseError("XML line " + std::to_string(line) + ": " + msg);
    }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++i_;
    }

    void skip_until(std::string_view terminator) {
        auto pos = s_.find(terminator, i_);
        if (pos == std::string_view::npos) fail("unterminated construct, expected '" + std::string(terminator) + "'");
        i_ = pos + terminator.size();
    }

    // Prolog, comments, processing instructions and doctype outside elements.
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts_with("<?")) {
                skip_until("?>");
            } else if (starts_with("<!--")) {
                skip_until("-->");
            } else if (starts_with("<!DOCTYPE")) {
                skip_until(">");
            } else {
                return;
            }
        }
    }

    static bool name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' ||
               c == '.' || static_cast<unsigned char>(c) >= 0x80;
    }

    std::string name() {
        std::size_t start = i_;
        while (!eof() && name_char(peek())) ++i_;
        if (start == i_) fail("expected a name");
        return std::string(s_.substr(start, i_ - start));
    }

    static void append_utf8(std::string& out, std::uint32_t cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    void entity(std::string& out) {
        auto end = s_.find(';', i_);
        if (end == std::string_view::npos || end - i_ > 12) fail("malformed entity reference");
        std::string_view ref = s_.substr(i_ + 1, end - i_ - 1);
        if (ref == "lt") out += '<';
        else if (ref == "gt") out += '>';
        else if (ref == "amp") out += '&';
        else if (ref == "quot") out += '"';
        else if (ref == "apos") out += '\'';
        else if (!ref.empty() && ref[0] == '#') {
            std::uint32_t cp = 0;
            try {
                cp = ref.size() > 1 && (ref[1] == 'x' || ref[1] == 'X')
                         ? static_cast<std::uint32_t>(std::stoul(std::string(ref.substr(2)), nullptr, 16))
                         : static_cast<std::uint32_t>(std::stoul(std::string(ref.substr(1))));
            } catch (const std::exception&) {
                fail("bad character reference &" + std::string(ref) + ";");
            }
            append_utf8(out, cp);
        } else {
            fail("unknown entity &" + std::string(ref) + ";");
        }
        i_ = end + 1;
    }

    std::string attribute_value() {
        if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
        char quote = peek();
        ++i_;
        std::string out;
        while (!eof() && peek() != quote) {
            if (peek() == '<') fail("'<' in attribute value");
            if (peek() == '&') {
                entity(out);
            } else {
                out += peek();
                ++i_;
            }
        }
        if (eof()) fail("unterminated attribute value");
        ++i_;
        return out;
    }

    Element element() {
        ++i_;  // '<'
        Element e;
        e.name = name();
        for (;;) {
            skip_ws();
            if (eof()) fail("unterminated start tag <" + e.name + ">");
            if (starts_with("/>")) {
                i_ += 2;
                return e;
            }
            if (peek() == '>') {
                ++i_;
                break;
            }
            std::string key = name();
            skip_ws();
            if (eof() || peek() != '=') fail("expected '=' after attribute " + key);
            ++i_;
            skip_ws();
            std::string value = attribute_value();
            for (const auto& [k, v] : e.attributes) {
                if (k == key) fail("duplicate attribute " + key + " on <" + e.name + ">");
            }
            e.attributes.emplace_back(std::move(key), std::move(value));
        }
        content(e);
        return e;
    }

    void content(Element& e) {
        for (;;) {
            if (eof()) fail("missing end tag </" + e.name + ">");
            if (starts_with("</")) {
                i_ += 2;
                std::string closing = name();
                if (closing != e.name) fail("end tag </" + closing + "> does not match <" + e.name + ">");
                skip_ws();
                if (eof() || peek() != '>') fail("malformed end tag");
                ++i_;
                return;
            }
            if (starts_with("<!--")) {
                skip_until("-->");
            } else if (starts_with("<![CDATA[")) {
                i_ += 9;
                auto end = s_.find("]]>", i_);
                if (end == std::string_view::npos) fail("unterminated CDATA");
                e.text += s_.substr(i_, end - i_);
                i_ = end + 3;
            } else if (starts_with("<?")) {
                skip_until("?>");
            } else if (peek() == '<') {
                e.children.push_back(element());
            } else if (peek() == '&') {
                entity(e.text);
            } else {
                e.text += peek();
                ++i_;
            }
        }
    }
};

}  // namespace

Element parse(std::string_view text) { return Reader(text).document(); }

}  // namespace labelflux::xml
