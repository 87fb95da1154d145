#include "cosmos/protocol.hpp"

#include <array>
#include <cctype>
#include <limits>
#include <utility>

#include "cosmos/errors.hpp"
#include "cosmos/strings.hpp"

namespace cosmos::protocol {

using settings::SettingsProfile;
using settings::Toggle;

namespace {

constexpr std::array<const char*, 6> kSettingElements = {"bluetooth", "gps",        "wifi",
                                                         "brightness", "ringvolume", "vibration"};

[[noreturn]] void malformed(const std::string& what) {
    throw ParseError(ParseErrorKind::Malformed, what);
}
[[noreturn]] void schema_violation(const std::string& what) {
    throw ParseError(ParseErrorKind::SchemaViolation, what);
}
[[noreturn]] void value_error(const std::string& what) {
    throw ParseError(ParseErrorKind::ValueError, what);
}

std::string escape_text(std::string_view raw) {
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

std::string unescape_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != '&') {
            out += raw[i];
            continue;
        }
        auto semi = raw.find(';', i);
        if (semi == std::string_view::npos) malformed("unterminated character entity");
        auto entity = raw.substr(i + 1, semi - i - 1);
        if (entity == "amp") out += '&';
        else if (entity == "lt") out += '<';
        else if (entity == "gt") out += '>';
        else if (entity == "quot") out += '"';
        else if (entity == "apos") out += '\'';
        else malformed("unknown character entity &" + std::string(entity) + ";");
        i = semi;
    }
    return out;
}

bool name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Minimal closed-schema XML scanner. No namespaces, comments or CDATA; the
// documents this protocol exchanges never contain them.
class Scanner {
public:
    explicit Scanner(std::string_view text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    // True when the next token is a closing tag.
    bool peek_close() {
        skip_ws();
        return pos_ + 1 < text_.size() && text_[pos_] == '<' && text_[pos_ + 1] == '/';
    }

    struct OpenTag {
        std::string name;
        std::vector<std::pair<std::string, std::string>> attrs;
    };

    OpenTag open_tag() {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '<') malformed("expected opening tag");
        ++pos_;
        OpenTag tag;
        tag.name = read_name();
        while (true) {
            skip_ws();
            if (pos_ >= text_.size()) malformed("unterminated tag <" + tag.name);
            if (text_[pos_] == '>') {
                ++pos_;
                return tag;
            }
            if (text_[pos_] == '/')
                schema_violation("self-closing <" + tag.name + "/> is not part of the schema");
            std::string attr_name = read_name();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != '=') malformed("expected '=' in attribute");
            ++pos_;
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != '"') malformed("expected '\"' in attribute");
            ++pos_;
            auto end = text_.find('"', pos_);
            if (end == std::string_view::npos) malformed("unterminated attribute value");
            tag.attrs.emplace_back(std::move(attr_name),
                                   unescape_text(text_.substr(pos_, end - pos_)));
            pos_ = end + 1;
        }
    }

    void close_tag(std::string_view name) {
        skip_ws();
        if (pos_ + 1 >= text_.size() || text_[pos_] != '<' || text_[pos_ + 1] != '/')
            malformed("expected closing tag </" + std::string(name) + ">");
        pos_ += 2;
        std::string actual = read_name();
        if (actual != name)
            malformed("mismatched closing tag </" + actual + ">, expected </" + std::string(name) +
                      ">");
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != '>') malformed("unterminated closing tag");
        ++pos_;
    }

    // Text content up to the next '<'.
    std::string text_content() {
        auto start = pos_;
        auto lt = text_.find('<', pos_);
        if (lt == std::string_view::npos) malformed("unterminated element text");
        pos_ = lt;
        return unescape_text(text_.substr(start, lt - start));
    }

    // <name>text</name> where name must be the expected element.
    std::string element(std::string_view expected) {
        OpenTag tag = open_tag();
        if (tag.name != expected)
            schema_violation("expected <" + std::string(expected) + ">, found <" + tag.name + ">");
        if (!tag.attrs.empty())
            schema_violation("<" + tag.name + "> takes no attributes");
        std::string body = text_content();
        close_tag(expected);
        return std::string(trim(body));
    }

private:
    std::string read_name() {
        auto start = pos_;
        while (pos_ < text_.size() && name_char(text_[pos_])) ++pos_;
        if (pos_ == start) malformed("expected a tag or attribute name");
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string toggle_text(Toggle t) { return t == Toggle::On ? "on" : "off"; }

Toggle parse_toggle_text(std::string_view text, std::string_view element) {
    if (text == "on") return Toggle::On;
    if (text == "off") return Toggle::Off;
    value_error("bad value '" + std::string(text) + "' in <" + std::string(element) + ">");
}

settings::Level parse_level_text(std::string_view text, std::string_view element) {
    for (auto l : {settings::Level::Pct0, settings::Level::Pct25, settings::Level::Pct50,
                   settings::Level::Pct75, settings::Level::Pct100})
        if (text == settings::level_label(l)) return l;
    value_error("bad value '" + std::string(text) + "' in <" + std::string(element) + ">");
}

std::string setting_element_text(const SettingsProfile& p, std::size_t i) {
    switch (i) {
        case 0: return toggle_text(p.bluetooth);
        case 1: return toggle_text(p.gps);
        case 2: return toggle_text(p.wifi);
        case 3: return settings::level_label(p.brightness);
        case 4: return settings::level_label(p.ring_volume);
        default: return toggle_text(p.vibration);
    }
}

void apply_setting_element(SettingsProfile& p, std::size_t i, std::string_view text) {
    switch (i) {
        case 0: p.bluetooth = parse_toggle_text(text, kSettingElements[i]); break;
        case 1: p.gps = parse_toggle_text(text, kSettingElements[i]); break;
        case 2: p.wifi = parse_toggle_text(text, kSettingElements[i]); break;
        case 3: p.brightness = parse_level_text(text, kSettingElements[i]); break;
        case 4: p.ring_volume = parse_level_text(text, kSettingElements[i]); break;
        default: p.vibration = parse_toggle_text(text, kSettingElements[i]); break;
    }
}

void append_profile_elements(std::string& out, const SettingsProfile& p,
                             std::string_view indent) {
    for (std::size_t i = 0; i < kSettingElements.size(); ++i) {
        out += indent;
        out += '<';
        out += kSettingElements[i];
        out += '>';
        out += setting_element_text(p, i);
        out += "</";
        out += kSettingElements[i];
        out += ">\n";
    }
}

SettingsProfile parse_profile_elements(Scanner& scanner) {
    SettingsProfile p;
    for (std::size_t i = 0; i < kSettingElements.size(); ++i)
        apply_setting_element(p, i, scanner.element(kSettingElements[i]));
    return p;
}

// Digits only, no sign, no padding.
std::optional<std::uint64_t> parse_decimal_uint(std::string_view text) {
    if (text.empty()) return std::nullopt;
    for (char c : text)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    return parse_uint(text);
}

std::uint64_t parse_sequence(std::string_view text) {
    auto seq = parse_decimal_uint(text);
    if (!seq) value_error("bad sequence number '" + std::string(text) + "'");
    return *seq;
}

}  // namespace

SettingsProfile sentinel_profile() {
    SettingsProfile p;
    p.bluetooth = Toggle::Off;
    p.gps = Toggle::Off;
    p.wifi = Toggle::On;
    p.brightness = settings::Level::Pct50;
    p.ring_volume = settings::Level::Pct50;
    p.vibration = Toggle::On;
    return p;
}

SettingsDocument SettingsDocument::trained(SettingsProfile profile, std::uint64_t sequence) {
    return SettingsDocument{profile, DocStatus::Trained, sequence};
}

SettingsDocument SettingsDocument::training(std::uint64_t sequence) {
    return SettingsDocument{sentinel_profile(), DocStatus::Training, sequence};
}

std::string build_settings_xml(const SettingsDocument& doc) {
    std::string out = "<cosmos version=\"1\" seq=\"" + std::to_string(doc.sequence) +
                      "\" status=\"" +
                      (doc.status == DocStatus::Trained ? "trained" : "training") + "\">\n";
    out += "  <settings>\n";
    append_profile_elements(out, doc.profile, "    ");
    out += "  </settings>\n";
    out += "</cosmos>\n";
    return out;
}

SettingsDocument parse_settings_xml(std::string_view bytes) {
    Scanner scanner(bytes);
    auto root = scanner.open_tag();
    if (root.name != "cosmos") schema_violation("expected <cosmos> root, found <" + root.name + ">");
    if (root.attrs.size() != 3 || root.attrs[0].first != "version" ||
        root.attrs[1].first != "seq" || root.attrs[2].first != "status")
        schema_violation("<cosmos> requires exactly version, seq, status attributes");
    if (root.attrs[0].second != "1")
        value_error("unsupported version '" + root.attrs[0].second + "'");

    SettingsDocument doc;
    doc.sequence = parse_sequence(root.attrs[1].second);
    const auto& status = root.attrs[2].second;
    if (status == "trained") doc.status = DocStatus::Trained;
    else if (status == "training") doc.status = DocStatus::Training;
    else value_error("bad status '" + status + "'");

    auto settings_tag = scanner.open_tag();
    if (settings_tag.name != "settings")
        schema_violation("expected <settings>, found <" + settings_tag.name + ">");
    if (!settings_tag.attrs.empty()) schema_violation("<settings> takes no attributes");
    doc.profile = parse_profile_elements(scanner);
    if (!scanner.peek_close()) {
        auto extra = scanner.open_tag();
        schema_violation("unexpected element <" + extra.name + "> in <settings>");
    }
    scanner.close_tag("settings");
    scanner.close_tag("cosmos");
    if (!scanner.at_end()) malformed("trailing content after </cosmos>");

    if (doc.status == DocStatus::Training && !(doc.profile == sentinel_profile()))
        value_error("training documents must carry the sentinel profile");
    return doc;
}

std::string encode_sms(const SettingsDocument& doc) {
    std::string out = "COSMOS1;S=";
    out += doc.status == DocStatus::Trained ? 'T' : 'G';
    out += ";Q=" + std::to_string(doc.sequence);
    const SettingsProfile& p = doc.profile;
    out += ";B";
    out += p.bluetooth == Toggle::On ? '1' : '0';
    out += ";P";
    out += p.gps == Toggle::On ? '1' : '0';
    out += ";W";
    out += p.wifi == Toggle::On ? '1' : '0';
    out += ";Y" + settings::level_label(p.brightness);
    out += ";R" + settings::level_label(p.ring_volume);
    out += ";V";
    out += p.vibration == Toggle::On ? '1' : '0';
    return out;
}

SettingsDocument decode_sms(std::string_view text) {
    auto tokens = split(text, ';');
    if (tokens.size() != 9) malformed("SMS payload must have 9 ';'-separated fields");
    if (tokens[0] != "COSMOS1") malformed("missing COSMOS1 prefix");

    if (!starts_with(tokens[1], "S=")) malformed("missing S= field");
    std::string_view status = std::string_view(tokens[1]).substr(2);
    SettingsDocument doc;
    if (status == "T") doc.status = DocStatus::Trained;
    else if (status == "G") doc.status = DocStatus::Training;
    else value_error("bad status '" + std::string(status) + "'");

    if (!starts_with(tokens[2], "Q=")) malformed("missing Q= field");
    doc.sequence = parse_sequence(std::string_view(tokens[2]).substr(2));

    constexpr std::array<char, 6> keys = {'B', 'P', 'W', 'Y', 'R', 'V'};
    SettingsProfile p;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::string& tok = tokens[3 + i];
        if (tok.empty() || tok[0] != keys[i])
            malformed(std::string("expected key ") + keys[i] + " at field " + std::to_string(3 + i));
        std::string_view value = std::string_view(tok).substr(1);
        switch (keys[i]) {
            case 'B': p.bluetooth = value == "1" ? Toggle::On
                                  : value == "0" ? Toggle::Off
                                                 : throw ParseError(ParseErrorKind::ValueError,
                                                                    "bad B value");
                break;
            case 'P': p.gps = value == "1" ? Toggle::On
                            : value == "0" ? Toggle::Off
                                           : throw ParseError(ParseErrorKind::ValueError,
                                                              "bad P value");
                break;
            case 'W': p.wifi = value == "1" ? Toggle::On
                             : value == "0" ? Toggle::Off
                                            : throw ParseError(ParseErrorKind::ValueError,
                                                               "bad W value");
                break;
            case 'Y': p.brightness = parse_level_text(value, "Y");
                break;
            case 'R': p.ring_volume = parse_level_text(value, "R");
                break;
            case 'V': p.vibration = value == "1" ? Toggle::On
                                  : value == "0" ? Toggle::Off
                                                 : throw ParseError(ParseErrorKind::ValueError,
                                                                    "bad V value");
                break;
        }
    }
    doc.profile = p;
    if (doc.status == DocStatus::Training && !(doc.profile == sentinel_profile()))
        value_error("training documents must carry the sentinel profile");
    return doc;
}

std::string build_context_xml(const ContextUpload& upload) {
    std::string out = "<context version=\"1\" client=\"" + escape_text(upload.client_id) +
                      "\" at=\"" + std::to_string(upload.at.seconds) + "\">\n";
    auto element = [&out](std::string_view name, const std::string& value) {
        out += "  <";
        out += name;
        out += '>';
        out += escape_text(value);
        out += "</";
        out += name;
        out += ">\n";
    };
    element("zone", upload.row.zone_id);
    element("event", upload.row.event_category);
    element("callcount", std::to_string(upload.row.call_count));
    element("callcat", upload.row.last_call_category);
    element("battery", format_double(upload.row.battery_pct));
    element("crisis", upload.row.crisis ? "yes" : "no");
    if (upload.observed_profile) {
        out += "  <observed>\n";
        append_profile_elements(out, *upload.observed_profile, "    ");
        out += "  </observed>\n";
    }
    out += "</context>\n";
    return out;
}

ContextUpload parse_context_xml(std::string_view bytes) {
    Scanner scanner(bytes);
    auto root = scanner.open_tag();
    if (root.name != "context")
        schema_violation("expected <context> root, found <" + root.name + ">");
    if (root.attrs.size() != 3 || root.attrs[0].first != "version" ||
        root.attrs[1].first != "client" || root.attrs[2].first != "at")
        schema_violation("<context> requires exactly version, client, at attributes");
    if (root.attrs[0].second != "1")
        value_error("unsupported version '" + root.attrs[0].second + "'");

    ContextUpload upload;
    upload.client_id = root.attrs[1].second;
    if (upload.client_id.empty()) value_error("client id must be non-empty");
    auto at = parse_decimal_uint(root.attrs[2].second);
    if (!at || *at > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        value_error("bad timestamp '" + root.attrs[2].second + "'");
    upload.at = context::TimeInstant{static_cast<std::int64_t>(*at)};

    auto& row = upload.row;
    row.zone_id = scanner.element("zone");
    if (row.zone_id.empty()) value_error("<zone> must be non-empty");
    row.event_category = scanner.element("event");
    if (row.event_category.empty()) value_error("<event> must be non-empty");
    auto count = parse_decimal_uint(scanner.element("callcount"));
    if (!count || *count > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
        value_error("bad <callcount>");
    row.call_count = static_cast<int>(*count);
    row.last_call_category = scanner.element("callcat");
    if (row.last_call_category.empty()) value_error("<callcat> must be non-empty");
    auto battery = parse_double(scanner.element("battery"));
    if (!battery || !(*battery >= 0.0 && *battery <= 100.0)) value_error("bad <battery>");
    row.battery_pct = *battery;
    auto crisis = scanner.element("crisis");
    if (crisis == "yes") row.crisis = true;
    else if (crisis == "no") row.crisis = false;
    else value_error("bad <crisis> value '" + crisis + "'");

    if (!scanner.peek_close()) {
        auto tag = scanner.open_tag();
        if (tag.name != "observed")
            schema_violation("unexpected element <" + tag.name + "> in <context>");
        if (!tag.attrs.empty()) schema_violation("<observed> takes no attributes");
        upload.observed_profile = parse_profile_elements(scanner);
        if (!scanner.peek_close()) {
            auto extra = scanner.open_tag();
            schema_violation("unexpected element <" + extra.name + "> in <observed>");
        }
        scanner.close_tag("observed");
    }
    scanner.close_tag("context");
    if (!scanner.at_end()) malformed("trailing content after </context>");
    return upload;
}

}  // namespace cosmos::protocol
