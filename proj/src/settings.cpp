#include "cosmos/settings.hpp"

#include <algorithm>
#include <fstream>

#include "cosmos/errors.hpp"
#include "cosmos/strings.hpp"

namespace cosmos::settings {

namespace {

const std::vector<std::string> kToggleLabels = {"ON", "OFF"};
const std::vector<std::string> kLevelLabels = {"0", "25", "50", "75", "100"};

constexpr std::array<const char*, kSettingCount> kSettingNames = {
    "bluetooth", "gps", "wifi", "brightness", "ring_volume", "vibration"};

// zone/event/callcat value sets vary with the data, so schema equality for
// those attributes is name + kind only.
struct ContextAttr {
    const char* name;
    dtree::AttrKind kind;
};
constexpr std::array<ContextAttr, 6> kContextAttrs = {{
    {"zone", dtree::AttrKind::Categorical},
    {"event", dtree::AttrKind::Categorical},
    {"callcount", dtree::AttrKind::Continuous},
    {"callcat", dtree::AttrKind::Categorical},
    {"battery", dtree::AttrKind::Continuous},
    {"crisis", dtree::AttrKind::Categorical},
}};

}  // namespace

const char* setting_name(SettingName s) {
    return kSettingNames[static_cast<std::size_t>(s)];
}

SettingName parse_setting_name(std::string_view name) {
    for (std::size_t i = 0; i < kSettingCount; ++i)
        if (name == kSettingNames[i]) return static_cast<SettingName>(i);
    throw UsageError("unknown setting name: " + std::string(name));
}

std::string toggle_label(Toggle t) { return t == Toggle::On ? "ON" : "OFF"; }

std::string level_label(Level l) { return std::to_string(static_cast<int>(l)); }

Toggle parse_toggle_label(std::string_view label) {
    if (label == "ON") return Toggle::On;
    if (label == "OFF") return Toggle::Off;
    throw UsageError("bad toggle label: " + std::string(label));
}

Level parse_level_label(std::string_view label) {
    for (Level l : {Level::Pct0, Level::Pct25, Level::Pct50, Level::Pct75, Level::Pct100})
        if (label == level_label(l)) return l;
    throw UsageError("bad level label: " + std::string(label));
}

const std::vector<std::string>& setting_label_domain(SettingName s) {
    switch (s) {
        case SettingName::Brightness:
        case SettingName::RingVolume:
            return kLevelLabels;
        default:
            return kToggleLabels;
    }
}

std::string setting_label(const SettingsProfile& p, SettingName s) {
    switch (s) {
        case SettingName::Bluetooth: return toggle_label(p.bluetooth);
        case SettingName::Gps: return toggle_label(p.gps);
        case SettingName::Wifi: return toggle_label(p.wifi);
        case SettingName::Brightness: return level_label(p.brightness);
        case SettingName::RingVolume: return level_label(p.ring_volume);
        case SettingName::Vibration: return toggle_label(p.vibration);
    }
    throw UsageError("bad setting");
}

void set_setting_label(SettingsProfile& p, SettingName s, std::string_view label) {
    switch (s) {
        case SettingName::Bluetooth: p.bluetooth = parse_toggle_label(label); return;
        case SettingName::Gps: p.gps = parse_toggle_label(label); return;
        case SettingName::Wifi: p.wifi = parse_toggle_label(label); return;
        case SettingName::Brightness: p.brightness = parse_level_label(label); return;
        case SettingName::RingVolume: p.ring_volume = parse_level_label(label); return;
        case SettingName::Vibration: p.vibration = parse_toggle_label(label); return;
    }
    throw UsageError("bad setting");
}

namespace {

char toggle_digit(Toggle t) { return t == Toggle::On ? '1' : '0'; }

Toggle toggle_from_digit(char c) {
    if (c == '1') return Toggle::On;
    if (c == '0') return Toggle::Off;
    throw UsageError("bad toggle digit");
}

}  // namespace

std::string profile_token(const SettingsProfile& p) {
    std::string out;
    out += 'B';
    out += toggle_digit(p.bluetooth);
    out += 'P';
    out += toggle_digit(p.gps);
    out += 'W';
    out += toggle_digit(p.wifi);
    out += 'Y';
    out += level_label(p.brightness);
    out += 'R';
    out += level_label(p.ring_volume);
    out += 'V';
    out += toggle_digit(p.vibration);
    return out;
}

SettingsProfile parse_profile_token(std::string_view token) {
    SettingsProfile p;
    std::size_t pos = 0;
    auto expect_key = [&](char key) {
        if (pos >= token.size() || token[pos] != key)
            throw UsageError("bad profile token: " + std::string(token));
        ++pos;
    };
    auto read_digits = [&]() {
        std::size_t start = pos;
        while (pos < token.size() && token[pos] >= '0' && token[pos] <= '9') ++pos;
        if (pos == start) throw UsageError("bad profile token: " + std::string(token));
        return token.substr(start, pos - start);
    };
    auto read_toggle = [&]() {
        auto d = read_digits();
        if (d.size() != 1) throw UsageError("bad profile token: " + std::string(token));
        return toggle_from_digit(d[0]);
    };
    expect_key('B');
    p.bluetooth = read_toggle();
    expect_key('P');
    p.gps = read_toggle();
    expect_key('W');
    p.wifi = read_toggle();
    expect_key('Y');
    p.brightness = parse_level_label(read_digits());
    expect_key('R');
    p.ring_volume = parse_level_label(read_digits());
    expect_key('V');
    p.vibration = read_toggle();
    if (pos != token.size()) throw UsageError("trailing characters in profile token");
    return p;
}

CriticalServicesRepository CriticalServicesRepository::load(std::istream& in) {
    CriticalServicesRepository repo;
    std::string line;
    while (std::getline(in, line)) {
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        repo.protected_settings.insert(parse_setting_name(body));
    }
    return repo;
}

CriticalServicesRepository CriticalServicesRepository::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open critical services config: " + path);
    return load(in);
}

CriticalServicesRepository CriticalServicesRepository::defaults() {
    CriticalServicesRepository repo;
    repo.protected_settings = {SettingName::RingVolume, SettingName::Vibration};
    return repo;
}

bool is_context_schema(const dtree::AttributeSchema& schema) {
    if (schema.attributes.size() != kContextAttrs.size()) return false;
    for (std::size_t i = 0; i < kContextAttrs.size(); ++i) {
        if (schema.attributes[i].name != kContextAttrs[i].name) return false;
        if (schema.attributes[i].kind != kContextAttrs[i].kind) return false;
    }
    return true;
}

std::vector<dtree::Cell> row_cells(const context::AttributeRow& row,
                                   const dtree::AttributeSchema& schema) {
    if (!is_context_schema(schema))
        throw UsageError("schema does not match the context attribute layout");
    auto categorical = [&](int attr, const std::string& value) {
        int idx = schema.value_index(attr, value);
        return idx < 0 ? dtree::Cell::missing() : dtree::Cell::category(idx);
    };
    return {
        categorical(0, row.zone_id),
        categorical(1, row.event_category),
        dtree::Cell::number(static_cast<double>(row.call_count)),
        categorical(3, row.last_call_category),
        dtree::Cell::number(row.battery_pct),
        categorical(5, row.crisis ? "YES" : "NO"),
    };
}

SettingsProfile decide_profile(const std::array<dtree::DecisionTree, kSettingCount>& trees,
                               const context::AttributeRow& row) {
    SettingsProfile profile;
    for (std::size_t i = 0; i < kSettingCount; ++i) {
        const SettingName setting = kSettingOrder[i];
        const auto& tree = trees[i];
        const auto& domain = setting_label_domain(setting);
        const auto& actual = tree.schema.label_domain;
        if (!std::is_permutation(actual.begin(), actual.end(), domain.begin(), domain.end()))
            throw UsageError(std::string("label domain mismatch for ") + setting_name(setting));
        auto result = dtree::classify(tree, row_cells(row, tree.schema));
        set_setting_label(profile, setting,
                          tree.schema.label_domain[static_cast<std::size_t>(result.label)]);
    }
    return profile;
}

SettingsProfile apply_battery_override(SettingsProfile profile,
                                       const context::BatteryState& battery,
                                       const CriticalServicesRepository& critical) {
    if (!battery.crisis) return profile;
    if (!critical.is_protected(SettingName::Bluetooth)) profile.bluetooth = Toggle::Off;
    if (!critical.is_protected(SettingName::Wifi)) profile.wifi = Toggle::Off;
    if (!critical.is_protected(SettingName::Gps)) profile.gps = Toggle::Off;
    if (!critical.is_protected(SettingName::Brightness))
        profile.brightness = std::min(profile.brightness, Level::Pct25);
    return profile;
}

ProfileDiff diff_profiles(const SettingsProfile& a, const SettingsProfile& b) {
    ProfileDiff diff;
    for (SettingName s : kSettingOrder) {
        if (setting_label(a, s) == setting_label(b, s))
            ++diff.match_count;
        else
            diff.mismatched.emplace_back(setting_name(s));
    }
    return diff;
}

}  // namespace cosmos::settings
