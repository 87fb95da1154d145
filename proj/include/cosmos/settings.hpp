#pragma once

#include <array>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cosmos/context.hpp"
#include "cosmos/dtree.hpp"

namespace cosmos::settings {

enum class Toggle { On, Off };

// The binned percentage levels used for brightness and ring volume, so that
// both settings are discrete class labels.
enum class Level : int { Pct0 = 0, Pct25 = 25, Pct50 = 50, Pct75 = 75, Pct100 = 100 };

enum class SettingName { Bluetooth, Gps, Wifi, Brightness, RingVolume, Vibration };

inline constexpr std::size_t kSettingCount = 6;
inline constexpr std::array<SettingName, kSettingCount> kSettingOrder = {
    SettingName::Bluetooth,  SettingName::Gps,        SettingName::Wifi,
    SettingName::Brightness, SettingName::RingVolume, SettingName::Vibration};

// The six device settings the system manages.
struct SettingsProfile {
    Toggle bluetooth = Toggle::Off;
    Toggle gps = Toggle::Off;
    Toggle wifi = Toggle::Off;
    Level brightness = Level::Pct50;
    Level ring_volume = Level::Pct50;
    Toggle vibration = Toggle::Off;

    bool operator==(const SettingsProfile&) const = default;
};

// Settings the low-battery override must leave untouched.
struct CriticalServicesRepository {
    std::set<SettingName> protected_settings;

    bool is_protected(SettingName s) const { return protected_settings.contains(s); }

    // One setting name per line, `#` comments.
    static CriticalServicesRepository load(std::istream& in);
    static CriticalServicesRepository load_file(const std::string& path);

    // Shipped default: ring volume and vibration stay user-controlled.
    static CriticalServicesRepository defaults();
};

struct ProfileDiff {
    int match_count = 0;
    std::vector<std::string> mismatched;
};

const char* setting_name(SettingName s);
SettingName parse_setting_name(std::string_view name);  // throws UsageError

std::string toggle_label(Toggle t);                  // "ON" / "OFF"
std::string level_label(Level l);                    // "0".."100"
Toggle parse_toggle_label(std::string_view label);   // throws UsageError
Level parse_level_label(std::string_view label);     // throws UsageError

// Label domains the six per-setting classifiers must use, in kSettingOrder.
const std::vector<std::string>& setting_label_domain(SettingName s);

std::string setting_label(const SettingsProfile& p, SettingName s);
void set_setting_label(SettingsProfile& p, SettingName s, std::string_view label);

// Compact single-token form `B1;P0;W1;Y50;R25;V1` without separators:
// B1P0W1Y50R25V1. Used in traces and reports where commas are taken.
std::string profile_token(const SettingsProfile& p);
SettingsProfile parse_profile_token(std::string_view token);  // throws UsageError

// Fixed order of the standard context attributes; the schema every
// per-setting classifier is trained against.
bool is_context_schema(const dtree::AttributeSchema& schema);

// Converts an attribute row to classifier cells against a context schema.
// Categorical values absent from the schema's declared sets become missing
// cells (the classifier then follows its majority branches).
std::vector<dtree::Cell> row_cells(const context::AttributeRow& row,
                                   const dtree::AttributeSchema& schema);

// Classifies the row with each per-setting tree (kSettingOrder) and collects
// the six labels into a profile. Throws UsageError when a tree's schema or
// label domain does not match its setting.
SettingsProfile decide_profile(const std::array<dtree::DecisionTree, kSettingCount>& trees,
                               const context::AttributeRow& row);

// In a power crisis, switches bluetooth, wifi and gps off and caps brightness
// at 25%, leaving protected settings alone. Ring volume and vibration are
// never touched. Identity when there is no crisis.
SettingsProfile apply_battery_override(SettingsProfile profile,
                                       const context::BatteryState& battery,
                                       const CriticalServicesRepository& critical);

ProfileDiff diff_profiles(const SettingsProfile& a, const SettingsProfile& b);

}  // namespace cosmos::settings
