#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "cosmos/context.hpp"
#include "cosmos/settings.hpp"

namespace cosmos::protocol {

enum class DocStatus { Trained, Training };

// Placeholder profile carried by TRAINING-status documents; clients must
// ignore it.
settings::SettingsProfile sentinel_profile();

// The settings answer the server returns for one request.
struct SettingsDocument {
    settings::SettingsProfile profile;
    DocStatus status = DocStatus::Training;
    std::uint64_t sequence = 0;

    static SettingsDocument trained(settings::SettingsProfile profile, std::uint64_t sequence);
    static SettingsDocument training(std::uint64_t sequence);

    bool operator==(const SettingsDocument&) const = default;
};

// One client message: the featurized context, optionally labeled with the
// settings the user actually had (the training signal).
struct ContextUpload {
    context::AttributeRow row;
    std::optional<settings::SettingsProfile> observed_profile;
    std::string client_id;
    context::TimeInstant at;

    bool operator==(const ContextUpload&) const = default;
};

// Canonical settings document, UTF-8 + LF + two-space indent, elements in the
// fixed order bluetooth, gps, wifi, brightness, ringvolume, vibration:
//
//   <cosmos version="1" seq="7" status="trained">
//     <settings>
//       <bluetooth>on</bluetooth>
//       ...
//     </settings>
//   </cosmos>
std::string build_settings_xml(const SettingsDocument& doc);

// Strict inverse: accepts whitespace variations of the canonical schema,
// rejects unknown/missing/reordered elements (SCHEMA_VIOLATION), out-of-domain
// values (VALUE_ERROR) and structural garbage (MALFORMED).
SettingsDocument parse_settings_xml(std::string_view bytes);

// `COSMOS1;S=<T|G>;Q=<seq>;B<0|1>;P<0|1>;W<0|1>;Y<bin>;R<bin>;V<0|1>`,
// always printable ASCII and at most 160 characters.
std::string encode_sms(const SettingsDocument& doc);
SettingsDocument decode_sms(std::string_view text);

// Canonical context upload: root <context version="1" client=".." at="..">
// with zone, event, callcount, callcat, battery, crisis and an optional
// observed element holding the six settings.
std::string build_context_xml(const ContextUpload& upload);
ContextUpload parse_context_xml(std::string_view bytes);

inline constexpr std::size_t kSmsMaxChars = 160;

}  // namespace cosmos::protocol
