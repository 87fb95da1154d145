#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cctype>
#include <string>
#include <vector>

#include "cosmos/context.hpp"
#include "cosmos/errors.hpp"
#include "cosmos/protocol.hpp"
#include "cosmos/rng.hpp"
#include "cosmos/settings.hpp"
#include "cosmos/strings.hpp"
#include "test_support.hpp"

using namespace cosmos;
using namespace cosmos::protocol;
using cosmos::settings::Level;
using cosmos::settings::SettingsProfile;
using cosmos::settings::Toggle;
using testsupport::parse_kind;

namespace {

constexpr std::array<Level, 5> kLevels = {Level::Pct0, Level::Pct25, Level::Pct50, Level::Pct75,
                                          Level::Pct100};

SettingsProfile random_profile(Rng& rng) {
    auto toggle = [&] { return rng.chance(0.5) ? Toggle::On : Toggle::Off; };
    auto level = [&] { return kLevels[rng.index(kLevels.size())]; };
    SettingsProfile p;
    p.bluetooth = toggle();
    p.gps = toggle();
    p.wifi = toggle();
    p.brightness = level();
    p.ring_volume = level();
    p.vibration = toggle();
    return p;
}

SettingsDocument random_document(Rng& rng) {
    const std::uint64_t seq = rng.chance(0.1) ? rng.next() : rng.index(100000);
    if (rng.chance(0.3)) return SettingsDocument::training(seq);
    return SettingsDocument::trained(random_profile(rng), seq);
}

ContextUpload random_upload(Rng& rng) {
    static const std::vector<std::string> kZones = {"home", "office", "UNKNOWN", "R&D <lab>",
                                                    "cafe \"north\"", "zone'9"};
    static const std::vector<std::string> kCategories = {"NONE", "MEETING", "WORK", "FAMILY",
                                                         "a&b", "x<y>z"};
    static const std::vector<std::string> kClients = {"phone-1", "sim", "unit&test"};
    ContextUpload u;
    u.client_id = kClients[rng.index(kClients.size())];
    u.at = context::TimeInstant{static_cast<std::int64_t>(rng.index(2000000000))};
    u.row.zone_id = kZones[rng.index(kZones.size())];
    u.row.event_category = kCategories[rng.index(kCategories.size())];
    u.row.call_count = static_cast<int>(rng.index(50));
    u.row.last_call_category = kCategories[rng.index(kCategories.size())];
    u.row.battery_pct = static_cast<double>(rng.index(1001)) / 10.0;
    u.row.crisis = rng.chance(0.2);
    if (rng.chance(0.7)) u.observed_profile = random_profile(rng);
    return u;
}

const SettingsProfile kSampleProfile{Toggle::On, Toggle::Off, Toggle::On, Level::Pct50,
                                     Level::Pct25, Toggle::On};

const char* kCanonicalSettings =
    "<cosmos version=\"1\" seq=\"7\" status=\"trained\">\n"
    "  <settings>\n"
    "    <bluetooth>on</bluetooth>\n"
    "    <gps>off</gps>\n"
    "    <wifi>on</wifi>\n"
    "    <brightness>50</brightness>\n"
    "    <ringvolume>25</ringvolume>\n"
    "    <vibration>on</vibration>\n"
    "  </settings>\n"
    "</cosmos>\n";

}  // namespace

TEST_CASE("training documents carry the sentinel profile") {
    auto doc = SettingsDocument::training(3);
    CHECK(doc.status == DocStatus::Training);
    CHECK(doc.sequence == 3);
    CHECK(doc.profile == sentinel_profile());

    auto trained = SettingsDocument::trained(kSampleProfile, 9);
    CHECK(trained.status == DocStatus::Trained);
    CHECK(trained.profile == kSampleProfile);
}

TEST_CASE("build_settings_xml emits the canonical byte form") {
    CHECK(build_settings_xml(SettingsDocument::trained(kSampleProfile, 7)) ==
          kCanonicalSettings);
}

TEST_CASE("parse_settings_xml inverts the builder") {
    auto doc = SettingsDocument::trained(kSampleProfile, 7);
    CHECK(parse_settings_xml(build_settings_xml(doc)) == doc);

    auto training = SettingsDocument::training(0);
    CHECK(parse_settings_xml(build_settings_xml(training)) == training);
}

TEST_CASE("settings XML and SMS round trip random documents byte for byte") {
    Rng rng(1001);
    for (int iter = 0; iter < 1000; ++iter) {
        auto doc = random_document(rng);
        auto xml = build_settings_xml(doc);
        auto from_xml = parse_settings_xml(xml);
        CHECK(from_xml == doc);
        CHECK(build_settings_xml(from_xml) == xml);

        auto sms = encode_sms(doc);
        auto from_sms = decode_sms(sms);
        CHECK(from_sms == doc);
        CHECK(encode_sms(from_sms) == sms);
        CHECK(sms.size() <= kSmsMaxChars);
    }
}

TEST_CASE("parse_settings_xml accepts whitespace variations") {
    auto doc = SettingsDocument::trained(kSampleProfile, 7);
    CHECK(parse_settings_xml("<cosmos version=\"1\" seq=\"7\" status=\"trained\">"
                             "<settings><bluetooth>on</bluetooth><gps>off</gps><wifi>on</wifi>"
                             "<brightness>50</brightness><ringvolume>25</ringvolume>"
                             "<vibration>on</vibration></settings></cosmos>") == doc);
    CHECK(parse_settings_xml("\n\n  <cosmos version=\"1\" seq=\"7\" status=\"trained\">\n\n"
                             "    <settings>\n      <bluetooth>\n on \n</bluetooth>\n"
                             "      <gps>off</gps><wifi>on</wifi>\n"
                             "      <brightness>50</brightness>\n"
                             "      <ringvolume>25</ringvolume>\n"
                             "      <vibration>on</vibration>\n"
                             "    </settings>  \n"
                             "  </cosmos>\n\n") == doc);
}

TEST_CASE("settings XML errors carry the documented kinds") {
    using cosmos::ParseErrorKind;
    auto parse = [](std::string text) { parse_settings_xml(text); };
    auto canned = [](std::string_view from, std::string_view to) {
        std::string text = kCanonicalSettings;
        auto pos = text.find(from);
        REQUIRE(pos != std::string::npos);
        text.replace(pos, from.size(), to);
        return text;
    };

    CHECK(parse_kind([&] { parse("hello"); }) == ParseErrorKind::Malformed);
    CHECK(parse_kind([&] { parse(""); }) == ParseErrorKind::Malformed);
    CHECK(parse_kind([&] { parse(std::string(kCanonicalSettings) + "junk"); }) ==
          ParseErrorKind::Malformed);
    CHECK(parse_kind([&] { parse(canned("</cosmos>", "")); }) == ParseErrorKind::Malformed);

    // wrong root, wrong attributes, reordered or missing elements
    CHECK(parse_kind([&] { parse(canned("cosmos version", "config version")); }) ==
          ParseErrorKind::SchemaViolation);
    CHECK(parse_kind([&] {
              parse("<cosmos seq=\"7\" version=\"1\" status=\"trained\"><settings>"
                    "<bluetooth>on</bluetooth><gps>off</gps><wifi>on</wifi>"
                    "<brightness>50</brightness><ringvolume>25</ringvolume>"
                    "<vibration>on</vibration></settings></cosmos>");
          }) == ParseErrorKind::SchemaViolation);
    CHECK(parse_kind([&] {
              parse("<cosmos version=\"1\" seq=\"7\"><settings>"
                    "<bluetooth>on</bluetooth><gps>off</gps><wifi>on</wifi>"
                    "<brightness>50</brightness><ringvolume>25</ringvolume>"
                    "<vibration>on</vibration></settings></cosmos>");
          }) == ParseErrorKind::SchemaViolation);
    CHECK(parse_kind([&] { parse(canned("<gps>off</gps>\n    <wifi>on</wifi>",
                                        "<wifi>on</wifi>\n    <gps>off</gps>")); }) ==
          ParseErrorKind::SchemaViolation);
    CHECK(parse_kind([&] { parse(canned("    <wifi>on</wifi>\n", "")); }) ==
          ParseErrorKind::SchemaViolation);
    CHECK(parse_kind([&] {
              parse(canned("  </settings>", "    <extra>1</extra>\n  </settings>"));
          }) == ParseErrorKind::SchemaViolation);

    // out-of-domain values
    CHECK(parse_kind([&] { parse(canned("version=\"1\"", "version=\"2\"")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse(canned("status=\"trained\"", "status=\"done\"")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse(canned("seq=\"7\"", "seq=\"-7\"")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse(canned("seq=\"7\"", "seq=\"7x\"")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse(canned(">50</brightness>", ">30</brightness>")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse(canned(">on</bluetooth>", ">ON</bluetooth>")); }) ==
          ParseErrorKind::ValueError);
}

TEST_CASE("a training settings document must stay at the sentinel profile") {
    auto training = build_settings_xml(SettingsDocument::training(4));
    CHECK(parse_settings_xml(training).status == DocStatus::Training);

    std::string tampered = training;
    auto pos = tampered.find("<brightness>50<");
    REQUIRE(pos != std::string::npos);
    tampered.replace(pos, 15, "<brightness>75<");
    CHECK(parse_kind([&] { parse_settings_xml(tampered); }) ==
          cosmos::ParseErrorKind::ValueError);
}

TEST_CASE("two documents differing in one setting differ in exactly one XML line") {
    auto a = SettingsDocument::trained(kSampleProfile, 7);
    auto b = a;
    b.profile.wifi = Toggle::Off;
    auto lines_a = split(build_settings_xml(a), '\n');
    auto lines_b = split(build_settings_xml(b), '\n');
    REQUIRE(lines_a.size() == lines_b.size());
    int differing = 0;
    for (std::size_t i = 0; i < lines_a.size(); ++i)
        if (lines_a[i] != lines_b[i]) ++differing;
    CHECK(differing == 1);
}

TEST_CASE("encode_sms emits the documented field layout") {
    CHECK(encode_sms(SettingsDocument::trained(kSampleProfile, 7)) ==
          "COSMOS1;S=T;Q=7;B1;P0;W1;Y50;R25;V1");
    CHECK(encode_sms(SettingsDocument::training(2)) ==
          "COSMOS1;S=G;Q=2;B0;P0;W1;Y50;R50;V1");
}

TEST_CASE("SMS payloads stay printable ASCII and inside 160 characters") {
    SettingsProfile widest{Toggle::On, Toggle::On, Toggle::On, Level::Pct100, Level::Pct100,
                           Toggle::On};
    auto sms = encode_sms(SettingsDocument::trained(widest, ~0ULL));
    CHECK(sms.size() <= kSmsMaxChars);
    for (char c : sms) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == ';' || c == '=';
        CHECK(ok);
    }
}

TEST_CASE("SMS decode errors carry the documented kinds") {
    using cosmos::ParseErrorKind;
    CHECK(parse_kind([] { decode_sms(""); }) == ParseErrorKind::Malformed);
    CHECK(parse_kind([] { decode_sms("COSMOS1;S=T;Q=7;B1;P0;W1;Y50;R25"); }) ==
          ParseErrorKind::Malformed);  // missing V field
    CHECK(parse_kind([] { decode_sms("COSMOS2;S=T;Q=7;B1;P0;W1;Y50;R25;V1"); }) ==
          ParseErrorKind::Malformed);
    CHECK(parse_kind([] { decode_sms("COSMOS1;T;Q=7;B1;P0;W1;Y50;R25;V1"); }) ==
          ParseErrorKind::Malformed);
    CHECK(parse_kind([] { decode_sms("COSMOS1;S=T;Q=7;B1;W0;P1;Y50;R25;V1"); }) ==
          ParseErrorKind::Malformed);  // keys out of order
    CHECK(parse_kind([] { decode_sms("COSMOS1;S=X;Q=7;B1;P0;W1;Y50;R25;V1"); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([] { decode_sms("COSMOS1;S=T;Q=x;B1;P0;W1;Y50;R25;V1"); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([] { decode_sms("COSMOS1;S=T;Q=7;B2;P0;W1;Y50;R25;V1"); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([] { decode_sms("COSMOS1;S=T;Q=7;B1;P0;W1;Y33;R25;V1"); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([] { decode_sms("COSMOS1;S=G;Q=7;B1;P0;W1;Y50;R50;V1"); }) ==
          ParseErrorKind::ValueError);  // training without the sentinel
}

TEST_CASE("build_context_xml emits the canonical upload form") {
    ContextUpload u;
    u.client_id = "phone-1";
    u.at = context::TimeInstant{1700000000};
    u.row.zone_id = "office";
    u.row.event_category = "MEETING";
    u.row.call_count = 2;
    u.row.last_call_category = "WORK";
    u.row.battery_pct = 55.5;
    u.row.crisis = false;
    u.observed_profile = SettingsProfile{Toggle::Off, Toggle::Off, Toggle::On, Level::Pct25,
                                         Level::Pct0, Toggle::On};

    CHECK(build_context_xml(u) ==
          "<context version=\"1\" client=\"phone-1\" at=\"1700000000\">\n"
          "  <zone>office</zone>\n"
          "  <event>MEETING</event>\n"
          "  <callcount>2</callcount>\n"
          "  <callcat>WORK</callcat>\n"
          "  <battery>55.5</battery>\n"
          "  <crisis>no</crisis>\n"
          "  <observed>\n"
          "    <bluetooth>off</bluetooth>\n"
          "    <gps>off</gps>\n"
          "    <wifi>on</wifi>\n"
          "    <brightness>25</brightness>\n"
          "    <ringvolume>0</ringvolume>\n"
          "    <vibration>on</vibration>\n"
          "  </observed>\n"
          "</context>\n");

    u.observed_profile.reset();
    auto bare = build_context_xml(u);
    CHECK(bare.find("<observed>") == std::string::npos);
    CHECK_FALSE(parse_context_xml(bare).observed_profile.has_value());
}

TEST_CASE("context XML round trips random uploads byte for byte") {
    Rng rng(2002);
    for (int iter = 0; iter < 1000; ++iter) {
        auto upload = random_upload(rng);
        auto xml = build_context_xml(upload);
        auto back = parse_context_xml(xml);
        CHECK(back == upload);
        CHECK(build_context_xml(back) == xml);
    }
}

TEST_CASE("special characters are escaped on build and unescaped on parse") {
    ContextUpload u;
    u.client_id = "a&b";
    u.at = context::TimeInstant{5};
    u.row.zone_id = "R&D <lab> \"x\"";
    u.row.event_category = "NONE";
    u.row.call_count = 0;
    u.row.last_call_category = "NONE";
    u.row.battery_pct = 50.0;

    auto xml = build_context_xml(u);
    CHECK(xml.find("R&amp;D &lt;lab&gt; &quot;x&quot;") != std::string::npos);
    CHECK(xml.find("client=\"a&amp;b\"") != std::string::npos);
    CHECK(parse_context_xml(xml) == u);

    // &apos; is accepted on parse even though the builder never emits it
    auto apos = parse_context_xml(
        "<context version=\"1\" client=\"c\" at=\"1\">"
        "<zone>it&apos;s</zone><event>NONE</event><callcount>0</callcount>"
        "<callcat>NONE</callcat><battery>50</battery><crisis>no</crisis></context>");
    CHECK(apos.row.zone_id == "it's");
}

TEST_CASE("context XML errors carry the documented kinds") {
    using cosmos::ParseErrorKind;
    auto base = [](std::string_view zone, std::string_view battery, std::string_view crisis,
                   std::string_view client, std::string_view at) {
        return "<context version=\"1\" client=\"" + std::string(client) + "\" at=\"" +
               std::string(at) + "\">\n  <zone>" + std::string(zone) +
               "</zone>\n  <event>NONE</event>\n  <callcount>0</callcount>\n"
               "  <callcat>NONE</callcat>\n  <battery>" +
               std::string(battery) + "</battery>\n  <crisis>" + std::string(crisis) +
               "</crisis>\n</context>\n";
    };
    auto ok = base("home", "50", "no", "c", "1");
    CHECK(parse_context_xml(ok).row.zone_id == "home");

    CHECK(parse_kind([&] { parse_context_xml("<context version=\"1\">"); }) ==
          ParseErrorKind::SchemaViolation);
    CHECK(parse_kind([&] { parse_context_xml(base("home", "150", "no", "c", "1")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse_context_xml(base("home", "x", "no", "c", "1")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse_context_xml(base("home", "50", "maybe", "c", "1")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse_context_xml(base("home", "50", "no", "", "1")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse_context_xml(base("home", "50", "no", "c", "1.5")); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { parse_context_xml(ok + "junk"); }) == ParseErrorKind::Malformed);

    // reordered and duplicated elements
    std::string reordered = ok;
    auto zpos = reordered.find("  <zone>home</zone>\n");
    reordered.erase(zpos, std::string("  <zone>home</zone>\n").size());
    reordered.insert(reordered.find("  <callcount>"), "  <zone>home</zone>\n");
    CHECK(parse_kind([&] { parse_context_xml(reordered); }) ==
          ParseErrorKind::SchemaViolation);

    std::string duplicated = ok;
    duplicated.insert(duplicated.find("</context>"),
                      "  <observed>\n    <bluetooth>off</bluetooth>\n    <gps>off</gps>\n"
                      "    <wifi>on</wifi>\n    <brightness>50</brightness>\n"
                      "    <ringvolume>50</ringvolume>\n    <vibration>on</vibration>\n"
                      "    <extra>1</extra>\n  </observed>\n");
    CHECK(parse_kind([&] { parse_context_xml(duplicated); }) ==
          ParseErrorKind::SchemaViolation);
}
