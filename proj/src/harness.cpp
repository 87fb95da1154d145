#include "cosmos/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "cosmos/errors.hpp"
#include "cosmos/protocol.hpp"
#include "cosmos/strings.hpp"

namespace cosmos::harness {

namespace {

[[noreturn]] void file_error(ParseErrorKind kind, std::size_t line_no, const std::string& what) {
    throw ParseError(kind, "line " + std::to_string(line_no) + ": " + what);
}

settings::SettingsProfile parse_profile_csv(std::string_view csv, std::size_t line_no) {
    auto labels = split(csv, ',');
    if (labels.size() != settings::kSettingCount)
        file_error(ParseErrorKind::SchemaViolation, line_no,
                   "expected 6 profile fields, got " + std::to_string(labels.size()));
    settings::SettingsProfile p;
    try {
        for (std::size_t i = 0; i < settings::kSettingCount; ++i)
            settings::set_setting_label(p, settings::kSettingOrder[i], trim(labels[i]));
    } catch (const UsageError& e) {
        file_error(ParseErrorKind::ValueError, line_no, e.what());
    }
    return p;
}

context::TimeInstant parse_epoch(std::string_view text, std::size_t line_no) {
    auto v = parse_int(text);
    if (!v) file_error(ParseErrorKind::ValueError, line_no, "bad epoch '" + std::string(text) + "'");
    return context::TimeInstant{*v};
}

// `<cat>@<epoch>`; the category may not be empty.
std::pair<std::string, context::TimeInstant> parse_timed_category(std::string_view entry,
                                                                  std::size_t line_no) {
    auto at = entry.rfind('@');
    if (at == std::string_view::npos || at == 0)
        file_error(ParseErrorKind::SchemaViolation, line_no,
                   "expected <category>@<epoch>, got '" + std::string(entry) + "'");
    return {std::string(trim(entry.substr(0, at))), parse_epoch(entry.substr(at + 1), line_no)};
}

context::LocationReading parse_location(std::string_view field, context::TimeInstant at,
                                        std::size_t line_no) {
    try {
        if (starts_with(field, "wifi:")) {
            auto ap = trim(field.substr(5));
            return context::LocationReading::wifi(std::string(ap), 0.0, at);
        }
        auto parts = split(field, ',');
        if (parts.size() != 2)
            file_error(ParseErrorKind::SchemaViolation, line_no,
                       "location must be <lat>,<lon> or wifi:<ap>");
        auto lat = parse_double(parts[0]);
        auto lon = parse_double(parts[1]);
        if (!lat || !lon)
            file_error(ParseErrorKind::ValueError, line_no, "bad coordinates in location field");
        return context::LocationReading::gps(*lat, *lon, 0.0, at);
    } catch (const DomainError& e) {
        file_error(ParseErrorKind::ValueError, line_no, e.what());
    } catch (const UsageError& e) {
        file_error(ParseErrorKind::ValueError, line_no, e.what());
    }
}

Tick parse_tick_line(std::span<const std::string> fields, std::size_t line_no) {
    // fields: tick;<epoch>;<location>;<events>;<calls>;<battery>;<truth>
    if (fields.size() != 7)
        file_error(ParseErrorKind::SchemaViolation, line_no,
                   "expected 7 tick fields, got " + std::to_string(fields.size()));
    Tick tick;
    tick.time = parse_epoch(trim(fields[1]), line_no);
    tick.location = parse_location(trim(fields[2]), tick.time, line_no);

    auto events_field = trim(fields[3]);
    if (!events_field.empty()) {
        for (const auto& entry : split(events_field, ',')) {
            auto [category, at] = parse_timed_category(trim(entry), line_no);
            tick.events.push_back(context::SchedulerEvent{category, "", at});
        }
    }

    auto calls_field = trim(fields[4]);
    if (!calls_field.empty()) {
        auto tokens = split(calls_field, ',');
        if (tokens.size() % 2 != 0)
            file_error(ParseErrorKind::SchemaViolation, line_no,
                       "calls must be <dir>,<cat>@<epoch> pairs");
        for (std::size_t i = 0; i < tokens.size(); i += 2) {
            auto dir = trim(tokens[i]);
            context::CallDirection direction;
            if (dir == "in") direction = context::CallDirection::Incoming;
            else if (dir == "out") direction = context::CallDirection::Outgoing;
            else
                file_error(ParseErrorKind::ValueError, line_no,
                           "call direction must be in or out, got '" + std::string(dir) + "'");
            auto [category, at] = parse_timed_category(trim(tokens[i + 1]), line_no);
            tick.calls.push_back(context::CallRecord{direction, "", category, at, 0});
        }
    }

    auto battery = parse_double(trim(fields[5]));
    if (!battery || !(*battery >= 0.0 && *battery <= 100.0))
        file_error(ParseErrorKind::ValueError, line_no,
                   "battery must be in [0, 100], got '" + fields[5] + "'");
    tick.battery_pct = *battery;
    tick.ground_truth = parse_profile_csv(trim(fields[6]), line_no);
    return tick;
}

}  // namespace

void ScenarioScript::validate() const {
    for (std::size_t i = 1; i < ticks.size(); ++i)
        if (!(ticks[i - 1].time < ticks[i].time))
            throw UsageError("tick times must be strictly increasing (tick " + std::to_string(i) +
                             ")");
    for (const auto& tick : ticks)
        if (!(tick.battery_pct >= 0.0 && tick.battery_pct <= 100.0))
            throw UsageError("tick battery level outside [0, 100]");
}

ScenarioScript load_scenario(std::istream& in) {
    ScenarioScript script;
    std::string zone_lines;
    bool seed_seen = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto sep = body.find(';');
        auto directive = sep == std::string_view::npos ? body : body.substr(0, sep);
        auto payload = sep == std::string_view::npos ? std::string_view{} : body.substr(sep + 1);
        if (directive == "seed") {
            if (seed_seen)
                file_error(ParseErrorKind::SchemaViolation, line_no, "duplicate seed directive");
            seed_seen = true;
            auto seed = parse_uint(payload);
            if (!seed) file_error(ParseErrorKind::ValueError, line_no, "bad seed value");
            script.seed = *seed;
        } else if (directive == "zone") {
            zone_lines.append(payload);
            zone_lines += '\n';
        } else if (directive == "tick") {
            script.ticks.push_back(parse_tick_line(split(body, ';'), line_no));
        } else {
            file_error(ParseErrorKind::SchemaViolation, line_no,
                       "unknown directive '" + std::string(directive) + "'");
        }
    }
    std::istringstream zones(zone_lines);
    script.zones = context::load_zones(zones);
    try {
        script.validate();
    } catch (const UsageError& e) {
        throw ParseError(ParseErrorKind::ValueError, e.what());
    }
    return script;
}

ScenarioScript load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open scenario: " + path);
    return load_scenario(in);
}

bool UserCondition::matches(const context::AttributeRow& row) const {
    switch (kind) {
        case Kind::Zone: return row.zone_id == text;
        case Kind::Event: return row.event_category == text;
        case Kind::CallCat: return row.last_call_category == text;
        case Kind::Crisis: return row.crisis == flag;
        case Kind::BatteryLe: return row.battery_pct <= number;
        case Kind::BatteryGt: return row.battery_pct > number;
        case Kind::CallsGe: return row.call_count >= number;
        case Kind::CallsLt: return row.call_count < number;
    }
    return false;
}

bool UserRule::matches(const context::AttributeRow& row) const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [&](const UserCondition& c) { return c.matches(row); });
}

settings::SettingsProfile UserModel::decide(const context::AttributeRow& row) const {
    for (const auto& rule : rules)
        if (rule.matches(row)) return rule.profile;
    return default_profile;
}

settings::SettingsProfile UserModel::respond(const context::AttributeRow& row, Rng& rng) const {
    settings::SettingsProfile p = decide(row);
    constexpr std::array<settings::Level, 5> kLevels = {
        settings::Level::Pct0, settings::Level::Pct25, settings::Level::Pct50,
        settings::Level::Pct75, settings::Level::Pct100};
    auto flip_toggle = [](settings::Toggle t) {
        return t == settings::Toggle::On ? settings::Toggle::Off : settings::Toggle::On;
    };
    auto flip_level = [&](settings::Level l) {
        std::size_t current = std::find(kLevels.begin(), kLevels.end(), l) - kLevels.begin();
        std::size_t pick = rng.index(kLevels.size() - 1);
        if (pick >= current) ++pick;
        return kLevels[pick];
    };
    if (rng.chance(noise_rate)) p.bluetooth = flip_toggle(p.bluetooth);
    if (rng.chance(noise_rate)) p.gps = flip_toggle(p.gps);
    if (rng.chance(noise_rate)) p.wifi = flip_toggle(p.wifi);
    if (rng.chance(noise_rate)) p.brightness = flip_level(p.brightness);
    if (rng.chance(noise_rate)) p.ring_volume = flip_level(p.ring_volume);
    if (rng.chance(noise_rate)) p.vibration = flip_toggle(p.vibration);
    return p;
}

namespace {

UserCondition parse_condition(std::string_view text, std::size_t line_no) {
    UserCondition c;
    auto number_after = [&](std::string_view prefix) {
        auto v = parse_double(text.substr(prefix.size()));
        if (!v) file_error(ParseErrorKind::ValueError, line_no,
                           "bad number in condition '" + std::string(text) + "'");
        return *v;
    };
    if (starts_with(text, "zone=")) {
        c.kind = UserCondition::Kind::Zone;
        c.text = std::string(text.substr(5));
    } else if (starts_with(text, "event=")) {
        c.kind = UserCondition::Kind::Event;
        c.text = std::string(text.substr(6));
    } else if (starts_with(text, "callcat=")) {
        c.kind = UserCondition::Kind::CallCat;
        c.text = std::string(text.substr(8));
    } else if (starts_with(text, "crisis=")) {
        c.kind = UserCondition::Kind::Crisis;
        auto value = text.substr(7);
        if (value == "yes") c.flag = true;
        else if (value == "no") c.flag = false;
        else file_error(ParseErrorKind::ValueError, line_no, "crisis= takes yes or no");
    } else if (starts_with(text, "battery<=")) {
        c.kind = UserCondition::Kind::BatteryLe;
        c.number = number_after("battery<=");
    } else if (starts_with(text, "battery>")) {
        c.kind = UserCondition::Kind::BatteryGt;
        c.number = number_after("battery>");
    } else if (starts_with(text, "calls>=")) {
        c.kind = UserCondition::Kind::CallsGe;
        c.number = number_after("calls>=");
    } else if (starts_with(text, "calls<")) {
        c.kind = UserCondition::Kind::CallsLt;
        c.number = number_after("calls<");
    } else {
        file_error(ParseErrorKind::SchemaViolation, line_no,
                   "unknown condition '" + std::string(text) + "'");
    }
    if ((c.kind == UserCondition::Kind::Zone || c.kind == UserCondition::Kind::Event ||
         c.kind == UserCondition::Kind::CallCat) &&
        c.text.empty())
        file_error(ParseErrorKind::ValueError, line_no, "empty value in condition");
    return c;
}

}  // namespace

UserModel load_user_model(std::istream& in) {
    UserModel model;
    bool noise_seen = false;
    bool default_seen = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto fields = split(body, ';');
        if (fields[0] == "noise") {
            if (noise_seen || fields.size() != 2)
                file_error(ParseErrorKind::SchemaViolation, line_no, "bad noise directive");
            noise_seen = true;
            auto rate = parse_double(fields[1]);
            if (!rate || !(*rate >= 0.0 && *rate < 1.0))
                file_error(ParseErrorKind::ValueError, line_no, "noise rate must be in [0, 1)");
            model.noise_rate = *rate;
        } else if (fields[0] == "default") {
            if (default_seen || fields.size() != 2)
                file_error(ParseErrorKind::SchemaViolation, line_no, "bad default directive");
            default_seen = true;
            model.default_profile = parse_profile_csv(fields[1], line_no);
        } else if (fields[0] == "rule") {
            if (fields.size() != 3)
                file_error(ParseErrorKind::SchemaViolation, line_no,
                           "rule takes <conditions>;<profile>");
            UserRule rule;
            for (const auto& cond : split(fields[1], '&'))
                rule.conditions.push_back(parse_condition(trim(cond), line_no));
            rule.profile = parse_profile_csv(fields[2], line_no);
            model.rules.push_back(std::move(rule));
        } else {
            file_error(ParseErrorKind::SchemaViolation, line_no,
                       "unknown directive '" + fields[0] + "'");
        }
    }
    return model;
}

UserModel load_user_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open user model: " + path);
    return load_user_model(in);
}

const char* relevance_name(Relevance r) {
    switch (r) {
        case Relevance::CompletelyRelevant: return "CR";
        case Relevance::PartiallyRelevant: return "PR";
        case Relevance::CompletelyIrrelevant: return "CIR";
    }
    return "?";
}

Relevance score_relevance(const settings::SettingsProfile& suggested,
                          const settings::SettingsProfile& truth) {
    int matches = settings::diff_profiles(suggested, truth).match_count;
    if (matches == 6) return Relevance::CompletelyRelevant;
    if (matches >= 4) return Relevance::PartiallyRelevant;
    return Relevance::CompletelyIrrelevant;
}

RelevanceTriple SessionScore::percentages() const {
    if (scored == 0) throw UsageError("no suggestions were scored in this session");
    auto pct = [this](std::size_t n) {
        return 100.0 * static_cast<double>(n) / static_cast<double>(scored);
    };
    return RelevanceTriple{pct(cr), pct(pr), pct(cir)};
}

RelevanceReport aggregate_relevance(std::span<const RelevanceTriple> sessions) {
    if (sessions.empty()) throw UsageError("no sessions to aggregate");
    RelevanceReport report;
    report.sessions.assign(sessions.begin(), sessions.end());
    for (const auto& s : sessions) {
        for (double pct : {s.crs_pct, s.prs_pct, s.cis_pct})
            if (!(pct >= 0.0 && pct <= 100.0))
                throw UsageError("session percentage outside [0, 100]");
        if (std::abs(s.crs_pct + s.prs_pct + s.cis_pct - 100.0) > 0.1)
            throw UsageError("session percentages do not sum to 100");
        report.mean_crs += s.crs_pct;
        report.mean_prs += s.prs_pct;
        report.mean_cis += s.cis_pct;
    }
    const auto n = static_cast<double>(sessions.size());
    report.mean_crs /= n;
    report.mean_prs /= n;
    report.mean_cis /= n;
    report.cumulative_relevant = report.mean_crs + report.mean_prs;
    return report;
}

BatteryReport aggregate_battery(std::span<const BatterySession> sessions) {
    if (sessions.empty()) throw UsageError("no sessions to aggregate");
    BatteryReport report;
    report.sessions.assign(sessions.begin(), sessions.end());
    for (const auto& s : sessions) {
        if (!(s.normal_hours > 0.0) || !(s.cosmos_hours > 0.0) ||
            !std::isfinite(s.normal_hours) || !std::isfinite(s.cosmos_hours))
            throw UsageError("session hours must be positive");
        report.mean_normal += s.normal_hours;
        report.mean_cosmos += s.cosmos_hours;
    }
    report.mean_normal /= static_cast<double>(sessions.size());
    report.mean_cosmos /= static_cast<double>(sessions.size());
    return report;
}

namespace {

// Shared shape of the two report fixtures: a header, then one row of
// `session,<numbers...>` per line.
std::vector<std::vector<double>> load_csv_columns(std::istream& in, std::string_view header,
                                                  std::size_t columns) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        if (!header_seen) {
            if (body != header)
                file_error(ParseErrorKind::SchemaViolation, line_no,
                           "expected header '" + std::string(header) + "'");
            header_seen = true;
            continue;
        }
        auto fields = split(body, ',');
        if (fields.size() != columns + 1)
            file_error(ParseErrorKind::SchemaViolation, line_no,
                       "expected " + std::to_string(columns + 1) + " columns");
        std::vector<double> row;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            auto v = parse_double(fields[i]);
            if (!v) file_error(ParseErrorKind::ValueError, line_no,
                               "bad number '" + fields[i] + "'");
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    if (!header_seen)
        throw ParseError(ParseErrorKind::SchemaViolation,
                         "missing header '" + std::string(header) + "'");
    return rows;
}

}  // namespace

std::vector<BatterySession> load_battery_csv(std::istream& in) {
    std::vector<BatterySession> sessions;
    for (const auto& row : load_csv_columns(in, "session,normal_hours,cosmos_hours", 2))
        sessions.push_back(BatterySession{row[0], row[1]});
    return sessions;
}

std::vector<BatterySession> load_battery_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open battery table: " + path);
    return load_battery_csv(in);
}

std::vector<RelevanceTriple> load_relevance_csv(std::istream& in) {
    std::vector<RelevanceTriple> sessions;
    for (const auto& row : load_csv_columns(in, "session,crs,prs,cis", 3))
        sessions.push_back(RelevanceTriple{row[0], row[1], row[2]});
    return sessions;
}

std::vector<RelevanceTriple> load_relevance_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open relevance table: " + path);
    return load_relevance_csv(in);
}

double DrainModel::drain_ma(const settings::SettingsProfile& p) const {
    double total = base_ma;
    if (p.bluetooth == settings::Toggle::On) total += bluetooth_ma;
    if (p.gps == settings::Toggle::On) total += gps_ma;
    if (p.wifi == settings::Toggle::On) total += wifi_ma;
    total += brightness_ma * static_cast<double>(static_cast<int>(p.brightness)) / 100.0;
    total += ring_ma * static_cast<double>(static_cast<int>(p.ring_volume)) / 100.0;
    if (p.vibration == settings::Toggle::On) total += vibration_ma;
    return total;
}

double simulate_battery_hours(std::span<const ProfileSpan> timeline, double capacity_mah,
                              const DrainModel& model) {
    if (!(capacity_mah > 0.0)) throw DomainError("capacity must be positive");
    if (!(model.base_ma > 0.0)) throw DomainError("base drain must be positive");
    double consumed = 0.0;
    double elapsed = 0.0;
    for (const auto& span : timeline) {
        if (span.hours < 0.0) throw UsageError("span duration must be non-negative");
        const double drain = model.drain_ma(span.profile);
        const double used = drain * span.hours;
        if (consumed + used >= capacity_mah) return elapsed + (capacity_mah - consumed) / drain;
        consumed += used;
        elapsed += span.hours;
    }
    return elapsed;
}

ScenarioResult run_scenario(const ScenarioScript& script, const UserModel& user,
                            const SimulationParams& params) {
    script.validate();
    if (!(user.noise_rate >= 0.0 && user.noise_rate < 1.0))
        throw UsageError("noise rate must be in [0, 1)");

    Rng rng(script.seed);
    server::ServerState state(params.server);
    context::TimeWindow window(params.window_seconds);

    ScenarioResult result;
    result.ticks = script.ticks.size();
    result.trace.reserve(script.ticks.size());

    std::size_t tick_no = 0;
    for (const Tick& tick : script.ticks) {
        ++tick_no;
        auto ctx = context::assemble_context(tick.location, tick.events, tick.calls,
                                             tick.battery_pct, params.battery_threshold_pct,
                                             tick.time, window);
        auto row = context::featurize(ctx, script.zones);
        auto truth = user.respond(row, rng);

        protocol::ContextUpload upload;
        upload.row = row;
        upload.observed_profile = truth;
        upload.client_id = params.client_id;
        upload.at = tick.time;
        auto doc = state.process_upload(upload);

        std::string grade = "-";
        std::string suggested = "-";
        if (doc.status == protocol::DocStatus::Trained) {
            auto relevance = score_relevance(doc.profile, truth);
            ++result.score.scored;
            switch (relevance) {
                case Relevance::CompletelyRelevant: ++result.score.cr; break;
                case Relevance::PartiallyRelevant: ++result.score.pr; break;
                case Relevance::CompletelyIrrelevant: ++result.score.cir; break;
            }
            grade = relevance_name(relevance);
            suggested = settings::profile_token(doc.profile);
        }

        std::string line = "tick=" + std::to_string(tick_no) +
                           " at=" + std::to_string(tick.time.seconds) + " zone=" + row.zone_id +
                           " event=" + row.event_category +
                           " callcount=" + std::to_string(row.call_count) +
                           " callcat=" + row.last_call_category +
                           " battery=" + format_double(row.battery_pct) +
                           " crisis=" + (row.crisis ? "yes" : "no") +
                           " truth=" + settings::profile_token(truth) +
                           " scripted=" + settings::profile_token(tick.ground_truth) +
                           " response=" +
                           (doc.status == protocol::DocStatus::Trained ? "trained" : "training") +
                           " suggested=" + suggested + " grade=" + grade;
        result.trace.push_back(std::move(line));
    }

    result.final_phase = state.phase();
    return result;
}

}  // namespace cosmos::harness
