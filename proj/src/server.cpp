#include "cosmos/server.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <utility>

#include "cosmos/errors.hpp"
#include "cosmos/strings.hpp"

namespace cosmos::server {

namespace {

void check_record_field(std::string_view value, const char* what) {
    if (value.empty()) throw UsageError(std::string(what) + " must be non-empty");
    if (value == "?") throw UsageError(std::string(what) + " collides with the missing marker");
    if (value.find(',') != std::string_view::npos || value.find('\n') != std::string_view::npos)
        throw UsageError(std::string(what) + " must not contain commas or newlines");
}

void check_row_fields(const context::AttributeRow& row) {
    check_record_field(row.zone_id, "zone id");
    check_record_field(row.event_category, "event category");
    check_record_field(row.last_call_category, "call category");
}

[[noreturn]] void record_error(ParseErrorKind kind, const std::string& what) {
    throw ParseError(kind, what);
}

}  // namespace

std::string observation_record(const Observation& o) {
    check_row_fields(o.row);
    std::string out = o.row.zone_id + ',' + o.row.event_category + ',' +
                      std::to_string(o.row.call_count) + ',' + o.row.last_call_category + ',' +
                      format_double(o.row.battery_pct) + ',' + (o.row.crisis ? "YES" : "NO");
    for (auto setting : settings::kSettingOrder)
        out += ',' + settings::setting_label(o.label, setting);
    out += ',' + std::to_string(o.at.seconds);
    return out;
}

Observation parse_observation_record(std::string_view line) {
    auto fields = split(line, ',');
    if (fields.size() != 13)
        record_error(ParseErrorKind::Malformed,
                     "expected 13 record fields, got " + std::to_string(fields.size()));

    Observation o;
    o.row.zone_id = fields[0];
    o.row.event_category = fields[1];
    auto count = parse_int(fields[2]);
    if (!count || *count < 0 || *count > std::numeric_limits<int>::max())
        record_error(ParseErrorKind::ValueError, "bad call count '" + fields[2] + "'");
    o.row.call_count = static_cast<int>(*count);
    o.row.last_call_category = fields[3];
    auto battery = parse_double(fields[4]);
    if (!battery || !(*battery >= 0.0 && *battery <= 100.0))
        record_error(ParseErrorKind::ValueError, "bad battery level '" + fields[4] + "'");
    o.row.battery_pct = *battery;
    if (fields[5] == "YES") o.row.crisis = true;
    else if (fields[5] == "NO") o.row.crisis = false;
    else record_error(ParseErrorKind::ValueError, "bad crisis flag '" + fields[5] + "'");

    try {
        for (std::size_t i = 0; i < settings::kSettingCount; ++i)
            settings::set_setting_label(o.label, settings::kSettingOrder[i], fields[6 + i]);
    } catch (const UsageError& e) {
        record_error(ParseErrorKind::ValueError, e.what());
    }

    auto at = parse_int(fields[12]);
    if (!at) record_error(ParseErrorKind::ValueError, "bad capture time '" + fields[12] + "'");
    o.at = context::TimeInstant{*at};

    try {
        check_row_fields(o.row);
    } catch (const UsageError& e) {
        record_error(ParseErrorKind::ValueError, e.what());
    }
    return o;
}

ObservationStore ObservationStore::open(const std::string& path) {
    ObservationStore store;
    store.path_ = path;
    std::ifstream in(path);
    if (!in) return store;  // fresh store; first append creates the file
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        try {
            Observation o = parse_observation_record(body);
            o.sequence = store.observations_.empty() ? 1 : store.observations_.back().sequence + 1;
            store.observations_.push_back(std::move(o));
        } catch (const ParseError& e) {
            throw ParseError(e.kind(),
                             path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return store;
}

std::uint64_t ObservationStore::append(const context::AttributeRow& row,
                                       const settings::SettingsProfile& label,
                                       context::TimeInstant at) {
    Observation o{row, label, at, latest_id() + 1};
    std::string record = observation_record(o);  // validates fields
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        if (!out) throw DomainError("cannot open store file " + path_);
        out << record << '\n';
        out.flush();
        if (!out) throw DomainError("cannot write store file " + path_);
    }
    observations_.push_back(std::move(o));
    return observations_.back().sequence;
}

dtree::AttributeSchema build_schema(std::span<const Observation> observations,
                                    settings::SettingName setting) {
    std::set<std::string> zones = {context::kUnknownZone};
    std::set<std::string> events = {context::kNoneCategory};
    std::set<std::string> callcats = {context::kNoneCategory};
    for (const auto& o : observations) {
        zones.insert(o.row.zone_id);
        events.insert(o.row.event_category);
        callcats.insert(o.row.last_call_category);
    }

    dtree::AttributeSchema schema;
    schema.attributes = {
        {"zone", dtree::AttrKind::Categorical, {zones.begin(), zones.end()}},
        {"event", dtree::AttrKind::Categorical, {events.begin(), events.end()}},
        {"callcount", dtree::AttrKind::Continuous, {}},
        {"callcat", dtree::AttrKind::Categorical, {callcats.begin(), callcats.end()}},
        {"battery", dtree::AttrKind::Continuous, {}},
        {"crisis", dtree::AttrKind::Categorical, {"NO", "YES"}},
    };
    schema.label_domain = settings::setting_label_domain(setting);
    schema.validate();
    return schema;
}

std::uint64_t ServerState::ingest_observation(const protocol::ContextUpload& upload) {
    if (!upload.observed_profile)
        throw UsageError("upload carries no observed profile to learn from");
    return store_.append(upload.row, *upload.observed_profile, upload.at);
}

RetrainOutcome ServerState::retrain_if_due() {
    RetrainOutcome out;
    const std::size_t n = store_.size();
    if (n - last_retrain_size_ < params_.retrain_every) return out;
    last_retrain_size_ = n;

    const std::size_t train_n = n * 4 / 5;
    const std::size_t holdout_n = n - train_n;
    if (train_n == 0 || holdout_n == 0) return out;

    out.attempted = true;
    out.trained_rows = train_n;
    out.holdout_rows = holdout_n;

    auto all = std::span<const Observation>(store_.observations());
    auto train_part = all.subspan(0, train_n);
    auto holdout = all.subspan(train_n);

    TreeSet fresh;
    double accuracy_sum = 0.0;
    for (std::size_t i = 0; i < settings::kSettingCount; ++i) {
        const auto setting = settings::kSettingOrder[i];
        dtree::Dataset data;
        data.schema = build_schema(train_part, setting);
        data.rows.reserve(train_n);
        for (const auto& o : train_part) {
            dtree::Row r;
            r.cells = settings::row_cells(o.row, data.schema);
            r.label = data.schema.label_index(settings::setting_label(o.label, setting));
            data.rows.push_back(std::move(r));
        }
        fresh[i] = dtree::train(data, params_.train);

        std::size_t correct = 0;
        for (const auto& o : holdout) {
            auto got = dtree::classify(fresh[i], settings::row_cells(o.row, fresh[i].schema));
            const auto& label = fresh[i].schema.label_domain[static_cast<std::size_t>(got.label)];
            if (label == settings::setting_label(o.label, setting)) ++correct;
        }
        accuracy_sum += static_cast<double>(correct) / static_cast<double>(holdout_n);
    }

    out.holdout_accuracy = accuracy_sum / static_cast<double>(settings::kSettingCount);
    out.sufficient = dtree::is_sufficiently_trained(n, out.holdout_accuracy, params_.sufficiency);
    if (out.sufficient) {
        trees_ = std::move(fresh);
        phase_ = Phase::Serving;
        last_accuracy_ = out.holdout_accuracy;
    }
    return out;
}

protocol::SettingsDocument ServerState::handle_context_request(
    const protocol::ContextUpload& upload) const {
    const std::uint64_t seq = store_.latest_id();
    if (phase_ == Phase::Training) return protocol::SettingsDocument::training(seq);

    auto profile = settings::decide_profile(*trees_, upload.row);
    // The override trusts the client's own crisis flag; the threshold here is
    // synthetic, only battery.crisis is read.
    context::BatteryState battery;
    battery.level_pct = upload.row.battery_pct;
    battery.threshold_pct = upload.row.crisis ? 100.0 : 0.0;
    battery.crisis = upload.row.crisis;
    profile = settings::apply_battery_override(profile, battery, params_.critical);
    return protocol::SettingsDocument::trained(profile, seq);
}

protocol::SettingsDocument ServerState::process_upload(const protocol::ContextUpload& upload) {
    if (upload.observed_profile) {
        ingest_observation(upload);
        retrain_if_due();
    }
    return handle_context_request(upload);
}

std::string process_request(ServerState& state, std::string_view body) {
    const bool sms = starts_with(body, "SMS ");
    const std::string_view payload = sms ? body.substr(4) : body;
    try {
        auto upload = protocol::parse_context_xml(payload);
        auto doc = state.process_upload(upload);
        return sms ? "SMS " + protocol::encode_sms(doc) : protocol::build_settings_xml(doc);
    } catch (const ParseError& e) {
        return std::string("ERR;") + ParseError::kind_name(e.kind()) + ";" + e.what();
    } catch (const std::invalid_argument& e) {  // UsageError, DomainError
        return std::string("ERR;VALUE_ERROR;") + e.what();
    } catch (const std::exception& e) {
        return std::string("ERR;INTERNAL;") + e.what();
    }
}

}  // namespace cosmos::server
