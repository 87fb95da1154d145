#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cosmos/dtree.hpp"
#include "cosmos/errors.hpp"
#include "cosmos/harness.hpp"
#include "cosmos/server.hpp"
#include "cosmos/settings.hpp"
#include "cosmos/strings.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cosmos::UsageError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cosmos::UsageError("cannot write file: " + path);
    out << contents;
    if (!out) throw cosmos::DomainError("failed writing " + path);
}

const char* phase_name(cosmos::server::Phase phase) {
    return phase == cosmos::server::Phase::Serving ? "SERVING" : "TRAINING";
}

}  // namespace

int main(int argc, char** argv) {
    using cosmos::format_double;

    CLI::App app{"Context-sensitive smartphone configuration toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run a scripted scenario against an in-process server");
    std::string sim_scenario, sim_user, sim_report, sim_trace;
    std::uint64_t sim_seed = 0;
    cosmos::harness::SimulationParams sim_params;
    simulate->add_option("--scenario", sim_scenario, "Scenario script file")->required();
    simulate->add_option("--user", sim_user, "User model file")->required();
    auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Override the scenario seed");
    simulate->add_option("--report", sim_report, "Write a one-row CSV report here");
    simulate->add_option("--trace", sim_trace, "Write the per-tick trace here");
    simulate->add_option("--min-rows", sim_params.server.sufficiency.min_rows,
                         "Observations required before serving");
    simulate->add_option("--min-accuracy", sim_params.server.sufficiency.min_accuracy,
                         "Holdout accuracy required before serving");
    simulate->add_option("--retrain-every", sim_params.server.retrain_every,
                         "Retrain after this many new observations");
    simulate->callback([&] {
        auto script = cosmos::harness::load_scenario_file(sim_scenario);
        auto user = cosmos::harness::load_user_model_file(sim_user);
        if (sim_seed_opt->count() > 0) script.seed = sim_seed;
        auto result = cosmos::harness::run_scenario(script, user, sim_params);

        std::cout << "ticks=" << result.ticks << " scored=" << result.score.scored
                  << " cr=" << result.score.cr << " pr=" << result.score.pr
                  << " cir=" << result.score.cir << "\n";
        std::string crs = "-", prs = "-", cis = "-";
        if (result.score.scored > 0) {
            auto t = result.score.percentages();
            crs = format_double(t.crs_pct);
            prs = format_double(t.prs_pct);
            cis = format_double(t.cis_pct);
            std::cout << "crs_pct=" << crs << " prs_pct=" << prs << " cis_pct=" << cis << "\n";
        }
        std::cout << "final_phase=" << phase_name(result.final_phase) << "\n";

        if (!sim_report.empty()) {
            std::string csv = "ticks,scored,cr,pr,cir,crs_pct,prs_pct,cis_pct,final_phase\n";
            csv += std::to_string(result.ticks) + ',' + std::to_string(result.score.scored) +
                   ',' + std::to_string(result.score.cr) + ',' + std::to_string(result.score.pr) +
                   ',' + std::to_string(result.score.cir) + ',' + crs + ',' + prs + ',' + cis +
                   ',' + phase_name(result.final_phase) + '\n';
            write_file(sim_report, csv);
        }
        if (!sim_trace.empty()) {
            std::string text;
            for (const auto& line : result.trace) {
                text += line;
                text += '\n';
            }
            write_file(sim_trace, text);
        }
    });

    // train
    auto* train = app.add_subcommand("train", "Train a decision tree from a dataset file");
    std::string train_data, train_out;
    cosmos::dtree::TrainParams train_params;
    train->add_option("--data", train_data, "Dataset file")->required();
    train->add_option("--out", train_out, "Model output path")->required();
    train->add_option("--min-leaf", train_params.min_leaf, "Smallest splittable node");
    train->add_option("--max-depth", train_params.max_depth, "Depth limit");
    train->add_flag("--prune", train_params.prune, "Subtree-replacement pruning");
    train->callback([&] {
        auto data = cosmos::dtree::load_dataset_file(train_data);
        auto tree = cosmos::dtree::train(data, train_params);
        cosmos::dtree::save_model_file(tree, train_out);
        std::size_t correct = 0;
        for (const auto& row : data.rows)
            if (cosmos::dtree::classify(tree, row.cells).label == row.label) ++correct;
        std::cout << "trained_on=" << tree.trained_on << " train_accuracy="
                  << format_double(static_cast<double>(correct) /
                                   static_cast<double>(data.rows.size()))
                  << "\n";
    });

    // classify
    auto* classify = app.add_subcommand("classify", "Classify one CSV row with a saved model");
    std::string classify_model, classify_row;
    classify->add_option("--model", classify_model, "Model file")->required();
    classify->add_option("--row", classify_row, "Attribute values, CSV, `?` for missing")
        ->required();
    classify->callback([&] {
        auto tree = cosmos::dtree::load_model_file(classify_model);
        auto cells = cosmos::dtree::parse_row(tree.schema, classify_row);
        auto result = cosmos::dtree::classify(tree, cells);
        std::cout << "label=" << tree.schema.label_domain[static_cast<std::size_t>(result.label)]
                  << " confidence=" << format_double(result.confidence) << "\n";
    });

    // serve
    auto* serve = app.add_subcommand("serve", "Answer context uploads on a Unix stream socket");
    std::string serve_socket, serve_store, serve_critical;
    cosmos::server::ServerParams serve_params;
    serve->add_option("--socket", serve_socket, "Socket path")->required();
    auto* store_opt = serve->add_option("--store", serve_store,
                                        "Observation store file (default: $COSMOS_STORE)");
    serve->add_option("--critical", serve_critical, "Critical services file");
    serve->add_option("--min-rows", serve_params.sufficiency.min_rows,
                      "Observations required before serving");
    serve->add_option("--min-accuracy", serve_params.sufficiency.min_accuracy,
                      "Holdout accuracy required before serving");
    serve->add_option("--retrain-every", serve_params.retrain_every,
                      "Retrain after this many new observations");
    serve->callback([&] {
        if (store_opt->count() == 0) {
            if (const char* env = std::getenv("COSMOS_STORE")) serve_store = env;
        }
        if (!serve_critical.empty())
            serve_params.critical =
                cosmos::settings::CriticalServicesRepository::load_file(serve_critical);
        cosmos::server::ServerState state(
            serve_store.empty() ? cosmos::server::ObservationStore{}
                                : cosmos::server::ObservationStore::open(serve_store),
            serve_params);
        state.retrain_if_due();
        std::cout << "listening=" << serve_socket
                  << " store=" << (serve_store.empty() ? "-" : serve_store)
                  << " observations=" << state.store().size()
                  << " phase=" << phase_name(state.phase()) << std::endl;
        cosmos::server::run_server(serve_socket, state);
        std::cout << "stopped observations=" << state.store().size()
                  << " phase=" << phase_name(state.phase()) << "\n";
    });

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Aggregate battery and relevance session tables");
    std::string eval_table1, eval_table2;
    evaluate->add_option("--table1", eval_table1, "Battery sessions CSV");
    evaluate->add_option("--table2", eval_table2, "Relevance sessions CSV");
    evaluate->callback([&] {
        if (eval_table1.empty() && eval_table2.empty())
            throw cosmos::UsageError("evaluate needs --table1 and/or --table2");
        if (!eval_table1.empty()) {
            auto report = cosmos::harness::aggregate_battery(
                cosmos::harness::load_battery_csv_file(eval_table1));
            std::cout << "battery_sessions=" << report.sessions.size()
                      << " normal_mean=" << format_double(report.mean_normal)
                      << " cosmos_mean=" << format_double(report.mean_cosmos) << "\n";
        }
        if (!eval_table2.empty()) {
            auto report = cosmos::harness::aggregate_relevance(
                cosmos::harness::load_relevance_csv_file(eval_table2));
            std::cout << "relevance_sessions=" << report.sessions.size()
                      << " crs_mean=" << format_double(report.mean_crs)
                      << " prs_mean=" << format_double(report.mean_prs)
                      << " cis_mean=" << format_double(report.mean_cis)
                      << " cumulative_relevant=" << format_double(report.cumulative_relevant)
                      << "\n";
        }
    });

    // send-context
    auto* send = app.add_subcommand("send-context", "Send a context XML file to a running server");
    std::string send_socket, send_xml;
    bool send_sms = false;
    send->add_option("--socket", send_socket, "Socket path")->required();
    send->add_option("--xml", send_xml, "Context upload XML file")->required();
    send->add_flag("--sms", send_sms, "Ask for the SMS-encoded response");
    send->callback([&] {
        std::string body = read_file(send_xml);
        if (send_sms) body = "SMS " + body;
        auto response = cosmos::server::send_request(send_socket, body);
        std::cout << response;
        if (response.empty() || response.back() != '\n') std::cout << "\n";
        if (cosmos::starts_with(response, "ERR;")) rc = 1;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const cosmos::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cosmos::ParseError& e) {
        std::cerr << "error: " << cosmos::ParseError::kind_name(e.kind()) << ": " << e.what()
                  << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
