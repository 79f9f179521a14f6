#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "saot/cache.hpp"
#include "saot/corpus.hpp"
#include "saot/runner.hpp"

namespace {

std::shared_ptr<saot::runner::StopToken> g_stop;

void handle_sigint(int) {
    if (g_stop) g_stop->request_stop();
}

void print_summary(const saot::corpus::DatasetSummary& summary) {
    std::cout << "negative=" << summary.negative
              << " positive=" << summary.positive
              << " neutral=" << summary.neutral << " total=" << summary.total
              << " isa=" << summary.isa_count << " isa%=" << summary.isa_percent_str()
              << "\n";
}

int print_run_outcome(const saot::runner::RunOutcome& outcome) {
    const auto& manifest = outcome.manifest;
    std::cout << "experiment " << manifest.experiment_id << ": processed "
              << outcome.processed << " instance(s), " << outcome.failed
              << " failed this run\n";
    std::cout << "status: done="
              << manifest.count(saot::runner::InstanceStatus::Done)
              << " failed=" << manifest.count(saot::runner::InstanceStatus::Failed)
              << " pending=" << manifest.count(saot::runner::InstanceStatus::Pending)
              << " of " << manifest.status.size() << "\n";
    std::cout << "backend calls: " << outcome.backend_calls << "\n";
    if (outcome.interrupted) {
        std::cout << "interrupted; resume with: saot resume "
                  << manifest.experiment_id << " --out "
                  << manifest.config.out_dir << "\n";
    } else {
        std::cout << "reports: " << manifest.config.out_dir << "/"
                  << manifest.experiment_id << "/report.{txt,csv,json}\n";
    }
    return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prompt-chain evaluation harness for implicit sentiment analysis"};
    app.require_subcommand(1);

    // --- validate-data ----------------------------------------------------
    auto* validate = app.add_subcommand(
        "validate-data", "Parse a dataset and check its accounting");
    std::string v_dataset, v_format = "jsonl", v_name, v_flags,
                v_expected = "none";
    validate->add_option("--dataset", v_dataset, "dataset file")->required();
    validate->add_option("--format", v_format, "jsonl|xml")
        ->check(CLI::IsMember({"jsonl", "xml"}));
    validate->add_option("--name", v_name,
                         "dataset name (restaurant|laptop), required for xml");
    validate->add_option("--flags", v_flags, "implicit-flag overlay JSONL");
    validate->add_option("--expected", v_expected,
                         "expected accounting: restaurant|laptop|none");

    // --- run ----------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run an experiment grid cell");
    std::string r_config, r_dataset, r_chain, r_backend, r_out, r_cache,
        r_experiment_id;
    int r_concurrency = 0;
    bool r_skip_validate = false;
    run->add_option("--config", r_config, "run config JSON")->required();
    run->add_option("--dataset", r_dataset, "override dataset path");
    run->add_option("--chain", r_chain, "override chain: direct|thor|saot")
        ->check(CLI::IsMember({"direct", "thor", "saot"}));
    run->add_option("--backend", r_backend,
                    "override backend: path to a backend JSON, or \"mock\"");
    run->add_option("--concurrency", r_concurrency, "override concurrency");
    run->add_option("--out", r_out, "override output directory");
    run->add_option("--cache-dir", r_cache, "override cache directory");
    run->add_option("--experiment-id", r_experiment_id, "override experiment id");
    run->add_flag("--skip-validate", r_skip_validate,
                  "skip dataset accounting validation");

    // --- resume -------------------------------------------------------------
    auto* resume = app.add_subcommand(
        "resume", "Process the pending/failed instances of an experiment");
    std::string s_experiment_id, s_out = "out";
    resume->add_option("experiment_id", s_experiment_id)->required();
    resume->add_option("--out", s_out, "output directory");

    // --- report -------------------------------------------------------------
    auto* report = app.add_subcommand("report", "Render evaluation tables");
    std::vector<std::string> p_ids;
    std::string p_out = "out", p_format = "text";
    bool p_allow_partial = false, p_deltas = false;
    report->add_option("experiment_ids", p_ids, "experiments to include");
    report->add_option("--out", p_out, "output directory");
    report->add_option("--format", p_format, "text|csv|json")
        ->check(CLI::IsMember({"text", "csv", "json"}));
    report->add_flag("--allow-partial", p_allow_partial,
                     "report experiments with pending/failed instances");
    report->add_flag("--deltas", p_deltas,
                     "append F1 improvement block vs the supervised baseline");

    // --- cache-stats ----------------------------------------------------------
    auto* cache_stats = app.add_subcommand("cache-stats",
                                           "Show response cache statistics");
    std::string c_cache = "cache";
    cache_stats->add_option("--cache-dir", c_cache, "cache directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*validate) {
            saot::runner::DatasetSpec spec;
            spec.path = v_dataset;
            spec.format = v_format;
            spec.flags_path = v_flags;
            if (!v_name.empty()) {
                auto name = saot::parse_dataset_name(v_name);
                if (!name) {
                    std::cerr << "unknown dataset name: " << v_name << "\n";
                    return 1;
                }
                spec.name = *name;
            }

            std::vector<saot::corpus::SentimentInstance> instances;
            if (spec.format == "xml") {
                if (!spec.name) {
                    std::cerr << "--name is required for xml datasets\n";
                    return 1;
                }
                auto parsed =
                    saot::corpus::parse_semeval_xml_file(spec.path, *spec.name);
                for (const std::string& warning : parsed.warnings) {
                    std::cerr << "warning: " << warning << "\n";
                }
                instances = std::move(parsed.instances);
            } else {
                instances = saot::corpus::parse_jsonl_file(spec.path);
            }
            if (!spec.flags_path.empty()) {
                auto flags =
                    saot::corpus::parse_flag_overlay_file(spec.flags_path);
                instances =
                    saot::corpus::overlay_implicit_flags(instances, flags);
            }
            saot::corpus::DatasetSummary summary =
                saot::corpus::summarize(instances);
            if (summary.total == 0) {
                std::cerr << "warning: dataset is empty; isa% reported as 0.00\n";
            }
            print_summary(summary);
            if (v_expected != "none") {
                auto name = saot::parse_dataset_name(v_expected);
                if (!name) {
                    std::cerr << "unknown expectation: " << v_expected << "\n";
                    return 1;
                }
                auto report = saot::corpus::validate_expected(
                    summary, saot::corpus::expected_summary(*name));
                std::cout << report.to_string();
                if (!report.pass) return 2;
            }
            return 0;
        }

        if (*run) {
            saot::runner::RunConfig config =
                saot::runner::load_run_config(r_config);
            if (!r_dataset.empty()) config.dataset.path = r_dataset;
            if (!r_chain.empty()) {
                config.chain = *saot::chains::parse_chain_kind(r_chain);
            }
            if (!r_backend.empty()) {
                if (r_backend == "mock") {
                    config.backend.kind = saot::backend::BackendKind::Mock;
                } else {
                    std::ifstream in(r_backend, std::ios::binary);
                    if (!in) {
                        std::cerr << "cannot open backend config: " << r_backend
                                  << "\n";
                        return 1;
                    }
                    std::ostringstream buf;
                    buf << in.rdbuf();
                    config.backend =
                        saot::backend::parse_backend_config(buf.str());
                }
            }
            if (r_concurrency > 0) config.concurrency = r_concurrency;
            if (!r_out.empty()) config.out_dir = r_out;
            if (!r_cache.empty()) config.cache_dir = r_cache;
            if (!r_experiment_id.empty()) config.experiment_id = r_experiment_id;
            if (r_skip_validate) config.skip_validate = true;

            g_stop = std::make_shared<saot::runner::StopToken>();
            std::signal(SIGINT, handle_sigint);
            saot::runner::RunHooks hooks;
            hooks.stop = g_stop;
            return print_run_outcome(saot::runner::run_experiment(config, hooks));
        }

        if (*resume) {
            g_stop = std::make_shared<saot::runner::StopToken>();
            std::signal(SIGINT, handle_sigint);
            saot::runner::RunHooks hooks;
            hooks.stop = g_stop;
            return print_run_outcome(
                saot::runner::resume(s_out, s_experiment_id, hooks));
        }

        if (*report) {
            saot::runner::ReportRequest request;
            request.out_dir = p_out;
            request.experiment_ids = p_ids;
            request.allow_partial = p_allow_partial;
            request.include_deltas = p_deltas;
            request.format = p_format;
            std::cout << saot::runner::report(request);
            return 0;
        }

        if (*cache_stats) {
            saot::backend::ResponseCache cache(c_cache);
            saot::backend::CacheStats stats = cache.stats();
            std::cout << "entries=" << stats.entries << " bytes=" << stats.bytes
                      << "\n";
            return 0;
        }
    } catch (const saot::runner::ValidationFailure& ex) {
        std::cerr << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
