// fedsim command line: run scenarios from config files, verify the
// equivalence claims they imply, estimate learning rates with the probe
// attack, and pretty-print result directories.
//
// Exit codes: 0 success / all checks passed, 1 execution or check failure,
// 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "fedsim/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void print_usage() {
    std::cout << "Usage: fedsim <command> [args]\n"
              << "Commands:\n"
              << "  run <config.json> [--out DIR]     run the scenario, write artifacts\n"
              << "  verify <config.json> [--out DIR]  run and require every check to pass\n"
              << "  probe-eta <config.json>           run a probe scenario, print the estimate\n"
              << "  report <dir>                      pretty-print artifacts in a directory\n"
              << "Environment:\n"
              << "  FEDSIM_OUT_ROOT                   overrides the output root directory\n";
}

int report_config_errors(const fedsim::ConfigParse& parsed) {
    json doc;
    doc["error"] = "invalid config";
    doc["details"] = parsed.errors;
    std::cout << doc.dump(2) << '\n';
    return 2;
}

struct RunArgs {
    std::string config_path;
    std::string out_dir;
};

bool parse_run_args(int argc, char** argv, RunArgs& args) {
    for (int i = 2; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--out" && i + 1 < argc) {
            args.out_dir = argv[++i];
        } else if (args.config_path.empty() && !a.starts_with("--")) {
            args.config_path = a;
        } else {
            std::cerr << "unknown argument: " << a << '\n';
            return false;
        }
    }
    return !args.config_path.empty();
}

int cmd_run(int argc, char** argv, bool require_checks) {
    RunArgs args;
    if (!parse_run_args(argc, argv, args)) {
        print_usage();
        return 2;
    }
    auto parsed = fedsim::parse_config(args.config_path);
    if (!parsed.ok()) {
        return report_config_errors(parsed);
    }
    const auto& cfg = *parsed.config;

    try {
        if (!cfg.seeds.empty()) {
            auto table = fedsim::run_multi_seed(cfg, args.out_dir);
            std::cout << "scenario " << cfg.name << ": " << table.seeds.size()
                      << " seeds, accuracy mean±sigma per client:\n";
            for (const auto& [id, cell] : table.accuracy_pct) {
                std::printf("  client %d: %.2f ± %.2f\n", id, cell.mean, cell.sigma);
            }
            if (require_checks && !table.all_checks_passed) {
                std::cout << "{\"error\": \"checks failed in at least one seed\"}\n";
                return 1;
            }
            return 0;
        }

        auto result = fedsim::run_scenario(cfg, args.out_dir);
        std::cout << "scenario " << cfg.name << ": " << result.records.size()
                  << " rounds, artifacts in "
                  << fedsim::resolve_output_dir(cfg, args.out_dir) << '\n';
        for (const auto& c : result.checks) {
            std::printf("  %-32s %s  diff=%.3e tol=%.3e\n", c.claim_id.c_str(),
                        c.passed ? "pass" : "FAIL", c.diff_inf_norm, c.tolerance);
        }
        if (require_checks) {
            json failed = json::array();
            for (const auto& c : result.checks) {
                if (!c.passed) {
                    failed.push_back({{"claim", c.claim_id},
                                      {"diff_inf_norm", c.diff_inf_norm},
                                      {"tolerance", c.tolerance}});
                }
            }
            if (!failed.empty()) {
                json doc;
                doc["error"] = "checks failed";
                doc["failed"] = std::move(failed);
                std::cout << doc.dump(2) << '\n';
                return 1;
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

int cmd_probe_eta(int argc, char** argv) {
    RunArgs args;
    if (!parse_run_args(argc, argv, args)) {
        print_usage();
        return 2;
    }
    auto parsed = fedsim::parse_config(args.config_path);
    if (!parsed.ok()) {
        return report_config_errors(parsed);
    }
    const auto& cfg = *parsed.config;
    bool has_probe = false;
    for (const auto& [id, role] : cfg.roles) {
        has_probe = has_probe || role.kind == fedsim::RoleSpec::Kind::probe;
    }
    if (!has_probe) {
        std::cout << "{\"error\": \"config has no probe role\"}\n";
        return 2;
    }

    try {
        auto result = fedsim::run_scenario(cfg, args.out_dir);
        json doc;
        doc["eta_true"] = cfg.protocol.eta;
        doc["eta_hat"] = result.eta_hat.value();
        for (const auto& c : result.checks) {
            if (c.claim_id == "probe_eta_relative_error") {
                doc["relative_error"] = c.diff_inf_norm;
                doc["error_bound"] = c.tolerance;
                doc["within_bound"] = c.passed;
            }
        }
        std::cout << doc.dump(2) << '\n';
        return result.all_checks_passed() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

json load_json_file(const fs::path& path) {
    std::ifstream f(path);
    return json::parse(f);
}

int cmd_report(int argc, char** argv) {
    if (argc < 3) {
        print_usage();
        return 2;
    }
    fs::path dir = argv[2];
    bool found = false;

    if (fs::exists(dir / "accuracy.json")) {
        found = true;
        json acc = load_json_file(dir / "accuracy.json");
        std::cout << "scenario: " << acc.value("scenario", std::string("?")) << "  ("
                  << acc.value("kind", std::string("?")) << ")\n";
        std::cout << "final accuracy (%):\n";
        std::printf("  %-8s %10s\n", "client", "accuracy");
        for (const auto& [id, v] : acc.at("accuracy_pct").items()) {
            std::printf("  %-8s %10.2f\n", id.c_str(), v.get<double>());
        }
    }
    if (fs::exists(dir / "accuracy_sigma.json")) {
        found = true;
        json acc = load_json_file(dir / "accuracy_sigma.json");
        std::cout << "multi-seed accuracy (mean ± sigma over " << acc.at("seeds").size()
                  << " seeds):\n";
        for (const auto& [id, v] : acc.at("accuracy_pct").items()) {
            std::printf("  %-8s %10.2f ± %.2f\n", id.c_str(), v.at("mean").get<double>(),
                        v.at("sigma").get<double>());
        }
    }
    if (fs::exists(dir / "checks.json")) {
        found = true;
        json checks = load_json_file(dir / "checks.json");
        std::cout << "checks:\n";
        for (const auto& c : checks.at("checks")) {
            std::printf("  %-32s %s  diff=%.3e tol=%.3e residual=%.3e\n",
                        c.at("claim").get<std::string>().c_str(),
                        c.at("passed").get<bool>() ? "pass" : "FAIL",
                        c.at("diff_inf_norm").get<double>(), c.at("tolerance").get<double>(),
                        c.at("residual_inf_norm").get<double>());
        }
    }
    if (!found) {
        std::cerr << "no artifacts in " << dir << '\n';
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        print_usage();
        return 2;
    }
    std::string cmd = argv[1];
    if (cmd == "run") {
        return cmd_run(argc, argv, /*require_checks=*/false);
    }
    if (cmd == "verify") {
        return cmd_run(argc, argv, /*require_checks=*/true);
    }
    if (cmd == "probe-eta") {
        return cmd_probe_eta(argc, argv);
    }
    if (cmd == "report") {
        return cmd_report(argc, argv);
    }
    if (cmd == "--help" || cmd == "-h" || cmd == "help") {
        print_usage();
        return 0;
    }
    std::cerr << "unknown command: " << cmd << '\n';
    print_usage();
    return 2;
}
