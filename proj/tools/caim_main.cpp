#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "caim/errors.hpp"
#include "caim/experiment.hpp"
#include "caim/ising.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::optional<std::string>& out_override,
            const std::optional<std::uint64_t>& seed_override) {
    caim::ExperimentConfig cfg = caim::load_experiment_config(config_path);
    if (out_override) cfg.out_dir = *out_override;
    if (seed_override) cfg.master_seed = *seed_override;

    const caim::ResultBundle bundle = caim::run_experiment(cfg);
    caim::emit_csv(bundle, cfg.out_dir);
    caim::emit_json(bundle, (std::filesystem::path(cfg.out_dir) / "bundle.json").string());

    std::cout << "scenario " << caim::scenario_name(cfg.scenario) << ": " << bundle.runs.size()
              << " runs, " << bundle.aggregates.size() << " aggregate rows";
    if (!bundle.equivalence.empty()) std::cout << ", " << bundle.equivalence.size() << " equivalence rows";
    std::cout << " -> " << cfg.out_dir << "\n";
    for (const auto& agg : bundle.aggregates) {
        std::printf("  %-5s sweep=%-8g", agg.machine.c_str(), agg.sweep_value);
        if (agg.summary.exact_success) std::printf(" success=%-8.4g", *agg.summary.exact_success);
        std::printf(" mean_r=%-8.5g p_hat=%-9.4g t_run=%-8.4g tts=%.5g\n", agg.summary.mean_r,
                    agg.summary.p_hat_mean, agg.summary.t_run_mean, agg.summary.tts_median);
    }
    return 0;
}

int cmd_oracle(const std::string& problem_path) {
    const caim::IsingProblem p = caim::load_problem(problem_path);
    const caim::GroundStateResult res = caim::brute_force_ground(p);
    std::printf("n = %d, configurations = %llu\n", p.n, 1ULL << p.n);
    std::printf("H0 = %.12g, ground degeneracy = %zu, levels = %zu\n", res.h0, res.ground_set.size(),
                res.levels.levels.size());
    const std::size_t show = std::min<std::size_t>(res.ground_set.size(), 8);
    for (std::size_t g = 0; g < show; ++g) {
        std::printf("  ground[%zu] = [", g);
        for (std::size_t i = 0; i < res.ground_set[g].size(); ++i) {
            std::printf("%s%+d", i ? "," : "", res.ground_set[g][i]);
        }
        std::printf("]\n");
    }
    if (res.ground_set.size() > show) std::printf("  ... %zu more\n", res.ground_set.size() - show);
    const std::size_t lvl = std::min<std::size_t>(res.levels.levels.size(), 5);
    for (std::size_t i = 0; i < lvl; ++i) {
        std::printf("  H%zu = %.12g (x%lld)\n", i, res.levels.levels[i],
                    static_cast<long long>(res.levels.degeneracy[i]));
    }
    return 0;
}

int cmd_plot(const std::string& bundle_path, const std::string& kind, std::string out_path) {
    const caim::ResultBundle bundle = caim::load_bundle(bundle_path);
    const caim::SvgKind svg_kind = caim::svg_kind_from_name(kind);
    if (out_path.empty()) {
        out_path = (std::filesystem::path(bundle_path).parent_path() / (kind + ".svg")).string();
    }
    caim::emit_svg(bundle, svg_kind, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"caim - analog Ising machine simulator and benchmark harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_override;
    std::optional<std::uint64_t> seed_override;
    auto* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("config", config_path, "experiment config JSON")->required();
    run->add_option("--out", out_override, "output directory override");
    run->add_option("--seed", seed_override, "master seed override");

    std::string problem_path;
    auto* oracle = app.add_subcommand("oracle", "brute-force ground state of a problem file");
    oracle->add_option("problem", problem_path, "problem JSON file")->required();

    std::string bundle_path;
    std::string plot_kind;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot", "render an SVG from a result bundle");
    plot->add_option("bundle", bundle_path, "bundle JSON file")->required();
    plot->add_option("--kind", plot_kind, "energy_trace | sweep_curve | mu_trace")->required();
    plot->add_option("--out", plot_out, "output SVG path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_override, seed_override);
        if (oracle->parsed()) return cmd_oracle(problem_path);
        if (plot->parsed()) return cmd_plot(bundle_path, plot_kind, plot_out);
    } catch (const caim::ResourceCapError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    } catch (const caim::ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const caim::ParseError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
