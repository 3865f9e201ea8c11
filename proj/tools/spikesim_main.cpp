// SPDX-License-Identifier: Apache-2.0
//
// spikesim: simulate finite-rank perturbations of large self-adjoint
// matrices and check the limit predictions for their extreme eigenvalues.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "spikesim/analyze.hpp"
#include "spikesim/experiments.hpp"
#include "spikesim/io.hpp"
#include "spikesim/secular.hpp"

namespace fs = std::filesystem;
using namespace spikesim;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitAssert = 4;

std::vector<double> read_value_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open spectrum file");
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        values.push_back(std::stod(line));
    }
    if (values.empty()) throw ConfigError(path + ": no values");
    std::sort(values.begin(), values.end());
    return values;
}

LimitLaw parse_limit_arg(const std::string& arg) {
    // "semicircle:1.0" | "marchenko_pastur:0.25" | "uniform:0,1" | "table:path"
    const auto colon = arg.find(':');
    const std::string name = arg.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : arg.substr(colon + 1);
    if (name == "semicircle") return LimitLaw::semicircle(rest.empty() ? 1.0 : std::stod(rest));
    if (name == "marchenko_pastur") return LimitLaw::marchenko_pastur(std::stod(rest));
    if (name == "uniform") {
        const auto comma = rest.find(',');
        return LimitLaw::uniform(std::stod(rest.substr(0, comma)),
                                 std::stod(rest.substr(comma + 1)));
    }
    if (name == "table") return LimitLaw::custom_table(read_value_column(rest));
    throw ConfigError("unknown limit law spec '" + arg + "'");
}

void print_report(const PredictionReport& rep) {
    std::printf("theta_low = %.6g, theta_high = %.6g, p- = %d, p+ = %d\n", rep.theta_low,
                rep.theta_high, rep.p_minus, rep.p_plus);
    std::printf("%10s  %-14s  %10s  %10s  %14s  %5s\n", "theta", "class", "rho", "c_alpha",
                "gauss_variance", "group");
    for (const auto& sp : rep.spikes) {
        std::printf("%10.5g  %-14s  %10.6g  %10.6g  %14.6g  %5d\n", sp.theta, to_string(sp.cls),
                    sp.rho, sp.c_alpha, sp.gauss_variance, sp.group_id);
    }
}

int cmd_predict(const std::string& config_path, const std::string& outdir) {
    auto cfg = io::parse_config(config_path);
    auto rep = predict(cfg.ensemble.limit(), cfg.perturbation, cfg.resolvent_profile());
    print_report(rep);
    json out = {{"config_hash", io::config_hash(cfg)}, {"report", io::report_to_json(rep)}};
    if (!outdir.empty()) {
        fs::create_directories(outdir);
        std::ofstream f(outdir + "/prediction.json");
        f << out.dump(2) << '\n';
    } else {
        std::cout << out.dump(2) << '\n';
    }
    return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& outdir,
                 std::optional<std::uint64_t> seed_override, int threads) {
    auto cfg = io::parse_config(config_path);
    if (seed_override) cfg.master_seed = *seed_override;
    fs::create_directories(outdir);
    auto res = run_trials(cfg, threads);
    const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    {
        std::ofstream f(outdir + "/manifest.json");
        f << io::make_manifest(cfg, outdir, now).dump(2) << '\n';
    }
    io::write_jsonl(res.records, outdir + "/trials.jsonl");
    {
        json pred = {{"config", io::canonical_config(cfg)},
                     {"config_hash", io::config_hash(cfg)},
                     {"report", io::report_to_json(res.report)}};
        std::ofstream f(outdir + "/prediction.json");
        f << pred.dump(2) << '\n';
    }
    std::printf("simulate: %zu records (%d n values x %d trials), %d errors -> %s\n",
                res.records.size(), int(cfg.n_values.size()), cfg.trials, res.error_count,
                outdir.c_str());
    return res.error_count == 0 ? kExitOk : kExitNumerical;
}

int cmd_analyze(const std::string& records_path, const std::string& prediction_path,
                const std::string& outdir, bool do_assert) {
    auto records = io::read_jsonl(records_path);
    std::ifstream pf(prediction_path);
    if (!pf) throw ConfigError(prediction_path + ": cannot open prediction file");
    json pred;
    pf >> pred;
    auto cfg = io::config_from_json(pred.at("config"));
    auto report = io::report_from_json(pred.at("report"));

    std::vector<AnalysisResult> results;
    for (auto& [n, batch] : split_by_n(records))
        results.push_back(analyze_batch(batch, report, cfg.perturbation, cfg.alpha_prime));

    const std::string dir = outdir.empty() ? fs::path(records_path).parent_path().string() : outdir;
    fs::create_directories(dir.empty() ? "." : dir);
    const std::string base = dir.empty() ? "" : dir + "/";
    write_summary_csv(results, base + "summary.csv");
    for (auto& [n, batch] : split_by_n(records))
        write_plot_csvs(batch, report, cfg.perturbation, cfg.alpha_prime,
                        base + "plots/n" + std::to_string(n));

    bool pass = true;
    for (const auto& res : results) {
        pass &= res.pass();
        std::printf("n=%d: trials=%d errors=%d", res.n, res.trials, res.error_count);
        for (const auto& g : res.groups)
            std::printf("  [group %d alpha=%.4g mean=%.4g var=%.4g target=%.4g ks_p=%.3g %s]",
                        g.group_id, g.alpha, g.mean, g.variance, g.target_variance, g.ks_p,
                        (g.ok_mean && g.ok_variance && g.ok_ks) ? "ok" : "FAIL");
        for (const auto& s : res.sticking)
            std::printf("  [stick %c%d frac=%.3f %s]", s.side, s.spike_index, s.fraction_below,
                        s.ok ? "ok" : "FAIL");
        std::printf("\n");
    }
    std::printf("summary -> %ssummary.csv\n", base.c_str());
    if (do_assert && !pass) return kExitAssert;
    return kExitOk;
}

int cmd_check(const std::string& spectrum_path, const std::string& limit_arg, int p, double alpha,
              const std::string& outdir) {
    SpectrumVector spec{read_value_column(spectrum_path)};
    auto law = parse_limit_arg(limit_arg);
    json out;
    for (char side : {'a', 'b'}) {
        auto rep = check_h3a(spec, p, alpha, side, law);
        out["h3a"][std::string(1, side)] = {
            {"m_n", rep.m_n},           {"sum1", rep.sum1},
            {"sum2", rep.sum2},         {"sum4", rep.sum4},
            {"eta2_hat", rep.eta2_hat}, {"eta4_hat", rep.eta4_hat},
            {"pass_sum1", rep.pass_sum1}, {"pass_sum2", rep.pass_sum2},
            {"pass_sum4", rep.pass_sum4}, {"pass", rep.pass()}};
    }
    const double margin = 0.5 * (law.b() - law.a());
    json h2 = json::array();
    for (double z : {law.b() + 0.5, law.b() + margin, law.a() - 0.5, law.a() - margin}) {
        const double dev =
            std::sqrt(double(spec.n())) * (stieltjes_empirical(spec, z) - law.stieltjes(z));
        h2.push_back({{"z", z}, {"sqrt_n_dev", dev}});
    }
    out["h2_table"] = h2;
    const std::string text = out.dump(2);
    if (!outdir.empty()) {
        fs::create_directories(outdir);
        std::ofstream f(outdir + "/check.json");
        f << text << '\n';
    }
    std::cout << text << '\n';
    return kExitOk;
}

int cmd_secular(const std::string& spectrum_path, const std::string& spikes_path, double theta,
                const std::string& vector_csv, const std::string& out_path) {
    SpectrumVector spec{read_value_column(spectrum_path)};
    std::vector<double> thetas;
    std::vector<std::vector<double>> vectors;
    if (!spikes_path.empty()) {
        std::ifstream f(spikes_path);
        if (!f) throw ConfigError(spikes_path + ": cannot open spikes file");
        json j;
        f >> j;
        thetas = j.at("thetas").get<std::vector<double>>();
        vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
    } else {
        if (theta == 0 || vector_csv.empty())
            throw ConfigError("secular: provide --spikes or --theta with --vector");
        thetas.push_back(theta);
        std::vector<double> v;
        std::stringstream ss(vector_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
        vectors.push_back(v);
    }
    if (thetas.size() != vectors.size())
        throw ConfigError("secular: thetas and vectors must have matching length");
    for (const auto& v : vectors)
        if (int(v.size()) != spec.n())
            throw ConfigError("secular: vector dimension must match the spectrum");

    LowRankOperator<double> R{thetas, vectors};
    DeformedSpectrum def;
    if (thetas.size() == 1) {
        auto sys = make_secular_system(spec, R);
        def = solve_rank_one(sys);
    } else {
        def = deformed_spectrum_dense(SymmetricMatrix<double>::diagonal(spec.values), R);
    }
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::binary);
        if (!file) throw Error(out_path + ": cannot open for writing");
        os = &file;
    }
    (*os) << "deformed_eigenvalue\n";
    char buf[32];
    for (double v : def.values) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        (*os) << buf << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-rank spiked-spectrum simulator"};
    app.require_subcommand(1);

    std::string config_path, outdir, records_path, prediction_path, spectrum_path, limit_arg;
    std::string spikes_path, vector_csv, out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool do_assert = false;
    int p = 1;
    double alpha = 0.2, theta = 0.0;

    auto* predict_cmd = app.add_subcommand("predict", "limit predictions for a config");
    predict_cmd->add_option("--config", config_path, "JSON config")->required();
    predict_cmd->add_option("--out", outdir, "output directory");

    auto* sim_cmd = app.add_subcommand("simulate", "run Monte Carlo trials");
    sim_cmd->add_option("--config", config_path, "JSON config")->required();
    sim_cmd->add_option("--out", outdir, "output directory")->required();
    sim_cmd->add_option("--seed", seed, "override master seed")->each([&](const std::string&) {
        seed_set = true;
    });
    sim_cmd->add_option("--threads", threads, "worker threads (0 = auto)");

    auto* an_cmd = app.add_subcommand("analyze", "summarize a records file");
    an_cmd->add_option("--records", records_path, "trials.jsonl")->required();
    an_cmd->add_option("--prediction", prediction_path, "prediction.json")->required();
    an_cmd->add_option("--out", outdir, "output directory (default: records dir)");
    an_cmd->add_flag("--assert", do_assert, "exit 4 when a standing check fails");

    auto* check_cmd = app.add_subcommand("check", "H2/H3a checks for a spectrum file");
    check_cmd->add_option("--spectrum", spectrum_path, "one eigenvalue per line")->required();
    check_cmd
        ->add_option("--limit", limit_arg,
                     "semicircle:S | marchenko_pastur:C | uniform:LO,HI | table:PATH")
        ->required();
    check_cmd->add_option("--p", p, "edge index");
    check_cmd->add_option("--alpha", alpha, "exclusion exponent");
    check_cmd->add_option("--out", outdir, "output directory");

    auto* sec_cmd = app.add_subcommand("secular", "deformed spectrum of a diagonal matrix");
    sec_cmd->add_option("--spectrum", spectrum_path, "one eigenvalue per line")->required();
    sec_cmd->add_option("--spikes", spikes_path, "JSON {thetas:[..], vectors:[[..],..]}");
    sec_cmd->add_option("--theta", theta, "inline rank-one strength");
    sec_cmd->add_option("--vector", vector_csv, "inline rank-one vector, comma separated");
    sec_cmd->add_option("--out", out_path, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
        if (predict_cmd->parsed()) return cmd_predict(config_path, outdir);
        if (sim_cmd->parsed())
            return cmd_simulate(config_path, outdir,
                                seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                                threads);
        if (an_cmd->parsed()) return cmd_analyze(records_path, prediction_path, outdir, do_assert);
        if (check_cmd->parsed()) return cmd_check(spectrum_path, limit_arg, p, alpha, outdir);
        if (sec_cmd->parsed())
            return cmd_secular(spectrum_path, spikes_path, theta, vector_csv, out_path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitOk;
}
