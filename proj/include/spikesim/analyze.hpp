// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "spikesim/experiments.hpp"
#include "spikesim/io.hpp"
#include "spikesim/stats.hpp"

namespace spikesim {

/// Post-run statistics of one record batch (one n), with pass flags against
/// the library's standing tolerances: centred gamma means, gamma variance
/// within [0.85, 1.15] of the predicted limit, standardized KS p >= 0.01,
/// and sticking fractions >= 0.95.
struct AnalysisResult {
    struct GroupRow {
        int group_id = -1;
        double alpha = 0;
        int k = 1;
        std::size_t samples = 0;
        double mean = 0, variance = 0;
        double target_variance = std::numeric_limits<double>::quiet_NaN();
        double ks_p = std::numeric_limits<double>::quiet_NaN();
        bool ok_mean = true, ok_variance = true, ok_ks = true;
    };
    struct StickRow {
        int spike_index = 0;
        char side = 'b';
        double threshold = 0;
        double median = 0;
        double fraction_below = 0;
        bool ok = true;
    };
    int n = 0;
    int trials = 0;
    int error_count = 0;
    std::vector<GroupRow> groups;
    std::vector<StickRow> sticking;

    bool pass() const {
        bool ok = error_count == 0;
        for (const auto& g : groups) ok &= g.ok_mean && g.ok_variance && g.ok_ks;
        for (const auto& s : sticking) ok &= s.ok;
        return ok;
    }
};

inline AnalysisResult analyze_batch(const std::vector<TrialRecord>& records,
                                    const PredictionReport& report, const PerturbationSpec& ps,
                                    double alpha_prime) {
    AnalysisResult res;
    if (records.empty()) return res;
    res.n = records.front().n;
    res.trials = int(records.size());
    for (const auto& rec : records) res.error_count += rec.error.empty() ? 0 : 1;

    auto groups = gamma_statistics(records, report);
    for (const auto& g : groups) {
        AnalysisResult::GroupRow row;
        row.group_id = g.group_id;
        row.alpha = g.alpha;
        row.k = g.k;
        row.samples = g.gamma.size();
        if (g.gamma.size() >= 2) {
            auto m = stats::moments(stats::Sample(g.gamma));
            row.mean = m.mean;
            row.variance = m.variance;
        }
        row.target_variance = g.target_variance;
        if (g.k == 1 && std::isfinite(g.target_variance)) {
            if (g.target_variance > 1e-12) {
                const double sd = std::sqrt(g.target_variance);
                row.ok_mean = std::abs(row.mean) <= 4 * sd / std::sqrt(double(row.samples)) + 0.3;
                row.ok_variance = row.variance >= 0.85 * g.target_variance &&
                                  row.variance <= 1.15 * g.target_variance;
                if (g.standardized.size() >= 10) {
                    row.ks_p = stats::ks_one_sample(stats::Sample(g.standardized),
                                                    [](double x) { return stats::normal_cdf(x); })
                                   .p_value;
                    row.ok_ks = row.ks_p >= 0.01;
                }
            } else {
                row.ok_variance = row.variance <= 1e-9;
            }
        }
        res.groups.push_back(row);
    }

    auto st = sticking_distances(records, ps, report, alpha_prime);
    for (const auto& e : st.entries) {
        AnalysisResult::StickRow row;
        row.spike_index = e.spike_index;
        row.side = e.side;
        row.threshold = e.threshold;
        row.fraction_below = e.fraction_below;
        if (!e.distances.empty()) {
            auto d = e.distances;
            std::sort(d.begin(), d.end());
            row.median = d[d.size() / 2];
        }
        row.ok = e.fraction_below >= 0.95;
        res.sticking.push_back(row);
    }
    return res;
}

/// Splits a mixed-n record stream into per-n batches, in ascending n.
inline std::map<int, std::vector<TrialRecord>> split_by_n(const std::vector<TrialRecord>& records) {
    std::map<int, std::vector<TrialRecord>> out;
    for (const auto& rec : records) out[rec.n].push_back(rec);
    return out;
}

inline void write_summary_csv(const std::vector<AnalysisResult>& results,
                              const std::string& path) {
    io::CsvWriter csv(path);
    csv.row({"n", "trials", "errors", "kind", "id", "alpha_or_side", "k", "mean", "variance",
             "target_variance", "ks_p", "threshold", "median", "fraction_below", "ok"});
    auto num = io::CsvWriter::num;
    for (const auto& res : results) {
        for (const auto& g : res.groups)
            csv.row({std::to_string(res.n), std::to_string(res.trials),
                     std::to_string(res.error_count), "gamma_group", std::to_string(g.group_id),
                     num(g.alpha), std::to_string(g.k), num(g.mean), num(g.variance),
                     num(g.target_variance), num(g.ks_p), "", "",
                     num(double(g.samples)),
                     (g.ok_mean && g.ok_variance && g.ok_ks) ? "1" : "0"});
        for (const auto& s : res.sticking)
            csv.row({std::to_string(res.n), std::to_string(res.trials),
                     std::to_string(res.error_count), "sticking", std::to_string(s.spike_index),
                     std::string(1, s.side), "", "", "", "", "", num(s.threshold), num(s.median),
                     num(s.fraction_below), s.ok ? "1" : "0"});
    }
}

/// Plain x,y series for external plotting: QQ data for singleton groups and
/// sticking distance ECDFs.
inline void write_plot_csvs(const std::vector<TrialRecord>& records,
                            const PredictionReport& report, const PerturbationSpec& ps,
                            double alpha_prime, const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto groups = gamma_statistics(records, report);
    for (const auto& g : groups) {
        if (g.k != 1 || g.standardized.empty()) continue;
        auto v = g.standardized;
        std::sort(v.begin(), v.end());
        io::CsvWriter csv(dir + "/gamma_qq_group" + std::to_string(g.group_id) + ".csv");
        csv.row({"normal_quantile", "standardized_gamma"});
        const std::size_t m = v.size();
        for (std::size_t i = 0; i < m; ++i)
            csv.row({io::CsvWriter::num(stats::normal_quantile((i + 0.5) / double(m))),
                     io::CsvWriter::num(v[i])});
    }
    auto st = sticking_distances(records, ps, report, alpha_prime);
    for (const auto& e : st.entries) {
        if (e.distances.empty()) continue;
        auto d = e.distances;
        std::sort(d.begin(), d.end());
        io::CsvWriter csv(dir + "/sticking_" + e.side + std::to_string(e.spike_index) + ".csv");
        csv.row({"distance", "ecdf"});
        for (std::size_t i = 0; i < d.size(); ++i)
            csv.row({io::CsvWriter::num(d[i]), io::CsvWriter::num((i + 1.0) / double(d.size()))});
    }
}

} // namespace spikesim
