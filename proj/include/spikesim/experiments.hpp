// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "spikesim/ensembles.hpp"
#include "spikesim/errors.hpp"
#include "spikesim/perturb.hpp"
#include "spikesim/predict.hpp"
#include "spikesim/rng.hpp"
#include "spikesim/secular.hpp"
#include "spikesim/stats.hpp"

extern "C" void openblas_set_num_threads(int);

namespace spikesim {

/// Keeps BLAS from spawning its own threads: trial-level parallelism owns
/// the cores, and results must not depend on the worker count.
inline void ensure_single_threaded_blas() {
    static const bool once = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)once;
}

struct ExperimentConfig {
    EnsembleSpec ensemble;
    PerturbationSpec perturbation;
    std::vector<int> n_values;
    int trials = 500;
    std::uint64_t master_seed = 0;
    double alpha_prime = 0.3; // sticking exponent alpha'
    double h3a_alpha = 0.2;   // m_n = ceil(n^alpha)
    int track = 5;            // recorded extreme indices per side

    void validate() const {
        ensemble.validate();
        perturbation.validate();
        if (trials < 1) throw ConfigError("trials >= 1 required");
        if (n_values.empty()) throw ConfigError("n_values must be nonempty");
        if (!(alpha_prime > h3a_alpha)) throw ConfigError("alpha_prime must exceed h3a_alpha");
        if (!(alpha_prime > 0 && alpha_prime < 1)) throw ConfigError("alpha_prime in (0,1)");
        if (!(h3a_alpha > 0 && h3a_alpha < 1)) throw ConfigError("h3a_alpha in (0,1)");
        if (track < 1) throw ConfigError("track >= 1 required");
        for (int n : n_values) {
            if (n < 1) throw ConfigError("n >= 1 required");
            if (track + perturbation.r() > n) throw ConfigError("track + r must not exceed n");
            if (perturbation.r() > n) throw ConfigError("r <= n required");
        }
    }

    ResolventProfile resolvent_profile() const {
        return (ensemble.kind == EnsembleSpec::Kind::wigner ||
                ensemble.kind == EnsembleSpec::Kind::wishart)
                   ? ResolventProfile::delocalized
                   : ResolventProfile::spectral_atoms;
    }
};

/// One Monte Carlo trial. Tracked arrays hold track + r extreme eigenvalues
/// per side (ascending), wide enough for every sticking window.
struct TrialRecord {
    int trial_id = 0;
    int n = 0;
    std::uint64_t seed_stream_id = 0;
    std::vector<double> unperturbed_low, unperturbed_high;
    std::vector<double> deformed_low, deformed_high;
    std::vector<double> gamma;    // rescaled deviating fluctuations, bottom block first
    std::vector<double> sticking; // min-window edge distances, low-side spikes first
    std::string error;            // nonempty marks a failed trial
};

struct RunResult {
    ExperimentConfig config;
    PredictionReport report;
    std::vector<TrialRecord> records; // sorted by (n, trial_id)
    int error_count = 0;
};

namespace detail {

inline std::uint64_t stream_id(std::uint64_t seed, int n, int t) {
    return rng::mix64(seed ^ rng::mix64(std::uint64_t(n) ^ rng::mix64(std::uint64_t(t) + 1)));
}

/// Fills gamma and sticking fields from the tracked eigenvalue arrays.
inline void fill_statistics(TrialRecord& rec, const PredictionReport& rep, int r, int r0,
                            double alpha_prime) {
    const int n = rec.n;
    const int p_minus = rep.p_minus, p_plus = rep.p_plus;
    const int te = int(rec.deformed_low.size());
    const double sq = std::sqrt(double(n));

    // gamma: the lowest p_- deformed eigenvalues against their rho
    // targets, then the top block
    for (int i = 1; i <= p_minus; ++i)
        rec.gamma.push_back(sq * (rec.deformed_low[i - 1] - rep.spikes[i - 1].rho));
    for (int i = p_minus + 1; i <= p_minus + p_plus; ++i) {
        // deformed index n - (p_-+p_+) + i, theta index r - (p_-+p_+) + i
        const int top_pos = te - (p_minus + p_plus) + i - 1; // 0-based in deformed_high
        const int theta_pos = r - (p_minus + p_plus) + i - 1;
        rec.gamma.push_back(sq * (rec.deformed_high[top_pos] - rep.spikes[theta_pos].rho));
    }

    // sticking: for spike i in I_a = (p_-, r0], the deformed eigenvalue is
    // lambda~_i and the window is 1 <= k <= i + r - r0
    for (int i = p_minus + 1; i <= r0; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= i + r - r0 && k <= int(rec.unperturbed_low.size()); ++k)
            best = std::min(best,
                            std::abs(rec.deformed_low[i - 1] - rec.unperturbed_low[k - 1]));
        rec.sticking.push_back(best);
    }
    // for spike i in I_b = (r0, r - p_+], deformed lambda~_{n-r+i}, window
    // n - r + i - r0 <= k <= n
    for (int i = r0 + 1; i <= r - p_plus; ++i) {
        const int def_pos = te - r + i - 1;
        double best = std::numeric_limits<double>::infinity();
        const int kmax_off = r - i + r0; // offsets from the top: k = n - off
        for (int off = 0; off <= kmax_off && off < int(rec.unperturbed_high.size()); ++off)
            best = std::min(best, std::abs(rec.deformed_high[def_pos] -
                                           rec.unperturbed_high[int(rec.unperturbed_high.size()) -
                                                                1 - off]));
        rec.sticking.push_back(best);
    }
    (void)alpha_prime;
}

template <class S>
void run_one_trial(const ExperimentConfig& cfg, const PredictionReport& rep, int n, int t,
                   const SpectrumVector* shared_spectrum, TrialRecord& rec) {
    const int r = cfg.perturbation.r();
    const int r0 = cfg.perturbation.r0();
    const int te = cfg.track + r;
    auto matrix_stream = rng::trial_stream(cfg.master_seed, n, t, rng::Purpose::matrix_entries);
    auto spike_stream = rng::trial_stream(cfg.master_seed, n, t, rng::Purpose::spike_entries);

    auto slice_low = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin(), v.begin() + std::min<std::size_t>(te, v.size()));
    };
    auto slice_high = [&](const std::vector<double>& v) {
        return std::vector<double>(v.end() - std::min<std::size_t>(te, v.size()), v.end());
    };

    const bool diagonal_kind = cfg.ensemble.kind == EnsembleSpec::Kind::iid_diagonal ||
                               cfg.ensemble.kind == EnsembleSpec::Kind::quantile_deterministic;

    if (diagonal_kind) {
        SpectrumVector spec;
        if (cfg.ensemble.kind == EnsembleSpec::Kind::quantile_deterministic)
            spec = *shared_spectrum;
        else
            spec = sample_iid_diagonal(cfg.ensemble.given_limit, n, matrix_stream);
        rec.unperturbed_low = slice_low(spec.values);
        rec.unperturbed_high = slice_high(spec.values);
        if (r == 0) {
            rec.deformed_low = rec.unperturbed_low;
            rec.deformed_high = rec.unperturbed_high;
        } else {
            auto spikes = sample_spikes<S>(n, cfg.perturbation, spike_stream);
            auto R = build_deformation(spikes, cfg.perturbation);
            if (r == 1) {
                auto sys = make_secular_system(spec, R);
                auto def = 2 * te <= n ? solve_rank_one(sys, te, te) : solve_rank_one(sys);
                rec.deformed_low = slice_low(def.values);
                rec.deformed_high = slice_high(def.values);
            } else {
                auto X = SymmetricMatrix<S>::diagonal(spec.values);
                auto def = deformed_spectrum_dense(X, R);
                rec.deformed_low = slice_low(def.values);
                rec.deformed_high = slice_high(def.values);
            }
        }
    } else {
        SymmetricMatrix<S> X =
            cfg.ensemble.kind == EnsembleSpec::Kind::wigner
                ? sample_wigner<S>(n, cfg.ensemble.sigma, cfg.ensemble.entry_law, matrix_stream)
                : sample_wishart<S>(n, cfg.ensemble.m, cfg.ensemble.entry_law, matrix_stream);
        if (r == 0) {
            auto spec = symmetric_eigenvalues(X);
            rec.unperturbed_low = slice_low(spec.values);
            rec.unperturbed_high = slice_high(spec.values);
            rec.deformed_low = rec.unperturbed_low;
            rec.deformed_high = rec.unperturbed_high;
        } else if (r == 1) {
            auto ed = symmetric_eigh(X);
            rec.unperturbed_low = slice_low(ed.values);
            rec.unperturbed_high = slice_high(ed.values);
            auto spikes = sample_spikes<S>(n, cfg.perturbation, spike_stream);
            auto R = build_deformation(spikes, cfg.perturbation);
            auto sys = make_secular_system(ed, R);
            auto def = 2 * te <= n ? solve_rank_one(sys, te, te) : solve_rank_one(sys);
            rec.deformed_low = slice_low(def.values);
            rec.deformed_high = slice_high(def.values);
        } else {
            auto spec = symmetric_eigenvalues(X);
            rec.unperturbed_low = slice_low(spec.values);
            rec.unperturbed_high = slice_high(spec.values);
            auto spikes = sample_spikes<S>(n, cfg.perturbation, spike_stream);
            auto R = build_deformation(spikes, cfg.perturbation);
            auto def = deformed_spectrum_dense(X, R);
            rec.deformed_low = slice_low(def.values);
            rec.deformed_high = slice_high(def.values);
        }
    }
    fill_statistics(rec, rep, r, r0, cfg.alpha_prime);
}

} // namespace detail

/// Runs trials for every n in the config. Trial t of size n draws its
/// entries from streams keyed by (master_seed, n, t, purpose), so the output
/// is a pure function of the config regardless of the worker count.
inline RunResult run_trials(ExperimentConfig cfg, int threads = 0) {
    cfg.validate();
    std::sort(cfg.n_values.begin(), cfg.n_values.end()); // records sort by (n, trial)
    ensure_single_threaded_blas();
    RunResult out;
    out.config = cfg;
    out.report = predict(cfg.ensemble.limit(), cfg.perturbation, cfg.resolvent_profile());

    const bool complex_run =
        cfg.ensemble.entry_law.field() == Field::complex ||
        cfg.perturbation.entry_law.field() == Field::complex;

    if (threads <= 0) threads = int(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;

    for (int n : cfg.n_values) {
        SpectrumVector shared;
        if (cfg.ensemble.kind == EnsembleSpec::Kind::quantile_deterministic)
            shared = quantile_spectrum(cfg.ensemble.given_limit, n);

        std::vector<TrialRecord> batch(cfg.trials);
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (;;) {
                const int t = next.fetch_add(1);
                if (t >= cfg.trials) break;
                TrialRecord& rec = batch[t];
                rec.trial_id = t;
                rec.n = n;
                rec.seed_stream_id = detail::stream_id(cfg.master_seed, n, t);
                try {
                    if (complex_run)
                        detail::run_one_trial<std::complex<double>>(cfg, out.report, n, t,
                                                                    &shared, rec);
                    else
                        detail::run_one_trial<double>(cfg, out.report, n, t, &shared, rec);
                } catch (const std::exception& e) {
                    rec.error = e.what();
                }
            }
        };
        std::vector<std::thread> pool;
        const int nw = std::min(threads, cfg.trials);
        pool.reserve(nw);
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        for (auto& rec : batch) {
            if (!rec.error.empty()) out.error_count++;
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

/// Per-group fluctuation samples extracted from a run.
struct FluctuationSample {
    int group_id = -1;
    double alpha = 0;
    int k = 0;
    double target_variance = std::numeric_limits<double>::quiet_NaN(); // k = 1 only
    std::vector<double> gamma;        // pooled across trials
    std::vector<double> standardized; // gamma / sqrt(target_variance), k = 1 only
    std::vector<double> gaps;         // per-trial top-bottom gap, k = 2 only
};

inline std::vector<FluctuationSample> gamma_statistics(const std::vector<TrialRecord>& records,
                                                       const PredictionReport& rep) {
    std::vector<FluctuationSample> out;
    if (rep.groups.empty()) return out;
    const int p_total = rep.p_minus + rep.p_plus;
    // gamma index of each deviating spike, in the record's gamma ordering
    std::vector<std::vector<int>> group_positions(rep.groups.size());
    {
        int next_low = 0, next_high = rep.p_minus;
        for (const auto& sp : rep.spikes) {
            if (sp.group_id < 0) continue;
            if (sp.cls == SpikeClass::deviates_left)
                group_positions[sp.group_id].push_back(next_low++);
            else
                group_positions[sp.group_id].push_back(next_high++);
        }
    }
    for (std::size_t g = 0; g < rep.groups.size(); ++g) {
        FluctuationSample fs;
        fs.group_id = int(g);
        fs.alpha = rep.groups[g].alpha;
        fs.k = rep.groups[g].k;
        for (const auto& sp : rep.spikes)
            if (sp.group_id == int(g) && rep.groups[g].k == 1) fs.target_variance = sp.gauss_variance;
        for (const auto& rec : records) {
            if (!rec.error.empty()) continue;
            if (int(rec.gamma.size()) != p_total) continue;
            for (int pos : group_positions[g]) fs.gamma.push_back(rec.gamma[pos]);
            if (fs.k == 2)
                fs.gaps.push_back(rec.gamma[group_positions[g][1]] -
                                  rec.gamma[group_positions[g][0]]);
        }
        if (fs.k == 1 && fs.target_variance > 0)
            for (double gm : fs.gamma) fs.standardized.push_back(gm / std::sqrt(fs.target_variance));
        out.push_back(std::move(fs));
    }
    return out;
}

/// Min-window sticking distances per sticking spike index, with the fraction
/// below n^(alpha' - 1).
struct StickingSummary {
    struct Entry {
        int spike_index = 0; // 1-based index into thetas
        char side = 'b';
        std::vector<double> distances;
        double threshold = 0;
        double fraction_below = 0;
    };
    std::vector<Entry> entries;
};

inline StickingSummary sticking_distances(const std::vector<TrialRecord>& records,
                                          const PerturbationSpec& ps,
                                          const PredictionReport& rep, double alpha_prime) {
    StickingSummary out;
    const int r = ps.r(), r0 = ps.r0();
    std::vector<std::pair<int, char>> layout;
    for (int i = rep.p_minus + 1; i <= r0; ++i) layout.push_back({i, 'a'});
    for (int i = r0 + 1; i <= r - rep.p_plus; ++i) layout.push_back({i, 'b'});
    out.entries.resize(layout.size());
    if (records.empty()) return out;
    for (std::size_t e = 0; e < layout.size(); ++e) {
        auto& entry = out.entries[e];
        entry.spike_index = layout[e].first;
        entry.side = layout[e].second;
    }
    for (const auto& rec : records) {
        if (!rec.error.empty()) continue;
        if (rec.sticking.size() != layout.size())
            throw InsufficientTracking("sticking_distances: record layout mismatch");
        for (std::size_t e = 0; e < layout.size(); ++e)
            out.entries[e].distances.push_back(rec.sticking[e]);
    }
    for (auto& entry : out.entries) {
        if (entry.distances.empty()) continue;
        // threshold depends on n; assume a single n per record batch
        const double n = double(records.front().n);
        entry.threshold = std::pow(n, alpha_prime - 1.0);
        int below = 0;
        for (double d : entry.distances) below += (d <= entry.threshold);
        entry.fraction_below = double(below) / double(entry.distances.size());
    }
    return out;
}

/// Exact-localization distances: the deformed eigenvalue at offset j from
/// the top (skipping the p_+ outliers) against the unperturbed one at offset
/// j, i.e. |lambda~_{n-(p_+ + j)} - lambda_{n-j}|; mirrored on the low side.
inline std::vector<double> edge_pair_distances(const std::vector<TrialRecord>& records,
                                               const PredictionReport& rep, char side, int offset) {
    std::vector<double> out;
    for (const auto& rec : records) {
        if (!rec.error.empty()) continue;
        if (side == 'b') {
            const int def_pos = int(rec.deformed_high.size()) - 1 - rep.p_plus - offset;
            const int unp_pos = int(rec.unperturbed_high.size()) - 1 - offset;
            if (def_pos < 0 || unp_pos < 0)
                throw InsufficientTracking("edge_pair_distances: offset beyond tracked range");
            out.push_back(std::abs(rec.deformed_high[def_pos] - rec.unperturbed_high[unp_pos]));
        } else {
            const int def_pos = rep.p_minus + offset;
            const int unp_pos = offset;
            if (def_pos >= int(rec.deformed_low.size()) || unp_pos >= int(rec.unperturbed_low.size()))
                throw InsufficientTracking("edge_pair_distances: offset beyond tracked range");
            out.push_back(std::abs(rec.deformed_low[def_pos] - rec.unperturbed_low[unp_pos]));
        }
    }
    return out;
}

/// Hypothesis check: sqrt(n) (G_emp(z) - G(z)) should vanish along n.
struct H2Report {
    struct Row {
        int n = 0;
        double z = 0;
        double dev = 0; // sqrt(n) * (G_emp - G)
    };
    std::vector<Row> rows;
    std::map<double, bool> verdict_per_z;
    bool pass = false;
};

inline H2Report check_h2(const std::map<int, SpectrumVector>& spectra, const LimitLaw& law,
                         const std::vector<double>& z_points, double tol = 0.05) {
    H2Report rep;
    for (double z : z_points) {
        std::vector<double> devs;
        for (const auto& [n, spec] : spectra) {
            const double d = std::sqrt(double(n)) * (stieltjes_empirical(spec, z) - law.stieltjes(z));
            rep.rows.push_back({n, z, d});
            devs.push_back(d);
        }
        bool all_small = true;
        for (double d : devs) all_small &= std::abs(d) <= tol;
        const bool decays = std::abs(devs.back()) < std::abs(devs.front()) / 2;
        rep.verdict_per_z[z] = all_small || decays;
    }
    rep.pass = !rep.verdict_per_z.empty();
    for (auto& [z, ok] : rep.verdict_per_z) rep.pass &= ok;
    return rep;
}

/// Edge-regularity sums behind the sticking behaviour. Side 'a' checks the
/// lower edge with gaps lambda_p - lambda_i; side 'b' mirrors at the top.
/// m_n defaults to ceil(n^alpha) + p: the hypothesis allows any O(n^alpha)
/// sequence, and the excluded window must clear the reference index p or the
/// sums hit a zero gap.
struct H3aReport {
    int m_n = 0;
    char side = 'a';
    double sum1 = 0, sum2 = 0, sum4 = 0;
    double eta2_hat = 0, eta4_hat = 0;
    bool pass_sum1 = false, pass_sum2 = false, pass_sum4 = false;
    bool pass() const { return pass_sum1 && pass_sum2 && pass_sum4; }
};

inline H3aReport check_h3a(const SpectrumVector& spectrum, int p, double alpha, char side,
                           const LimitLaw& law, int m_override = 0) {
    const int n = spectrum.n();
    H3aReport rep;
    rep.side = side;
    rep.m_n = m_override > 0 ? m_override : int(std::ceil(std::pow(double(n), alpha))) + p;
    if (p + rep.m_n >= n) throw ConfigError("check_h3a: p + m_n must be below n");
    const auto gap = [&](int i) { // 1-based i > m_n
        if (side == 'a') return spectrum.values[p - 1] - spectrum.values[i - 1];
        return spectrum.values[n - p] - spectrum.values[n - i];
    };
    double s1 = 0, s2 = 0, s4 = 0;
    bool singular = false;
    for (int i = rep.m_n + 1; i <= n; ++i) {
        const double g = gap(i);
        if (g == 0) {
            singular = true;
            continue;
        }
        s1 += 1.0 / g;
        s2 += 1.0 / (g * g);
        s4 += 1.0 / (g * g * g * g);
    }
    if (singular) {
        s2 = std::numeric_limits<double>::infinity();
        s4 = std::numeric_limits<double>::infinity();
    }
    rep.sum1 = s1 / n;
    rep.sum2 = s2;
    rep.sum4 = s4;
    const double logn = std::log(double(n));
    rep.eta2_hat = 2.0 - std::log(rep.sum2) / logn;
    rep.eta4_hat = 4.0 - std::log(rep.sum4) / logn;
    if (side == 'a') {
        const double tl = law.theta_low();
        rep.pass_sum1 = tl == 0.0 ? true : rep.sum1 >= 1.0 / tl - 0.05;
    } else {
        const double th = law.theta_high();
        rep.pass_sum1 = th == 0.0 ? true : rep.sum1 <= 1.0 / th + 0.05;
    }
    rep.pass_sum2 = rep.eta2_hat >= 0.05;
    rep.pass_sum4 = rep.eta4_hat >= 0.05;
    return rep;
}

/// Quadratic-form CLT experiment: empirical variance of
/// sqrt(n)(<u, A u> - Tr A / n) against 2 sigma^2 + kappa4 omega (real) or
/// sigma^2 + kappa4 omega (complex).
struct QuadformResult {
    double empirical_variance = 0;
    double predicted_variance = 0;
    double mean = 0;
};

template <class S>
QuadformResult quadform_clt(const Matrix<S>& A, const EntryLaw& law, int trials,
                            std::uint64_t seed) {
    const int n = A.rows();
    bool diagonal = true;
    for (int j = 0; j < n && diagonal; ++j)
        for (int i = 0; i < n; ++i)
            if (i != j && scalar_traits<S>::abs2(A(i, j)) != 0.0) {
                diagonal = false;
                break;
            }
    double trace = 0, frob2 = 0, diag2 = 0;
    for (int j = 0; j < n; ++j) {
        trace += scalar_traits<S>::real(A(j, j));
        diag2 += scalar_traits<S>::abs2(A(j, j));
        for (int i = 0; i < n; ++i) frob2 += scalar_traits<S>::abs2(A(i, j));
    }
    const double sigma2 = frob2 / n, omega = diag2 / n;
    const bool real_field = law.field() == Field::real;
    QuadformResult out;
    out.predicted_variance = (real_field ? 2.0 : 1.0) * sigma2 + law.kappa4() * omega;

    double m1 = 0, m2 = 0;
    std::vector<S> x(n), ax(n);
    for (int t = 0; t < trials; ++t) {
        rng::Stream s(seed, 91, std::uint64_t(t));
        for (auto& v : x) v = detail::sample_entry<S>(law, s);
        double q = 0;
        if (diagonal) {
            for (int i = 0; i < n; ++i)
                q += scalar_traits<S>::real(scalar_traits<S>::conj(x[i]) * A(i, i) * x[i]);
        } else {
            matvec(A, x.data(), ax.data());
            for (int i = 0; i < n; ++i)
                q += scalar_traits<S>::real(scalar_traits<S>::conj(x[i]) * ax[i]);
        }
        const double v = (q - trace) / std::sqrt(double(n));
        m1 += v;
        m2 += v * v;
    }
    m1 /= trials;
    out.mean = m1;
    out.empirical_variance = m2 / trials - m1 * m1;
    return out;
}

/// Tail exceedance table for <g, A g> around its mean, with the fitted
/// constant of the bound 4 exp(-c min(delta/C, delta^2/C^2)), C^2 = Tr AA*.
struct ConcentrationTable {
    std::vector<double> deltas;
    std::vector<double> exceedance;
    double c_fitted = 0;
    double big_c = 0;
};

template <class S>
ConcentrationTable concentration_check(const Matrix<S>& A, const EntryLaw& law, int trials,
                                       const std::vector<double>& delta_grid,
                                       std::uint64_t seed) {
    const int n = A.rows();
    double trace = 0, frob2 = 0;
    for (int j = 0; j < n; ++j) {
        trace += scalar_traits<S>::real(A(j, j));
        for (int i = 0; i < n; ++i) frob2 += scalar_traits<S>::abs2(A(i, j));
    }
    ConcentrationTable out;
    out.big_c = std::sqrt(frob2);
    out.deltas = delta_grid;
    out.exceedance.assign(delta_grid.size(), 0.0);
    std::vector<S> x(n), ax(n);
    for (int t = 0; t < trials; ++t) {
        rng::Stream s(seed, 92, std::uint64_t(t));
        for (auto& v : x) v = detail::sample_entry<S>(law, s);
        matvec(A, x.data(), ax.data());
        double q = 0;
        for (int i = 0; i < n; ++i)
            q += scalar_traits<S>::real(scalar_traits<S>::conj(x[i]) * ax[i]);
        const double dev = std::abs(q - trace);
        for (std::size_t k = 0; k < delta_grid.size(); ++k)
            if (dev > delta_grid[k]) out.exceedance[k] += 1.0;
    }
    std::vector<double> cs;
    for (std::size_t k = 0; k < delta_grid.size(); ++k) {
        out.exceedance[k] /= trials;
        if (out.exceedance[k] > 0 && out.exceedance[k] < 1) {
            const double shape =
                std::min(delta_grid[k] / out.big_c,
                         delta_grid[k] * delta_grid[k] / (out.big_c * out.big_c));
            if (shape > 0) cs.push_back(-std::log(out.exceedance[k] / 4.0) / shape);
        }
    }
    if (!cs.empty()) {
        std::sort(cs.begin(), cs.end());
        out.c_fitted = cs[cs.size() / 2];
    }
    return out;
}

/// Distribution of sqrt(n) |V^n - I|_inf over trials, per n.
inline std::map<int, std::vector<double>> gram_convergence(const EntryLaw& law,
                                                           const std::vector<int>& n_values,
                                                           int r, int trials,
                                                           std::uint64_t seed) {
    std::map<int, std::vector<double>> out;
    for (int n : n_values) {
        auto& samples = out[n];
        for (int t = 0; t < trials; ++t) {
            rng::Stream s(seed, 93, std::uint64_t(n), std::uint64_t(t));
            std::vector<std::vector<double>> raw(r, std::vector<double>(n));
            for (auto& v : raw)
                for (double& x : v) x = law.sample_real(s);
            Matrix<double> V(r, r);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j) V(i, j) = inner(raw[i], raw[j]) / double(n);
            double worst = 0;
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j)
                    worst = std::max(worst, std::abs(V(i, j) - (i == j ? 1.0 : 0.0)));
            samples.push_back(std::sqrt(double(n)) * worst);
        }
    }
    return out;
}

} // namespace spikesim
