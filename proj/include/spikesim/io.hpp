// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikesim/experiments.hpp"

namespace spikesim::io {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

namespace detail {

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& pointer) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok |= (it.key() == k);
        if (!ok) throw ConfigError(pointer + "/" + it.key() + ": unknown key");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

inline LimitLaw parse_limit(const json& j, const std::string& pointer) {
    if (!j.is_object()) throw ConfigError(pointer + ": expected an object");
    reject_unknown_keys(j, {"name", "sigma", "c", "lo", "hi", "atoms"}, pointer);
    const std::string name = j.at("name").get<std::string>();
    if (name == "semicircle") return LimitLaw::semicircle(get_or(j, "sigma", 1.0));
    if (name == "marchenko_pastur") return LimitLaw::marchenko_pastur(j.at("c").get<double>());
    if (name == "uniform")
        return LimitLaw::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (name == "custom_table")
        return LimitLaw::custom_table(j.at("atoms").get<std::vector<double>>());
    throw ConfigError(pointer + "/name: unknown limit law '" + name + "'");
}

inline json limit_to_json(const LimitLaw& law) {
    switch (law.kind()) {
        case LimitLaw::Kind::semicircle: return {{"name", "semicircle"}, {"sigma", law.sigma()}};
        case LimitLaw::Kind::marchenko_pastur:
            return {{"name", "marchenko_pastur"}, {"c", law.ratio()}};
        case LimitLaw::Kind::uniform: return {{"name", "uniform"}, {"lo", law.a()}, {"hi", law.b()}};
        case LimitLaw::Kind::custom_table: return {{"name", "custom_table"}, {"atoms", law.atoms()}};
    }
    return {};
}

} // namespace detail

/// Parses, validates and applies defaults. Unknown keys are rejected with a
/// JSON-pointer style location; missing or mistyped keys surface as config
/// errors too.
inline ExperimentConfig config_from_json(const json& root);

namespace detail {
inline ExperimentConfig config_from_json_impl(const json& root) {
    if (!root.is_object()) throw ConfigError(": config must be a JSON object");
    detail::reject_unknown_keys(root,
                                {"ensemble", "perturbation", "n_values", "trials", "master_seed",
                                 "alpha_prime", "h3a_alpha", "track"},
                                "");
    ExperimentConfig cfg;

    const json& ens = root.at("ensemble");
    detail::reject_unknown_keys(ens, {"kind", "n", "m", "c_ratio", "sigma", "entry_law", "limit"},
                                "/ensemble");
    const std::string kind = ens.at("kind").get<std::string>();
    cfg.ensemble.n = ens.at("n").get<int>();
    if (kind == "wigner") {
        cfg.ensemble.kind = EnsembleSpec::Kind::wigner;
        cfg.ensemble.sigma = detail::get_or(ens, "sigma", 1.0);
        cfg.ensemble.entry_law = EntryLaw::parse(ens.at("entry_law").get<std::string>());
    } else if (kind == "wishart") {
        cfg.ensemble.kind = EnsembleSpec::Kind::wishart;
        if (ens.contains("m"))
            cfg.ensemble.m = ens.at("m").get<int>();
        else if (ens.contains("c_ratio")) {
            const double c = ens.at("c_ratio").get<double>();
            if (!(c > 0 && c < 1)) throw ConfigError("/ensemble/c_ratio: need 0 < c_ratio < 1");
            cfg.ensemble.m = int(std::lround(cfg.ensemble.n / c));
        } else {
            throw ConfigError("/ensemble: wishart requires m or c_ratio");
        }
        cfg.ensemble.entry_law = EntryLaw::parse(ens.at("entry_law").get<std::string>());
    } else if (kind == "iid_diagonal" || kind == "quantile_deterministic") {
        cfg.ensemble.kind = kind == "iid_diagonal" ? EnsembleSpec::Kind::iid_diagonal
                                                   : EnsembleSpec::Kind::quantile_deterministic;
        cfg.ensemble.given_limit = detail::parse_limit(ens.at("limit"), "/ensemble/limit");
    } else {
        throw ConfigError("/ensemble/kind: unknown ensemble '" + kind + "'");
    }

    const json& per = root.at("perturbation");
    detail::reject_unknown_keys(per, {"thetas", "model", "entry_law"}, "/perturbation");
    cfg.perturbation.thetas = per.at("thetas").get<std::vector<double>>();
    for (std::size_t i = 0; i < cfg.perturbation.thetas.size(); ++i) {
        if (cfg.perturbation.thetas[i] == 0)
            throw ConfigError("/perturbation/thetas/" + std::to_string(i) +
                              ": theta must be nonzero");
        if (i > 0 && cfg.perturbation.thetas[i - 1] > cfg.perturbation.thetas[i])
            throw ConfigError("/perturbation/thetas: must be nondecreasing");
    }
    const std::string model = detail::get_or<std::string>(per, "model", "orthonormalised");
    if (model == "iid")
        cfg.perturbation.model = SpikeModel::iid;
    else if (model == "orthonormalised")
        cfg.perturbation.model = SpikeModel::orthonormalised;
    else
        throw ConfigError("/perturbation/model: unknown model '" + model + "'");
    cfg.perturbation.entry_law =
        EntryLaw::parse(detail::get_or<std::string>(per, "entry_law", "gaussian_real"));

    cfg.n_values = detail::get_or(root, "n_values", std::vector<int>{cfg.ensemble.n});
    cfg.trials = detail::get_or(root, "trials", 500);
    cfg.master_seed = detail::get_or<std::uint64_t>(root, "master_seed", 0);
    cfg.alpha_prime = detail::get_or(root, "alpha_prime", 0.3);
    cfg.h3a_alpha = detail::get_or(root, "h3a_alpha", 0.2);
    cfg.track = detail::get_or(root, "track", 5);
    cfg.validate();
    return cfg;
}
} // namespace detail

inline ExperimentConfig config_from_json(const json& root) {
    try {
        return detail::config_from_json_impl(root);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return config_from_json(root);
}

/// Canonical JSON of a config with every default applied; hashing this makes
/// the digest independent of key order and of spelled-out defaults.
inline json canonical_config(const ExperimentConfig& cfg) {
    json ens;
    switch (cfg.ensemble.kind) {
        case EnsembleSpec::Kind::wigner:
            ens = {{"kind", "wigner"},
                   {"n", cfg.ensemble.n},
                   {"sigma", cfg.ensemble.sigma},
                   {"entry_law", cfg.ensemble.entry_law.str()}};
            break;
        case EnsembleSpec::Kind::wishart:
            ens = {{"kind", "wishart"},
                   {"n", cfg.ensemble.n},
                   {"m", cfg.ensemble.m},
                   {"entry_law", cfg.ensemble.entry_law.str()}};
            break;
        case EnsembleSpec::Kind::iid_diagonal:
        case EnsembleSpec::Kind::quantile_deterministic:
            ens = {{"kind", cfg.ensemble.kind == EnsembleSpec::Kind::iid_diagonal
                                ? "iid_diagonal"
                                : "quantile_deterministic"},
                   {"n", cfg.ensemble.n},
                   {"limit", detail::limit_to_json(cfg.ensemble.given_limit)}};
            break;
    }
    json per = {{"thetas", cfg.perturbation.thetas},
                {"model", cfg.perturbation.model == SpikeModel::iid ? "iid" : "orthonormalised"},
                {"entry_law", cfg.perturbation.entry_law.str()}};
    return json{{"ensemble", ens},
                {"perturbation", per},
                {"n_values", cfg.n_values},
                {"trials", cfg.trials},
                {"master_seed", cfg.master_seed},
                {"alpha_prime", cfg.alpha_prime},
                {"h3a_alpha", cfg.h3a_alpha},
                {"track", cfg.track}};
}

/// FNV-1a 64 over the canonical dump.
inline std::string config_hash(const ExperimentConfig& cfg) {
    const std::string dump = canonical_config(cfg).dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline void append_array(std::string& out, const char* name, const std::vector<double>& v,
                         bool comma = true) {
    char buf[32];
    out += '"';
    out += name;
    out += "\":[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        out += buf;
    }
    out += ']';
    if (comma) out += ',';
}

} // namespace detail

/// One record per line; floats carry 17 significant digits so parsing the
/// line back reproduces them exactly.
inline std::string record_to_json_line(const TrialRecord& rec) {
    std::string out = "{";
    out += "\"trial_id\":" + std::to_string(rec.trial_id) + ",";
    out += "\"n\":" + std::to_string(rec.n) + ",";
    out += "\"seed_stream_id\":" + std::to_string(rec.seed_stream_id) + ",";
    detail::append_array(out, "unperturbed_low", rec.unperturbed_low);
    detail::append_array(out, "unperturbed_high", rec.unperturbed_high);
    detail::append_array(out, "deformed_low", rec.deformed_low);
    detail::append_array(out, "deformed_high", rec.deformed_high);
    detail::append_array(out, "gamma", rec.gamma);
    detail::append_array(out, "sticking", rec.sticking);
    out += "\"error\":" + json(rec.error).dump() + "}";
    return out;
}

inline TrialRecord record_from_json(const json& j) {
    TrialRecord rec;
    rec.trial_id = j.at("trial_id").get<int>();
    rec.n = j.at("n").get<int>();
    rec.seed_stream_id = j.at("seed_stream_id").get<std::uint64_t>();
    rec.unperturbed_low = j.at("unperturbed_low").get<std::vector<double>>();
    rec.unperturbed_high = j.at("unperturbed_high").get<std::vector<double>>();
    rec.deformed_low = j.at("deformed_low").get<std::vector<double>>();
    rec.deformed_high = j.at("deformed_high").get<std::vector<double>>();
    rec.gamma = j.at("gamma").get<std::vector<double>>();
    rec.sticking = j.at("sticking").get<std::vector<double>>();
    rec.error = j.at("error").get<std::string>();
    return rec;
}

inline void write_jsonl(const std::vector<TrialRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path + ": cannot open for writing");
    for (const auto& rec : records) out << record_to_json_line(rec) << '\n';
}

inline std::vector<TrialRecord> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(path + ": cannot open records file");
    std::vector<TrialRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(record_from_json(json::parse(line)));
    }
    return out;
}

/// Serializable prediction report.
inline json report_to_json(const PredictionReport& rep) {
    json spikes = json::array();
    for (const auto& sp : rep.spikes) {
        json s = {{"theta", sp.theta},
                  {"class", to_string(sp.cls)},
                  {"critical", sp.critical_flag},
                  {"rho", sp.rho},
                  {"group_id", sp.group_id}};
        if (std::isfinite(sp.c_alpha)) s["c_alpha"] = sp.c_alpha;
        if (std::isfinite(sp.gauss_variance)) s["gauss_variance"] = sp.gauss_variance;
        spikes.push_back(s);
    }
    json groups = json::array();
    for (const auto& g : rep.groups)
        groups.push_back({{"alpha", g.alpha}, {"k", g.k}, {"rho", g.rho}, {"c_alpha", g.c_alpha}});
    return json{{"theta_low", rep.theta_low},
                {"theta_high", rep.theta_high},
                {"p_minus", rep.p_minus},
                {"p_plus", rep.p_plus},
                {"spikes", spikes},
                {"groups", groups}};
}

inline PredictionReport report_from_json(const json& j) {
    PredictionReport rep;
    rep.theta_low = j.at("theta_low").get<double>();
    rep.theta_high = j.at("theta_high").get<double>();
    rep.p_minus = j.at("p_minus").get<int>();
    rep.p_plus = j.at("p_plus").get<int>();
    for (const auto& s : j.at("spikes")) {
        SpikePrediction sp;
        sp.theta = s.at("theta").get<double>();
        const std::string cls = s.at("class").get<std::string>();
        for (auto c : {SpikeClass::deviates_left, SpikeClass::deviates_right,
                       SpikeClass::sticks_left, SpikeClass::sticks_right, SpikeClass::critical})
            if (cls == to_string(c)) sp.cls = c;
        sp.critical_flag = s.at("critical").get<bool>();
        sp.rho = s.at("rho").get<double>();
        sp.group_id = s.at("group_id").get<int>();
        if (s.contains("c_alpha")) sp.c_alpha = s.at("c_alpha").get<double>();
        if (s.contains("gauss_variance")) sp.gauss_variance = s.at("gauss_variance").get<double>();
        rep.spikes.push_back(sp);
    }
    for (const auto& g : j.at("groups")) {
        SpikeGroup gr;
        gr.alpha = g.at("alpha").get<double>();
        gr.k = g.at("k").get<int>();
        gr.rho = g.at("rho").get<double>();
        gr.c_alpha = g.at("c_alpha").get<double>();
        rep.groups.push_back(gr);
    }
    return rep;
}

inline json make_manifest(const ExperimentConfig& cfg, const std::string& outdir,
                          std::int64_t created_unix) {
    return json{{"config", canonical_config(cfg)},
                {"config_hash", config_hash(cfg)},
                {"tool_version", kToolVersion},
                {"master_seed", cfg.master_seed},
                {"created_unix", created_unix},
                {"outputs",
                 {{"records", outdir + "/trials.jsonl"},
                  {"prediction", outdir + "/prediction.json"},
                  {"summary", outdir + "/summary.csv"}}}};
}

/// Simple CSV writer: header row, comma separated, '.' decimal.
class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error(path + ": cannot open for writing");
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }
    static std::string num(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

  private:
    std::ofstream out_;
};

} // namespace spikesim::io
