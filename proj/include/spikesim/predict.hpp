// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "spikesim/perturb.hpp"
#include "spikesim/stieltjes.hpp"

namespace spikesim {

enum class SpikeClass { deviates_left, deviates_right, sticks_left, sticks_right, critical };

inline const char* to_string(SpikeClass c) {
    switch (c) {
        case SpikeClass::deviates_left: return "deviates_left";
        case SpikeClass::deviates_right: return "deviates_right";
        case SpikeClass::sticks_left: return "sticks_left";
        case SpikeClass::sticks_right: return "sticks_right";
        case SpikeClass::critical: return "critical";
    }
    return "?";
}

/// How the diagonal resolvent statistic l(z) behaves for the matrices the
/// prediction targets. Delocalized ensembles (Wigner, Wishart) have resolvent
/// diagonals concentrating on their trace mean; diagonal realizations
/// (quantile or i.i.d. spectra) keep the full spread of 1/(z - lambda_i).
enum class ResolventProfile { delocalized, spectral_atoms };

inline double resolvent_profile_l(ResolventProfile profile, const LimitLaw& law, double rho_value,
                                  SpikeModel model) {
    const double g = law.stieltjes(rho_value);
    const double gp = law.stieltjes_prime(rho_value);
    if (profile == ResolventProfile::delocalized)
        return model == SpikeModel::iid ? g * g : 0.0;
    return model == SpikeModel::iid ? -gp : -gp - g * g;
}

struct SpikePrediction {
    double theta = 0;
    SpikeClass cls = SpikeClass::critical;
    bool critical_flag = false;
    double rho = 0;              // outlier location or edge
    double c_alpha = std::numeric_limits<double>::quiet_NaN();
    double gauss_variance = std::numeric_limits<double>::quiet_NaN(); // k_j = 1 only
    int group_id = -1;           // index into groups for deviating spikes
};

struct SpikeGroup {
    double alpha = 0; // common theta value
    int k = 0;        // multiplicity
    double rho = 0;
    double c_alpha = 0;
};

struct PredictionReport {
    double theta_low = 0, theta_high = 0;
    std::vector<SpikePrediction> spikes; // in theta order
    std::vector<SpikeGroup> groups;      // distinct deviating alphas, ascending
    int p_minus = 0, p_plus = 0;
};

/// Per-spike limit classification, outlier locations, fluctuation scales and
/// limiting Gaussian variances for the deformation described by `spec` on a
/// matrix with limiting law `law`.
inline PredictionReport predict(const LimitLaw& law, const PerturbationSpec& spec,
                                ResolventProfile profile = ResolventProfile::delocalized) {
    spec.validate();
    PredictionReport rep;
    rep.theta_low = law.theta_low();
    rep.theta_high = law.theta_high();
    const double kappa4 = spec.entry_law.kappa4();
    const bool real_field = spec.entry_law.field() == Field::real;

    for (double theta : spec.thetas) {
        SpikePrediction p;
        p.theta = theta;
        const RhoResult r = rho(law, theta);
        p.rho = r.value;
        p.critical_flag = r.critical;
        if (r.critical)
            p.cls = SpikeClass::critical;
        else if (r.deviates)
            p.cls = theta > 0 ? SpikeClass::deviates_right : SpikeClass::deviates_left;
        else
            p.cls = theta > 0 ? SpikeClass::sticks_right : SpikeClass::sticks_left;
        if (r.deviates && !r.critical) {
            p.c_alpha = fluctuation_scale(law, theta, spec.model);
            if (theta < 0)
                rep.p_minus++;
            else
                rep.p_plus++;
        }
        rep.spikes.push_back(p);
    }

    // distinct deviating values with multiplicities
    for (std::size_t i = 0; i < rep.spikes.size(); ++i) {
        const auto& p = rep.spikes[i];
        if (!(p.cls == SpikeClass::deviates_left || p.cls == SpikeClass::deviates_right))
            continue;
        if (!rep.groups.empty() && rep.groups.back().alpha == p.theta) {
            rep.groups.back().k++;
        } else {
            rep.groups.push_back({p.theta, 1, p.rho, p.c_alpha});
        }
        rep.spikes[i].group_id = int(rep.groups.size()) - 1;
    }

    // limiting variance of gamma for singleton groups: 2 c^2 (real) or c^2
    // (complex) plus the fourth-cumulant addend
    for (auto& p : rep.spikes) {
        if (p.group_id < 0) continue;
        if (rep.groups[p.group_id].k != 1) continue;
        const double gp = law.stieltjes_prime(p.rho);
        const double base = (real_field ? 2.0 : 1.0) * p.c_alpha * p.c_alpha;
        const double l = resolvent_profile_l(profile, law, p.rho, spec.model);
        p.gauss_variance = base + kappa4_correction(l, kappa4, gp);
    }
    return rep;
}

} // namespace spikesim
