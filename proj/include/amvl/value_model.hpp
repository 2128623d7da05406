#pragma once

#include <algorithm>
#include <cmath>

#include "amvl/config.hpp"
#include "amvl/errors.hpp"
#include "amvl/types.hpp"

namespace amvl {

// Lazy exponential decay: v * e^(-lambda * (t_now - t_last)).
// A regressing clock is a harness bug and must surface, not be clamped.
inline double decay_only(double v, double t_last, double t_now, double lambda) {
    if (t_now < t_last) {
        throw Error(ErrorCode::ClockRegression, "decay over negative interval");
    }
    double out = v * std::exp(-lambda * (t_now - t_last));
    // clamp sub-normals from long idle gaps
    if (out < 1e-300) out = 0.0;
    return out;
}

struct ValueUpdate {
    double value;
    double t_last;
};

// Unified update rule: decay, then event reinforcement, then cap.
//   V <- min(V e^(-lambda dt) + alpha I_access + beta I_contrib, V_max)
// Constant time, no global state; t_last is set to t_now afterwards.
inline ValueUpdate updated_value(double v, double t_last, const UsageEvent& event,
                                 const ValueParams& params) {
    double decayed = decay_only(v, t_last, event.t_now, params.lambda);
    double reinforced = decayed + (event.access ? params.alpha : 0.0) +
                        (event.contrib ? params.beta : 0.0);
    return ValueUpdate{std::min(reinforced, params.v_max), event.t_now};
}

// Static tier mapping used only at item creation (no hysteresis history yet):
// Hot if v >= theta_h_up, Warm if v >= theta_w_up, else Cold.
inline Tier initial_tier(double v, const LifecycleThresholds& t) {
    if (v >= t.theta_h_up) return Tier::Hot;
    if (v >= t.theta_w_up) return Tier::Warm;
    return Tier::Cold;
}

}  // namespace amvl
