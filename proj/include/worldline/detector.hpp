#pragma once

#include <cmath>
#include <string>

#include "worldline/errors.hpp"
#include "worldline/trajectory.hpp"

namespace wl {

/// Coupling on/off profile s(tau). A ramp of width 0 is a step.
struct SwitchSpec {
    enum class Type { Step, Ramp };
    Type type = Type::Step;
    double tau_on = 0.0;
    double width = 0.0;

    void validate() const {
        if (width < 0.0) throw validation_error("switch.width must be >= 0");
        if (type == Type::Step && width != 0.0) throw validation_error("switch: step takes no width");
    }

    bool is_step() const { return type == Type::Step || width == 0.0; }

    double value(double tau) const {
        if (tau < tau_on) return 0.0;
        if (is_step() || tau >= tau_on + width) return 1.0;
        return 0.5 * (1.0 - std::cos(M_PI * (tau - tau_on) / width));
    }

    /// ds/dtau; zero outside the ramp (the step discontinuity is handled as a
    /// discrete impulse by the forcing assembly, not here).
    double rate(double tau) const {
        if (is_step() || tau < tau_on || tau > tau_on + width) return 0.0;
        return 0.5 * M_PI / width * std::sin(M_PI * (tau - tau_on) / width);
    }
};

inline const char* to_string(SwitchSpec::Type t) {
    return t == SwitchSpec::Type::Step ? "step" : "ramp";
}

/// One detector: an internal oscillator of frequency Omega carried along a
/// worldline, coupled to the field with strength e through the switch.
/// With backreaction_enabled = false the detector no longer sources the
/// field: every kernel with this detector as source is dropped, including
/// its own radiation reaction.
struct DetectorConfig {
    double e = 1.0;
    double omega = 1.0;
    SwitchSpec sw{};
    Trajectory trajectory = Trajectory::make_static();
    bool backreaction_enabled = true;

    void validate() const {
        if (!(omega > 0.0)) throw validation_error("detector.omega must be > 0");
        if (!std::isfinite(e)) throw validation_error("detector.e must be finite");
        sw.validate();
    }
};

}  // namespace wl
