#include "dotcav/types.hpp"

#include "dotcav/errors.hpp"

namespace dotcav {

void validate_linecut(const LineCut& lc) {
    if (lc.eps0_uev.size() != lc.iq_volts.size() ||
        lc.eps0_hz.size() != lc.iq_volts.size()) {
        throw ValidationError("line cut arrays must have equal length");
    }
    if (lc.eps0_uev.empty()) {
        throw ValidationError("line cut must be nonempty");
    }
    for (std::size_t i = 1; i < lc.eps0_uev.size(); ++i) {
        const double step = lc.eps0_uev[i] - lc.eps0_uev[i - 1];
        const double first = lc.eps0_uev[1] - lc.eps0_uev[0];
        if (step == 0.0 || (step > 0.0) != (first > 0.0)) {
            throw ValidationError("line cut eps0 axis must be strictly monotone");
        }
    }
}

} // namespace dotcav
