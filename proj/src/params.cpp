#include "spadfuse/params.hpp"

#include <cmath>
#include <string>

#include "spadfuse/errors.hpp"

namespace spadfuse {

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string("sensor parameter '") + name + "' must be finite and > 0");
    }
}

}  // namespace

void SensorParams::validate() const {
    require_positive(q, "q");
    if (q > 1.0) throw ConfigError("sensor parameter 'q' must be <= 1");
    require_positive(T_bin, "T_bin");
    require_positive(tau, "tau");
    if (!(phi_dark >= 0.0) || !std::isfinite(phi_dark)) {
        throw ConfigError("sensor parameter 'phi_dark' must be finite and >= 0");
    }
    require_positive(n_fwc, "n_fwc");
    require_positive(T_exp, "T_exp");
    require_positive(sigma_f, "sigma_f");
    require_positive(c, "c");
    // sigma_theta = 0 and rho = 0 describe an ideal event pixel.
    if (!(sigma_theta >= 0.0) || sigma_theta >= c) {
        throw ConfigError("sensor parameter 'sigma_theta' must lie in [0, c)");
    }
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("sensor parameter 'rho' must be >= 0");
    require_positive(sigma_iso, "sigma_iso");
    require_positive(sigma_shot, "sigma_shot");
    require_positive(phi_0, "phi_0");
    require_positive(rho_ref, "rho_ref");
    require_positive(R_bar, "R_bar");
    require_positive(N_0, "N_0");
}

double matched_r_bar(const SensorParams& params, int n_bins) {
    if (n_bins < 1) throw ConfigError("n_bins must be >= 1");
    return 1.0 / (params.q * params.T_bin * static_cast<double>(n_bins));
}

}  // namespace spadfuse
