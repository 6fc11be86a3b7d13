#pragma once

// Base diffusion model: dX = [S(theta,t) + b(X)] dt + sigma(X) dW.

#include <functional>
#include <stdexcept>

namespace peridrift {

struct ModelSpec {
    std::function<double(double)> b;      // base drift
    std::function<double(double)> sigma;  // diffusion coefficient, >= sigma_lower
    double sigma_lower = 0.0;             // must be > 0 (H1/H1')
    double sigma_upper = 0.0;             // 0 means undeclared (no upper bound)
    double lipschitz_b = 0.0;
    double lipschitz_sigma = 0.0;
    double x0 = 0.0;

    void check() const {
        if (!b || !sigma) throw std::invalid_argument("ModelSpec: missing evaluator");
        if (!(sigma_lower > 0.0))
            throw std::invalid_argument("ModelSpec: sigma_lower must be positive");
        if (sigma_upper != 0.0 && sigma_upper < sigma_lower)
            throw std::invalid_argument("ModelSpec: sigma_upper < sigma_lower");
        if (lipschitz_b < 0.0 || lipschitz_sigma < 0.0)
            throw std::invalid_argument("ModelSpec: negative Lipschitz constant");
    }
};

}  // namespace peridrift
