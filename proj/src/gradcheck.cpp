#include "fnbench/gradcheck.hpp"

#include "fnbench/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fnbench {

double grad_check(const std::function<double(const Matrix&)>& f, const Matrix& x,
                  const Matrix& analytic, double step) {
    if (!x.same_shape(analytic))
        throw shape_error("grad_check: gradient shape " + analytic.shape_str() +
                          " does not match input " + x.shape_str());
    if (!std::isfinite(f(x))) throw numeric_error("grad_check: f(x) non-finite");

    Matrix probe = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double orig = x.data[i];
        probe.data[i] = orig + step;
        const double fp = f(probe);
        probe.data[i] = orig - step;
        const double fm = f(probe);
        probe.data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw numeric_error("grad_check: non-finite probe at coordinate " +
                                std::to_string(i));
        const double fd = (fp - fm) / (2.0 * step);
        const double an = analytic.data[i];
        const double err = std::abs(fd - an) /
                           std::max({1.0, std::abs(fd), std::abs(an)});
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace fnbench
