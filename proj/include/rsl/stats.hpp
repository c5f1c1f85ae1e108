#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rsl/errors.hpp"

namespace rsl {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinearFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ValidationError("ols_fit: need at least two matching points");
    }
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw ValidationError("ols_fit: degenerate abscissa");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

// OLS in log-log coordinates; inputs must be positive.
inline LinearFit ols_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0 || y[i] <= 0.0) {
            throw ValidationError("ols_loglog: inputs must be positive");
        }
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return ols_fit(lx, ly);
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& values) {
    MeanStderr out;
    out.n = values.size();
    if (out.n == 0) return out;
    double s = 0;
    for (double v : values) s += v;
    out.mean = s / static_cast<double>(out.n);
    if (out.n < 2) return out;
    double ss = 0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stderr_ = std::sqrt(ss / static_cast<double>(out.n - 1) / static_cast<double>(out.n));
    return out;
}

inline double median(std::vector<double> values) {
    if (values.empty()) throw ValidationError("median: empty input");
    std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double m = values[mid];
    if (values.size() % 2 == 0) {
        std::nth_element(values.begin(), values.begin() + mid - 1, values.end());
        m = 0.5 * (m + values[mid - 1]);
    }
    return m;
}

}  // namespace rsl
