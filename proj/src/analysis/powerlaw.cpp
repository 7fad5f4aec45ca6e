#include <algorithm>
#include <cmath>
#include <sstream>

#include "tstlab/analysis.hpp"

namespace tstlab {

namespace {

struct LinFit {
    double c0 = 0.0, a = 0.0, rss = 0.0;
    bool ok = false;
};

// For fixed k the model c0 + a*d^k is linear; solve the 2x2 normal equations.
LinFit solve_for_k(const std::vector<double>& d, const std::vector<double>& y, double k) {
    size_t n = d.size();
    double s1 = (double)n, sb = 0.0, sbb = 0.0, sy = 0.0, sby = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double b = std::pow(d[i], k);
        sb += b;
        sbb += b * b;
        sy += y[i];
        sby += b * y[i];
    }
    double det = s1 * sbb - sb * sb;
    LinFit f;
    if (std::abs(det) < 1e-300) return f;
    f.c0 = (sbb * sy - sb * sby) / det;
    f.a = (s1 * sby - sb * sy) / det;
    f.rss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double e = y[i] - (f.c0 + f.a * std::pow(d[i], k));
        f.rss += e * e;
    }
    f.ok = true;
    return f;
}

}  // namespace

PowerLawFit fit_power_law(const MiCurve& curve) {
    std::vector<double> d, y;
    for (size_t i = 0; i < curve.distances.size(); ++i) {
        if (!curve.valid[i]) continue;
        d.push_back((double)curve.distances[i]);
        y.push_back(curve.mi[i]);
    }
    PowerLawFit fit;
    fit.points = (int64_t)d.size();
    if (fit.points < 4)
        throw ContractError("fit_power_law: need at least 4 valid distances, have " +
                            std::to_string(fit.points));

    double lo = *std::min_element(y.begin(), y.end());
    double hi = *std::max_element(y.begin(), y.end());
    if (hi - lo < 1e-12) {
        fit.degenerate = true;
        fit.c0 = hi;
        fit.a = 0.0;
        fit.k = 0.0;
        fit.rss = 0.0;
        for (double v : y) fit.rss += (v - fit.c0) * (v - fit.c0);
        return fit;
    }

    double best_k = -1.0, best_rss = 0.0;
    bool have = false;
    for (double k = -3.0; k <= -0.1 + 1e-12; k += 0.05) {
        LinFit f = solve_for_k(d, y, k);
        if (!f.ok) continue;
        if (!have || f.rss < best_rss) {
            have = true;
            best_k = k;
            best_rss = f.rss;
        }
    }
    if (!have) throw NumericError("fit_power_law: every grid solve was singular");

    // Shrinking local search around the grid winner.
    double step = 0.05;
    for (int it = 0; it < 60; ++it) {
        bool moved = false;
        for (double cand : {best_k - step, best_k + step}) {
            LinFit f = solve_for_k(d, y, cand);
            if (f.ok && f.rss < best_rss) {
                best_k = cand;
                best_rss = f.rss;
                moved = true;
            }
        }
        if (!moved) step *= 0.5;
        if (step < 1e-10) break;
    }

    LinFit f = solve_for_k(d, y, best_k);
    fit.k = best_k;
    fit.c0 = f.c0;
    fit.a = f.a;
    fit.rss = f.rss;
    fit.decaying = fit.k < 0.0;
    if (std::abs(fit.a) < 1e-9 * std::max(1.0, std::abs(fit.c0))) fit.degenerate = true;
    return fit;
}

std::string power_law_csv(const PowerLawFit& fit) {
    std::ostringstream os;
    os << "c0,a,k,rss,points,degenerate,decaying\n";
    os << fit.c0 << ',' << fit.a << ',' << fit.k << ',' << fit.rss << ',' << fit.points << ','
       << (int)fit.degenerate << ',' << (int)fit.decaying << '\n';
    return os.str();
}

}  // namespace tstlab
