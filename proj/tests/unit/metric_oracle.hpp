#pragma once

// Brute-force reference for the surface metrics, shared by the unit tests
// and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "symrec/metrics.hpp"

namespace oracle {

struct MetricComparison {
    bool distances_equal = false;
    double hd95_error = 0.0;
    double msd_error = 0.0;
    double sdsc_error = 0.0;
    std::size_t boundary_points = 0;
};

inline MetricComparison compare_metrics(const symrec::Volume& a, const symrec::Volume& b, double tau = 1.0) {
    const auto& d = a.dims();
    const auto& s = a.spacing();
    const Grid ga{d.nx, d.ny, d.nz, a.to_vector()}, gb{d.nx, d.ny, d.nz, b.to_vector()};
    const auto pa = boundary_points(ga), pb = boundary_points(gb);
    auto ab = directed_distances(pa, pb, s.sx, s.sy, s.sz);
    auto ba = directed_distances(pb, pa, s.sx, s.sy, s.sz);

    const auto got = symrec::surface_distances(a, b);
    MetricComparison r;
    r.boundary_points = pa.size() + pb.size();
    auto sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    r.distances_equal = sorted(ab) == sorted(got.a_to_b) && sorted(ba) == sorted(got.b_to_a);

    std::vector<double> all = ab;
    all.insert(all.end(), ba.begin(), ba.end());
    const double hd = percentile(all, 0.95);
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    const double within =
        static_cast<double>(std::count_if(all.begin(), all.end(), [&](double x) { return x <= tau; })) / all.size();
    r.hd95_error = std::abs(symrec::hd95(got) - hd);
    r.msd_error = std::abs(symrec::msd(got) - mean);
    r.sdsc_error = std::abs(symrec::sdsc(got, tau) - within);
    return r;
}

}  // namespace oracle
