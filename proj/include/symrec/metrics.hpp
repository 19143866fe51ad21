#pragma once

#include <string>
#include <vector>

#include "symrec/voxgrid.hpp"

namespace symrec {

// 2|A and B| / (|A| + |B|) on binary masks; 1.0 when both are empty.
double dsc(const Volume& a, const Volume& b);

struct SurfaceDistances {
    std::vector<double> a_to_b;  // per boundary voxel of a, in mm
    std::vector<double> b_to_a;

    std::vector<double> pooled() const;
};

// Exact nearest-boundary distances in both directions (spacing-scaled).
// Throws DataError naming the empty side.
SurfaceDistances surface_distances(const Volume& a, const Volume& b);

// Linear interpolation between closest ranks: position q * (n - 1).
double percentile(std::vector<double> values, double q);

double hd95(const SurfaceDistances& s);
double msd(const SurfaceDistances& s);
// Fraction of pooled boundary points within tau (mm).
double sdsc(const SurfaceDistances& s, double tau = 1.0);

double hd95(const Volume& a, const Volume& b);
double msd(const Volume& a, const Volume& b);
double sdsc(const Volume& a, const Volume& b, double tau = 1.0);

struct MetricsReport {
    std::string case_id;
    std::string condition;
    double dsc = 0.0;
    double sdsc = 0.0;
    double hd95 = 0.0;
    double msd = 0.0;
};

// All four metrics for binary masks pred vs gt. Empty surfaces give
// hd95 = msd = +inf and sdsc = 0 unless both masks are empty.
MetricsReport evaluate(const Volume& pred, const Volume& gt, std::string case_id = {}, std::string condition = {},
                       double tau = 1.0);

inline constexpr std::size_t kWilcoxonMinPairs = 10;
inline constexpr std::size_t kWilcoxonExactMax = 25;

// Two-sided Wilcoxon signed-rank p-value for paired samples x - y. Zero
// differences are dropped; exact null distribution for n <= 25, normal
// approximation with tie correction above. Throws std::invalid_argument
// with fewer than 10 nonzero differences.
double wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);
double wilcoxon_signed_rank(const std::vector<double>& differences);

}  // namespace symrec
