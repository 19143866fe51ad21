#include "symrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "symrec/errors.hpp"

namespace symrec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_binary(const Volume& v, const char* what) {
    if (!v.is_binary()) throw DataError(std::string(what) + ": expected a binary mask");
}

// Exact 1D squared distance transform (lower envelope of parabolas) along a
// strided line: out[p] = min_q f[q] + ((p - q) * s)^2.
void edt_line(const double* f, double* out, int n, std::ptrdiff_t stride, double s, std::vector<int>& v,
              std::vector<double>& z) {
    v.resize(n);
    z.resize(n + 1);
    int k = -1;
    const auto fq = [&](int q) { return f[q * stride]; };
    for (int q = 0; q < n; ++q) {
        if (fq(q) == kInf) continue;
        if (k < 0) {
            v[++k] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        double x = 0.0;
        for (;;) {
            const int r = v[k];
            x = ((fq(q) + q * q * s * s) - (fq(r) + r * r * s * s)) / (2.0 * s * s * (q - r));
            if (x > z[k]) break;
            --k;
        }
        v[++k] = q;
        z[k] = x;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int p = 0; p < n; ++p) out[p * stride] = kInf;
        return;
    }
    int j = 0;
    for (int p = 0; p < n; ++p) {
        while (z[j + 1] < p) ++j;
        // Rounding in the breakpoints can misplace a tie; check the
        // neighbours so the value is the true minimum.
        double best = kInf;
        for (int c = std::max(0, j - 1); c <= std::min(k, j + 1); ++c) {
            const double d = (p - v[c]) * s;
            best = std::min(best, fq(v[c]) + d * d);
        }
        out[p * stride] = best;
    }
}

// Squared Euclidean distance (mm^2) from every voxel to the nearest site.
std::vector<double> squared_edt(const std::vector<bool>& sites, Dims d, Spacing sp) {
    std::vector<double> f(d.count()), g(d.count());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = sites[i] ? 0.0 : kInf;
    std::vector<int> v;
    std::vector<double> z;
    const std::ptrdiff_t sy = d.nx, sz = static_cast<std::ptrdiff_t>(d.nx) * d.ny;
    for (int zz = 0; zz < d.nz; ++zz)
        for (int y = 0; y < d.ny; ++y) {
            const std::ptrdiff_t base = zz * sz + y * sy;
            edt_line(&f[base], &g[base], d.nx, 1, sp.sx, v, z);
        }
    for (int zz = 0; zz < d.nz; ++zz)
        for (int x = 0; x < d.nx; ++x) {
            const std::ptrdiff_t base = zz * sz + x;
            edt_line(&g[base], &f[base], d.ny, sy, sp.sy, v, z);
        }
    for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
            const std::ptrdiff_t base = y * sy + x;
            edt_line(&f[base], &g[base], d.nz, sz, sp.sz, v, z);
        }
    return g;
}

std::vector<bool> boundary_sites(const Volume& v) {
    const Volume b = boundary(v);
    std::vector<bool> s(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) s[i] = b[i] > 0.5;
    return s;
}

std::vector<double> directed(const std::vector<bool>& from, const std::vector<double>& edt) {
    std::vector<double> out;
    for (std::size_t i = 0; i < from.size(); ++i)
        if (from[i]) out.push_back(std::sqrt(edt[i]));
    return out;
}

}  // namespace

double dsc(const Volume& a, const Volume& b) {
    require_same_grid(a, b, "dsc");
    require_binary(a, "dsc");
    require_binary(b, "dsc");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] > 0.5, y = b[i] > 0.5;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<double> SurfaceDistances::pooled() const {
    std::vector<double> all = a_to_b;
    all.insert(all.end(), b_to_a.begin(), b_to_a.end());
    return all;
}

SurfaceDistances surface_distances(const Volume& a, const Volume& b) {
    require_same_grid(a, b, "surface_distances");
    require_binary(a, "surface_distances");
    require_binary(b, "surface_distances");
    if (count_foreground(a) == 0) throw DataError("surface_distances: first mask (a) is empty");
    if (count_foreground(b) == 0) throw DataError("surface_distances: second mask (b) is empty");
    const auto sa = boundary_sites(a);
    const auto sb = boundary_sites(b);
    return {directed(sa, squared_edt(sb, a.dims(), a.spacing())), directed(sb, squared_edt(sa, a.dims(), a.spacing()))};
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile: no values");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile: q must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return values[lo];
    return values[lo] + frac * (values[hi] - values[lo]);
}

double hd95(const SurfaceDistances& s) { return percentile(s.pooled(), 0.95); }

double msd(const SurfaceDistances& s) {
    const auto all = s.pooled();
    if (all.empty()) throw std::invalid_argument("msd: no boundary points");
    return std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
}

double sdsc(const SurfaceDistances& s, double tau) {
    const auto all = s.pooled();
    if (all.empty()) throw std::invalid_argument("sdsc: no boundary points");
    const auto within = std::count_if(all.begin(), all.end(), [&](double d) { return d <= tau; });
    return static_cast<double>(within) / static_cast<double>(all.size());
}

double hd95(const Volume& a, const Volume& b) { return hd95(surface_distances(a, b)); }
double msd(const Volume& a, const Volume& b) { return msd(surface_distances(a, b)); }
double sdsc(const Volume& a, const Volume& b, double tau) { return sdsc(surface_distances(a, b), tau); }

MetricsReport evaluate(const Volume& pred, const Volume& gt, std::string case_id, std::string condition,
                       double tau) {
    MetricsReport r{std::move(case_id), std::move(condition), dsc(pred, gt), 0.0, 0.0, 0.0};
    const bool ep = count_foreground(pred) == 0, eg = count_foreground(gt) == 0;
    if (ep && eg) {
        r.sdsc = 1.0;
    } else if (ep || eg) {
        r.hd95 = r.msd = kInf;
    } else {
        const auto s = surface_distances(pred, gt);
        r.hd95 = hd95(s);
        r.msd = msd(s);
        r.sdsc = sdsc(s, tau);
    }
    return r;
}

double wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("wilcoxon_signed_rank: sample sizes differ");
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    return wilcoxon_signed_rank(d);
}

double wilcoxon_signed_rank(const std::vector<double>& differences) {
    std::vector<double> d;
    for (double v : differences) {
        if (!std::isfinite(v)) throw std::invalid_argument("wilcoxon_signed_rank: non-finite difference");
        if (v != 0.0) d.push_back(v);
    }
    const std::size_t n = d.size();
    if (n < kWilcoxonMinPairs) {
        throw std::invalid_argument("wilcoxon_signed_rank: need at least " + std::to_string(kWilcoxonMinPairs) +
                                    " nonzero differences, got " + std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

    // Doubled midranks are integers, which keeps the exact DP on integers.
    std::vector<int> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const auto t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = static_cast<int>(i + j + 2);
        i = j + 1;
    }
    int w2 = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0.0) w2 += rank2[i];

    const double nn = static_cast<double>(n);
    if (n <= kWilcoxonExactMax) {
        const int total = std::accumulate(rank2.begin(), rank2.end(), 0);
        std::vector<double> count(total + 1, 0.0);
        count[0] = 1.0;
        int reach = 0;
        for (int r : rank2) {
            for (int s = reach; s >= 0; --s)
                if (count[s] != 0.0) count[s + r] += count[s];
            reach += r;
        }
        double le = 0.0, ge = 0.0;
        for (int s = 0; s <= total; ++s) {
            if (s <= w2) le += count[s];
            if (s >= w2) ge += count[s];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        return std::min(1.0, 2.0 * std::min(le, ge) / all);
    }
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (!(var > 0.0)) return 1.0;
    const double z = (w2 / 2.0 - mean) / std::sqrt(var);
    return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

}  // namespace symrec
