#pragma once

// Independent reference implementations used as test oracles. They follow
// the textbook definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

struct Grid {
    int nx, ny, nz;
    std::vector<double> v;

    double at(int x, int y, int z) const {
        if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return 0.0;
        return v[(static_cast<std::size_t>(z) * ny + y) * nx + x];
    }
};

// Sum over the 8 neighbours with explicit tent weights.
inline double trilinear(const Grid& g, double x, double y, double z) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y)), z0 = static_cast<int>(std::floor(z));
    double s = 0.0;
    for (int dz = 0; dz <= 1; ++dz)
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                const double w = (1.0 - std::abs(x - (x0 + dx))) * (1.0 - std::abs(y - (y0 + dy))) * (1.0 - std::abs(z - (z0 + dz)));
                s += w * g.at(x0 + dx, y0 + dy, z0 + dz);
            }
    return s;
}

inline double soft_dice_loss(const std::vector<double>& a, const std::vector<double>& b, double eps = 1e-5) {
    double ab = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        sa += a[i];
        sb += b[i];
    }
    return 1.0 - (2.0 * ab + eps) / (sa + sb + eps);
}

// Mean over voxels of squared forward differences, summed over channels/axes.
inline double diffusive_reg(const std::vector<double>& u, int nx, int ny, int nz) {
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    double acc = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const auto at = [&](int xx, int yy, int zz) { return u[c * n + (static_cast<std::size_t>(zz) * ny + yy) * nx + xx]; };
                    if (x + 1 < nx) acc += std::pow(at(x + 1, y, z) - at(x, y, z), 2);
                    if (y + 1 < ny) acc += std::pow(at(x, y + 1, z) - at(x, y, z), 2);
                    if (z + 1 < nz) acc += std::pow(at(x, y, z + 1) - at(x, y, z), 2);
                }
    return acc / static_cast<double>(n);
}

struct Point {
    int x, y, z;
};

// Voxels of a binary mask with at least one 6-neighbour outside the mask
// (grid exterior counts as outside).
inline std::vector<Point> boundary_points(const Grid& g) {
    std::vector<Point> out;
    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                if (g.at(x, y, z) <= 0.5) continue;
                const bool inner = g.at(x - 1, y, z) > 0.5 && g.at(x + 1, y, z) > 0.5 && g.at(x, y - 1, z) > 0.5 &&
                                   g.at(x, y + 1, z) > 0.5 && g.at(x, y, z - 1) > 0.5 && g.at(x, y, z + 1) > 0.5;
                if (!inner) out.push_back({x, y, z});
            }
    return out;
}

// All-pairs nearest distance from each point of a to the set b.
inline std::vector<double> directed_distances(const std::vector<Point>& a, const std::vector<Point>& b, double sx, double sy,
                                              double sz) {
    std::vector<double> out;
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b) {
            const double dx = (p.x - q.x) * sx, dy = (p.y - q.y) * sy, dz = (p.z - q.z) * sz;
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

// Percentile by linear interpolation between closest ranks.
inline double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (pos - lo) * (v[lo + 1] - v[lo]);
}

// Two-sided signed-rank p-value by enumerating all 2^n sign patterns.
inline double wilcoxon_enumerate(std::vector<double> d) {
    d.erase(std::remove(d.begin(), d.end(), 0.0), d.end());
    const std::size_t n = d.size();
    std::vector<double> ranks(n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[idx[j + 1]]) == std::abs(d[idx[i]])) ++j;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = (i + j) / 2.0 + 1.0;
        i = j + 1;
    }
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0) w += ranks[i];
    std::uint64_t le = 0, ge = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) s += ranks[i];
        if (s <= w + 1e-9) ++le;
        if (s >= w - 1e-9) ++ge;
    }
    const double total = std::ldexp(1.0, static_cast<int>(n));
    return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

// Direct 3x3x3 convolution with zero padding; weight [out][in][kz][ky][kx].
inline std::vector<double> conv3d(const std::vector<double>& x, int cin, int cout, int nx, int ny, int nz,
                                  const std::vector<double>& w, const std::vector<double>& b) {
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    std::vector<double> y(cout * n);
    for (int co = 0; co < cout; ++co)
        for (int z = 0; z < nz; ++z)
            for (int yy = 0; yy < ny; ++yy)
                for (int xx = 0; xx < nx; ++xx) {
                    double s = b[co];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int kz = 0; kz < 3; ++kz)
                            for (int ky = 0; ky < 3; ++ky)
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int sx = xx + kx - 1, sy = yy + ky - 1, sz = z + kz - 1;
                                    if (sx < 0 || sy < 0 || sz < 0 || sx >= nx || sy >= ny || sz >= nz) continue;
                                    s += w[(((co * cin + ci) * 3 + kz) * 3 + ky) * 3 + kx] *
                                         x[ci * n + (static_cast<std::size_t>(sz) * ny + sy) * nx + sx];
                                }
                    y[co * n + (static_cast<std::size_t>(z) * ny + yy) * nx + xx] = s;
                }
    return y;
}

// Central finite differences of a scalar function.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = f(x);
        x[i] = keep - h;
        const double fm = f(x);
        x[i] = keep;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// max |a - n| / max |n|.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max(scale, std::abs(numeric[i]));
    }
    return scale > 0.0 ? diff / scale : diff;
}

}  // namespace oracle
