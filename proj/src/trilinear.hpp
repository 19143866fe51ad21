#pragma once

// Trilinear sampling kernels shared by the Volume API and the graph ops.
// Zero padding: out-of-grid corners read as 0 and receive no gradient.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace symrec::detail {

struct Stencil {
    std::ptrdiff_t idx[8];  // -1 where the corner lies outside the grid
    double c[8];            // corner values (0 outside)
    double fx, fy, fz;      // fractional offsets within the cell
    bool any;               // false if every corner is outside
};

// Corner order: bit 0 -> +x, bit 1 -> +y, bit 2 -> +z.
inline void make_stencil(const double* v, int nx, int ny, int nz, double x, double y, double z, Stencil& s) {
    const double flx = std::floor(x);
    const double fly = std::floor(y);
    const double flz = std::floor(z);
    s.fx = x - flx;
    s.fy = y - fly;
    s.fz = z - flz;
    if (flx < -1.0 || fly < -1.0 || flz < -1.0 || flx >= nx || fly >= ny || flz >= nz) {
        s.any = false;
        for (int k = 0; k < 8; ++k) {
            s.idx[k] = -1;
            s.c[k] = 0.0;
        }
        return;
    }
    s.any = true;
    const int x0 = static_cast<int>(flx);
    const int y0 = static_cast<int>(fly);
    const int z0 = static_cast<int>(flz);
    const std::ptrdiff_t sy = nx;
    const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(nx) * ny;
    if (x0 >= 0 && y0 >= 0 && z0 >= 0 && x0 + 1 < nx && y0 + 1 < ny && z0 + 1 < nz) {
        const std::ptrdiff_t base = z0 * sz + y0 * sy + x0;
        s.idx[0] = base;
        s.idx[1] = base + 1;
        s.idx[2] = base + sy;
        s.idx[3] = base + sy + 1;
        s.idx[4] = base + sz;
        s.idx[5] = base + sz + 1;
        s.idx[6] = base + sz + sy;
        s.idx[7] = base + sz + sy + 1;
        for (int k = 0; k < 8; ++k) s.c[k] = v[s.idx[k]];
        return;
    }
    for (int k = 0; k < 8; ++k) {
        const int xi = x0 + (k & 1);
        const int yi = y0 + ((k >> 1) & 1);
        const int zi = z0 + ((k >> 2) & 1);
        if (xi < 0 || yi < 0 || zi < 0 || xi >= nx || yi >= ny || zi >= nz) {
            s.idx[k] = -1;
            s.c[k] = 0.0;
        } else {
            s.idx[k] = zi * sz + yi * sy + xi;
            s.c[k] = v[s.idx[k]];
        }
    }
}

inline double stencil_value(const Stencil& s) {
    if (!s.any) return 0.0;
    const double gx = 1.0 - s.fx, gy = 1.0 - s.fy, gz = 1.0 - s.fz;
    const double c00 = s.c[0] * gx + s.c[1] * s.fx;
    const double c10 = s.c[2] * gx + s.c[3] * s.fx;
    const double c01 = s.c[4] * gx + s.c[5] * s.fx;
    const double c11 = s.c[6] * gx + s.c[7] * s.fx;
    const double c0 = c00 * gy + c10 * s.fy;
    const double c1 = c01 * gy + c11 * s.fy;
    return c0 * gz + c1 * s.fz;
}

// Spatial derivative of the interpolant inside the stencil's cell.
inline void stencil_gradient(const Stencil& s, double& dx, double& dy, double& dz) {
    if (!s.any) {
        dx = dy = dz = 0.0;
        return;
    }
    const double gx = 1.0 - s.fx, gy = 1.0 - s.fy, gz = 1.0 - s.fz;
    dx = gy * gz * (s.c[1] - s.c[0]) + s.fy * gz * (s.c[3] - s.c[2]) + gy * s.fz * (s.c[5] - s.c[4]) +
         s.fy * s.fz * (s.c[7] - s.c[6]);
    dy = gx * gz * (s.c[2] - s.c[0]) + s.fx * gz * (s.c[3] - s.c[1]) + gx * s.fz * (s.c[6] - s.c[4]) +
         s.fx * s.fz * (s.c[7] - s.c[5]);
    dz = gx * gy * (s.c[4] - s.c[0]) + s.fx * gy * (s.c[5] - s.c[1]) + gx * s.fy * (s.c[6] - s.c[2]) +
         s.fx * s.fy * (s.c[7] - s.c[3]);
}

// Adds g * weight(corner) into out for each in-grid corner.
inline void stencil_scatter(const Stencil& s, double g, double* out) {
    if (!s.any) return;
    const double wx[2] = {1.0 - s.fx, s.fx};
    const double wy[2] = {1.0 - s.fy, s.fy};
    const double wz[2] = {1.0 - s.fz, s.fz};
    for (int k = 0; k < 8; ++k) {
        if (s.idx[k] < 0) continue;
        out[s.idx[k]] += g * wx[k & 1] * wy[(k >> 1) & 1] * wz[(k >> 2) & 1];
    }
}

inline double sample(const double* v, int nx, int ny, int nz, double x, double y, double z) {
    Stencil s;
    make_stencil(v, nx, ny, nz, x, y, z, s);
    return stencil_value(s);
}

// Marks interpolation cells that touch at least one nonzero voxel, so that
// samples landing in empty space can be skipped. Cell (x0,y0,z0) spans
// corners x0..x0+1 etc., with x0 in [-1, nx-1].
class CellMask {
public:
    CellMask(const double* v, int nx, int ny, int nz)
        : nx_(nx), ny_(ny), nz_(nz), m_(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1), 0) {
        std::size_t i = 0;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x, ++i) {
                    if (v[i] == 0.0) continue;
                    // Cells with shifted lower corner x or x+1 (i.e. x0 = x-1, x).
                    for (int dz = 0; dz < 2; ++dz)
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) m_[cell(x + dx, y + dy, z + dz)] = 1;
                }
    }

    bool occupied(double x, double y, double z) const {
        const double flx = std::floor(x), fly = std::floor(y), flz = std::floor(z);
        if (flx < -1.0 || fly < -1.0 || flz < -1.0 || flx >= nx_ || fly >= ny_ || flz >= nz_) return false;
        return m_[cell(static_cast<int>(flx) + 1, static_cast<int>(fly) + 1, static_cast<int>(flz) + 1)] != 0;
    }

private:
    std::size_t cell(int sx, int sy, int sz) const {
        return (static_cast<std::size_t>(sz) * (ny_ + 1) + sy) * (nx_ + 1) + sx;
    }

    int nx_, ny_, nz_;
    std::vector<std::uint8_t> m_;
};

// Half-voxel aligned 2x upsampling weights along one axis.
struct UpsampleTap {
    int i0, i1;
    double w0, w1;
};

inline UpsampleTap upsample_tap(int o, int n_in) {
    double src = (o + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > n_in - 1) i0 = n_in - 1;
    const int i1 = i0 + 1 < n_in ? i0 + 1 : n_in - 1;
    const double f = src - i0;
    return {i0, i1, 1.0 - f, f};
}

}  // namespace symrec::detail
