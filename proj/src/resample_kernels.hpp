#pragma once

// Channelled avgpool/upsample kernels (layout: channel-major, x-fastest).

#include <cstddef>
#include <vector>

#include "trilinear.hpp"

namespace symrec::detail {

// in: c x (2nx, 2ny, 2nz) -> out: c x (nx, ny, nz)
inline void avgpool2_forward(const double* in, double* out, int c, int nx, int ny, int nz) {
    const int ix = 2 * nx, iy = 2 * ny, iz = 2 * nz;
    const std::size_t in_ch = static_cast<std::size_t>(ix) * iy * iz;
    const std::size_t out_ch = static_cast<std::size_t>(nx) * ny * nz;
    for (int ch = 0; ch < c; ++ch) {
        const double* src = in + ch * in_ch;
        double* dst = out + ch * out_ch;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    double acc = 0.0;
                    for (int dz = 0; dz < 2; ++dz)
                        for (int dy = 0; dy < 2; ++dy) {
                            const double* row = src + (static_cast<std::size_t>(2 * z + dz) * iy + (2 * y + dy)) * ix + 2 * x;
                            acc += row[0] + row[1];
                        }
                    dst[(static_cast<std::size_t>(z) * ny + y) * nx + x] = acc * 0.125;
                }
    }
}

inline void avgpool2_backward(const double* gout, double* gin, int c, int nx, int ny, int nz) {
    const int ix = 2 * nx, iy = 2 * ny, iz = 2 * nz;
    const std::size_t in_ch = static_cast<std::size_t>(ix) * iy * iz;
    const std::size_t out_ch = static_cast<std::size_t>(nx) * ny * nz;
    for (int ch = 0; ch < c; ++ch) {
        const double* src = gout + ch * out_ch;
        double* dst = gin + ch * in_ch;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const double g = src[(static_cast<std::size_t>(z) * ny + y) * nx + x] * 0.125;
                    for (int dz = 0; dz < 2; ++dz)
                        for (int dy = 0; dy < 2; ++dy) {
                            double* row = dst + (static_cast<std::size_t>(2 * z + dz) * iy + (2 * y + dy)) * ix + 2 * x;
                            row[0] += g;
                            row[1] += g;
                        }
                }
    }
}

// in: c x (nx, ny, nz) -> out: c x (2nx, 2ny, 2nz)
inline void upsample2_forward(const double* in, double* out, int c, int nx, int ny, int nz) {
    const int ox = 2 * nx, oy = 2 * ny, oz = 2 * nz;
    std::vector<UpsampleTap> tx(ox), ty(oy), tz(oz);
    for (int i = 0; i < ox; ++i) tx[i] = upsample_tap(i, nx);
    for (int i = 0; i < oy; ++i) ty[i] = upsample_tap(i, ny);
    for (int i = 0; i < oz; ++i) tz[i] = upsample_tap(i, nz);
    const std::size_t in_ch = static_cast<std::size_t>(nx) * ny * nz;
    const std::size_t out_ch = static_cast<std::size_t>(ox) * oy * oz;
    for (int ch = 0; ch < c; ++ch) {
        const double* src = in + ch * in_ch;
        double* dst = out + ch * out_ch;
        for (int z = 0; z < oz; ++z) {
            const auto& kz = tz[z];
            for (int y = 0; y < oy; ++y) {
                const auto& ky = ty[y];
                const double* r00 = src + (static_cast<std::size_t>(kz.i0) * ny + ky.i0) * nx;
                const double* r01 = src + (static_cast<std::size_t>(kz.i0) * ny + ky.i1) * nx;
                const double* r10 = src + (static_cast<std::size_t>(kz.i1) * ny + ky.i0) * nx;
                const double* r11 = src + (static_cast<std::size_t>(kz.i1) * ny + ky.i1) * nx;
                const double w00 = kz.w0 * ky.w0, w01 = kz.w0 * ky.w1, w10 = kz.w1 * ky.w0, w11 = kz.w1 * ky.w1;
                double* row = dst + (static_cast<std::size_t>(z) * oy + y) * ox;
                for (int x = 0; x < ox; ++x) {
                    const auto& k = tx[x];
                    const double a = r00[k.i0] * k.w0 + r00[k.i1] * k.w1;
                    const double b = r01[k.i0] * k.w0 + r01[k.i1] * k.w1;
                    const double cc = r10[k.i0] * k.w0 + r10[k.i1] * k.w1;
                    const double d = r11[k.i0] * k.w0 + r11[k.i1] * k.w1;
                    row[x] = w00 * a + w01 * b + w10 * cc + w11 * d;
                }
            }
        }
    }
}

inline void upsample2_backward(const double* gout, double* gin, int c, int nx, int ny, int nz) {
    const int ox = 2 * nx, oy = 2 * ny, oz = 2 * nz;
    std::vector<UpsampleTap> tx(ox), ty(oy), tz(oz);
    for (int i = 0; i < ox; ++i) tx[i] = upsample_tap(i, nx);
    for (int i = 0; i < oy; ++i) ty[i] = upsample_tap(i, ny);
    for (int i = 0; i < oz; ++i) tz[i] = upsample_tap(i, nz);
    const std::size_t in_ch = static_cast<std::size_t>(nx) * ny * nz;
    const std::size_t out_ch = static_cast<std::size_t>(ox) * oy * oz;
    for (int ch = 0; ch < c; ++ch) {
        const double* src = gout + ch * out_ch;
        double* dst = gin + ch * in_ch;
        for (int z = 0; z < oz; ++z) {
            const auto& kz = tz[z];
            for (int y = 0; y < oy; ++y) {
                const auto& ky = ty[y];
                double* r00 = dst + (static_cast<std::size_t>(kz.i0) * ny + ky.i0) * nx;
                double* r01 = dst + (static_cast<std::size_t>(kz.i0) * ny + ky.i1) * nx;
                double* r10 = dst + (static_cast<std::size_t>(kz.i1) * ny + ky.i0) * nx;
                double* r11 = dst + (static_cast<std::size_t>(kz.i1) * ny + ky.i1) * nx;
                const double w00 = kz.w0 * ky.w0, w01 = kz.w0 * ky.w1, w10 = kz.w1 * ky.w0, w11 = kz.w1 * ky.w1;
                const double* row = src + (static_cast<std::size_t>(z) * oy + y) * ox;
                for (int x = 0; x < ox; ++x) {
                    const auto& k = tx[x];
                    const double g = row[x];
                    r00[k.i0] += g * w00 * k.w0;
                    r00[k.i1] += g * w00 * k.w1;
                    r01[k.i0] += g * w01 * k.w0;
                    r01[k.i1] += g * w01 * k.w1;
                    r10[k.i0] += g * w10 * k.w0;
                    r10[k.i1] += g * w10 * k.w1;
                    r11[k.i0] += g * w11 * k.w0;
                    r11[k.i1] += g * w11 * k.w1;
                }
            }
        }
    }
}

}  // namespace symrec::detail
