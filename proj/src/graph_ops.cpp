#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "resample_kernels.hpp"
#include "symrec/errors.hpp"
#include "symrec/graph.hpp"
#include "trilinear.hpp"

namespace symrec::graph {

namespace {

void require_same_tape(Value a, Value b, const char* op) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": values live on different tapes");
}

void require_shape(Value a, Value b, const char* op) {
    require_same_tape(a, b, op);
    if (!(a.shape() == b.shape())) {
        throw DataError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

template <class F, class G>
Value unary(const char* op, Value a, F forward, G derivative) {
    Tape& t = a.tape();
    const auto& x = t.value(a.id());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
    const int ia = a.id();
    return t.record(op, a.shape(), std::move(y), {ia}, [ia, derivative](Tape& tape, int self) {
        double* ga = tape.accumulator(ia);
        if (!ga) return;
        const auto& g = tape.upstream(self);
        const auto& x = tape.value(ia);
        const auto& y = tape.value(self);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * derivative(x[i], y[i]);
    });
}

}  // namespace

Value add(Value a, Value b) {
    require_shape(a, b, "add");
    Tape& t = a.tape();
    const auto& x = t.value(a.id());
    const auto& z = t.value(b.id());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + z[i];
    const int ia = a.id(), ib = b.id();
    return t.record("add", a.shape(), std::move(y), {ia, ib}, [ia, ib](Tape& tape, int self) {
        const auto& g = tape.upstream(self);
        if (double* ga = tape.accumulator(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (double* gb = tape.accumulator(ib))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
}

Value mul(Value a, Value b) {
    require_shape(a, b, "mul");
    Tape& t = a.tape();
    const auto& x = t.value(a.id());
    const auto& z = t.value(b.id());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
    const int ia = a.id(), ib = b.id();
    return t.record("mul", a.shape(), std::move(y), {ia, ib}, [ia, ib](Tape& tape, int self) {
        const auto& g = tape.upstream(self);
        const auto& x = tape.value(ia);
        const auto& z = tape.value(ib);
        if (double* ga = tape.accumulator(ia))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * z[i];
        if (double* gb = tape.accumulator(ib))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    });
}

Value maximum(Value a, Value b) {
    require_shape(a, b, "maximum");
    Tape& t = a.tape();
    const auto& x = t.value(a.id());
    const auto& z = t.value(b.id());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] >= z[i] ? x[i] : z[i];
    const int ia = a.id(), ib = b.id();
    return t.record("maximum", a.shape(), std::move(y), {ia, ib}, [ia, ib](Tape& tape, int self) {
        const auto& g = tape.upstream(self);
        const auto& x = tape.value(ia);
        const auto& z = tape.value(ib);
        double* ga = tape.accumulator(ia);
        double* gb = tape.accumulator(ib);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] >= z[i]) {
                if (ga) ga[i] += g[i];
            } else if (gb) {
                gb[i] += g[i];
            }
        }
    });
}

Value scale(Value a, double s) {
    return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Value clamp01(Value a) {
    return unary(
        "clamp01", a, [](double x) { return std::clamp(x, 0.0, 1.0); },
        [](double x, double) { return (x > 0.0 && x < 1.0) ? 1.0 : 0.0; });
}

Value sigmoid(Value a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Value leaky_relu(Value a, double slope) {
    return unary(
        "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Value sum(Value a) {
    Tape& t = a.tape();
    const auto& x = t.value(a.id());
    double acc = 0.0;
    for (double v : x) acc += v;
    const int ia = a.id();
    return t.record("sum", Shape::scalar(), {acc}, {ia}, [ia](Tape& tape, int self) {
        double* ga = tape.accumulator(ia);
        if (!ga) return;
        const double g = tape.upstream(self)[0];
        const std::size_t n = tape.value(ia).size();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    });
}

Value reshape(Value a, Shape shape) {
    if (shape.size() != a.shape().size()) {
        throw DataError("reshape: size mismatch " + a.shape().str() + " -> " + shape.str());
    }
    Tape& t = a.tape();
    const int ia = a.id();
    return t.record("reshape", shape, t.value(ia), {ia}, [ia](Tape& tape, int self) {
        double* ga = tape.accumulator(ia);
        if (!ga) return;
        const auto& g = tape.upstream(self);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Value dense(Value x, Value weight, Value bias) {
    require_same_tape(x, weight, "dense");
    require_same_tape(x, bias, "dense");
    const std::size_t in = x.shape().size();
    const std::size_t out = bias.shape().size();
    if (weight.shape().size() != in * out) {
        throw DataError("dense: weight size " + std::to_string(weight.shape().size()) + " != " +
                        std::to_string(out) + "x" + std::to_string(in));
    }
    Tape& t = x.tape();
    const auto& xv = t.value(x.id());
    const auto& w = t.value(weight.id());
    const auto& b = t.value(bias.id());
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double* row = w.data() + o * in;
        double acc = 0.0;
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * xv[i];
        y[o] = acc + b[o];
    }
    const int ix = x.id(), iw = weight.id(), ib = bias.id();
    return t.record("dense", Shape::vector(static_cast<int>(out)), std::move(y), {ix, iw, ib},
                    [ix, iw, ib, in, out](Tape& tape, int self) {
                        const auto& g = tape.upstream(self);
                        const auto& xv = tape.value(ix);
                        const auto& w = tape.value(iw);
                        double* gx = tape.accumulator(ix);
                        double* gw = tape.accumulator(iw);
                        double* gb = tape.accumulator(ib);
                        for (std::size_t o = 0; o < out; ++o) {
                            const double go = g[o];
                            if (gb) gb[o] += go;
                            if (go == 0.0) continue;
                            if (gw) {
                                double* grow = gw + o * in;
                                for (std::size_t i = 0; i < in; ++i) grow[i] += go * xv[i];
                            }
                            if (gx) {
                                const double* row = w.data() + o * in;
                                for (std::size_t i = 0; i < in; ++i) gx[i] += go * row[i];
                            }
                        }
                    });
}

namespace {

struct ConvGeom {
    int cin, cout, nx, ny, nz;
    std::size_t plane() const { return static_cast<std::size_t>(nx) * ny * nz; }
};

// Visits every valid (output row, input row) pair for kernel offset (dx,dy,dz):
// fn(out_row_offset, in_row_offset, x_begin, x_end).
template <class Fn>
void for_each_row(const ConvGeom& g, int dx, int dy, int dz, Fn&& fn) {
    const int z0 = std::max(0, -dz), z1 = std::min(g.nz, g.nz - dz);
    const int y0 = std::max(0, -dy), y1 = std::min(g.ny, g.ny - dy);
    const int x0 = std::max(0, -dx), x1 = std::min(g.nx, g.nx - dx);
    for (int z = z0; z < z1; ++z)
        for (int y = y0; y < y1; ++y) {
            const std::size_t out_row = (static_cast<std::size_t>(z) * g.ny + y) * g.nx;
            const std::size_t in_row = (static_cast<std::size_t>(z + dz) * g.ny + (y + dy)) * g.nx;
            fn(out_row, in_row + dx, x0, x1);
        }
}

}  // namespace

Value conv3d(Value x, Value weight, Value bias) {
    require_same_tape(x, weight, "conv3d");
    require_same_tape(x, bias, "conv3d");
    const Shape xs = x.shape();
    const int cout = static_cast<int>(bias.shape().size());
    const ConvGeom geom{xs.c, cout, xs.nx, xs.ny, xs.nz};
    if (weight.shape().size() != static_cast<std::size_t>(cout) * xs.c * 27) {
        throw DataError("conv3d: weight size does not match " + std::to_string(cout) + "x" + std::to_string(xs.c) +
                        "x27");
    }
    Tape& t = x.tape();
    const auto& in = t.value(x.id());
    const auto& w = t.value(weight.id());
    const auto& b = t.value(bias.id());
    const std::size_t plane = geom.plane();
    std::vector<double> y(static_cast<std::size_t>(cout) * plane);
    for (int co = 0; co < cout; ++co) {
        double* dst = y.data() + co * plane;
        std::fill(dst, dst + plane, b[co]);
        for (int ci = 0; ci < geom.cin; ++ci) {
            const double* src = in.data() + ci * plane;
            const double* wk = w.data() + (static_cast<std::size_t>(co) * geom.cin + ci) * 27;
            for (int k = 0; k < 27; ++k) {
                const double wv = wk[k];
                if (wv == 0.0) continue;
                for_each_row(geom, k % 3 - 1, (k / 3) % 3 - 1, k / 9 - 1,
                             [&](std::size_t orow, std::size_t irow, int x0, int x1) {
                                 double* o = dst + orow;
                                 const double* s = src + irow;
                                 for (int xx = x0; xx < x1; ++xx) o[xx] += wv * s[xx];
                             });
            }
        }
    }
    const int ix = x.id(), iw = weight.id(), ib = bias.id();
    return t.record("conv3d", Shape{cout, xs.nx, xs.ny, xs.nz}, std::move(y), {ix, iw, ib},
                    [ix, iw, ib, geom](Tape& tape, int self) {
                        const auto& g = tape.upstream(self);
                        const auto& in = tape.value(ix);
                        const auto& w = tape.value(iw);
                        double* gx = tape.accumulator(ix);
                        double* gw = tape.accumulator(iw);
                        double* gb = tape.accumulator(ib);
                        const std::size_t plane = geom.plane();
                        for (int co = 0; co < geom.cout; ++co) {
                            const double* go = g.data() + co * plane;
                            if (gb) {
                                double acc = 0.0;
                                for (std::size_t i = 0; i < plane; ++i) acc += go[i];
                                gb[co] += acc;
                            }
                            for (int ci = 0; ci < geom.cin; ++ci) {
                                const double* src = in.data() + ci * plane;
                                double* gsrc = gx ? gx + ci * plane : nullptr;
                                const std::size_t wbase = (static_cast<std::size_t>(co) * geom.cin + ci) * 27;
                                for (int k = 0; k < 27; ++k) {
                                    const double wv = w[wbase + k];
                                    double acc = 0.0;
                                    for_each_row(geom, k % 3 - 1, (k / 3) % 3 - 1, k / 9 - 1,
                                                 [&](std::size_t orow, std::size_t irow, int x0, int x1) {
                                                     const double* o = go + orow;
                                                     const double* s = src + irow;
                                                     if (gw)
                                                         for (int xx = x0; xx < x1; ++xx) acc += o[xx] * s[xx];
                                                     if (gsrc) {
                                                         double* gs = gsrc + irow;
                                                         for (int xx = x0; xx < x1; ++xx) gs[xx] += wv * o[xx];
                                                     }
                                                 });
                                    if (gw) gw[wbase + k] += acc;
                                }
                            }
                        }
                    });
}

Value avgpool2(Value x) {
    const Shape s = x.shape();
    if (s.nx % 2 || s.ny % 2 || s.nz % 2) throw DataError("avgpool2: spatial dims must be even, got " + s.str());
    const Shape out{s.c, s.nx / 2, s.ny / 2, s.nz / 2};
    Tape& t = x.tape();
    std::vector<double> y(out.size());
    detail::avgpool2_forward(t.value(x.id()).data(), y.data(), out.c, out.nx, out.ny, out.nz);
    const int ix = x.id();
    return t.record("avgpool2", out, std::move(y), {ix}, [ix, out](Tape& tape, int self) {
        double* gx = tape.accumulator(ix);
        if (!gx) return;
        detail::avgpool2_backward(tape.upstream(self).data(), gx, out.c, out.nx, out.ny, out.nz);
    });
}

Value upsample2(Value x) {
    const Shape s = x.shape();
    const Shape out{s.c, s.nx * 2, s.ny * 2, s.nz * 2};
    Tape& t = x.tape();
    std::vector<double> y(out.size());
    detail::upsample2_forward(t.value(x.id()).data(), y.data(), s.c, s.nx, s.ny, s.nz);
    const int ix = x.id();
    return t.record("upsample2", out, std::move(y), {ix}, [ix, s](Tape& tape, int self) {
        double* gx = tape.accumulator(ix);
        if (!gx) return;
        detail::upsample2_backward(tape.upstream(self).data(), gx, s.c, s.nx, s.ny, s.nz);
    });
}

Value vec_normalize(Value p) {
    if (p.shape().size() != 4) throw DataError("vec_normalize: expected a 4-vector, got " + p.shape().str());
    Tape& t = p.tape();
    const auto& v = t.value(p.id());
    const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(norm > 0.0)) throw NumericalError("vec_normalize: zero-length direction");
    std::vector<double> y{v[0] / norm, v[1] / norm, v[2] / norm, v[3]};
    const int ip = p.id();
    return t.record("vec_normalize", Shape::vector(4), std::move(y), {ip}, [ip, norm](Tape& tape, int self) {
        double* gp = tape.accumulator(ip);
        if (!gp) return;
        const auto& g = tape.upstream(self);
        const auto& y = tape.value(self);
        const double gy = g[0] * y[0] + g[1] * y[1] + g[2] * y[2];
        for (int i = 0; i < 3; ++i) gp[i] += (g[i] - y[i] * gy) / norm;
        gp[3] += g[3];
    });
}

Value warp(Value vol, Value field) {
    require_same_tape(vol, field, "warp");
    const Shape vs = vol.shape();
    const Shape fs = field.shape();
    if (vs.c != 1 || fs.c != 3 || vs.spatial() != fs.spatial()) {
        throw DataError("warp: expected 1-channel volume and 3-channel field on the same grid, got " + vs.str() +
                        " and " + fs.str());
    }
    Tape& t = vol.tape();
    const auto& v = t.value(vol.id());
    const auto& u = t.value(field.id());
    const std::size_t n = vs.voxels();
    std::vector<double> y(n, 0.0);
    auto mask = std::make_shared<const detail::CellMask>(v.data(), vs.nx, vs.ny, vs.nz);
    std::size_t i = 0;
    for (int z = 0; z < vs.nz; ++z)
        for (int yy = 0; yy < vs.ny; ++yy)
            for (int x = 0; x < vs.nx; ++x, ++i) {
                if (!mask->occupied(x + u[i], yy + u[n + i], z + u[2 * n + i])) continue;
                y[i] = detail::sample(v.data(), vs.nx, vs.ny, vs.nz, x + u[i], yy + u[n + i], z + u[2 * n + i]);
            }
    const int iv = vol.id(), iu = field.id();
    return t.record("warp", vs, std::move(y), {iv, iu}, [iv, iu, vs, mask](Tape& tape, int self) {
        const auto& g = tape.upstream(self);
        const auto& v = tape.value(iv);
        const auto& u = tape.value(iu);
        double* gv = tape.accumulator(iv);
        double* gu = tape.accumulator(iu);
        const std::size_t n = vs.voxels();
        detail::Stencil s;
        std::size_t i = 0;
        for (int z = 0; z < vs.nz; ++z)
            for (int yy = 0; yy < vs.ny; ++yy)
                for (int x = 0; x < vs.nx; ++x, ++i) {
                    if (g[i] == 0.0) continue;
                    const double px = x + u[i], py = yy + u[n + i], pz = z + u[2 * n + i];
                    if (!gv && !mask->occupied(px, py, pz)) continue;
                    detail::make_stencil(v.data(), vs.nx, vs.ny, vs.nz, px, py, pz, s);
                    if (gv) detail::stencil_scatter(s, g[i], gv);
                    if (gu) {
                        double dx, dy, dz;
                        detail::stencil_gradient(s, dx, dy, dz);
                        gu[i] += g[i] * dx;
                        gu[n + i] += g[i] * dy;
                        gu[2 * n + i] += g[i] * dz;
                    }
                }
    });
}

Value reflect(Value vol, Value plane4, Vec3 anchor, double offset_scale) {
    require_same_tape(vol, plane4, "reflect");
    const Shape vs = vol.shape();
    if (vs.c != 1) throw DataError("reflect: expected a 1-channel volume, got " + vs.str());
    if (plane4.shape().size() != 4) throw DataError("reflect: plane must be a 4-vector, got " + plane4.shape().str());
    Tape& t = vol.tape();
    const auto& v = t.value(vol.id());
    const auto& p = t.value(plane4.id());
    const double n0 = p[0], n1 = p[1], n2 = p[2];
    // r(x) = n.(x - anchor) - s*e, reflected point x' = x - 2 r n.
    const double r_offset = n0 * anchor[0] + n1 * anchor[1] + n2 * anchor[2] + offset_scale * p[3];
    std::vector<double> y(vs.voxels(), 0.0);
    auto mask = std::make_shared<const detail::CellMask>(v.data(), vs.nx, vs.ny, vs.nz);
    std::size_t i = 0;
    for (int z = 0; z < vs.nz; ++z)
        for (int yy = 0; yy < vs.ny; ++yy) {
            const double base = n1 * yy + n2 * z - r_offset;
            for (int x = 0; x < vs.nx; ++x, ++i) {
                const double r2 = 2.0 * (base + n0 * x);
                if (!mask->occupied(x - r2 * n0, yy - r2 * n1, z - r2 * n2)) continue;
                y[i] = detail::sample(v.data(), vs.nx, vs.ny, vs.nz, x - r2 * n0, yy - r2 * n1, z - r2 * n2);
            }
        }
    const int iv = vol.id(), ip = plane4.id();
    return t.record("reflect", vs, std::move(y), {iv, ip},
                    [iv, ip, vs, anchor, offset_scale, mask](Tape& tape, int self) {
                        const auto& g = tape.upstream(self);
                        const auto& v = tape.value(iv);
                        const auto& p = tape.value(ip);
                        double* gv = tape.accumulator(iv);
                        double* gp = tape.accumulator(ip);
                        const double n[3] = {p[0], p[1], p[2]};
                        const double r_offset =
                            n[0] * anchor[0] + n[1] * anchor[1] + n[2] * anchor[2] + offset_scale * p[3];
                        double dn[3] = {0.0, 0.0, 0.0};
                        double de = 0.0;
                        detail::Stencil s;
                        std::size_t i = 0;
                        for (int z = 0; z < vs.nz; ++z)
                            for (int yy = 0; yy < vs.ny; ++yy) {
                                const double base = n[1] * yy + n[2] * z - r_offset;
                                for (int x = 0; x < vs.nx; ++x, ++i) {
                                    const double gi = g[i];
                                    if (gi == 0.0) continue;
                                    const double r = base + n[0] * x;
                                    const double px = x - 2.0 * r * n[0], py = yy - 2.0 * r * n[1],
                                                 pz = z - 2.0 * r * n[2];
                                    if (!gv && !mask->occupied(px, py, pz)) continue;
                                    detail::make_stencil(v.data(), vs.nx, vs.ny, vs.nz, px, py, pz, s);
                                    if (!s.any) continue;
                                    if (gv) detail::stencil_scatter(s, gi, gv);
                                    if (gp) {
                                        double sx, sy, sz;
                                        detail::stencil_gradient(s, sx, sy, sz);
                                        const double sn = sx * n[0] + sy * n[1] + sz * n[2];
                                        const double rel[3] = {x - anchor[0], yy - anchor[1], z - anchor[2]};
                                        dn[0] -= 2.0 * gi * (rel[0] * sn + r * sx);
                                        dn[1] -= 2.0 * gi * (rel[1] * sn + r * sy);
                                        dn[2] -= 2.0 * gi * (rel[2] * sn + r * sz);
                                        de += 2.0 * offset_scale * gi * sn;
                                    }
                                }
                            }
                        if (gp) {
                            for (int k = 0; k < 3; ++k) gp[k] += dn[k];
                            gp[3] += de;
                        }
                    });
}

Value dice_loss(Value a, Value b) {
    require_shape(a, b, "dice_loss");
    Tape& t = a.tape();
    const auto& x = t.value(a.id());
    const auto& z = t.value(b.id());
    double inter = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        inter += x[i] * z[i];
        sa += x[i];
        sb += z[i];
    }
    const double num = 2.0 * inter + kDiceEps;
    const double den = sa + sb + kDiceEps;
    const int ia = a.id(), ib = b.id();
    return t.record("dice_loss", Shape::scalar(), {1.0 - num / den}, {ia, ib}, [ia, ib, num, den](Tape& tape, int self) {
        const double g = tape.upstream(self)[0];
        const auto& x = tape.value(ia);
        const auto& z = tape.value(ib);
        const double inv = g / (den * den);
        // dL/da_i = (num - 2 b_i den) / den^2
        if (double* ga = tape.accumulator(ia))
            for (std::size_t i = 0; i < x.size(); ++i) ga[i] += (num - 2.0 * z[i] * den) * inv;
        if (double* gb = tape.accumulator(ib))
            for (std::size_t i = 0; i < x.size(); ++i) gb[i] += (num - 2.0 * x[i] * den) * inv;
    });
}

Value diffusive_reg(Value field) {
    const Shape s = field.shape();
    Tape& t = field.tape();
    const auto& u = t.value(field.id());
    const std::size_t n = s.voxels();
    const std::size_t sy = s.nx, sz = static_cast<std::size_t>(s.nx) * s.ny;
    double acc = 0.0;
    for (int c = 0; c < s.c; ++c) {
        const double* uc = u.data() + c * n;
        std::size_t i = 0;
        for (int z = 0; z < s.nz; ++z)
            for (int y = 0; y < s.ny; ++y)
                for (int x = 0; x < s.nx; ++x, ++i) {
                    const double v = uc[i];
                    if (x + 1 < s.nx) acc += (uc[i + 1] - v) * (uc[i + 1] - v);
                    if (y + 1 < s.ny) acc += (uc[i + sy] - v) * (uc[i + sy] - v);
                    if (z + 1 < s.nz) acc += (uc[i + sz] - v) * (uc[i + sz] - v);
                }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const int iu = field.id();
    return t.record("diffusive_reg", Shape::scalar(), {acc * inv_n}, {iu}, [iu, s, inv_n](Tape& tape, int self) {
        double* gu = tape.accumulator(iu);
        if (!gu) return;
        const double g = 2.0 * tape.upstream(self)[0] * inv_n;
        const auto& u = tape.value(iu);
        const std::size_t n = s.voxels();
        const std::size_t sy = s.nx, sz = static_cast<std::size_t>(s.nx) * s.ny;
        for (int c = 0; c < s.c; ++c) {
            const double* uc = u.data() + c * n;
            double* gc = gu + c * n;
            std::size_t i = 0;
            for (int z = 0; z < s.nz; ++z)
                for (int y = 0; y < s.ny; ++y)
                    for (int x = 0; x < s.nx; ++x, ++i) {
                        const double v = uc[i];
                        if (x + 1 < s.nx) {
                            const double d = g * (uc[i + 1] - v);
                            gc[i + 1] += d;
                            gc[i] -= d;
                        }
                        if (y + 1 < s.ny) {
                            const double d = g * (uc[i + sy] - v);
                            gc[i + sy] += d;
                            gc[i] -= d;
                        }
                        if (z + 1 < s.nz) {
                            const double d = g * (uc[i + sz] - v);
                            gc[i + sz] += d;
                            gc[i] -= d;
                        }
                    }
        }
    });
}

}  // namespace symrec::graph
