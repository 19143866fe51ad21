#include "symrec/voxgrid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "resample_kernels.hpp"
#include "symrec/errors.hpp"
#include "trilinear.hpp"

namespace symrec {

namespace {

// Values this close outside [0,1] are rounding residue from convex
// interpolation and get clamped; anything further out is rejected.
constexpr double kRangeSlack = 1e-9;

std::string dims_string(const Dims& d) {
    std::ostringstream os;
    os << d.nx << "x" << d.ny << "x" << d.nz;
    return os.str();
}

template <class Pred>
bool ball_test(const Volume& v, int x, int y, int z, int radius, Pred pred) {
    const Dims& d = v.dims();
    for (int dz = -radius; dz <= radius; ++dz) {
        const int rz = radius - std::abs(dz);
        for (int dy = -rz; dy <= rz; ++dy) {
            const int ry = rz - std::abs(dy);
            for (int dx = -ry; dx <= ry; ++dx) {
                const int xi = x + dx, yi = y + dy, zi = z + dz;
                const bool inside = xi >= 0 && yi >= 0 && zi >= 0 && xi < d.nx && yi < d.ny && zi < d.nz;
                const double value = inside ? v.at(xi, yi, zi) : 0.0;
                if (pred(value)) return true;
            }
        }
    }
    return false;
}

}  // namespace

Volume::Volume(Dims dims, std::vector<double> data, Spacing spacing)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    if (dims_.nx < kMinVolumeExtent || dims_.ny < kMinVolumeExtent || dims_.nz < kMinVolumeExtent) {
        throw std::invalid_argument("volume dims must be >= 8 per axis, got " + dims_string(dims_));
    }
    if (data_.size() != dims_.count()) {
        throw DataError("volume payload has " + std::to_string(data_.size()) + " values, expected " +
                        std::to_string(dims_.count()));
    }
    if (!(spacing_.sx > 0.0 && spacing_.sy > 0.0 && spacing_.sz > 0.0)) {
        throw std::invalid_argument("volume spacing must be positive");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        double& value = data_[i];
        if (!std::isfinite(value) || value < -kRangeSlack || value > 1.0 + kRangeSlack) {
            throw DataError("volume value at index " + std::to_string(i) + " outside [0,1]: " + std::to_string(value));
        }
        value = std::clamp(value, 0.0, 1.0);
    }
}

Volume Volume::zeros(Dims dims, Spacing spacing) { return filled(dims, 0.0, spacing); }

Volume Volume::filled(Dims dims, double value, Spacing spacing) {
    return Volume(dims, std::vector<double>(dims.count(), value), spacing);
}

double Volume::sum() const {
    double acc = 0.0;
    for (double v : data_) acc += v;
    return acc;
}

bool Volume::is_binary() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

Vec3 Volume::center() const {
    return {(dims_.nx - 1) / 2.0, (dims_.ny - 1) / 2.0, (dims_.nz - 1) / 2.0};
}

void require_same_grid(const Volume& a, const Volume& b, std::string_view what) {
    if (!(a.dims() == b.dims())) {
        throw DataError(std::string(what) + ": dims mismatch " + dims_string(a.dims()) + " vs " +
                        dims_string(b.dims()));
    }
    if (!(a.spacing() == b.spacing())) {
        throw DataError(std::string(what) + ": spacing mismatch");
    }
}

double sample_trilinear(const Volume& v, GridCoord p) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
        throw std::invalid_argument("sample_trilinear: non-finite coordinate");
    }
    const Dims& d = v.dims();
    return detail::sample(v.data().data(), d.nx, d.ny, d.nz, p.x, p.y, p.z);
}

Volume binarize(const Volume& v, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("binarize: threshold must lie in (0,1)");
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > threshold ? 1.0 : 0.0;
    return Volume(v.dims(), std::move(out), v.spacing());
}

Volume morphology(const Volume& v, MorphOp op, int radius) {
    if (radius < 1) throw std::invalid_argument("morphology: radius must be >= 1");
    if (!v.is_binary()) throw std::invalid_argument("morphology: input volume is not binary");
    const Dims& d = v.dims();
    std::vector<double> out(v.size(), 0.0);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t i = v.index(x, y, z);
                if (op == MorphOp::erode) {
                    if (v[i] == 0.0) continue;
                    out[i] = ball_test(v, x, y, z, radius, [](double s) { return s == 0.0; }) ? 0.0 : 1.0;
                } else {
                    if (v[i] == 1.0) {
                        out[i] = 1.0;
                        continue;
                    }
                    out[i] = ball_test(v, x, y, z, radius, [](double s) { return s == 1.0; }) ? 1.0 : 0.0;
                }
            }
    return Volume(d, std::move(out), v.spacing());
}

Volume boundary(const Volume& v) {
    const Volume eroded = morphology(v, MorphOp::erode, 1);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] - eroded[i];
    return Volume(v.dims(), std::move(out), v.spacing());
}

Volume union_max(const Volume& a, const Volume& b) {
    require_same_grid(a, b, "union");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a[i], b[i]);
    return Volume(a.dims(), std::move(out), a.spacing());
}

Volume subtract_mask(const Volume& a, const Volume& b) {
    require_same_grid(a, b, "subtract_mask");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * (1.0 - b[i]);
    return Volume(a.dims(), std::move(out), a.spacing());
}

Volume downsample2(const Volume& v) {
    const Dims& d = v.dims();
    if (d.nx % 2 || d.ny % 2 || d.nz % 2) throw std::invalid_argument("downsample2: dims must be even");
    const Dims out_dims{d.nx / 2, d.ny / 2, d.nz / 2};
    std::vector<double> out(out_dims.count());
    detail::avgpool2_forward(v.data().data(), out.data(), 1, out_dims.nx, out_dims.ny, out_dims.nz);
    const Spacing& s = v.spacing();
    return Volume(out_dims, std::move(out), {s.sx * 2, s.sy * 2, s.sz * 2});
}

Volume upsample2(const Volume& v) {
    const Dims& d = v.dims();
    const Dims out_dims{d.nx * 2, d.ny * 2, d.nz * 2};
    std::vector<double> out(out_dims.count());
    detail::upsample2_forward(v.data().data(), out.data(), 1, d.nx, d.ny, d.nz);
    const Spacing& s = v.spacing();
    return Volume(out_dims, std::move(out), {s.sx / 2, s.sy / 2, s.sz / 2});
}

Volume gaussian_blur(const Volume& v, double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0) return v;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& w : k) w /= total;
    const Dims d = v.dims();
    std::vector<double> cur = v.to_vector(), next(cur.size());
    const int n[3] = {d.nx, d.ny, d.nz};
    const std::ptrdiff_t stride[3] = {1, d.nx, static_cast<std::ptrdiff_t>(d.nx) * d.ny};
    for (int axis = 0; axis < 3; ++axis) {
        std::size_t i = 0;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x, ++i) {
                    const int pos = axis == 0 ? x : axis == 1 ? y : z;
                    double acc = 0.0;
                    for (int o = std::max(-radius, -pos); o <= std::min(radius, n[axis] - 1 - pos); ++o) {
                        acc += k[o + radius] * cur[i + o * stride[axis]];
                    }
                    next[i] = acc;
                }
        std::swap(cur, next);
    }
    for (double& c : cur) c = std::clamp(c, 0.0, 1.0);
    return Volume(d, std::move(cur), v.spacing());
}

Vec3 centroid(const Volume& v) {
    const Dims& d = v.dims();
    double mass = 0.0, cx = 0.0, cy = 0.0, cz = 0.0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const double w = v.at(x, y, z);
                mass += w;
                cx += w * x;
                cy += w * y;
                cz += w * z;
            }
    if (mass <= 0.0) throw std::invalid_argument("centroid: empty volume");
    return {cx / mass, cy / mass, cz / mass};
}

std::size_t count_foreground(const Volume& v) {
    return static_cast<std::size_t>(std::count_if(v.data().begin(), v.data().end(), [](double s) { return s > 0.5; }));
}

int connected_components(const Volume& v) {
    const Dims& d = v.dims();
    std::vector<int> label(v.size(), 0);
    std::vector<std::size_t> stack;
    int components = 0;
    for (std::size_t seed = 0; seed < v.size(); ++seed) {
        if (v[seed] <= 0.5 || label[seed] != 0) continue;
        ++components;
        label[seed] = components;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(i % d.nx);
            const int y = static_cast<int>((i / d.nx) % d.ny);
            const int z = static_cast<int>(i / (static_cast<std::size_t>(d.nx) * d.ny));
            const int nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z}, {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
            for (const auto& n : nb) {
                if (n[0] < 0 || n[1] < 0 || n[2] < 0 || n[0] >= d.nx || n[1] >= d.ny || n[2] >= d.nz) continue;
                const std::size_t j = v.index(n[0], n[1], n[2]);
                if (v[j] > 0.5 && label[j] == 0) {
                    label[j] = components;
                    stack.push_back(j);
                }
            }
        }
    }
    return components;
}

}  // namespace symrec
