#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace symrec {

using Vec3 = std::array<double, 3>;

struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t count() const { return static_cast<std::size_t>(nx) * ny * nz; }
    bool operator==(const Dims&) const = default;
};

struct Spacing {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    bool operator==(const Spacing&) const = default;
};

// Continuous position in voxel units; (0,0,0) is the center of the first voxel.
struct GridCoord {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline constexpr int kMinVolumeExtent = 8;

// Dense scalar grid with values in [0, 1], x-fastest layout. Immutable once
// built: derive new volumes instead of editing one in place.
class Volume {
public:
    Volume(Dims dims, std::vector<double> data, Spacing spacing = {});

    static Volume zeros(Dims dims, Spacing spacing = {});
    static Volume filled(Dims dims, double value, Spacing spacing = {});

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    std::span<const double> data() const { return data_; }
    std::size_t size() const { return data_.size(); }

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
    }
    double at(int x, int y, int z) const { return data_[index(x, y, z)]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double sum() const;
    bool is_binary() const;
    // Grid center in voxel coordinates.
    Vec3 center() const;

    std::vector<double> to_vector() const { return data_; }

private:
    Dims dims_;
    Spacing spacing_;
    std::vector<double> data_;
};

// Throws DataError unless dims and spacing match exactly.
void require_same_grid(const Volume& a, const Volume& b, std::string_view what);

// Trilinear interpolation with zero padding: neighbours outside the grid
// contribute 0, so the result is continuous in p and vanishes one voxel
// beyond the border.
double sample_trilinear(const Volume& v, GridCoord p);

// 1.0 where v > threshold, else 0.0.
Volume binarize(const Volume& v, double threshold);

enum class MorphOp { erode, dilate };

// Binary erosion/dilation with the 6-connected (L1) ball of the given radius.
// Voxels beyond the grid count as background.
Volume morphology(const Volume& v, MorphOp op, int radius);

// v minus erode(v, 1).
Volume boundary(const Volume& v);

// Elementwise maximum ("v OR rec" for soft masks).
Volume union_max(const Volume& a, const Volume& b);

// a AND NOT b for binary masks; soft inputs are treated as a * (1 - b).
Volume subtract_mask(const Volume& a, const Volume& b);

// Factor-2 average pooling (even dims required) and trilinear 2x upsampling
// with half-voxel alignment (output i samples input at (i + 0.5) / 2 - 0.5,
// clamped to the grid).
Volume downsample2(const Volume& v);
Volume upsample2(const Volume& v);

// Separable Gaussian smoothing in voxel units with zero padding; the kernel is
// truncated at 3 sigma. sigma == 0 returns the input.
Volume gaussian_blur(const Volume& v, double sigma);

// Intensity-weighted centroid in voxel coordinates; throws on empty volumes.
Vec3 centroid(const Volume& v);

// Number of voxels with value > 0.5.
std::size_t count_foreground(const Volume& v);

// Number of 6-connected components of the foreground (value > 0.5).
int connected_components(const Volume& v);

}  // namespace symrec
