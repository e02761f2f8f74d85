#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "desnow/autograd.hpp"
#include "desnow/filter1d.hpp"
#include "desnow/tensor.hpp"

namespace desnow::wavelet {

/// Orientation of the stripes/edges a subband responds to, in degrees
/// counter-clockwise from the image x axis (y pointing up).
enum class Direction { kPlus15, kMinus15, kPlus45, kMinus45, kPlus75, kMinus75 };

inline constexpr std::array<Direction, 6> kDirections{Direction::kPlus15, Direction::kMinus15,
                                                      Direction::kPlus45, Direction::kMinus45,
                                                      Direction::kPlus75, Direction::kMinus75};

int degrees(Direction d);
std::string_view name(Direction d);  // "+15", "-15", ...

struct FilterPair {
  std::vector<double> lowpass;
  std::vector<double> highpass;
};

struct TreeFilters {
  FilterPair analysis;
  FilterPair synthesis;
};

/// Level-1 biorthogonal pair (near-symmetric 13/19 taps) for both trees, and the
/// 14-tap quarter-shift orthogonal pair used from level 2 on.
struct FilterBank {
  TreeFilters level1_a;
  TreeFilters level1_b;  ///< level1_a delayed by one sample
  TreeFilters qshift_a;
  TreeFilters qshift_b;  ///< time reverse of qshift_a

  static const FilterBank& standard();
};

/// Per-tree axis filters of one decomposition stage, ready for decimate/interpolate.
struct StageFilters {
  AxisFilter analysis_lo, analysis_hi, synthesis_lo, synthesis_hi;
};
/// level is 1-based; tree 0 = a, 1 = b.
StageFilters stage_filters(int level, int tree);

template <class V>
struct BasicSubband {
  Direction direction{};
  V real;
  V imag;
};

/// One real lowpass band plus six complex directional subbands per level.
/// highpass[0] is the finest level.
template <class V>
struct BasicPyramid {
  V lowpass;
  std::vector<std::array<BasicSubband<V>, 6>> highpass;

  int levels() const { return static_cast<int>(highpass.size()); }
};

using ComplexSubband = BasicSubband<Tensor>;
using Pyramid = BasicPyramid<Tensor>;
using VarPyramid = BasicPyramid<Var>;

/// 2-D dual-tree complex wavelet transform of a (C,H,W) tensor, channels independent.
/// H and W must be divisible by 2^levels.
Pyramid dtcwt_forward(const Tensor& image, int levels);
Tensor idtcwt(const Pyramid& pyramid);

/// Differentiable versions recorded on the image's tape.
VarPyramid dtcwt_forward(const Var& image, int levels);
Var idtcwt(const VarPyramid& pyramid);

Tensor magnitude(const ComplexSubband& band);
/// Sum of |z|^2 per subband, level-major, directions in kDirections order.
std::vector<double> subband_energies(const Pyramid& pyramid);

/// Real separable DWT. lh: vertical lowpass, horizontal highpass (vertical edges);
/// hl: vertical highpass, horizontal lowpass; hh: both highpass.
struct DwtLevel {
  Tensor lh, hl, hh;
};
struct DwtPyramid {
  Tensor ll;
  std::vector<DwtLevel> detail;  ///< detail[0] is the finest level

  int levels() const { return static_cast<int>(detail.size()); }
};

DwtPyramid dwt2(const Tensor& image, int levels);
Tensor idwt2(const DwtPyramid& pyramid);
std::vector<double> subband_energies(const DwtPyramid& pyramid);

enum class Transform { kDwt, kDtcwt };

/// Circular shift; positive dy/dx move content down/right.
Tensor circular_shift(const Tensor& image, int dy, int dx);

/// ||E(shift(x)) - E(x)|| / ||E(x)|| over the highpass energy vector E
/// (DTCWT magnitudes or DWT coefficients). Lower is more shift-invariant.
double shift_invariance_score(Transform transform, const Tensor& image, int dy, int dx, int levels = 2);

/// Throws ShapeError stating the padded extent when H or W is not divisible by 2^levels.
void require_divisible(const Shape& shape, int levels, const char* what);

}  // namespace desnow::wavelet
