#include "desnow/dtcwt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "desnow/error.hpp"
#include "desnow/ops.hpp"

namespace desnow::wavelet {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Near-symmetric 13/19 biorthogonal pair.
const std::vector<double> kH0o{-0.0017578125, 0, 0.022265625, -0.046875, -0.0482421875,
                               0.296875, 0.55546875, 0.296875, -0.0482421875, -0.046875,
                               0.022265625, 0, -0.0017578125};
const std::vector<double> kG1o{-0.0017578125, 0, 0.022265625, 0.046875, -0.0482421875,
                               -0.296875, 0.55546875, -0.296875, -0.0482421875, 0.046875,
                               0.022265625, 0, -0.0017578125};
const std::vector<double> kH1o{
    -7.0626395089285707e-05, 0, 1.3419015066964285e-03, -1.8833705357142855e-03,
    -7.1568080357142846e-03, 2.3856026785714284e-02, 5.5643136160714278e-02,
    -5.1688058035714281e-02, -2.9975760323660716e-01, 5.5943080357142860e-01,
    -2.9975760323660716e-01, -5.1688058035714281e-02, 5.5643136160714278e-02,
    2.3856026785714284e-02, -7.1568080357142846e-03, -1.8833705357142855e-03,
    1.3419015066964285e-03, 0, -7.0626395089285707e-05};
const std::vector<double> kG0o{
    7.0626395089285707e-05, 0, -1.3419015066964285e-03, -1.8833705357142855e-03,
    7.1568080357142846e-03, 2.3856026785714284e-02, -5.5643136160714278e-02,
    -5.1688058035714281e-02, 2.9975760323660716e-01, 5.5943080357142860e-01,
    2.9975760323660716e-01, -5.1688058035714281e-02, -5.5643136160714278e-02,
    2.3856026785714284e-02, 7.1568080357142846e-03, -1.8833705357142855e-03,
    -1.3419015066964285e-03, 0, 7.0626395089285707e-05};

// Quarter-shift 14-tap orthogonal pair, tree a.
const std::vector<double> kH0a{0.00325314276365318,  -0.00388321199915849, 0.03466034684485349,
                               -0.03887280126882779, -0.11720388769911527, 0.27529538466888204,
                               0.7561456438925225,   0.5688104207121227,   0.011866092033797,
                               -0.1067118046866654,  0.0238253847949203,   0.01702522388155399,
                               -0.00543947593727412, -0.00455689562847549};
const std::vector<double> kH1a{-0.00455689562847549, 0.00543947593727412, 0.01702522388155399,
                               -0.0238253847949203,  -0.1067118046866654, -0.011866092033797,
                               0.5688104207121227,   -0.7561456438925225, 0.27529538466888204,
                               0.11720388769911527,  -0.03887280126882779, -0.03466034684485349,
                               -0.00388321199915849, -0.00325314276365318};

// Daubechies-2 for the real baseline.
const double kSqrt3 = 1.73205080756887729353;
const double kDb2Norm = 4.0 * 1.41421356237309504880;
const std::vector<double> kDb2Lo{(1 + kSqrt3) / kDb2Norm, (3 + kSqrt3) / kDb2Norm,
                                 (3 - kSqrt3) / kDb2Norm, (1 - kSqrt3) / kDb2Norm};

std::vector<double> reversed(std::vector<double> v) {
  std::reverse(v.begin(), v.end());
  return v;
}

std::vector<double> delayed(const std::vector<double>& v) {
  std::vector<double> out(v.size() + 1, 0.0);
  std::copy(v.begin(), v.end(), out.begin() + 1);
  return out;
}

std::vector<double> scaled(std::vector<double> v, double s) {
  for (double& x : v) x *= s;
  return v;
}

std::vector<double> quadrature_mirror(const std::vector<double>& lo) {
  // hi[j] = (-1)^j lo[L-1-j]
  std::vector<double> hi(lo.size());
  for (std::size_t j = 0; j < lo.size(); ++j) hi[j] = (j % 2 ? -1.0 : 1.0) * lo[lo.size() - 1 - j];
  return hi;
}

FilterBank make_standard() {
  FilterBank fb;
  fb.level1_a = {{kH0o, kH1o}, {kG0o, kG1o}};
  fb.level1_b = {{delayed(kH0o), delayed(kH1o)}, {delayed(kG0o), delayed(kG1o)}};
  fb.qshift_a = {{kH0a, kH1a}, {reversed(kH0a), reversed(kH1a)}};
  fb.qshift_b = {{reversed(kH0a), reversed(kH1a)}, {kH0a, kH1a}};
  return fb;
}


// --- overloads used by the shared implementation ---------------------------------

Tensor dec(const Tensor& x, std::size_t axis, const AxisFilter& f) { return decimate(x, axis, f); }
Var dec(const Var& x, std::size_t axis, const AxisFilter& f) { return decimate(x, axis, f); }
Tensor itp(const Tensor& y, std::size_t axis, const AxisFilter& f) { return interpolate(y, axis, f); }
Var itp(const Var& y, std::size_t axis, const AxisFilter& f) { return interpolate(y, axis, f); }
Tensor plus(const Tensor& a, const Tensor& b) { return a + b; }
Var plus(const Var& a, const Var& b) { return ops::add(a, b); }
Tensor minus(const Tensor& a, const Tensor& b) { return a - b; }
Var minus(const Var& a, const Var& b) { return ops::sub(a, b); }
Tensor times(const Tensor& a, double s) { return a * s; }
Var times(const Var& a, double s) { return ops::scale(a, s); }
const Shape& shape_of(const Tensor& t) { return t.shape(); }
const Shape& shape_of(const Var& v) { return v.shape(); }

template <class V>
struct Bands {
  V ll, lh, hl, hh;  // first letter: vertical filter
};

// Axis 1 is vertical (rows), axis 2 horizontal (columns).
template <class V>
Bands<V> analyze(const V& x, const StageFilters& vert, const StageFilters& horz) {
  const V lo = dec(x, 1, vert.analysis_lo);
  const V hi = dec(x, 1, vert.analysis_hi);
  return {dec(lo, 2, horz.analysis_lo), dec(lo, 2, horz.analysis_hi), dec(hi, 2, horz.analysis_lo),
          dec(hi, 2, horz.analysis_hi)};
}

template <class V>
V synthesize(const Bands<V>& b, const StageFilters& vert, const StageFilters& horz) {
  const V lo = plus(itp(b.ll, 2, horz.synthesis_lo), itp(b.lh, 2, horz.synthesis_hi));
  const V hi = plus(itp(b.hl, 2, horz.synthesis_lo), itp(b.hh, 2, horz.synthesis_hi));
  return plus(itp(lo, 1, vert.synthesis_lo), itp(hi, 1, vert.synthesis_hi));
}

template <class V>
V lowpass_only(const V& x, const StageFilters& vert, const StageFilters& horz) {
  return dec(dec(x, 1, vert.analysis_lo), 2, horz.analysis_lo);
}

constexpr int tree_v(int t) { return t / 2; }
constexpr int tree_h(int t) { return t % 2; }

// Trees indexed aa, ab, ba, bb (vertical tree first).
template <class V>
std::array<BasicSubband<V>, 6> to_complex(const std::array<Bands<V>, 4>& t) {
  std::array<BasicSubband<V>, 6> out;
  auto pair = [&](const V& aa, const V& ab, const V& ba, const V& bb, std::size_t k) {
    out[k] = {kDirections[k], times(minus(aa, bb), kInvSqrt2), times(plus(ab, ba), kInvSqrt2)};
    out[k + 1] = {kDirections[k + 1], times(plus(aa, bb), kInvSqrt2), times(minus(ab, ba), kInvSqrt2)};
  };
  pair(t[0].hl, t[1].hl, t[2].hl, t[3].hl, 0);
  pair(t[0].hh, t[1].hh, t[2].hh, t[3].hh, 2);
  pair(t[0].lh, t[1].lh, t[2].lh, t[3].lh, 4);
  return out;
}


template <class V>
void from_complex(const BasicSubband<V>& z1, const BasicSubband<V>& z2, V& aa, V& ab, V& ba, V& bb) {
  aa = times(plus(z1.real, z2.real), kInvSqrt2);
  bb = times(minus(z2.real, z1.real), kInvSqrt2);
  ab = times(plus(z1.imag, z2.imag), kInvSqrt2);
  ba = times(minus(z1.imag, z2.imag), kInvSqrt2);
}

template <class V>
BasicPyramid<V> forward_impl(const V& image, int levels) {
  if (levels < 1) throw ConfigError("dtcwt: levels must be >= 1");
  require_divisible(shape_of(image), levels, "dtcwt");
  BasicPyramid<V> p;
  std::array<V, 4> cur{image, image, image, image};
  for (int level = 1; level <= levels; ++level) {
    std::array<Bands<V>, 4> b;
    for (int t = 0; t < 4; ++t)
      b[t] = analyze(cur[t], stage_filters(level, tree_v(t)), stage_filters(level, tree_h(t)));
    p.highpass.push_back(to_complex(b));
    for (int t = 0; t < 4; ++t) cur[t] = b[t].ll;
  }
  p.lowpass = cur[0];
  return p;
}

template <class V>
void validate(const BasicPyramid<V>& p) {
  if (p.levels() < 1) throw ShapeError("idtcwt: pyramid has no levels");
  const Shape& low = shape_of(p.lowpass);
  if (low.size() != 3) throw ShapeError("idtcwt: lowpass must be (C,H,W), got " + to_string(low));
  for (int l = 0; l < p.levels(); ++l) {
    const std::size_t f = std::size_t{1} << (p.levels() - 1 - l);
    const Shape expect{low[0], low[1] * f, low[2] * f};
    for (std::size_t k = 0; k < 6; ++k) {
      const auto& s = p.highpass[l][k];
      if (s.direction != kDirections[k])
        throw ShapeError("idtcwt: subbands out of order at level " + std::to_string(l + 1));
      if (shape_of(s.real) != expect || shape_of(s.imag) != expect)
        throw ShapeError("idtcwt: level " + std::to_string(l + 1) + " subband " +
                         std::string(name(s.direction)) + " has shape " + to_string(shape_of(s.real)) +
                         ", expected " + to_string(expect));
    }
  }
}

// The four trees carry redundant lowpass chains but the pyramid keeps only
// tree aa's. Tree aa is reconstructed first; the other trees' lowpass chains
// are regenerated from that estimate, and the four reconstructions averaged.
template <class V>
V inverse_impl(const BasicPyramid<V>& p) {
  validate(p);
  const int levels = p.levels();
  std::vector<std::array<Bands<V>, 4>> detail(levels);
  for (int l = 0; l < levels; ++l) {
    const auto& hp = p.highpass[l];
    auto& d = detail[l];
    from_complex(hp[0], hp[1], d[0].hl, d[1].hl, d[2].hl, d[3].hl);
    from_complex(hp[2], hp[3], d[0].hh, d[1].hh, d[2].hh, d[3].hh);
    from_complex(hp[4], hp[5], d[0].lh, d[1].lh, d[2].lh, d[3].lh);
  }
  auto run_tree = [&](int t, V low) {
    for (int level = levels; level >= 1; --level) {
      Bands<V> b = detail[level - 1][t];
      b.ll = low;
      low = synthesize(b, stage_filters(level, tree_v(t)), stage_filters(level, tree_h(t)));
    }
    return low;
  };
  const V x_aa = run_tree(0, p.lowpass);
  V total = x_aa;
  for (int t = 1; t < 4; ++t) {
    V low = x_aa;
    for (int level = 1; level <= levels; ++level)
      low = lowpass_only(low, stage_filters(level, tree_v(t)), stage_filters(level, tree_h(t)));
    total = plus(total, run_tree(t, low));
  }
  return times(total, 0.25);
}

AxisFilter db2_lo() { return {kDb2Lo, 0, 0, Extension::kPeriodic}; }
AxisFilter db2_hi() { return {quadrature_mirror(kDb2Lo), 0, 0, Extension::kPeriodic}; }
AxisFilter db2_lo_synth() { return {reversed(kDb2Lo), 3, 0, Extension::kPeriodic}; }
AxisFilter db2_hi_synth() { return {reversed(quadrature_mirror(kDb2Lo)), 3, 0, Extension::kPeriodic}; }

double sum_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

}  // namespace

int degrees(Direction d) {
  switch (d) {
    case Direction::kPlus15: return 15;
    case Direction::kMinus15: return -15;
    case Direction::kPlus45: return 45;
    case Direction::kMinus45: return -45;
    case Direction::kPlus75: return 75;
    case Direction::kMinus75: return -75;
  }
  return 0;
}

std::string_view name(Direction d) {
  switch (d) {
    case Direction::kPlus15: return "+15";
    case Direction::kMinus15: return "-15";
    case Direction::kPlus45: return "+45";
    case Direction::kMinus45: return "-45";
    case Direction::kPlus75: return "+75";
    case Direction::kMinus75: return "-75";
  }
  return "?";
}

const FilterBank& FilterBank::standard() {
  static const FilterBank fb = make_standard();
  return fb;
}

StageFilters stage_filters(int level, int tree) {
  const FilterBank& fb = FilterBank::standard();
  if (level < 1 || tree < 0 || tree > 1) throw std::invalid_argument("stage_filters: bad level/tree");
  if (level == 1) {
    const auto e = Extension::kSymmetric;
    if (tree == 0) {
      return {{fb.level1_a.analysis.lowpass, 6, 0, e},
              {fb.level1_a.analysis.highpass, 9, 1, e},
              {scaled(fb.level1_a.synthesis.lowpass, 2.0), 9, 0, e},
              {scaled(fb.level1_a.synthesis.highpass, 2.0), 6, 1, e}};
    }
    // Tree b samples the opposite polyphase. Its highpass is negated on both
    // sides so the subband orientations match those of the coarser levels.
    return {{fb.level1_b.analysis.lowpass, 7, 1, e},
            {scaled(fb.level1_b.analysis.highpass, -1.0), 10, 0, e},
            {scaled(fb.level1_b.synthesis.lowpass, 2.0), 10, 1, e},
            {scaled(fb.level1_b.synthesis.highpass, -2.0), 7, 0, e}};
  }
  const auto e = Extension::kPeriodic;
  if (tree == 0) {
    return {{fb.qshift_a.analysis.lowpass, 6, 0, e},
            {fb.qshift_a.analysis.highpass, 6, 0, e},
            {fb.qshift_a.synthesis.lowpass, 7, 0, e},
            {fb.qshift_a.synthesis.highpass, 7, 0, e}};
  }
  return {{fb.qshift_b.analysis.lowpass, 7, 0, e},
          {fb.qshift_b.analysis.highpass, 5, 0, e},
          {fb.qshift_b.synthesis.lowpass, 6, 0, e},
          {fb.qshift_b.synthesis.highpass, 8, 0, e}};
}

void require_divisible(const Shape& shape, int levels, const char* what) {
  if (shape.size() != 3) throw ShapeError(std::string(what) + ": expected (C,H,W), got " + to_string(shape));
  const std::size_t m = std::size_t{1} << levels;
  if (shape[1] % m != 0 || shape[2] % m != 0) {
    const auto up = [m](std::size_t n) { return (n + m - 1) / m * m; };
    std::ostringstream os;
    os << what << ": height and width must be divisible by " << m << " for " << levels
       << " level(s); got " << shape[1] << "x" << shape[2] << ", pad to " << up(shape[1]) << "x"
       << up(shape[2]);
    throw ShapeError(os.str());
  }
}

Pyramid dtcwt_forward(const Tensor& image, int levels) { return forward_impl(image, levels); }
Tensor idtcwt(const Pyramid& pyramid) { return inverse_impl(pyramid); }
VarPyramid dtcwt_forward(const Var& image, int levels) { return forward_impl(image, levels); }
Var idtcwt(const VarPyramid& pyramid) { return inverse_impl(pyramid); }

Tensor magnitude(const ComplexSubband& band) {
  require_same_shape(band.real, band.imag, "magnitude");
  Tensor out(band.real.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::hypot(band.real[i], band.imag[i]);
  return out;
}

std::vector<double> subband_energies(const Pyramid& pyramid) {
  std::vector<double> e;
  for (const auto& level : pyramid.highpass)
    for (const auto& s : level) e.push_back(sum_squares(s.real) + sum_squares(s.imag));
  return e;
}

DwtPyramid dwt2(const Tensor& image, int levels) {
  if (levels < 1) throw ConfigError("dwt: levels must be >= 1");
  require_divisible(image.shape(), levels, "dwt");
  DwtPyramid p;
  Tensor cur = image;
  for (int l = 0; l < levels; ++l) {
    const Tensor lo = decimate(cur, 1, db2_lo());
    const Tensor hi = decimate(cur, 1, db2_hi());
    p.detail.push_back({decimate(lo, 2, db2_hi()), decimate(hi, 2, db2_lo()), decimate(hi, 2, db2_hi())});
    cur = decimate(lo, 2, db2_lo());
  }
  p.ll = std::move(cur);
  return p;
}

Tensor idwt2(const DwtPyramid& pyramid) {
  if (pyramid.levels() < 1) throw ShapeError("idwt: pyramid has no levels");
  Tensor cur = pyramid.ll;
  for (int l = pyramid.levels() - 1; l >= 0; --l) {
    const auto& d = pyramid.detail[l];
    require_same_shape(cur, d.lh, "idwt");
    require_same_shape(cur, d.hl, "idwt");
    require_same_shape(cur, d.hh, "idwt");
    const Tensor lo = interpolate(cur, 2, db2_lo_synth()) + interpolate(d.lh, 2, db2_hi_synth());
    const Tensor hi = interpolate(d.hl, 2, db2_lo_synth()) + interpolate(d.hh, 2, db2_hi_synth());
    cur = interpolate(lo, 1, db2_lo_synth()) + interpolate(hi, 1, db2_hi_synth());
  }
  return cur;
}

std::vector<double> subband_energies(const DwtPyramid& pyramid) {
  std::vector<double> e;
  for (const auto& d : pyramid.detail) {
    e.push_back(sum_squares(d.lh));
    e.push_back(sum_squares(d.hl));
    e.push_back(sum_squares(d.hh));
  }
  return e;
}

Tensor circular_shift(const Tensor& image, int dy, int dx) {
  if (image.rank() != 3) throw ShapeError("circular_shift: expected (C,H,W), got " + to_string(image.shape()));
  const auto C = image.dim(0), H = image.dim(1), W = image.dim(2);
  Tensor out(image.shape());
  const auto wrap = [](long v, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((v % m) + m) % m);
  };
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        out.at(c, wrap(long(y) + dy, H), wrap(long(x) + dx, W)) = image.at(c, y, x);
  return out;
}

double shift_invariance_score(Transform transform, const Tensor& image, int dy, int dx, int levels) {
  const Tensor shifted = circular_shift(image, dy, dx);
  std::vector<double> e0, e1;
  if (transform == Transform::kDtcwt) {
    e0 = subband_energies(dtcwt_forward(image, levels));
    e1 = subband_energies(dtcwt_forward(shifted, levels));
  } else {
    e0 = subband_energies(dwt2(image, levels));
    e1 = subband_energies(dwt2(shifted, levels));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < e0.size(); ++i) {
    num += (e1[i] - e0[i]) * (e1[i] - e0[i]);
    den += e0[i] * e0[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace desnow::wavelet
