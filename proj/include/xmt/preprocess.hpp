#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xmt/image.hpp"

namespace xmt {

/// [a b tx; c d ty], mapping moving pixel coordinates to fixed ones. Pixel
/// centres sit at integer coordinates.
struct AffineTransform2D {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  static AffineTransform2D identity() { return {}; }
  static AffineTransform2D translation(double x, double y) { return {1.0, 0.0, x, 0.0, 1.0, y}; }

  double det() const { return a * d - b * c; }
  std::pair<double, double> apply(double x, double y) const { return {a * x + b * y + tx, c * x + d * y + ty}; }
  AffineTransform2D inverse() const;

  friend bool operator==(const AffineTransform2D&, const AffineTransform2D&) = default;
};

/// outer ∘ inner: apply `inner` first.
AffineTransform2D compose(const AffineTransform2D& outer, const AffineTransform2D& inner);

/// round(w / factor), round(h / factor), at least 1.
std::pair<int, int> downsampled_dims(int width, int height, double factor);

/// Area-averaging box filter.
Raster downsample(const Raster& img, double factor);
FloatImage downsample(const FloatImage& img, double factor);
FloatImage box_resize(const FloatImage& img, int width, int height);

/// Inverse-mapped bilinear resampling of `moving` into an out_w x out_h grid;
/// samples outside the source read as 0.
Raster warp(const Raster& moving, const AffineTransform2D& t, int out_w, int out_h);
FloatImage warp(const FloatImage& moving, const AffineTransform2D& t, int out_w, int out_h);

/// Binary mask, one byte per pixel holding 0 or 1.
using Mask = Image<std::uint8_t>;

struct ThresholdMethod {
  enum class Kind { otsu, fixed };
  Kind kind = Kind::otsu;
  int level = 0;

  static ThresholdMethod otsu() { return {}; }
  static ThresholdMethod fixed(int t) { return {Kind::fixed, t}; }
};

/// Smallest foreground intensity chosen by Otsu's criterion on the gray
/// histogram. Throws DomainError for constant images.
int otsu_threshold(const Raster& img);

/// Foreground where gray intensity >= threshold.
Mask threshold_mask(const Raster& img, ThresholdMethod method = ThresholdMethod::otsu());

/// 2|A∩B| / (|A| + |B|); 1 when both masks are empty.
double dice(const Mask& a, const Mask& b);

enum class Similarity { ncc, mse };

std::string to_string(Similarity s);
Similarity similarity_from_string(const std::string& name);

struct RegistrationConfig {
  std::vector<int> levels{4, 2, 1};
  Similarity similarity = Similarity::ncc;
  int max_iterations = 600;  // per level
  double tolerance = 1e-7;

  void validate() const;
};

struct RegistrationResult {
  AffineTransform2D transform;  // moving -> fixed
  double residual = 0.0;        // final cost at full resolution
  bool converged = false;
  int iterations = 0;
  double dice = 0.0;  // Otsu masks of warped moving vs fixed
};

/// Coarse-to-fine Nelder-Mead over translation, rotation, per-axis log scale
/// and shear, starting from Otsu centroid and area alignment.
RegistrationResult register_affine(const Raster& moving, const Raster& fixed, const RegistrationConfig& cfg = {});

/// {"matrix": [[a,b,tx],[c,d,ty]], "residual", "dice", "converged", "iterations"}
std::string registration_to_json(const RegistrationResult& r);

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Minimizes f from x0 with an axis-aligned initial simplex of the given steps.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const std::vector<double>& steps, int max_iterations,
                             double tolerance);

}  // namespace xmt

#include "xmt/detail/nelder_mead.hpp"
