#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "wfmr/error.hpp"
#include "wfmr/wavelet.hpp"

namespace wfmr {
namespace {

// Least-asymmetric Daubechies (symmlet) filters, reconstruction orientation.
// Tabulated values Newton-polished so orthonormality and the vanishing
// moments hold to double precision.
constexpr std::array<double, 8> kSym4 = {
    0.032223100604051466, -0.012603967262031304, -0.09921954357663353,  0.29785779560530606,
    0.8037387518051321,   0.497618667632775,     -0.029635527646002493, -0.07576571478950221,
};

constexpr std::array<double, 16> kSym8 = {
    0.001889950332767689,  -0.0003029205147241331, -0.014952258337062199,  0.0038087520138944896,
    0.04913717967373029,   -0.027219029917103486,  -0.0519458381078818,    0.36444189483617895,
    0.777185751699628,     0.4813596512590534,     -0.061273359067811076,  -0.14329423835127267,
    0.007607487324976609,  0.03169508781152599,    -0.0005421323318000107, -0.0033824159510050028,
};

constexpr std::array<double, 2> kHaar = {std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2};

}  // namespace

WaveletSpec WaveletSpec::haar(int j0) {
  return WaveletSpec{WaveletFamily::Haar, 1, Boundary::Periodic, j0};
}

WaveletSpec WaveletSpec::symmlet(int vanishing_moments, int j0) {
  return WaveletSpec{WaveletFamily::DaubechiesLeastAsymmetric, vanishing_moments,
                     Boundary::Periodic, j0};
}

WaveletSpec WaveletSpec::parse(std::string_view name, int j0) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "haar") return haar(j0);
  if (lower == "sym8" || lower == "la8") return symmlet(8, j0);
  if (lower == "sym4" || lower == "la4") return symmlet(4, j0);
  raise(Errc::InvalidArgument, "unknown wavelet '" + std::string(name) + "'");
}

std::string WaveletSpec::name() const {
  if (family == WaveletFamily::Haar) return "haar";
  return "sym" + std::to_string(vanishing_moments);
}

std::span<const double> lowpass_filter(const WaveletSpec& spec) {
  switch (spec.family) {
    case WaveletFamily::Haar:
      return kHaar;
    case WaveletFamily::DaubechiesLeastAsymmetric:
      if (spec.vanishing_moments == 8) return kSym8;
      if (spec.vanishing_moments == 4) return kSym4;
      break;
  }
  raise(Errc::InvalidParams, "no embedded filter for " + spec.name());
}

std::vector<double> highpass_filter(std::span<const double> lowpass) {
  const std::size_t len = lowpass.size();
  std::vector<double> g(len);
  for (std::size_t k = 0; k < len; ++k) {
    g[k] = (k % 2 == 0 ? 1.0 : -1.0) * lowpass[len - 1 - k];
  }
  return g;
}

}  // namespace wfmr
