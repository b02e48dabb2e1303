#include "chaoslab/kernels/pairwise_series.hpp"

#include <algorithm>
#include <cmath>

namespace chaoslab::kernels {

namespace {

std::size_t wave_index(std::vector<std::array<int, kMaxDim>>& waves, const std::array<int, kMaxDim>& w) {
  auto it = std::find(waves.begin(), waves.end(), w);
  if (it != waves.end()) return static_cast<std::size_t>(it - waves.begin());
  waves.push_back(w);
  return waves.size() - 1;
}

}  // namespace

PairwiseSeries PairwiseSeries::compile(const CoefficientSet& cs) {
  require(cs.all_series(), ErrorKind::invalid_input, "fast pairwise path needs trigonometric coefficient fields");
  PairwiseSeries p;
  const int d = cs.dim();
  p.dim = d;
  const auto& b = cs.b().series();
  const auto& a1 = cs.a1().series();
  const auto& a2 = cs.a2().series();
  for (const auto* f : {&b, &a1, &a2})
    for (const auto& m : f->modes()) wave_index(p.waves, m.wave);
  const std::size_t nw = p.waves.size();
  const auto dd = static_cast<std::size_t>(d * d);
  const auto dv = static_cast<std::size_t>(d);
  p.b_cos.assign(nw * dv, 0.0);
  p.b_sin.assign(nw * dv, 0.0);
  p.a1_cos.assign(nw * dd, 0.0);
  p.a1_sin.assign(nw * dd, 0.0);
  p.a2_cos.assign(nw * dd, 0.0);
  p.a2_sin.assign(nw * dd, 0.0);
  p.pairwise.assign(nw, 0);
  auto scatter = [&](const TrigField& f, std::vector<double>& cs_, std::vector<double>& sn, std::size_t width, bool pair) {
    for (const auto& m : f.modes()) {
      const std::size_t w = wave_index(p.waves, m.wave);
      for (std::size_t e = 0; e < width; ++e) {
        cs_[w * width + e] += m.cos_coef[e];
        sn[w * width + e] += m.sin_coef[e];
      }
      if (pair) p.pairwise[w] = 1;
    }
  };
  scatter(b, p.b_cos, p.b_sin, dv, true);
  scatter(a1, p.a1_cos, p.a1_sin, dd, false);
  scatter(a2, p.a2_cos, p.a2_sin, dd, true);
  p.b0.assign(b.constant().begin(), b.constant().end());
  p.a10.assign(a1.constant().begin(), a1.constant().end());
  p.a20.assign(a2.constant().begin(), a2.constant().end());
  return p;
}

}  // namespace chaoslab::kernels
