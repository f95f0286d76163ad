#pragma once

// Straight-line re-evaluation of the latency model from raw numbers. It
// shares no code with the library: rates, counts and maxima are all redone
// here from the defining formulas.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

struct RawState {
  std::size_t M = 0, C = 0;
  std::vector<double> fC, fS;              // per BS
  std::vector<std::size_t> twin_bs;        // per twin
  std::vector<double> D, b;                // per twin
  std::vector<double> tau, hU, hD;         // M x C, row major
  std::vector<double> r;                   // per BS
  std::vector<std::vector<std::size_t>> nU, nD;  // per (BS, c)
  double PU = 0, PD = 0, WU = 0, WD = 0, N0 = 0, alpha = 0;
  double cyc_sample = 0, cyc_agg = 0, cyc_val = 0, xi = 0, w_bits = 0;
  std::vector<std::size_t> producers;
  std::size_t producer = 0;
  double SB = 0;
};

struct RawBreakdown {
  double cmp = 0, la = 0, pt = 0, bcast = 0, check = 0, T = 0;
};

inline RawBreakdown evaluate(const RawState& s) {
  RawBreakdown out;
  std::vector<double> cmp(s.M, 0.0), K(s.M, 0.0);
  for (std::size_t j = 0; j < s.twin_bs.size(); ++j) {
    cmp[s.twin_bs[j]] += s.b[j] * s.D[j] * s.cyc_sample / s.fC[s.twin_bs[j]];
    if (s.D[j] > 0) K[s.twin_bs[j]] += 1.0;
  }
  for (std::size_t i = 0; i < s.M; ++i) {
    if (cmp[i] > out.cmp) out.cmp = cmp[i];
    const double la = K[i] * s.w_bits * s.cyc_agg / s.fC[i];
    if (la > out.la) out.la = la;

    double RU = 0.0;
    for (std::size_t c = 0; c < s.C; ++c) {
      const std::size_t k = i * s.C + c;
      double I = 0.0;
      for (std::size_t j : s.nU[k]) I += s.PU * s.hU[j * s.C + c] * std::pow(s.r[j], -s.alpha);
      RU += s.tau[k] * s.WU * std::log2(1.0 + s.PU * s.hU[k] * std::pow(s.r[i], -s.alpha) / (I + s.N0));
    }
    double pt = 0.0;
    if (K[i] > 0) {
      const double factor = s.M == 1 ? 1.0 : s.xi * std::log2(double(s.M));
      pt = factor * K[i] * s.w_bits / RU;
    }
    if (pt > out.pt) out.pt = pt;
  }

  const std::size_t p = s.producer;
  double RD = 0.0;
  for (std::size_t c = 0; c < s.C; ++c) {
    const std::size_t k = p * s.C + c;
    double I = 0.0;
    for (std::size_t j : s.nD[k]) I += s.PD * s.hD[j * s.C + c] * std::pow(s.r[j], -s.alpha);
    RD += s.WD * std::log2(1.0 + s.PD * s.hD[k] * std::pow(s.r[p], -s.alpha) / (I + s.N0));
  }
  out.bcast = s.xi * std::log2(double(s.producers.size())) * s.SB / RD;
  for (std::size_t q : s.producers) {
    const double t = s.SB * s.cyc_val / s.fS[q];
    if (t > out.check) out.check = t;
  }
  out.T = out.cmp + out.pt + out.bcast + out.check;
  return out;
}

}  // namespace oracle
