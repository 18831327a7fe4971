/*
 * Copyright 2026 The FundusNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <vector>

#include "fnet/layers.hpp"
#include "test_util.hpp"

namespace fnet::oracles {

// Six nested loops straight from the definition of same-padded
// cross-correlation.
inline Tensor conv_oracle(const Tensor& x, const ConvParams& p) {
  const std::size_t n = x.shape()[0], h = x.shape()[1], w = x.shape()[2], cin = x.shape()[3];
  const std::size_t cout = p.kernels.shape()[3];
  Tensor y(Shape{n, h, w, cout});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        for (std::size_t o = 0; o < cout; ++o) {
          double s = p.bias[o];
          for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
              for (std::size_t c = 0; c < cin; ++c) {
                const long r = static_cast<long>(i) + di, q = static_cast<long>(j) + dj;
                if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(w)) continue;
                s += x.at({b, static_cast<std::size_t>(r), static_cast<std::size_t>(q), c}) *
                     p.kernels.at({static_cast<std::size_t>(di + 1), static_cast<std::size_t>(dj + 1), c, o});
              }
          y.at({b, i, j, o}) = s;
        }
  return y;
}

inline LstmParams random_lstm(std::size_t in, std::size_t hidden, Rng& rng, double scale) {
  LstmParams p = LstmParams::zeros(in, hidden);
  for (LstmGate* g : {&p.forget, &p.input, &p.candidate, &p.output}) {
    g->weight = test_util::random_tensor(g->weight.shape(), rng, scale);
    g->bias = test_util::random_tensor(g->bias.shape(), rng, scale);
  }
  return p;
}

struct ScalarStep {
  std::vector<double> f, i, cand, c, o, h;
};

// The gate equations evaluated one scalar at a time.
inline ScalarStep scalar_lstm(const std::vector<double>& x, const std::vector<double>& h_prev,
                       const std::vector<double>& c_prev, const LstmParams& p) {
  const std::size_t hidden = h_prev.size();
  std::vector<double> concat = h_prev;
  concat.insert(concat.end(), x.begin(), x.end());
  auto gate = [&](const LstmGate& g, std::size_t j) {
    double z = g.bias[j];
    for (std::size_t k = 0; k < concat.size(); ++k) z += g.weight.at({k, j}) * concat[k];
    return z;
  };
  ScalarStep s;
  for (std::size_t j = 0; j < hidden; ++j) {
    const double f = 1.0 / (1.0 + std::exp(-gate(p.forget, j)));
    const double i = 1.0 / (1.0 + std::exp(-gate(p.input, j)));
    const double cand = std::tanh(gate(p.candidate, j));
    const double c = f * c_prev[j] + i * cand;
    const double o = 1.0 / (1.0 + std::exp(-gate(p.output, j)));
    s.f.push_back(f);
    s.i.push_back(i);
    s.cand.push_back(cand);
    s.c.push_back(c);
    s.o.push_back(o);
    s.h.push_back(o * std::tanh(c));
  }
  return s;
}

}  // namespace fnet::oracles
