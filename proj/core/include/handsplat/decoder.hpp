#pragma once

#include <random>
#include <vector>

#include "handsplat/types.hpp"

namespace handsplat {

// Feed-forward network with tanh hidden layers and a linear output layer.
// Batched rows: forward(X) with X of shape (N x in).
struct Mlp {
  std::vector<MatX> W;  // W[l] is (out_l x in_l)
  std::vector<VecX> b;

  // Hidden weights ~ N(0, 1/sqrt(fan_in)); the output layer starts at zero
  // so decoded quantities begin at their activation midpoints.
  static Mlp create(int in, int hidden, int out, int hidden_layers,
                    std::mt19937_64& rng);

  int input_size() const { return static_cast<int>(W.front().cols()); }
  int output_size() const { return static_cast<int>(W.back().rows()); }

  struct Forward {
    std::vector<MatX> h;  // h[0] = input, h[l] = post-tanh activations
    MatX out;             // linear output (N x out)
  };
  Forward forward(const MatX& x) const;

  struct Grads {
    std::vector<MatX> dW;
    std::vector<VecX> db;
    MatX dX;
  };
  Grads backward(const Forward& fwd, const MatX& d_out) const;

  Grads zero_grads() const;
  // Accumulate: this += other (same shapes).
  static void add_grads(Grads* into, const Grads& other);
};

}  // namespace handsplat
