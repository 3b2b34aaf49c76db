#include "handsplat/decoder.hpp"

#include "handsplat/errors.hpp"

namespace handsplat {

Mlp Mlp::create(int in, int hidden, int out, int hidden_layers,
                std::mt19937_64& rng) {
  if (in < 1 || hidden < 1 || out < 1 || hidden_layers < 1)
    throw DomainError("invalid MLP shape");
  Mlp m;
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto dense = [&](int rows, int cols, bool zero) {
    MatX w(rows, cols);
    double scale = zero ? 0.0 : 1.0 / std::sqrt(static_cast<double>(cols));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = scale * gauss(rng);
    return w;
  };
  int prev = in;
  for (int l = 0; l < hidden_layers; ++l) {
    m.W.push_back(dense(hidden, prev, false));
    m.b.push_back(VecX::Zero(hidden));
    prev = hidden;
  }
  m.W.push_back(dense(out, prev, true));
  m.b.push_back(VecX::Zero(out));
  return m;
}

Mlp::Forward Mlp::forward(const MatX& x) const {
  if (x.cols() != input_size()) throw DomainError("MLP input width mismatch");
  Forward f;
  f.h.reserve(W.size());
  f.h.push_back(x);
  const size_t layers = W.size();
  for (size_t l = 0; l + 1 < layers; ++l) {
    MatX z = f.h.back() * W[l].transpose();
    z.rowwise() += b[l].transpose();
    f.h.push_back(z.array().tanh().matrix());
  }
  f.out = f.h.back() * W.back().transpose();
  f.out.rowwise() += b.back().transpose();
  return f;
}

Mlp::Grads Mlp::backward(const Forward& fwd, const MatX& d_out) const {
  Grads g = zero_grads();
  const size_t layers = W.size();
  MatX dz = d_out;
  for (size_t l = layers; l-- > 0;) {
    g.dW[l] = dz.transpose() * fwd.h[l];
    g.db[l] = dz.colwise().sum().transpose();
    MatX dh = dz * W[l];
    if (l == 0) {
      g.dX = std::move(dh);
    } else {
      // tanh': 1 - h^2 at the stored activation
      dz = (dh.array() * (1.0 - fwd.h[l].array().square())).matrix();
    }
  }
  return g;
}

Mlp::Grads Mlp::zero_grads() const {
  Grads g;
  g.dW.reserve(W.size());
  g.db.reserve(b.size());
  for (const auto& w : W) g.dW.push_back(MatX::Zero(w.rows(), w.cols()));
  for (const auto& bias : b) g.db.push_back(VecX::Zero(bias.size()));
  return g;
}

void Mlp::add_grads(Grads* into, const Grads& other) {
  for (size_t l = 0; l < into->dW.size(); ++l) {
    into->dW[l] += other.dW[l];
    into->db[l] += other.db[l];
  }
}

}  // namespace handsplat
