#include "xmt/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "xmt/metrics.hpp"
#include "xmt/rng.hpp"
#include "xmt/tensor.hpp"

namespace xmt {

namespace {

Tensor random_tensor(const Shape& shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor(shape, std::move(v));
}

SelftestCase grad_case(const std::string& name, const std::function<Tensor(const Tensor&)>& f, const Shape& shape,
                       double lo, double hi) {
  RngStream rng = RngStream(0x5E1F).derive(name.size() * 131 + static_cast<unsigned char>(name.front()));
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) worst = std::max(worst, grad_check(f, random_tensor(shape, rng, lo, hi)));
  std::ostringstream os;
  os << "max relative error " << worst;
  return {"grad " + name, worst < 1e-6, os.str()};
}

SelftestCase frechet_case(const std::string& name, double mu1, double var1, double mu2, double var2, double expect) {
  GaussianStats a{Eigen::VectorXd::Constant(1, mu1), Eigen::MatrixXd::Constant(1, 1, var1)};
  GaussianStats b{Eigen::VectorXd::Constant(1, mu2), Eigen::MatrixXd::Constant(1, 1, var2)};
  const double got = frechet_distance(a, b);
  std::ostringstream os;
  os << "got " << got << ", expected " << expect;
  return {"frechet " + name, std::abs(got - expect) < 1e-9, os.str()};
}

}  // namespace

std::vector<SelftestCase> run_selftest() {
  RngStream rng(0xC0FFEE);
  const Tensor other = random_tensor({2, 3}, rng, 0.5, 1.5);
  const Tensor kernel = random_tensor({2, 2, 3, 3}, rng);
  const Tensor kernel_t = random_tensor({2, 2, 4, 4}, rng);
  const Tensor gamma = random_tensor({2}, rng, 0.5, 1.5);
  const Tensor beta = random_tensor({2}, rng);
  const Tensor weights4 = random_tensor({1, 2, 3, 3}, rng);
  const Tensor weights_t = random_tensor({1, 2, 6, 6}, rng);

  std::vector<SelftestCase> out;
  out.push_back(grad_case("add", [&](const Tensor& x) { return sum(mul(add(x, other), other)); }, {2, 3}, -1, 1));
  out.push_back(grad_case("mul", [&](const Tensor& x) { return sum(mul(x, mul(x, other))); }, {2, 3}, -1, 1));
  out.push_back(grad_case("div", [&](const Tensor& x) { return sum(div(other, x)); }, {2, 3}, 0.5, 2));
  out.push_back(grad_case("log", [&](const Tensor& x) { return sum(mul(log(x), other)); }, {2, 3}, 0.5, 2));
  out.push_back(grad_case("exp", [&](const Tensor& x) { return sum(mul(exp(x), other)); }, {2, 3}, -1, 1));
  out.push_back(grad_case("sqrt", [&](const Tensor& x) { return sum(mul(sqrt(x), other)); }, {2, 3}, 0.5, 2));
  out.push_back(grad_case("tanh", [&](const Tensor& x) { return sum(mul(tanh(x), other)); }, {2, 3}, -2, 2));
  out.push_back(grad_case("sigmoid", [&](const Tensor& x) { return sum(mul(sigmoid(x), other)); }, {2, 3}, -3, 3));
  out.push_back(grad_case("softplus", [&](const Tensor& x) { return sum(mul(softplus(x), other)); }, {2, 3}, -3, 3));
  out.push_back(grad_case("conv2d", [&](const Tensor& x) { return sum(mul(conv2d(x, kernel, 1, 1), weights4)); },
                          {1, 2, 3, 3}, -1, 1));
  out.push_back(grad_case(
      "conv_transpose2d", [&](const Tensor& x) { return sum(mul(conv_transpose2d(x, kernel_t, 2, 1), weights_t)); },
      {1, 2, 3, 3}, -1, 1));
  out.push_back(grad_case(
      "instance_norm", [&](const Tensor& x) { return sum(mul(instance_norm(x, gamma, beta), weights4)); },
      {1, 2, 3, 3}, -1, 1));
  out.push_back(frechet_case("mean shift", 0.0, 1.0, 2.0, 1.0, 4.0));
  out.push_back(frechet_case("variance ratio", 0.0, 1.0, 0.0, 4.0, 1.0));
  out.push_back(frechet_case("identical", 0.3, 2.5, 0.3, 2.5, 0.0));
  return out;
}

}  // namespace xmt
