#pragma once

#include <cmath>
#include <cstddef>

#include <Eigen/Core>

namespace ntc {

/// Adam over a flat parameter vector, with bias-corrected moments.
class Adam {
public:
    explicit Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8)
        : lr_(learning_rate),
          beta1_(beta1),
          beta2_(beta2),
          epsilon_(epsilon),
          m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
          v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

    /// Steps along scale * grad + decay * theta.
    void step(Eigen::Ref<Eigen::VectorXd> theta, const Eigen::Ref<const Eigen::VectorXd>& grad,
              double scale = 1.0, double decay = 0.0) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        // lr * m_hat / (sqrt(v_hat) + eps), with the bias corrections folded in.
        const double step_size = lr_ * std::sqrt(c2) / c1;
        const double eps = epsilon_ * std::sqrt(c2);
        if (scale == 1.0 && decay == 0.0) {
            m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
            v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
        } else {
            const auto g = scale * grad.array() + decay * theta.array();
            m_.array() = beta1_ * m_.array() + (1.0 - beta1_) * g;
            v_.array() = beta2_ * v_.array() + (1.0 - beta2_) * g.square();
        }
        theta.array() -= step_size * m_.array() / (v_.array().sqrt() + eps);
    }

    std::size_t steps() const { return t_; }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double epsilon_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    std::size_t t_ = 0;
};

}  // namespace ntc
