#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "apprl/rng.hpp"

namespace apprl {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct ParamRef {
    std::string name;
    Mat<S>* value;
    Mat<S>* grad;
};

// Gaussian matrix orthogonalized by QR, sign-corrected so the result is
// deterministic. Always sampled in double so float and double instantiations
// of the same seed agree.
template <class S>
void orthogonal_init(Mat<S>& w, double gain, Rng& rng) {
    const int rows = static_cast<int>(w.rows());
    const int cols = static_cast<int>(w.cols());
    const bool transposed = rows < cols;
    const int m = std::max(rows, cols);
    const int n = std::min(rows, cols);
    Eigen::MatrixXd a(m, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(n);
    for (int j = 0; j < n; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    if (transposed) {
        w = (gain * q.transpose()).cast<S>();
    } else {
        w = (gain * q).cast<S>();
    }
}

template <class S>
void zero_grads(const std::vector<ParamRef<S>>& params) {
    for (const auto& p : params) p.grad->setZero();
}

template <class S>
double grad_norm(const std::vector<ParamRef<S>>& params) {
    double sq = 0.0;
    for (const auto& p : params) sq += p.grad->template cast<double>().squaredNorm();
    return std::sqrt(sq);
}

template <class S>
void clip_grad_norm(const std::vector<ParamRef<S>>& params, double max_norm) {
    const double norm = grad_norm(params);
    if (norm > max_norm && norm > 0.0) {
        const S scale = static_cast<S>(max_norm / norm);
        for (const auto& p : params) *p.grad *= scale;
    }
}

template <class S>
std::size_t param_count(const std::vector<ParamRef<S>>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += static_cast<std::size_t>(p.value->size());
    return n;
}

// Column-wise numerically stable softmax.
template <class S>
Mat<S> softmax_columns(const Mat<S>& logits) {
    Mat<S> probs = logits;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        auto col = probs.col(j);
        col.array() -= col.maxCoeff();
        col = col.array().exp();
        col /= col.sum();
    }
    return probs;
}

template <class S>
class Dense {
  public:
    Dense(int out_dim, int in_dim, std::string name)
        : w_(Mat<S>::Zero(out_dim, in_dim)),
          b_(Mat<S>::Zero(out_dim, 1)),
          gw_(Mat<S>::Zero(out_dim, in_dim)),
          gb_(Mat<S>::Zero(out_dim, 1)),
          name_(std::move(name)) {}

    Mat<S> forward(const Mat<S>& x, bool cache) {
        if (x.rows() != w_.cols())
            throw std::invalid_argument(name_ + ": input has " + std::to_string(x.rows()) +
                                        " rows, expected " + std::to_string(w_.cols()));
        if (cache) in_ = x;
        Mat<S> y = w_ * x;
        y.colwise() += b_.col(0);
        return y;
    }

    Mat<S> backward(const Mat<S>& dy) {
        gw_.noalias() += dy * in_.transpose();
        gb_.col(0).noalias() += dy.rowwise().sum();
        return w_.transpose() * dy;
    }

    void collect(std::vector<ParamRef<S>>& out) {
        out.push_back({name_ + ".w", &w_, &gw_});
        out.push_back({name_ + ".b", &b_, &gb_});
    }

    Mat<S>& weights() { return w_; }

  private:
    Mat<S> w_, b_, gw_, gb_, in_;
    std::string name_;
};

// Dense stack with ReLU between layers and a linear output.
template <class S>
class Mlp {
  public:
    Mlp(const std::vector<int>& dims, const std::string& name) {
        for (std::size_t i = 0; i + 1 < dims.size(); ++i)
            layers_.emplace_back(dims[i + 1], dims[i], name + ".l" + std::to_string(i));
    }

    Mat<S> forward(const Mat<S>& x, bool cache) {
        if (cache) acts_.assign(layers_.size() > 1 ? layers_.size() - 1 : 0, Mat<S>());
        Mat<S> h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            h = layers_[i].forward(h, cache);
            if (i + 1 < layers_.size()) {
                h = h.cwiseMax(S(0));
                if (cache) acts_[i] = h;
            }
        }
        return h;
    }

    Mat<S> backward(Mat<S> dy) {
        for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
            dy = layers_[i].backward(dy);
            if (i > 0) dy.array() *= (acts_[i - 1].array() > S(0)).template cast<S>();
        }
        return dy;
    }

    void collect(std::vector<ParamRef<S>>& out) {
        for (auto& l : layers_) l.collect(out);
    }

    std::size_t size() const { return layers_.size(); }
    Dense<S>& layer(std::size_t i) { return layers_[i]; }

  private:
    std::vector<Dense<S>> layers_;
    std::vector<Mat<S>> acts_;
};

// Valid-padding stride-1 convolution via im2col. Batch input is one column
// per sample, channel-major layout: index c*H*W + i*W + j.
template <class S>
class Conv2d {
  public:
    Conv2d(int in_h, int in_w, int in_ch, int out_ch, int kernel, std::string name)
        : in_h_(in_h),
          in_w_(in_w),
          in_ch_(in_ch),
          out_ch_(out_ch),
          k_(kernel),
          w_(Mat<S>::Zero(out_ch, in_ch * kernel * kernel)),
          b_(Mat<S>::Zero(out_ch, 1)),
          gw_(Mat<S>::Zero(out_ch, in_ch * kernel * kernel)),
          gb_(Mat<S>::Zero(out_ch, 1)),
          name_(std::move(name)) {}

    int out_h() const { return in_h_ - k_ + 1; }
    int out_w() const { return in_w_ - k_ + 1; }
    int out_dim() const { return out_ch_ * out_h() * out_w(); }

    Mat<S> forward(const Mat<S>& x, bool cache) {
        if (x.rows() != in_ch_ * in_h_ * in_w_)
            throw std::invalid_argument(name_ + ": bad input dimension");
        const int batch = static_cast<int>(x.cols());
        const int oh = out_h(), ow = out_w(), ohw = oh * ow;

        Mat<S> cols(in_ch_ * k_ * k_, ohw * batch);
        for (int b = 0; b < batch; ++b) {
            for (int oi = 0; oi < oh; ++oi) {
                for (int oj = 0; oj < ow; ++oj) {
                    const int col = b * ohw + oi * ow + oj;
                    for (int c = 0; c < in_ch_; ++c) {
                        for (int di = 0; di < k_; ++di) {
                            for (int dj = 0; dj < k_; ++dj) {
                                cols(c * k_ * k_ + di * k_ + dj, col) =
                                    x(c * in_h_ * in_w_ + (oi + di) * in_w_ + (oj + dj), b);
                            }
                        }
                    }
                }
            }
        }
        Mat<S> ymat = w_ * cols;
        ymat.colwise() += b_.col(0);
        if (cache) cols_ = std::move(cols);

        Mat<S> y(out_dim(), batch);
        for (int b = 0; b < batch; ++b)
            for (int co = 0; co < out_ch_; ++co)
                y.col(b).segment(co * ohw, ohw) = ymat.row(co).segment(b * ohw, ohw).transpose();
        return y;
    }

    Mat<S> backward(const Mat<S>& dy) {
        const int batch = static_cast<int>(dy.cols());
        const int oh = out_h(), ow = out_w(), ohw = oh * ow;

        Mat<S> dymat(out_ch_, ohw * batch);
        for (int b = 0; b < batch; ++b)
            for (int co = 0; co < out_ch_; ++co)
                dymat.row(co).segment(b * ohw, ohw) = dy.col(b).segment(co * ohw, ohw).transpose();

        gw_.noalias() += dymat * cols_.transpose();
        gb_.col(0).noalias() += dymat.rowwise().sum();

        const Mat<S> dcols = w_.transpose() * dymat;
        Mat<S> dx = Mat<S>::Zero(in_ch_ * in_h_ * in_w_, batch);
        for (int b = 0; b < batch; ++b) {
            for (int oi = 0; oi < oh; ++oi) {
                for (int oj = 0; oj < ow; ++oj) {
                    const int col = b * ohw + oi * ow + oj;
                    for (int c = 0; c < in_ch_; ++c) {
                        for (int di = 0; di < k_; ++di) {
                            for (int dj = 0; dj < k_; ++dj) {
                                dx(c * in_h_ * in_w_ + (oi + di) * in_w_ + (oj + dj), b) +=
                                    dcols(c * k_ * k_ + di * k_ + dj, col);
                            }
                        }
                    }
                }
            }
        }
        return dx;
    }

    void collect(std::vector<ParamRef<S>>& out) {
        out.push_back({name_ + ".w", &w_, &gw_});
        out.push_back({name_ + ".b", &b_, &gb_});
    }

  private:
    int in_h_, in_w_, in_ch_, out_ch_, k_;
    Mat<S> w_, b_, gw_, gb_, cols_;
    std::string name_;
};

// Single-head scaled dot-product self-attention over spatial positions with
// a residual connection. Batch layout: one column per sample, index c*m + p
// (position-fastest), so each column maps to an m x d matrix.
template <class S>
class SelfAttention {
  public:
    SelfAttention(int positions, int dim, std::string name)
        : m_(positions),
          d_(dim),
          wq_(Mat<S>::Zero(dim, dim)),
          wk_(Mat<S>::Zero(dim, dim)),
          wv_(Mat<S>::Zero(dim, dim)),
          wo_(Mat<S>::Zero(dim, dim)),
          gwq_(Mat<S>::Zero(dim, dim)),
          gwk_(Mat<S>::Zero(dim, dim)),
          gwv_(Mat<S>::Zero(dim, dim)),
          gwo_(Mat<S>::Zero(dim, dim)),
          name_(std::move(name)) {}

    Mat<S> forward(const Mat<S>& x, bool cache) {
        if (x.rows() != m_ * d_) throw std::invalid_argument(name_ + ": bad input dimension");
        const int batch = static_cast<int>(x.cols());
        Mat<S> y(x.rows(), batch);
        if (cache) {
            x_ = x;
            q_.assign(batch, Mat<S>());
            k_.assign(batch, Mat<S>());
            v_.assign(batch, Mat<S>());
            a_.assign(batch, Mat<S>());
            z_.assign(batch, Mat<S>());
        }
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d_)));
        for (int b = 0; b < batch; ++b) {
            Eigen::Map<const Mat<S>> xs(x.col(b).data(), m_, d_);
            Mat<S> q = xs * wq_;
            Mat<S> k = xs * wk_;
            Mat<S> v = xs * wv_;
            Mat<S> scores = q * k.transpose() * scale;
            for (int i = 0; i < m_; ++i) {
                auto row = scores.row(i);
                row.array() -= row.maxCoeff();
                row = row.array().exp();
                row /= row.sum();
            }
            Mat<S> z = scores * v;
            Eigen::Map<Mat<S>> ys(y.col(b).data(), m_, d_);
            ys = xs + z * wo_;
            if (cache) {
                q_[b] = std::move(q);
                k_[b] = std::move(k);
                v_[b] = std::move(v);
                a_[b] = std::move(scores);
                z_[b] = std::move(z);
            }
        }
        return y;
    }

    Mat<S> backward(const Mat<S>& dy) {
        const int batch = static_cast<int>(dy.cols());
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(d_)));
        Mat<S> dx(m_ * d_, batch);
        for (int b = 0; b < batch; ++b) {
            Eigen::Map<const Mat<S>> xs(x_.col(b).data(), m_, d_);
            Eigen::Map<const Mat<S>> dys(dy.col(b).data(), m_, d_);
            gwo_.noalias() += z_[b].transpose() * dys;
            Mat<S> dz = dys * wo_.transpose();
            Mat<S> da = dz * v_[b].transpose();
            Mat<S> dv = a_[b].transpose() * dz;
            // softmax backward per row
            Mat<S> ds(m_, m_);
            for (int i = 0; i < m_; ++i) {
                const S dot = da.row(i).dot(a_[b].row(i));
                ds.row(i) = (a_[b].row(i).array() * (da.row(i).array() - dot)).matrix();
            }
            Mat<S> dq = ds * k_[b] * scale;
            Mat<S> dk = ds.transpose() * q_[b] * scale;
            gwq_.noalias() += xs.transpose() * dq;
            gwk_.noalias() += xs.transpose() * dk;
            gwv_.noalias() += xs.transpose() * dv;
            Eigen::Map<Mat<S>> dxs(dx.col(b).data(), m_, d_);
            dxs = dys;  // residual path
            dxs.noalias() += dq * wq_.transpose();
            dxs.noalias() += dk * wk_.transpose();
            dxs.noalias() += dv * wv_.transpose();
        }
        return dx;
    }

    void collect(std::vector<ParamRef<S>>& out) {
        out.push_back({name_ + ".wq", &wq_, &gwq_});
        out.push_back({name_ + ".wk", &wk_, &gwk_});
        out.push_back({name_ + ".wv", &wv_, &gwv_});
        out.push_back({name_ + ".wo", &wo_, &gwo_});
    }

    // Attention weights of the last cached forward, one m x m matrix per sample.
    const std::vector<Mat<S>>& attention_weights() const { return a_; }

  private:
    int m_, d_;
    Mat<S> wq_, wk_, wv_, wo_, gwq_, gwk_, gwv_, gwo_, x_;
    std::vector<Mat<S>> q_, k_, v_, a_, z_;
    std::string name_;
};

template <class S>
class Adam {
  public:
    explicit Adam(double eps = 1e-5, double beta1 = 0.9, double beta2 = 0.999)
        : eps_(eps), beta1_(beta1), beta2_(beta2) {}

    void step(const std::vector<ParamRef<S>>& params, double lr) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
                v_.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
            }
        }
        ++t_;
        const S bc1 = static_cast<S>(1.0 - std::pow(beta1_, t_));
        const S bc2 = static_cast<S>(1.0 - std::pow(beta2_, t_));
        const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Mat<S>& g = *params[i].grad;
            m_[i] = b1 * m_[i] + (S(1) - b1) * g;
            v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseProduct(g);
            params[i].value->array() -=
                static_cast<S>(lr) * (m_[i].array() / bc1) /
                ((v_[i].array() / bc2).sqrt() + static_cast<S>(eps_));
        }
    }

    long steps_taken() const { return t_; }

  private:
    double eps_, beta1_, beta2_;
    long t_ = 0;
    std::vector<Mat<S>> m_, v_;
};

}  // namespace apprl
