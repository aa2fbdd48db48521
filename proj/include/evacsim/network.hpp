#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include "evacsim/rng.hpp"

namespace evacsim {

/// Flush denormal doubles to zero on this thread while alive. Adam moments of
/// rarely-hit parameters decay into the subnormal range and cripple FMA
/// throughput without this.
class ScopedFlushDenormals {
public:
    ScopedFlushDenormals() {
#if defined(__SSE2__)
        ftz_ = _MM_GET_FLUSH_ZERO_MODE();
        daz_ = _MM_GET_DENORMALS_ZERO_MODE();
        _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
        _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
    }
    ~ScopedFlushDenormals() {
#if defined(__SSE2__)
        _MM_SET_FLUSH_ZERO_MODE(ftz_);
        _MM_SET_DENORMALS_ZERO_MODE(daz_);
#endif
    }
    ScopedFlushDenormals(const ScopedFlushDenormals&) = delete;
    ScopedFlushDenormals& operator=(const ScopedFlushDenormals&) = delete;

private:
#if defined(__SSE2__)
    unsigned ftz_ = 0, daz_ = 0;
#endif
};

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
    // reshape without clearing; contents are unspecified unless freshly grown
    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.resize(static_cast<size_t>(r) * c);
    }
};

namespace lin {

// fixed-order unrolled dot; eight accumulators fill the 512-bit FMA lanes
inline double dot(const double* x, const double* y, int n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
        s4 += x[i + 4] * y[i + 4];
        s5 += x[i + 5] * y[i + 5];
        s6 += x[i + 6] * y[i + 6];
        s7 += x[i + 7] * y[i + 7];
    }
    for (; i < n; ++i) s0 += x[i] * y[i];
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

inline void axpy(double* y, double alpha, const double* x, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Z = X * W^T + b  (X: B x in, W: out x in, b: 1 x out, Z: B x out)
inline void linear_forward(const Mat& X, const Mat& W, const Mat& b, Mat& Z) {
    Z.resize(X.rows, W.rows);
    for (int r = 0; r < X.rows; ++r) {
        const double* x = X.row(r);
        double* z = Z.row(r);
        for (int o = 0; o < W.rows; ++o) z[o] = dot(x, W.row(o), W.cols) + b.a[o];
    }
}

// dX = dZ * W, dW += dZ^T * X, db += column sums of dZ
inline void linear_backward(const Mat& X, const Mat& W, const Mat& dZ, Mat* dX, Mat& dW, Mat& db) {
    if (dX) {
        dX->resize(X.rows, X.cols);
        for (int r = 0; r < X.rows; ++r) {
            const double* dz = dZ.row(r);
            double* dx = dX->row(r);
            std::fill(dx, dx + X.cols, 0.0);
            for (int o = 0; o < W.rows; ++o)
                if (dz[o] != 0.0) axpy(dx, dz[o], W.row(o), W.cols);
        }
    }
    for (int r = 0; r < X.rows; ++r) {
        const double* dz = dZ.row(r);
        const double* x = X.row(r);
        for (int o = 0; o < W.rows; ++o) {
            if (dz[o] != 0.0) axpy(dW.row(o), dz[o], x, X.cols);
            db.a[o] += dz[o];
        }
    }
}

}  // namespace lin

/// Feedforward approximator: rectified-linear hidden trunk, linear output,
/// optionally split into a scalar value head and an advantage head.
class Network {
public:
    enum class Dueling { None, Mean, Max };

    Network() = default;

    Network(int input, std::vector<int> trunk, int output, Dueling mode, uint64_t seed)
        : input_(input), trunk_sizes_(std::move(trunk)), output_(output), mode_(mode) {
        if (input <= 0 || output <= 0) throw std::invalid_argument("network: bad layer sizes");
        Rng rng(seed);
        int prev = input_;
        for (int h : trunk_sizes_) {
            if (h <= 0) throw std::invalid_argument("network: bad hidden size");
            params_.push_back(he_init(h, prev, rng));
            params_.emplace_back(1, h);
            prev = h;
        }
        if (mode_ == Dueling::None) {
            params_.push_back(he_init(output_, prev, rng));
            params_.emplace_back(1, output_);
        } else {
            params_.push_back(he_init(1, prev, rng));      // value head
            params_.emplace_back(1, 1);
            params_.push_back(he_init(output_, prev, rng));  // advantage head
            params_.emplace_back(1, output_);
        }
    }

    int input_size() const { return input_; }
    int output_size() const { return output_; }
    Dueling mode() const { return mode_; }
    const std::vector<int>& trunk_sizes() const { return trunk_sizes_; }
    std::vector<Mat>& params() { return params_; }
    const std::vector<Mat>& params() const { return params_; }

    bool all_finite() const {
        for (const auto& m : params_)
            for (double v : m.a)
                if (!std::isfinite(v)) return false;
        return true;
    }

    struct Cache {
        std::vector<Mat> acts;  // acts[0] = input, acts[l] = post-ReLU layer l
        Mat value, adv;         // dueling heads
        Mat dtmp0, dtmp1;       // backward scratch
        Mat dq, dadv, dval, dhv, dha;
        Mat q;                  // loss-path forward output
    };

    /// Batch forward; Q is B x output. Hidden layers apply max(0,.), the output
    /// is affine; dueling nets aggregate V + (A - mean(A)) or V + (A - max(A)).
    void forward_batch(const Mat& X, Mat& Q, Cache& c) const {
        if (X.cols != input_) throw std::invalid_argument("forward: input size mismatch");
        const int layers = static_cast<int>(trunk_sizes_.size());
        if (static_cast<int>(c.acts.size()) != layers + 1) c.acts.resize(layers + 1);
        c.acts[0] = X;
        for (int l = 0; l < layers; ++l) {
            lin::linear_forward(c.acts[l], params_[2 * l], params_[2 * l + 1], c.acts[l + 1]);
            for (double& v : c.acts[l + 1].a) v = v > 0.0 ? v : 0.0;
        }
        const Mat& h = c.acts[layers];
        if (mode_ == Dueling::None) {
            lin::linear_forward(h, params_[2 * layers], params_[2 * layers + 1], Q);
            return;
        }
        lin::linear_forward(h, params_[2 * layers], params_[2 * layers + 1], c.value);
        lin::linear_forward(h, params_[2 * layers + 2], params_[2 * layers + 3], c.adv);
        Q.resize(X.rows, output_);
        for (int r = 0; r < X.rows; ++r) {
            const double* adv = c.adv.row(r);
            double agg;
            if (mode_ == Dueling::Mean) {
                double s = 0.0;
                for (int j = 0; j < output_; ++j) s += adv[j];
                agg = s / output_;
            } else {
                agg = adv[0];
                for (int j = 1; j < output_; ++j) agg = std::max(agg, adv[j]);
            }
            const double v = c.value.at(r, 0);
            double* q = Q.row(r);
            for (int j = 0; j < output_; ++j) q[j] = v + (adv[j] - agg);
        }
    }

    std::vector<double> forward(const std::vector<double>& x) const {
        Mat X(1, input_);
        if (static_cast<int>(x.size()) != input_)
            throw std::invalid_argument("forward: input size mismatch");
        std::copy(x.begin(), x.end(), X.a.begin());
        Cache c;
        Mat Q;
        forward_batch(X, Q, c);
        return Q.a;
    }

    /// Backprop a loss gradient dQ (B x output) through the net, accumulating
    /// parameter gradients into g (shapes mirror params()).
    void backward(const Mat& dQ, Cache& c, std::vector<Mat>& g) const {
        const int layers = static_cast<int>(trunk_sizes_.size());
        Mat* dh = &c.dtmp0;
        if (mode_ == Dueling::None) {
            lin::linear_backward(c.acts[layers], params_[2 * layers], dQ, dh,
                                 g[2 * layers], g[2 * layers + 1]);
        } else {
            const int B = dQ.rows;
            Mat& dV = c.dval;
            Mat& dA = c.dadv;
            dV.resize(B, 1);
            dA.resize(B, output_);
            for (int r = 0; r < B; ++r) {
                const double* dq = dQ.row(r);
                double sum = 0.0;
                for (int j = 0; j < output_; ++j) sum += dq[j];
                dV.at(r, 0) = sum;
                double* da = dA.row(r);
                if (mode_ == Dueling::Mean) {
                    const double m = sum / output_;
                    for (int j = 0; j < output_; ++j) da[j] = dq[j] - m;
                } else {
                    const double* adv = c.adv.row(r);
                    int am = 0;
                    for (int j = 1; j < output_; ++j)
                        if (adv[j] > adv[am]) am = j;
                    for (int j = 0; j < output_; ++j) da[j] = dq[j];
                    da[am] -= sum;
                }
            }
            lin::linear_backward(c.acts[layers], params_[2 * layers], dV, &c.dhv,
                                 g[2 * layers], g[2 * layers + 1]);
            lin::linear_backward(c.acts[layers], params_[2 * layers + 2], dA, &c.dha,
                                 g[2 * layers + 2], g[2 * layers + 3]);
            dh->resize(c.dhv.rows, c.dhv.cols);
            for (size_t i = 0; i < dh->a.size(); ++i) dh->a[i] = c.dhv.a[i] + c.dha.a[i];
        }
        for (int l = layers - 1; l >= 0; --l) {
            // post-activation > 0 marks the live rectifier units
            Mat& act = c.acts[l + 1];
            for (size_t i = 0; i < dh->a.size(); ++i)
                if (act.a[i] <= 0.0) dh->a[i] = 0.0;
            Mat* dprev = (dh == &c.dtmp0) ? &c.dtmp1 : &c.dtmp0;
            lin::linear_backward(c.acts[l], params_[2 * l], *dh, l > 0 ? dprev : nullptr,
                                 g[2 * l], g[2 * l + 1]);
            dh = dprev;
        }
    }

private:
    static Mat he_init(int rows, int cols, Rng& rng) {
        Mat w(rows, cols);
        const double limit = std::sqrt(6.0 / cols);
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& v : w.a) v = dist(rng);
        return w;
    }

    int input_ = 0;
    std::vector<int> trunk_sizes_;
    int output_ = 0;
    Dueling mode_ = Dueling::None;
    std::vector<Mat> params_;
};

inline std::vector<Mat> make_grads(const Network& net) {
    std::vector<Mat> g;
    g.reserve(net.params().size());
    for (const auto& p : net.params()) g.emplace_back(p.rows, p.cols);
    return g;
}

inline void zero_grads(std::vector<Mat>& g) {
    for (auto& m : g) m.zero();
}

/// Loss restricted to one action per sample: mean over the batch of
/// 0.5*(y - Q[a])^2. Gradients accumulate into *g when given.
inline double masked_loss(const Network& net, const Mat& X, const std::vector<int>& actions,
                          const std::vector<double>& targets, std::vector<Mat>* g,
                          Network::Cache& c) {
    Mat& Q = c.q;
    net.forward_batch(X, Q, c);
    const int B = X.rows;
    double loss = 0.0;
    Mat& dQ = c.dq;
    if (g) {
        dQ.resize(B, net.output_size());
        dQ.zero();
    }
    for (int r = 0; r < B; ++r) {
        const int a = actions[r];
        const double diff = Q.at(r, a) - targets[r];
        loss += 0.5 * diff * diff;
        if (g) dQ.at(r, a) = diff / B;
    }
    loss /= B;
    if (g) net.backward(dQ, c, *g);
    return loss;
}

/// Full-vector loss: mean over batch and outputs of 0.5*(target - Q)^2.
inline double full_loss(const Network& net, const Mat& X, const Mat& targets, std::vector<Mat>* g,
                        Network::Cache& c) {
    Mat& Q = c.q;
    net.forward_batch(X, Q, c);
    const int B = X.rows, O = net.output_size();
    double loss = 0.0;
    Mat& dQ = c.dq;
    if (g) dQ.resize(B, O);
    const double scale = 1.0 / (static_cast<double>(B) * O);
    for (int r = 0; r < B; ++r)
        for (int j = 0; j < O; ++j) {
            const double diff = Q.at(r, j) - targets.at(r, j);
            loss += 0.5 * diff * diff;
            if (g) dQ.at(r, j) = diff * scale;
        }
    loss *= scale;
    if (g) net.backward(dQ, c, *g);
    return loss;
}

/// Bias-corrected Adam.
struct AdamOpt {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    std::vector<Mat> m, v;
    long steps = 0;

    void init(const Network& net) {
        m = make_grads(net);
        v = make_grads(net);
        steps = 0;
    }

    void step(Network& net, const std::vector<Mat>& g) {
        ++steps;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
        auto& params = net.params();
        for (size_t i = 0; i < params.size(); ++i) {
            double* p = params[i].a.data();
            double* mi = m[i].a.data();
            double* vi = v[i].a.data();
            const double* gi = g[i].a.data();
            const size_t count = params[i].a.size();
            for (size_t k = 0; k < count; ++k) {
                mi[k] = beta1 * mi[k] + (1.0 - beta1) * gi[k];
                vi[k] = beta2 * vi[k] + (1.0 - beta2) * gi[k] * gi[k];
                const double mhat = mi[k] / c1;
                const double vhat = vi[k] / c2;
                p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

/// Checkpoint I/O; hexfloat values round-trip bit-exactly.
inline void save_network(const Network& net, std::ostream& out) {
    out << "evacsim-net 1\n";
    out << "input " << net.input_size() << "\n";
    out << "trunk";
    for (int h : net.trunk_sizes()) out << ' ' << h;
    out << "\noutput " << net.output_size() << "\n";
    out << "dueling "
        << (net.mode() == Network::Dueling::None ? "none"
            : net.mode() == Network::Dueling::Mean ? "mean" : "max")
        << "\n";
    char buf[64];
    for (const auto& p : net.params()) {
        out << "tensor " << p.rows << ' ' << p.cols << '\n';
        for (int r = 0; r < p.rows; ++r) {
            const double* row = p.row(r);
            for (int c = 0; c < p.cols; ++c) {
                std::snprintf(buf, sizeof(buf), "%a", row[c]);
                out << (c ? " " : "") << buf;
            }
            out << '\n';
        }
    }
}

inline void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open checkpoint output " + path);
    save_network(net, out);
}

inline Network load_network(std::istream& in) {
    std::string word;
    int version;
    in >> word >> version;
    if (word != "evacsim-net" || version != 1)
        throw std::runtime_error("checkpoint: unrecognized header");
    int input = 0, output = 0;
    std::vector<int> trunk;
    in >> word >> input;                       // "input"
    in >> word;                                // "trunk"
    {
        std::string rest;
        std::getline(in, rest);
        std::stringstream ss(rest);
        int h;
        while (ss >> h) trunk.push_back(h);
    }
    in >> word >> output;                      // "output"
    std::string mode_s;
    in >> word >> mode_s;                      // "dueling"
    Network::Dueling mode = mode_s == "none" ? Network::Dueling::None
                            : mode_s == "mean" ? Network::Dueling::Mean : Network::Dueling::Max;
    Network net(input, trunk, output, mode, 0);
    for (auto& p : net.params()) {
        int r, c;
        in >> word >> r >> c;                  // "tensor"
        if (word != "tensor" || r != p.rows || c != p.cols)
            throw std::runtime_error("checkpoint: tensor shape mismatch");
        // stream extraction does not accept hexfloat; go through strtod
        std::string tok;
        for (double& v : p.a) {
            if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated file");
            v = std::strtod(tok.c_str(), nullptr);
        }
    }
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return net;
}

inline Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint file " + path);
    return load_network(in);
}

}  // namespace evacsim
