#pragma once

// Minimal dense LSTM with hand-rolled backpropagation, used by both levels
// of the entry model. Gate rows are stacked [input; forget; candidate;
// output] in one 4H-row matrix per input source.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace febi::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec sigmoid(const Vec& v) {
    return v.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

struct LstmParams {
    Mat wx;  // 4H x In
    Mat wh;  // 4H x H
    Vec b;   // 4H

    int input() const { return int(wx.cols()); }
    int hidden() const { return int(wh.cols()); }

    static LstmParams init(int input, int hidden, std::mt19937_64& rng) {
        LstmParams p;
        double scale = 1.0 / std::sqrt(double(hidden));
        std::uniform_real_distribution<double> dist(-scale, scale);
        auto fill = [&](Mat& m, int r, int c) {
            m.resize(r, c);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) m(i, j) = dist(rng);
        };
        fill(p.wx, 4 * hidden, input);
        fill(p.wh, 4 * hidden, hidden);
        p.b = Vec::Zero(4 * hidden);
        // positive forget bias, the usual trick for stable long sequences
        p.b.segment(hidden, hidden).setConstant(1.0);
        return p;
    }
};

struct LstmGrads {
    Mat wx;
    Mat wh;
    Vec b;

    static LstmGrads zero_like(const LstmParams& p) {
        return {Mat::Zero(p.wx.rows(), p.wx.cols()),
                Mat::Zero(p.wh.rows(), p.wh.cols()), Vec::Zero(p.b.size())};
    }
    void add(const LstmGrads& o) {
        wx += o.wx;
        wh += o.wh;
        b += o.b;
    }
};

struct LstmCache {
    std::vector<Vec> x, i, f, g, o, c, h, tanh_c;
};

// Forward pass from zero initial state; returns hidden states h_0..h_{T-1}
// and fills the cache for backward.
inline std::vector<Vec> lstm_forward(const LstmParams& p,
                                     const std::vector<Vec>& xs,
                                     LstmCache& cache) {
    int H = p.hidden();
    Vec h = Vec::Zero(H), c = Vec::Zero(H);
    cache = {};
    std::vector<Vec> hs;
    hs.reserve(xs.size());
    for (const Vec& x : xs) {
        Vec z = p.wx * x + p.wh * h + p.b;
        Vec gi = sigmoid(z.segment(0, H));
        Vec gf = sigmoid(z.segment(H, H));
        Vec gg = z.segment(2 * H, H).array().tanh();
        Vec go = sigmoid(z.segment(3 * H, H));
        c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
        Vec tc = c.array().tanh();
        Vec h_new = go.cwiseProduct(tc);
        cache.x.push_back(x);
        cache.i.push_back(gi);
        cache.f.push_back(gf);
        cache.g.push_back(gg);
        cache.o.push_back(go);
        cache.c.push_back(c);
        cache.tanh_c.push_back(tc);
        cache.h.push_back(h_new);
        h = h_new;
        hs.push_back(h);
    }
    return hs;
}

// Backpropagation through time. d_h_ext holds the external gradient flowing
// into each hidden state; returns the gradient w.r.t. each input and
// accumulates parameter gradients.
inline std::vector<Vec> lstm_backward(const LstmParams& p,
                                      const LstmCache& cache,
                                      const std::vector<Vec>& d_h_ext,
                                      LstmGrads& grads) {
    int H = p.hidden();
    std::size_t n = cache.x.size();
    std::vector<Vec> d_x(n);
    Vec dh_next = Vec::Zero(H), dc_next = Vec::Zero(H);
    for (std::size_t t = n; t-- > 0;) {
        Vec dh = d_h_ext[t] + dh_next;
        const Vec& gi = cache.i[t];
        const Vec& gf = cache.f[t];
        const Vec& gg = cache.g[t];
        const Vec& go = cache.o[t];
        const Vec& tc = cache.tanh_c[t];
        Vec c_prev = t > 0 ? cache.c[t - 1] : Vec::Zero(H);
        Vec h_prev = t > 0 ? cache.h[t - 1] : Vec::Zero(H);

        Vec d_o = dh.cwiseProduct(tc);
        Vec dc = dc_next +
                 dh.cwiseProduct(go).cwiseProduct(
                     (1.0 - tc.array().square()).matrix());
        Vec d_i = dc.cwiseProduct(gg);
        Vec d_g = dc.cwiseProduct(gi);
        Vec d_f = dc.cwiseProduct(c_prev);
        dc_next = dc.cwiseProduct(gf);

        Vec dz(4 * H);
        dz.segment(0, H) =
            d_i.cwiseProduct(gi).cwiseProduct((1.0 - gi.array()).matrix());
        dz.segment(H, H) =
            d_f.cwiseProduct(gf).cwiseProduct((1.0 - gf.array()).matrix());
        dz.segment(2 * H, H) =
            d_g.cwiseProduct((1.0 - gg.array().square()).matrix());
        dz.segment(3 * H, H) =
            d_o.cwiseProduct(go).cwiseProduct((1.0 - go.array()).matrix());

        grads.wx += dz * cache.x[t].transpose();
        grads.wh += dz * h_prev.transpose();
        grads.b += dz;
        d_x[t] = p.wx.transpose() * dz;
        dh_next = p.wh.transpose() * dz;
    }
    return d_x;
}

}  // namespace febi::nn
