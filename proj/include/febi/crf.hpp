#pragma once

// Linear-chain CRF over binary block labels: log-space forward/backward,
// Viterbi decoding (ties broken toward label 0), and the analytic gradients
// of the negative log-likelihood.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace febi::crf {

using Emissions = Eigen::MatrixXd;          // L x 2
using Transitions = Eigen::Matrix2d;        // T(a,b): score of a -> b

inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

// Path score: sum of emissions along the labels plus transitions between
// consecutive labels.
inline double path_score(const Emissions& e, const Transitions& t,
                         const std::vector<int>& labels) {
    double s = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        s += e(Eigen::Index(i), labels[i]);
        if (i > 0) s += t(labels[i - 1], labels[i]);
    }
    return s;
}

inline Eigen::MatrixXd forward_table(const Emissions& e, const Transitions& t) {
    Eigen::Index n = e.rows();
    Eigen::MatrixXd alpha(n, 2);
    alpha.row(0) = e.row(0);
    for (Eigen::Index i = 1; i < n; ++i)
        for (int y = 0; y < 2; ++y)
            alpha(i, y) = e(i, y) + log_add(alpha(i - 1, 0) + t(0, y),
                                            alpha(i - 1, 1) + t(1, y));
    return alpha;
}

inline Eigen::MatrixXd backward_table(const Emissions& e, const Transitions& t) {
    Eigen::Index n = e.rows();
    Eigen::MatrixXd beta(n, 2);
    beta.row(n - 1).setZero();
    for (Eigen::Index i = n - 2; i >= 0; --i)
        for (int y = 0; y < 2; ++y)
            beta(i, y) = log_add(t(y, 0) + e(i + 1, 0) + beta(i + 1, 0),
                                 t(y, 1) + e(i + 1, 1) + beta(i + 1, 1));
    return beta;
}

inline double log_partition(const Emissions& e, const Transitions& t) {
    Eigen::MatrixXd alpha = forward_table(e, t);
    Eigen::Index n = e.rows();
    return log_add(alpha(n - 1, 0), alpha(n - 1, 1));
}

inline double nll(const Emissions& e, const Transitions& t,
                  const std::vector<int>& labels) {
    if (e.rows() == 0) throw std::invalid_argument("empty emission sequence");
    if (std::size_t(e.rows()) != labels.size())
        throw std::invalid_argument("label/emission length mismatch");
    return log_partition(e, t) - path_score(e, t, labels);
}

inline std::vector<int> viterbi(const Emissions& e, const Transitions& t) {
    if (e.rows() == 0) throw std::invalid_argument("empty emission sequence");
    Eigen::Index n = e.rows();
    Eigen::MatrixXd v(n, 2);
    Eigen::MatrixXi back(n, 2);
    v.row(0) = e.row(0);
    for (Eigen::Index i = 1; i < n; ++i) {
        for (int y = 0; y < 2; ++y) {
            // strict > keeps the predecessor with the smaller label on ties
            int best = 0;
            double score = v(i - 1, 0) + t(0, y);
            double alt = v(i - 1, 1) + t(1, y);
            if (alt > score) {
                best = 1;
                score = alt;
            }
            v(i, y) = e(i, y) + score;
            back(i, y) = best;
        }
    }
    std::vector<int> labels(static_cast<std::size_t>(n));
    labels[n - 1] = v(n - 1, 1) > v(n - 1, 0) ? 1 : 0;
    for (Eigen::Index i = n - 1; i > 0; --i)
        labels[i - 1] = back(i, labels[i]);
    return labels;
}

// Posterior marginals p(y_i = 1).
inline Eigen::VectorXd marginals(const Emissions& e, const Transitions& t) {
    if (e.rows() == 0) throw std::invalid_argument("empty emission sequence");
    Eigen::MatrixXd alpha = forward_table(e, t);
    Eigen::MatrixXd beta = backward_table(e, t);
    Eigen::Index n = e.rows();
    double log_z = log_add(alpha(n - 1, 0), alpha(n - 1, 1));
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i)
        p(i) = std::exp(alpha(i, 1) + beta(i, 1) - log_z);
    return p;
}

struct Gradients {
    Emissions d_emissions;
    Transitions d_transitions;
};

// d nll / d emissions = unary marginal - label indicator,
// d nll / d transitions = pairwise marginal - transition indicator.
inline Gradients nll_gradients(const Emissions& e, const Transitions& t,
                               const std::vector<int>& labels) {
    Eigen::MatrixXd alpha = forward_table(e, t);
    Eigen::MatrixXd beta = backward_table(e, t);
    Eigen::Index n = e.rows();
    double log_z = log_add(alpha(n - 1, 0), alpha(n - 1, 1));

    Gradients g;
    g.d_emissions = Emissions::Zero(n, 2);
    g.d_transitions = Transitions::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int y = 0; y < 2; ++y)
            g.d_emissions(i, y) = std::exp(alpha(i, y) + beta(i, y) - log_z);
        g.d_emissions(i, labels[i]) -= 1.0;
    }
    for (Eigen::Index i = 1; i < n; ++i) {
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                g.d_transitions(a, b) += std::exp(alpha(i - 1, a) + t(a, b) +
                                                  e(i, b) + beta(i, b) - log_z);
        g.d_transitions(labels[i - 1], labels[i]) -= 1.0;
    }
    return g;
}

}  // namespace febi::crf
