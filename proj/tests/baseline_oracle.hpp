// Independent L1+TV reference solver (ADMM with a dense J-update) on small
// graphs, shared by the baseline tests and the acceptance suite.
#pragma once

#include "hetmeg/baselines.hpp"
#include "hetmeg/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace oracle {

/// Dodecahedron graph: faces of the base icosahedron, joined when they share an edge.
inline hetmeg::baselines::TVOperator dodecahedron_tv()
{
    const auto ico = hetmeg::geometry::make_icosphere(0);
    std::map<std::pair<int, int>, int> owner;
    hetmeg::baselines::TVOperator V;
    for (int f = 0; f < static_cast<int>(ico.triangles.size()); ++f) {
        const auto& t = ico.triangles[f];
        for (int k = 0; k < 3; ++k) {
            auto key = std::minmax(t[k], t[(k + 1) % 3]);
            auto [it, inserted] = owner.emplace(std::pair<int, int>(key.first, key.second), f);
            if (!inserted) V.edges.emplace_back(it->second, f);
        }
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (int e = 0; e < static_cast<int>(V.edges.size()); ++e) {
        trip.emplace_back(e, V.edges[e].first, 1.0);
        trip.emplace_back(e, V.edges[e].second, -1.0);
    }
    V.matrix.resize(static_cast<Eigen::Index>(V.edges.size()), static_cast<Eigen::Index>(ico.triangles.size()));
    V.matrix.setFromTriplets(trip.begin(), trip.end());
    return V;
}

struct TinyProblem {
    Eigen::MatrixXd L;  // 10 x 20
    Eigen::VectorXd d;
    hetmeg::baselines::TVOperator V;  // 30 x 20
    double lambda = 0.0;
    double alpha = 0.0;
};

inline TinyProblem tiny_problem(unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TinyProblem p;
    p.V = dodecahedron_tv();
    const Eigen::Index m = p.V.matrix.cols();
    p.L.resize(10, m);
    for (Eigen::Index i = 0; i < p.L.size(); ++i) p.L.data()[i] = n01(rng);
    Eigen::VectorXd j = Eigen::VectorXd::Zero(m);
    const int first = static_cast<int>(u(rng) * 12);
    for (int i = first; i < first + 6; ++i) j[i] = 1.0 + 0.1 * n01(rng);
    p.d = p.L * j;
    for (Eigen::Index i = 0; i < p.d.size(); ++i) p.d[i] += 0.2 * n01(rng);
    p.lambda = (0.01 + 0.2 * u(rng)) * (p.L.transpose() * p.d).cwiseAbs().maxCoeff();
    p.alpha = 0.05 + 0.95 * u(rng);
    return p;
}

struct OracleResult {
    Eigen::VectorXd J;
    double objective = 0.0;
    double kkt_residual = 0.0;
};

/// min 0.5||LJ - d||^2 + lambda ||VJ||_1 + lambda alpha ||J||_1 with z = [V; I] J.
inline OracleResult admm_l1tv(const Eigen::MatrixXd& L, const Eigen::VectorXd& d,
                              const hetmeg::baselines::TVOperator& V, double lambda, double alpha,
                              int max_iter = 2000000)
{
    const Eigen::Index m = L.cols(), e = V.matrix.rows();
    Eigen::MatrixXd K(e + m, m);
    K << Eigen::MatrixXd(V.matrix), Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd w(e + m);
    w.head(e).setConstant(lambda);
    w.tail(m).setConstant(lambda * alpha);

    const double rho = std::max(1.0, L.norm() * L.norm() / static_cast<double>(m));
    const Eigen::LLT<Eigen::MatrixXd> llt(L.transpose() * L + rho * K.transpose() * K);
    const Eigen::VectorXd ltd = L.transpose() * d;

    Eigen::VectorXd J = Eigen::VectorXd::Zero(m), z = Eigen::VectorXd::Zero(e + m), u = z;
    OracleResult out;
    auto kkt = [&] {
        const Eigen::VectorXd y = rho * u;
        const double stat = (L.transpose() * (L * J - d) + K.transpose() * y).norm() / std::max(ltd.norm(), 1e-300);
        const double feas = (K * J - z).norm() / std::max(J.norm(), 1e-300);
        double sub = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double gap = z[i] != 0.0 ? std::abs(y[i] - w[i] * (z[i] > 0 ? 1.0 : -1.0))
                                           : std::max(0.0, std::abs(y[i]) - w[i]);
            sub = std::max(sub, gap / w[i]);
        }
        return std::max({stat, feas, sub});
    };
    for (int it = 0; it < max_iter; ++it) {
        J = llt.solve(ltd + rho * K.transpose() * (z - u));
        const Eigen::VectorXd kj = K * J;
        const Eigen::VectorXd v = kj + u;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double t = w[i] / rho;
            z[i] = v[i] > t ? v[i] - t : (v[i] < -t ? v[i] + t : 0.0);
        }
        u += kj - z;
        if (it % 1000 == 999 && kkt() < 1e-12) break;
    }
    out.J = J;
    out.kkt_residual = kkt();
    out.objective = 0.5 * (L * J - d).squaredNorm() + lambda * (V.matrix * J).lpNorm<1>() +
                    lambda * alpha * J.lpNorm<1>();
    return out;
}

} // namespace oracle
