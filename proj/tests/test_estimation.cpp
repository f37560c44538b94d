#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "arh/estimation.hpp"

using namespace arh;

namespace {

Sample random_sample(const GridPtr& grid, std::size_t n, Rng& rng) {
    Eigen::MatrixXd obs(static_cast<Eigen::Index>(n),
                        static_cast<Eigen::Index>(grid->size()));
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
        for (Eigen::Index j = 0; j < obs.cols(); ++j) obs(i, j) = rng.normal();
    }
    return Sample(grid, std::move(obs));
}

/// Brute-force oracle: average of explicit rank-one tensors.
Eigen::MatrixXd brute_force_covariance(const Sample& s) {
    const auto m = static_cast<Eigen::Index>(s.grid()->size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Eigen::VectorXd x = s.observation(i).values();
        for (Eigen::Index a = 0; a < m; ++a) {
            for (Eigen::Index b = 0; b < m; ++b) k(a, b) += x[a] * x[b];
        }
    }
    return k / static_cast<double>(s.size());
}

Eigen::MatrixXd brute_force_cross(const Sample& s) {
    const auto m = static_cast<Eigen::Index>(s.grid()->size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const Eigen::VectorXd x = s.observation(i).values();
        const Eigen::VectorXd y = s.observation(i + 1).values();
        // kernel of x (x) y is y_a x_b
        for (Eigen::Index a = 0; a < m; ++a) {
            for (Eigen::Index b = 0; b < m; ++b) k(a, b) += y[a] * x[b];
        }
    }
    return k / static_cast<double>(s.size() - 1);
}

Sample constant_sample(const GridFunction& x, std::size_t n) {
    Eigen::MatrixXd obs(static_cast<Eigen::Index>(n),
                        static_cast<Eigen::Index>(x.size()));
    for (Eigen::Index i = 0; i < obs.rows(); ++i) obs.row(i) = x.values().transpose();
    return Sample(x.grid(), std::move(obs));
}

EigenSystem eigen_from_values(const GridPtr& grid, std::initializer_list<double> values) {
    EigenSystem es;
    es.eigenvalues.resize(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double v : values) es.eigenvalues[i++] = v;
    for (std::size_t j = 1; j <= values.size(); ++j) {
        es.eigenfunctions.push_back(sine_basis(grid, j));
    }
    es.rank = values.size();
    return es;
}

} // namespace

TEST_CASE("empirical covariance matches the brute-force oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const GridPtr grid = Grid::uniform(4 + static_cast<std::size_t>(rng.next_u64() % 5));
        const std::size_t n = 2 + static_cast<std::size_t>(rng.next_u64() % 9);
        const Sample s = random_sample(grid, n, rng);
        CHECK((empirical_covariance(s).kernel() - brute_force_covariance(s))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-12);
        CHECK((empirical_cross_covariance(s).kernel() - brute_force_cross(s))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-12);
    }
}

TEST_CASE("empirical covariance special cases") {
    const GridPtr grid = Grid::uniform(8);
    Rng rng(3);

    const Sample zeros(grid, Eigen::MatrixXd::Zero(4, 8));
    CHECK(empirical_covariance(zeros).kernel().cwiseAbs().maxCoeff() == 0.0);
    CHECK(empirical_cross_covariance(zeros).kernel().cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd v(8);
    for (Eigen::Index i = 0; i < 8; ++i) v[i] = rng.normal();
    const GridFunction x(grid, v);
    const Sample repeated = constant_sample(x, 5);
    const LinOperator xx = tensor_product(x, x);
    CHECK((empirical_covariance(repeated).kernel() - xx.kernel()).cwiseAbs().maxCoeff() <=
          1e-13);
    CHECK((empirical_cross_covariance(repeated).kernel() - xx.kernel())
              .cwiseAbs()
              .maxCoeff() <= 1e-13);
}

TEST_CASE("cross covariance with n = 2 is the single tensor term") {
    const GridPtr grid = Grid::uniform(8);
    Rng rng(5);
    const Sample s = random_sample(grid, 2, rng);
    const LinOperator expected = tensor_product(s.observation(0), s.observation(1));
    CHECK((empirical_cross_covariance(s).kernel() - expected.kernel())
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("projections of a repeated eigenfunction sample") {
    const GridPtr grid = Grid::uniform(16);
    const GridFunction phi1 = sine_basis(grid, 1);
    const Sample s = constant_sample(phi1, 6);
    const EigenSystem eigen = eigh(empirical_covariance(s));
    const Eigen::MatrixXd table = project(s, eigen, 3);

    // The top empirical eigenvector equals the planted function up to sign.
    const double sign = inner_product(eigen.eigenfunctions[0], phi1) >= 0 ? 1.0 : -1.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        CHECK(table(i, 0) == doctest::Approx(sign).epsilon(1e-10));
        CHECK(std::abs(table(i, 1)) <= 1e-8);
        CHECK(std::abs(table(i, 2)) <= 1e-8);
    }
}

TEST_CASE("projection variances reproduce the eigenvalues") {
    const GridPtr grid = Grid::uniform(16);
    Rng rng(7);
    const Sample s = random_sample(grid, 50, rng);
    const EigenSystem eigen = eigh(empirical_covariance(s));
    const Eigen::MatrixXd table = project(s, eigen, eigen.rank);
    for (std::size_t j = 0; j < eigen.rank; ++j) {
        const auto jc = static_cast<Eigen::Index>(j);
        if (eigen.eigenvalues[jc] <= 1e-12 * eigen.eigenvalues[0]) continue;
        const double var = table.col(jc).squaredNorm() / static_cast<double>(s.size());
        CHECK(std::abs(var - eigen.eigenvalues[jc]) <= 1e-9);
    }
}

TEST_CASE("diagonal cross-covariance scores") {
    const GridPtr grid = Grid::uniform(8);
    Rng rng(11);

    const Sample zeros(grid, Eigen::MatrixXd::Zero(4, 8));
    const EigenSystem zero_eigen = eigh(empirical_covariance(zeros));
    const DiagonalCross zero_cross = diagonal_cross(zeros, zero_eigen, 2);
    CHECK(zero_cross.diagonal.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero_cross.full.cwiseAbs().maxCoeff() == 0.0);

    const Sample pair = random_sample(grid, 2, rng);
    const EigenSystem eigen = eigh(empirical_covariance(pair));
    const Eigen::MatrixXd table = project(pair, eigen, 2);
    const DiagonalCross cross = diagonal_cross(pair, eigen, 2);
    for (Eigen::Index j = 0; j < 2; ++j) {
        CHECK(cross.diagonal[j] ==
              doctest::Approx(table(0, j) * table(1, j)).epsilon(1e-12));
    }

    // Operator route, checked externally as well as inside diagonal_cross.
    const Sample s = random_sample(grid, 30, rng);
    const EigenSystem es = eigh(empirical_covariance(s));
    const DiagonalCross dc = diagonal_cross(s, es, 4);
    const LinOperator d_n = empirical_cross_covariance(s);
    for (std::size_t j = 0; j < 4; ++j) {
        const double via_op = inner_product(apply(d_n, es.eigenfunctions[j]),
                                            es.eigenfunctions[j]);
        CHECK(std::abs(via_op - dc.diagonal[static_cast<Eigen::Index>(j)]) <= 1e-9);
    }
}

TEST_CASE("truncation rule arithmetic at n = 2000") {
    const GridPtr grid = Grid::uniform(16);
    const EigenSystem eigen = eigen_from_values(grid, {1.0, 0.5, 0.25, 0.125, 0.0625});
    EstimatorConfig cfg; // beta 0.55, c_trunc 1

    const double rate = std::pow(2000.0, 0.25) / std::pow(std::log(2000.0), 0.55);
    const auto expected = static_cast<std::size_t>(std::ceil(rate));
    CHECK(expected == 3); // frozen from the arithmetic above
    CHECK(select_truncation(eigen, 2000, cfg) == expected);
}

TEST_CASE("truncation rule caps") {
    const GridPtr grid = Grid::uniform(16);
    EstimatorConfig cfg;

    // Floor cap dominates the rate: only one eigenvalue clears 1e-8 * C_1.
    const EigenSystem tiny = eigen_from_values(grid, {1.0, 1e-12, 1e-13});
    CHECK(select_truncation(tiny, 2000, cfg) == 1);

    // Override respected when the floor allows it.
    const EigenSystem ample = eigen_from_values(grid, {1.0, 0.9, 0.8, 0.7, 0.6, 0.5});
    cfg.k_override = 5;
    CHECK(select_truncation(ample, 2000, cfg) == 5);

    // Override still capped by the floor.
    cfg.k_override = 3;
    CHECK(select_truncation(tiny, 2000, cfg) == 1);

    // n - 1 cap.
    cfg.k_override = 5;
    CHECK(select_truncation(ample, 3, cfg) == 2);

    // No eigenvalue above the floor: estimation impossible.
    cfg.k_override.reset();
    const EigenSystem dead = eigen_from_values(grid, {0.0, 0.0});
    CHECK_THROWS_AS(select_truncation(dead, 100, cfg), EstimationError);
}

TEST_CASE("truncation is monotone in n") {
    const GridPtr grid = Grid::uniform(16);
    EigenSystem eigen;
    eigen.eigenvalues.resize(12);
    for (Eigen::Index j = 0; j < 12; ++j) {
        eigen.eigenvalues[j] = 1.0 / static_cast<double>((j + 1) * (j + 1));
    }
    eigen.rank = 12;
    EstimatorConfig cfg;
    std::size_t prev = 1;
    for (std::size_t n : {10, 30, 100, 300, 1000, 3000, 10000, 30000, 100000}) {
        const std::size_t k = select_truncation(eigen, n, cfg);
        CHECK(k >= prev);
        prev = k;
    }
}

TEST_CASE("gamma rate rule grows faster") {
    const GridPtr grid = Grid::uniform(16);
    EigenSystem eigen;
    eigen.eigenvalues.resize(15);
    for (Eigen::Index j = 0; j < 15; ++j) {
        eigen.eigenvalues[j] = 1.0 / static_cast<double>((j + 1) * (j + 1));
    }
    eigen.rank = 15;
    EstimatorConfig cfg;
    const std::size_t base = select_truncation(eigen, 100000, cfg);
    cfg.gamma = 0.4;
    const std::size_t fast = select_truncation(eigen, 100000, cfg);
    CHECK(fast > base);

    cfg.gamma = 0.6; // outside (1/4, 1/2)
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("estimator config validation") {
    EstimatorConfig cfg;
    cfg.beta = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.beta = 0.55;
    cfg.eigen_floor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("white-noise estimates shrink with n") {
    auto median_trace = [](std::size_t n, std::uint64_t seed_base) {
        std::vector<double> values;
        for (int r = 0; r < 20; ++r) {
            Arh1Spec spec = diagonal_preset(16, derive_seed(seed_base, r));
            spec.rho = LinOperator::zero(spec.rho.grid());
            const Sample s = simulate(spec, n, 0);
            const RhoEstimate est = estimate_rho(s, EstimatorConfig{});
            values.push_back(trace_norm(est.op));
        }
        std::sort(values.begin(), values.end());
        return 0.5 * (values[9] + values[10]);
    };
    const double at_500 = median_trace(500, 100);
    const double at_2000 = median_trace(2000, 200);
    CHECK(at_2000 < at_500);
}

TEST_CASE("diagonal preset: top coefficient approaches the model value") {
    const Arh1Spec spec = diagonal_preset(32, 17);
    const Sample s = simulate(spec, 20000, default_burn_in(spec));
    const RhoEstimate est = estimate_rho(s, EstimatorConfig{});
    CHECK(est.coefficients[0] == doctest::Approx(0.8).epsilon(0.10));
}

TEST_CASE("estimator structure invariants") {
    const Arh1Spec spec = diagonal_preset(32, 23);
    const Sample s = simulate(spec, 1000, default_burn_in(spec));
    const RhoEstimate est = estimate_rho(s, EstimatorConfig{});

    // Rank-one action on retained eigenvectors.
    for (std::size_t j = 0; j < est.k_n; ++j) {
        const GridFunction image = apply(est.op, est.eigenvectors[j]);
        const GridFunction expected =
            est.eigenvectors[j] * est.coefficients[static_cast<Eigen::Index>(j)];
        CHECK(h_norm(image - expected) <= 1e-9);
    }

    // Trace norm decomposes over the orthonormal rank-one terms.
    CHECK(trace_norm(est.op) ==
          doctest::Approx(est.coefficients.cwiseAbs().sum()).epsilon(1e-9));

    // Rank is exactly k_n.
    const EigenSystem es = eigh(est.op);
    std::size_t nonzero = 0;
    for (Eigen::Index j = 0; j < es.eigenvalues.size(); ++j) {
        if (std::abs(es.eigenvalues[j]) > 1e-12) ++nonzero;
    }
    CHECK(nonzero == est.k_n);
}

TEST_CASE("estimate is invariant under eigenvector sign flips") {
    const Arh1Spec spec = diagonal_preset(16, 29);
    const Sample s = simulate(spec, 400, default_burn_in(spec));
    const EigenSystem eigen = eigh(empirical_covariance(s));
    const RhoEstimate base = estimate_rho_with_eigen(s, eigen, EstimatorConfig{});

    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        EigenSystem flipped = eigen;
        for (std::size_t j = 0; j < flipped.eigenfunctions.size(); ++j) {
            if (rng.next_u64() % 2 == 0) {
                flipped.eigenfunctions[j] = flipped.eigenfunctions[j] * -1.0;
            }
        }
        const RhoEstimate alt = estimate_rho_with_eigen(s, flipped, EstimatorConfig{});
        CHECK((alt.op.kernel() - base.op.kernel()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("estimation fails cleanly on a zero sample") {
    const GridPtr grid = Grid::uniform(8);
    const Sample zeros(grid, Eigen::MatrixXd::Zero(10, 8));
    CHECK_THROWS_AS(estimate_rho(zeros, EstimatorConfig{}), EstimationError);
}

TEST_CASE("lambda gap closed forms") {
    // C_j = 2^{-j}: gaps halve, the sup sits at j = k.
    Eigen::VectorXd pow2(10);
    for (Eigen::Index j = 0; j < 10; ++j) pow2[j] = std::pow(2.0, -(j + 1.0));
    for (std::size_t k = 1; k <= 8; ++k) {
        CHECK(lambda_gap(pow2, k) ==
              doctest::Approx(std::pow(2.0, k + 1.0)).epsilon(1e-12));
    }

    // C_j = 1/j: Lambda_k = k (k+1).
    Eigen::VectorXd harmonic(12);
    for (Eigen::Index j = 0; j < 12; ++j) harmonic[j] = 1.0 / (j + 1.0);
    for (std::size_t k = 1; k <= 10; ++k) {
        CHECK(lambda_gap(harmonic, k) ==
              doctest::Approx(static_cast<double>(k) * (k + 1.0)).epsilon(1e-9));
    }

    // Preset-shaped spectrum against a direct loop.
    Eigen::VectorXd preset(9);
    for (Eigen::Index j = 0; j < 9; ++j) preset[j] = 0.7 / ((j + 1.0) * (j + 1.0));
    for (std::size_t k = 1; k <= 7; ++k) {
        double direct = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            direct = std::max(direct, 1.0 / (preset[static_cast<Eigen::Index>(j)] -
                                             preset[static_cast<Eigen::Index>(j + 1)]));
        }
        CHECK(lambda_gap(preset, k) == direct);
    }
}

TEST_CASE("lambda gap error paths") {
    Eigen::VectorXd tied(4);
    tied << 1.0, 0.5, 0.5, 0.25;
    CHECK_NOTHROW(lambda_gap(tied, 1));
    CHECK_THROWS_AS(lambda_gap(tied, 2), InfiniteGapError);

    Eigen::VectorXd increasing(3);
    increasing << 1.0, 1.5, 0.5;
    CHECK_THROWS_AS(lambda_gap(increasing, 1), InfiniteGapError);

    Eigen::VectorXd short_list(2);
    short_list << 1.0, 0.5;
    CHECK_THROWS_AS(lambda_gap(short_list, 2), DimensionError);
}

TEST_CASE("empirical moments bundle is coherent") {
    const Arh1Spec spec = diagonal_preset(16, 37);
    const Sample s = simulate(spec, 100, default_burn_in(spec));
    const EmpiricalMoments em = empirical_moments(s);
    CHECK(em.projections.rows() == 100);
    CHECK(static_cast<std::size_t>(em.projections.cols()) == em.eigen.rank);
    CHECK(hs_norm(em.c_n - empirical_covariance(s)) == 0.0);
    CHECK(hs_norm(em.d_n - empirical_cross_covariance(s)) == 0.0);
}
