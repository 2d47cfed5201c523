#include <doctest.h>

#include <filtkit/errors.hpp>
#include <filtkit/kf_cc.hpp>
#include <filtkit/kf_cd.hpp>
#include <filtkit/numkit.hpp>
#include <filtkit/sdesim.hpp>

#include <cmath>
#include <vector>

#include "testutil.hpp"

using filtkit::kf_cc::CcFilterConfig;
using filtkit::ContinuousMeasurementModel;
using filtkit::GaussianBelief;
using filtkit::Index;
using filtkit::LinearStateModel;
using filtkit::Matrix;
using filtkit::MeasurementRecord;
using filtkit::Vector;
using testutil::mat;
using testutil::vec_of;

namespace {

LinearStateModel scalar_ou() { return {1, 1, Matrix(mat({{-1}})), Matrix(mat({{1}}))}; }

ContinuousMeasurementModel scalar_meas(double c = 1.0, double phi = 1.0) {
    return {1, Matrix(mat({{c}})), mat({{phi}})};
}

MeasurementRecord zero_record(double dt, double T) {
    const std::size_t N = filtkit::sdesim::step_count(dt, T);
    MeasurementRecord rec;
    rec.kind = MeasurementRecord::Kind::Continuous;
    rec.times.resize(N);
    for (std::size_t k = 0; k < N; ++k) rec.times[k] = static_cast<double>(k) * dt;
    rec.values = Matrix::Zero(1, static_cast<Index>(N));
    rec.dt = dt;
    return rec;
}

}  // namespace

TEST_CASE("gain is P C^T phi^-1") {
    const GaussianBelief b{0.0, vec_of({0.0, 0.0}), mat({{1, 0}, {0, 2}})};
    ContinuousMeasurementModel meas{1, Matrix(mat({{1, 0}})), mat({{4}})};
    const Matrix K = filtkit::kf_cc::gain(b, meas);
    CHECK(K.rows() == 2);
    CHECK(K.cols() == 1);
    CHECK(K(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(K(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("one Euler step against hand arithmetic") {
    CcFilterConfig cfg;
    cfg.dt = 0.01;
    const GaussianBelief b{0.0, vec_of({0.0}), mat({{1.0}})};
    const GaussianBelief next =
        filtkit::kf_cc::step(b, scalar_ou(), scalar_meas(), vec_of({0.05}), cfg);
    CHECK(next.t == doctest::Approx(0.01));
    CHECK(next.mean(0) == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(next.cov(0, 0) == doctest::Approx(0.98).epsilon(1e-14));
}

TEST_CASE("an uninformative observation row leaves pure moment propagation") {
    CcFilterConfig cfg;
    cfg.dt = 0.01;
    const GaussianBelief b{0.0, vec_of({2.0}), mat({{3.0}})};
    const GaussianBelief next =
        filtkit::kf_cc::step(b, scalar_ou(), scalar_meas(0.0), vec_of({7.5}), cfg);
    CHECK(next.mean(0) == doctest::Approx(2.0 - 2.0 * 0.01).epsilon(1e-14));
    CHECK(next.cov(0, 0) == doctest::Approx(3.0 + (-6.0 + 1.0) * 0.01).epsilon(1e-14));
}

TEST_CASE("a perfectly anticipated increment applies no measurement pull") {
    CcFilterConfig cfg;
    cfg.dt = 0.01;
    const GaussianBelief b{0.0, vec_of({2.0}), mat({{3.0}})};
    const Vector dz = vec_of({2.0 * 0.01});  // C m dt
    const GaussianBelief next = filtkit::kf_cc::step(b, scalar_ou(), scalar_meas(), dz, cfg);
    CHECK(next.mean(0) == doctest::Approx(2.0 - 2.0 * 0.01).epsilon(1e-14));
}

TEST_CASE("step validates its grid step") {
    CcFilterConfig cfg;
    cfg.dt = 0.0;
    const GaussianBelief b{0.0, vec_of({0.0}), mat({{1.0}})};
    CHECK_THROWS_AS(
        (void)filtkit::kf_cc::step(b, scalar_ou(), scalar_meas(), vec_of({0.0}), cfg),
        filtkit::InvalidStep);
}

TEST_CASE("vectorized step matches the matrix step") {
    filtkit::NoiseStream rng(41);
    CcFilterConfig cfg;
    cfg.dt = 2e-3;
    for (int rep = 0; rep < 10; ++rep) {
        const Index n = 2 + static_cast<Index>(rng.next_u64() % 3);
        const Index m = 1 + static_cast<Index>(rng.next_u64() % 2);
        LinearStateModel model{static_cast<int>(n), static_cast<int>(n),
                               testutil::random_matrix(rng, n, n, 0.7),
                               testutil::random_matrix(rng, n, n, 0.6)};
        ContinuousMeasurementModel meas{static_cast<int>(m), testutil::random_matrix(rng, m, n),
                                        testutil::random_spd(rng, m)};
        const GaussianBelief b{0.3, Vector(testutil::random_matrix(rng, n, 1).col(0)),
                               testutil::random_spd(rng, n)};
        const Vector dz = 0.01 * testutil::random_matrix(rng, m, 1).col(0);
        const GaussianBelief a = filtkit::kf_cc::step(b, model, meas, dz, cfg);
        const GaussianBelief v = filtkit::kf_cc::step_vec(b, model, meas, dz, cfg);
        CHECK((a.mean - v.mean).norm() <= 1e-12 * (1.0 + a.mean.norm()));
        CHECK((a.cov - v.cov).norm() <= 1e-12 * (1.0 + a.cov.norm()));
        CHECK(a.t == v.t);
    }
}

TEST_CASE("RK4 covariance option tracks the Riccati flow better than Euler") {
    // Scalar flow dP = -2P + 1 - P^2 = -(P - r+)(P - r-) with roots -1 +- sqrt(2)
    // separates exactly: (P - r+)/(P - r-) decays at rate r+ - r- = 2 sqrt(2).
    const double dt = 0.05;
    const double rp = std::sqrt(2.0) - 1.0, rm = -std::sqrt(2.0) - 1.0;
    const double u = (1.0 - rp) / (1.0 - rm) * std::exp(-2.0 * std::sqrt(2.0) * dt);
    const double ref = (rp - rm * u) / (1.0 - u);

    const GaussianBelief b{0.0, vec_of({0.0}), mat({{1.0}})};
    CcFilterConfig euler, rk4;
    euler.dt = rk4.dt = dt;
    rk4.rk4_covariance = true;
    const double pe =
        filtkit::kf_cc::step(b, scalar_ou(), scalar_meas(), vec_of({0.0}), euler).cov(0, 0);
    const double pr =
        filtkit::kf_cc::step(b, scalar_ou(), scalar_meas(), vec_of({0.0}), rk4).cov(0, 0);
    CHECK(std::abs(pr - ref) <= 1e-6);
    CHECK(std::abs(pe - ref) >= 1e-3);
    CHECK(std::abs(pe - ref) / std::abs(pr - ref) >= 100.0);
}

TEST_CASE("stationary covariance of the scalar OU observer") {
    const Matrix P = filtkit::kf_cc::stationary_cov(scalar_ou(), scalar_meas());
    CHECK(P(0, 0) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-8));
    const double res = std::abs(-2.0 * P(0, 0) + 1.0 - P(0, 0) * P(0, 0));
    CHECK(res <= 1e-9);
}

TEST_CASE("stationary covariance with neutrally stable and unstable drifts") {
    LinearStateModel neutral{1, 1, Matrix(mat({{0}})), Matrix(mat({{1}}))};
    CHECK(filtkit::kf_cc::stationary_cov(neutral, scalar_meas())(0, 0) ==
          doctest::Approx(1.0).epsilon(1e-9));

    LinearStateModel unstable{1, 1, Matrix(mat({{0.5}})), Matrix(mat({{1}}))};
    const double expected = (1.0 + std::sqrt(5.0)) / 2.0;  // root of P^2 - P - 1
    CHECK(filtkit::kf_cc::stationary_cov(unstable, scalar_meas())(0, 0) ==
          doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("an unobserved stable system falls back to the Lyapunov covariance") {
    LinearStateModel model{2, 2, Matrix(mat({{-1, 0.3}, {0, -2}})),
                           Matrix(mat({{1, 0}, {0.2, 0.9}}))};
    ContinuousMeasurementModel blind{1, Matrix(mat({{0, 0}})), mat({{1}})};
    const Matrix P = filtkit::kf_cc::stationary_cov(model, blind);
    const Matrix ref = filtkit::kf_cd::stationary_predict_cov(model);
    CHECK((P - ref).norm() <= 1e-9 * ref.norm());
}

TEST_CASE("stationary covariance solves the Riccati equation on random draws") {
    filtkit::NoiseStream rng(42);
    for (int rep = 0; rep < 10; ++rep) {
        const Index n = 2 + static_cast<Index>(rng.next_u64() % 2);
        const Matrix A = testutil::random_hurwitz(rng, n);
        const Matrix G = testutil::random_matrix(rng, n, n);
        LinearStateModel model{static_cast<int>(n), static_cast<int>(n), A, G};
        ContinuousMeasurementModel meas{static_cast<int>(n), Matrix(Matrix::Identity(n, n)),
                                        testutil::random_spd(rng, n)};
        const Matrix P = filtkit::kf_cc::stationary_cov(model, meas);
        const Matrix GGt = G * G.transpose();
        // With C = I the Riccati quadratic term is P phi^-1 P.
        const Matrix res = A * P + P * A.transpose() + GGt -
                           P * filtkit::numkit::solve_spd(meas.phi_eta, Matrix(P));
        CHECK(res.norm() <= 1e-9 * std::max(1.0, GGt.norm()));
        CHECK(filtkit::numkit::min_eigenvalue_sym(P) >= -1e-10 * std::max(1.0, P.norm()));
    }
}

TEST_CASE("the filter covariance flow settles on the stationary solution") {
    const double dt = 1e-3;
    const auto rec = zero_record(dt, 20.0);
    CcFilterConfig cfg;
    cfg.dt = dt;
    const GaussianBelief b0{0.0, vec_of({1.0}), mat({{2.0}})};
    const auto traj = filtkit::kf_cc::run(scalar_ou(), scalar_meas(), rec, b0, cfg);
    const double p_end = traj.steps.back().belief.cov(0, 0);
    const double p_star = filtkit::kf_cc::stationary_cov(scalar_ou(), scalar_meas())(0, 0);
    CHECK(std::abs(p_end - p_star) <= 1e-4);
}

TEST_CASE("run validates the record kind and grid") {
    CcFilterConfig cfg;
    cfg.dt = 1e-3;
    const GaussianBelief b0{0.0, vec_of({0.0}), mat({{1.0}})};
    auto rec = zero_record(2e-3, 0.1);
    CHECK_THROWS_AS((void)filtkit::kf_cc::run(scalar_ou(), scalar_meas(), rec, b0, cfg),
                    filtkit::GridMismatch);
    rec.kind = MeasurementRecord::Kind::Discrete;
    rec.dt = 1e-3;
    CHECK_THROWS_AS((void)filtkit::kf_cc::run(scalar_ou(), scalar_meas(), rec, b0, cfg),
                    std::invalid_argument);
}

TEST_CASE("innovation increments behave like white noise at steady state") {
    const double dt = 1e-3, T = 20.0;
    const std::uint64_t seed = 99;
    const auto path = filtkit::sdesim::simulate_ito(scalar_ou(), vec_of({0.0}), dt, T, seed);
    const auto rec = filtkit::sdesim::gen_continuous_measurements(path, scalar_meas(), seed);
    const double p_star = filtkit::kf_cc::stationary_cov(scalar_ou(), scalar_meas())(0, 0);
    CcFilterConfig cfg;
    cfg.dt = dt;
    const GaussianBelief b0{0.0, vec_of({0.0}), mat({{p_star}})};
    const auto traj = filtkit::kf_cc::run(scalar_ou(), scalar_meas(), rec, b0, cfg);

    std::vector<double> nu;
    nu.reserve(traj.steps.size());
    for (const auto& s : traj.steps)
        if (s.innovation) nu.push_back((*s.innovation)(0) / std::sqrt(dt));
    const double n = static_cast<double>(nu.size());
    REQUIRE(n == 20000.0);
    CHECK(std::abs(testutil::mean_of(nu)) <= 3.0 / std::sqrt(n));
    CHECK(std::abs(testutil::variance_of(nu) - 1.0) <= 3.0 * std::sqrt(2.0 / n));
    double lag1 = 0.0;
    for (std::size_t k = 0; k + 1 < nu.size(); ++k) lag1 += nu[k] * nu[k + 1];
    lag1 /= (n - 1.0);
    CHECK(std::abs(lag1) <= 3.0 / std::sqrt(n));
}

TEST_CASE("time-averaged squared error tracks the filter covariance") {
    // 300 matched replications of length 10: the error process decorrelates in
    // about 1/(2|A - KC|), leaving ~28 effective samples per run, so the
    // pooled mean-square-error/covariance ratio resolves well inside 5%.
    const double dt = 1e-3, T = 10.0;
    CcFilterConfig cfg;
    cfg.dt = dt;
    double sq = 0.0, ps = 0.0;
    for (int r = 0; r < 300; ++r) {
        const auto seed = filtkit::derive_seed(9090, static_cast<std::uint64_t>(r));
        const auto truth = filtkit::sdesim::simulate_ito(scalar_ou(), vec_of({1.0}), dt, T, seed);
        const auto rec = filtkit::sdesim::gen_continuous_measurements(truth, scalar_meas(), seed);
        const GaussianBelief b0{0.0, vec_of({1.0}), mat({{0.0}})};
        const auto traj = filtkit::kf_cc::run(scalar_ou(), scalar_meas(), rec, b0, cfg);
        for (std::size_t k = 1; k < traj.steps.size(); ++k) {
            const double e =
                traj.steps[k].belief.mean(0) - truth.states(0, static_cast<Index>(k));
            sq += e * e;
            ps += traj.steps[k].belief.cov(0, 0);
        }
    }
    const double ratio = sq / ps;
    CHECK(ratio >= 0.95);
    CHECK(ratio <= 1.05);
}
