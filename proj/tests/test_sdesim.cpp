#include <doctest.h>

#include <filtkit/errors.hpp>
#include <filtkit/numkit.hpp>
#include <filtkit/sdesim.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "testutil.hpp"

using filtkit::BilinearStateModel;
using filtkit::ContinuousMeasurementModel;
using filtkit::DiscreteMeasurementModel;
using filtkit::LinearStateModel;
using filtkit::Matrix;
using filtkit::MatrixFn;
using filtkit::NoiseStream;
using filtkit::SamplePath;
using filtkit::Vector;
using testutil::mat;
using testutil::vec_of;

namespace sim = filtkit::sdesim;
namespace nk = filtkit::numkit;

namespace {

LinearStateModel scalar_ou(double lambda = 1.0, double g = 1.0) {
    return {1, 1, Matrix(mat({{-lambda}})), Matrix(mat({{g}}))};
}

// Geometric Brownian motion dx = x o dW in Stratonovich form.
BilinearStateModel gbm() {
    return {1, 1, vec_of({0}), Matrix(mat({{0}})), Matrix(mat({{0}})), vec_of({1})};
}

}  // namespace

TEST_CASE("noise streams are deterministic and separated") {
    NoiseStream a(42, 0), b(42, 0), c(42, 1);
    bool all_equal = true, any_cross = false;
    for (int i = 0; i < 16; ++i) {
        const auto ua = a.next_u64();
        all_equal = all_equal && (ua == b.next_u64());
        any_cross = any_cross || (ua == c.next_u64());
    }
    CHECK(all_equal);
    CHECK_FALSE(any_cross);
    CHECK(filtkit::derive_seed(7, 3) == filtkit::derive_seed(7, 3));
    CHECK(filtkit::derive_seed(7, 3) != filtkit::derive_seed(7, 4));
}

TEST_CASE("uniform draws live in (0,1] and normals have the right moments") {
    NoiseStream rng(5);
    const int n = 100000;
    std::vector<double> normals(n);
    double umin = 1.0, umax = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        normals[static_cast<std::size_t>(i)] = rng.normal();
    }
    CHECK(umin > 0.0);
    CHECK(umax <= 1.0);
    CHECK(std::abs(testutil::mean_of(normals)) <= 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(testutil::variance_of(normals) - 1.0) <=
          3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("step_count rounds clean quotients and rejects ambiguous ones") {
    CHECK(sim::step_count(1e-3, 1.0) == 1000);
    CHECK(sim::step_count(0.1, 0.3) == 3);  // 0.3/0.1 is off an integer by float noise only
    CHECK(sim::step_count(0.5, 0.0) == 0);
    CHECK_THROWS_AS((void)sim::step_count(0.1, 0.25), filtkit::InvalidStep);
    CHECK_THROWS_AS((void)sim::step_count(0.0, 1.0), filtkit::InvalidStep);
    CHECK_THROWS_AS((void)sim::step_count(-0.1, 1.0), filtkit::InvalidStep);
    CHECK_THROWS_AS((void)sim::step_count(0.1, -1.0), filtkit::InvalidStep);
}

TEST_CASE("zero-horizon simulation returns the initial state only") {
    const SamplePath p = sim::simulate_ito(scalar_ou(), vec_of({3.0}), 0.1, 0.0, 9);
    CHECK(p.times.size() == 1);
    CHECK(p.states.cols() == 1);
    CHECK(p.states(0, 0) == 3.0);
}

TEST_CASE("simulation is bitwise deterministic in the seed") {
    const SamplePath a = sim::simulate_ito(scalar_ou(), vec_of({1.0}), 1e-2, 1.0, 123);
    const SamplePath b = sim::simulate_ito(scalar_ou(), vec_of({1.0}), 1e-2, 1.0, 123);
    const SamplePath c = sim::simulate_ito(scalar_ou(), vec_of({1.0}), 1e-2, 1.0, 124);
    CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.states - c.states).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("grid_index resolves on-grid instants and rejects the rest") {
    const SamplePath p = sim::simulate_ito(scalar_ou(), vec_of({1.0}), 0.25, 1.0, 1);
    CHECK(sim::grid_index(p, 0.0) == 0);
    CHECK(sim::grid_index(p, 0.75) == 3);
    CHECK_THROWS_AS((void)sim::grid_index(p, 0.4), filtkit::ScheduleOffGrid);
    CHECK_THROWS_AS((void)sim::grid_index(p, 1.5), filtkit::ScheduleOffGrid);
    CHECK_THROWS_AS((void)sim::grid_index(p, -0.25), filtkit::ScheduleOffGrid);
}

TEST_CASE("discrete measurements with zero noise read the path exactly") {
    const SamplePath p = sim::simulate_ito(scalar_ou(), vec_of({1.0}), 0.125, 1.0, 7);
    DiscreteMeasurementModel meas{1, Matrix(mat({{2}})), Matrix(mat({{0}})), {0.25, 0.5, 1.0}};
    const auto rec = sim::gen_discrete_measurements(p, meas, 7);
    CHECK(rec.kind == filtkit::MeasurementRecord::Kind::Discrete);
    REQUIRE(rec.times.size() == 3);
    CHECK(rec.values(0, 0) == 2.0 * p.states(0, 2));
    CHECK(rec.values(0, 2) == 2.0 * p.states(0, 8));

    DiscreteMeasurementModel off{1, Matrix(mat({{1}})), Matrix(mat({{0}})), {0.3}};
    CHECK_THROWS_AS((void)sim::gen_discrete_measurements(p, off, 7), filtkit::ScheduleOffGrid);
}

TEST_CASE("discrete measurement noise has unit variance around the path") {
    const double dt = 1e-3;
    const SamplePath p = sim::simulate_ito(scalar_ou(), vec_of({1.0}), dt, 10.0, 21);
    std::vector<double> sched(10000);
    for (std::size_t k = 0; k < sched.size(); ++k) sched[k] = static_cast<double>(k + 1) * dt;
    DiscreteMeasurementModel meas{1, Matrix(mat({{1}})), Matrix(mat({{1}})), sched};
    const auto rec = sim::gen_discrete_measurements(p, meas, 21);
    std::vector<double> residuals(sched.size());
    for (std::size_t k = 0; k < sched.size(); ++k)
        residuals[k] = rec.values(0, static_cast<filtkit::Index>(k)) -
                       p.states(0, static_cast<filtkit::Index>(k) + 1);
    const double n = static_cast<double>(residuals.size());
    CHECK(std::abs(testutil::mean_of(residuals)) <= 3.0 / std::sqrt(n));
    CHECK(std::abs(testutil::variance_of(residuals) - 1.0) <= 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("continuous measurement increments have covariance phi_eta dt") {
    const double dt = 1e-3;
    LinearStateModel still{1, 1, Matrix(mat({{0}})), Matrix(mat({{0}}))};
    const SamplePath p = sim::simulate_ito(still, vec_of({0.0}), dt, 10.0, 3);
    ContinuousMeasurementModel meas{1, Matrix(mat({{1}})), mat({{4}})};
    const auto rec = sim::gen_continuous_measurements(p, meas, 3);
    CHECK(rec.kind == filtkit::MeasurementRecord::Kind::Continuous);
    CHECK(rec.times.size() == p.times.size() - 1);
    CHECK(rec.times.front() == 0.0);
    CHECK(rec.times.back() == doctest::Approx(10.0 - dt));
    std::vector<double> inc(rec.times.size());
    for (std::size_t k = 0; k < inc.size(); ++k)
        inc[k] = rec.values(0, static_cast<filtkit::Index>(k));
    const double n = static_cast<double>(inc.size());
    CHECK(std::abs(testutil::mean_of(inc)) <= 3.0 * std::sqrt(4.0 * dt / n));
    CHECK(std::abs(testutil::variance_of(inc) - 4.0 * dt) <=
          3.0 * 4.0 * dt * std::sqrt(2.0 / n));
}

TEST_CASE("noise-free simulation follows the deterministic flow") {
    LinearStateModel decay{1, 1, Matrix(mat({{-1}})), Matrix(mat({{0}}))};
    const SamplePath p = sim::simulate_ito(decay, vec_of({1.0}), 1e-4, 1.0, 5);
    CHECK(std::abs(p.states(0, 10000) - std::exp(-1.0)) <= 5e-4);
}

TEST_CASE("noise-free continuous increments integrate the observed state") {
    // Constant state c: each increment is exactly C c dt, and the increment
    // sum telescopes to c T.
    const double dt = 1e-2, c = 3.0;
    LinearStateModel still{1, 1, Matrix(mat({{0}})), Matrix(mat({{0}}))};
    const SamplePath p = sim::simulate_ito(still, vec_of({c}), dt, 2.0, 8);
    ContinuousMeasurementModel exact{1, Matrix(mat({{1}})), mat({{0}})};
    const auto rec = sim::gen_continuous_measurements(p, exact, 8);
    double sum = 0.0;
    for (filtkit::Index k = 0; k < rec.values.cols(); ++k) {
        CHECK(rec.values(0, k) == c * dt);
        sum += rec.values(0, k);
    }
    CHECK(sum == doctest::Approx(c * 2.0).epsilon(1e-12));

    // With noise the sum is c T plus a Brownian endpoint of variance phi T.
    ContinuousMeasurementModel noisy{1, Matrix(mat({{1}})), mat({{4}})};
    const auto nrec = sim::gen_continuous_measurements(p, noisy, 8);
    CHECK(std::abs(nrec.values.row(0).sum() - c * 2.0) <= 3.0 * std::sqrt(4.0 * 2.0));
}

TEST_CASE("linear ensemble moments match exponential-map propagation") {
    const Matrix A = mat({{-0.5, 0.2}, {0.0, -1.0}});
    const Matrix G = mat({{1.0, 0.0}, {0.3, 0.8}});
    LinearStateModel model{2, 2, A, G};
    const Vector x0 = vec_of({1.0, 2.0});
    const double dt = 4e-3, T = 1.0;
    const int paths = 10000;

    std::vector<double> x1(paths), x2(paths);
    for (int r = 0; r < paths; ++r) {
        const SamplePath p =
            sim::simulate_ito(model, x0, dt, T, filtkit::derive_seed(100, static_cast<std::uint64_t>(r)));
        x1[static_cast<std::size_t>(r)] = p.states(0, p.states.cols() - 1);
        x2[static_cast<std::size_t>(r)] = p.states(1, p.states.cols() - 1);
    }

    const Vector mean_ref = nk::expm(A, T) * x0;
    const Matrix K = nk::kron(Matrix::Identity(2, 2), A) + nk::kron(A, Matrix::Identity(2, 2));
    const Matrix Q = G * G.transpose();
    const Vector vp = K.fullPivLu().solve(
        Vector((nk::expm(K, T) - Matrix::Identity(4, 4)) * nk::vec(Q)));
    const Matrix cov_ref = nk::unvec(vp, 2, 2);

    const double n = static_cast<double>(paths);
    CHECK(std::abs(testutil::mean_of(x1) - mean_ref(0)) <= 3.0 * testutil::se_of_mean(x1));
    CHECK(std::abs(testutil::mean_of(x2) - mean_ref(1)) <= 3.0 * testutil::se_of_mean(x2));
    CHECK(std::abs(testutil::variance_of(x1) - cov_ref(0, 0)) <=
          3.0 * cov_ref(0, 0) * std::sqrt(2.0 / n));
    CHECK(std::abs(testutil::variance_of(x2) - cov_ref(1, 1)) <=
          3.0 * cov_ref(1, 1) * std::sqrt(2.0 / n));
    const double m1 = testutil::mean_of(x1), m2 = testutil::mean_of(x2);
    std::vector<double> prod(x1.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = (x1[i] - m1) * (x2[i] - m2);
    CHECK(std::abs(testutil::mean_of(prod) - cov_ref(0, 1)) <= 3.0 * testutil::se_of_mean(prod));
}

TEST_CASE("Stratonovich GBM mean grows like exp(T/2) while the Ito reading stays flat") {
    const double dt = 2e-3, T = 1.0;
    const int paths = 4000;
    std::vector<double> strat(paths), ito(paths);
    for (int r = 0; r < paths; ++r) {
        const auto seed = filtkit::derive_seed(200, static_cast<std::uint64_t>(r));
        strat[static_cast<std::size_t>(r)] =
            sim::simulate_stratonovich(gbm(), vec_of({1.0}), dt, T, seed).states(0, 500);
        ito[static_cast<std::size_t>(r)] =
            sim::simulate_ito(gbm(), vec_of({1.0}), dt, T, seed).states(0, 500);
    }
    CHECK(std::abs(testutil::mean_of(strat) - std::exp(0.5)) <= 3.0 * testutil::se_of_mean(strat));
    CHECK(std::abs(testutil::mean_of(ito) - 1.0) <= 3.0 * testutil::se_of_mean(ito));
}

TEST_CASE("drift-corrected Ito simulation agrees in law with the Stratonovich one") {
    // dx = x o dW converts to dx = x/2 dt + x dW.
    BilinearStateModel converted{1, 1, vec_of({0}), Matrix(mat({{0.5}})), Matrix(mat({{0}})),
                                 vec_of({1})};
    const double dt = 2e-3, T = 1.0;
    const int paths = 4000;
    std::vector<double> a(paths), b(paths);
    for (int r = 0; r < paths; ++r) {
        a[static_cast<std::size_t>(r)] = sim::simulate_stratonovich(
            gbm(), vec_of({1.0}), dt, T, filtkit::derive_seed(300, static_cast<std::uint64_t>(r)))
            .states(0, 500);
        b[static_cast<std::size_t>(r)] = sim::simulate_ito(
            converted, vec_of({1.0}), dt, T, filtkit::derive_seed(400, static_cast<std::uint64_t>(r)))
            .states(0, 500);
    }
    const double gap = std::abs(testutil::mean_of(a) - testutil::mean_of(b));
    const double se = std::hypot(testutil::se_of_mean(a), testutil::se_of_mean(b));
    CHECK(gap <= 3.0 * se);
}

TEST_CASE("Heun equals Euler-Maruyama exactly under constant diffusion") {
    BilinearStateModel additive{1, 1, vec_of({0.2}), Matrix(mat({{-1}})), Matrix(mat({{0.7}})),
                                vec_of({0})};
    const SamplePath em = sim::simulate_ito(additive, vec_of({1.0}), 1e-2, 2.0, 77);
    const SamplePath heun = sim::simulate_stratonovich(additive, vec_of({1.0}), 1e-2, 2.0, 77);
    CHECK((em.states - heun.states).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Heun and Euler-Maruyama differ by O(dt) under time-varying diffusion") {
    const MatrixFn G([](double t) { return Matrix(mat({{1.0 + 0.5 * std::sin(6.283185307179586 * t)}})); });
    BilinearStateModel model{1, 1, vec_of({0}), Matrix(mat({{-0.3}})), G, vec_of({0})};
    auto mean_sup_diff = [&](double dt) {
        const int paths = 100;
        double acc = 0.0;
        for (int r = 0; r < paths; ++r) {
            const auto seed = filtkit::derive_seed(500, static_cast<std::uint64_t>(r));
            const SamplePath em = sim::simulate_ito(model, vec_of({1.0}), dt, 1.0, seed);
            const SamplePath heun = sim::simulate_stratonovich(model, vec_of({1.0}), dt, 1.0, seed);
            acc += (em.states - heun.states).cwiseAbs().maxCoeff();
        }
        return acc / paths;
    };
    const double coarse = mean_sup_diff(4e-3);
    const double fine = mean_sup_diff(2e-3);
    CHECK(coarse > 0.0);
    const double ratio = coarse / fine;
    CHECK(ratio >= 1.4);
    CHECK(ratio <= 3.0);
}

TEST_CASE("CSV output is exact shortest-round-trip text") {
    SamplePath p;
    p.times = {0.0, 0.5};
    p.states = mat({{1.0, 2.25}});
    p.dt = 0.5;
    std::ostringstream os;
    sim::write_csv(os, p, {"seed=7"});
    CHECK(os.str() == "# seed=7\nt,x1\n0,1\n0.5,2.25\n");

    filtkit::MeasurementRecord rec;
    rec.kind = filtkit::MeasurementRecord::Kind::Continuous;
    rec.times = {0.0};
    rec.values = mat({{0.1}, {-3.0}});
    rec.dt = 0.5;
    std::ostringstream os2;
    sim::write_csv(os2, rec);
    CHECK(os2.str() == "t,dz1,dz2\n0,0.1,-3\n");

    CHECK(sim::format_double(0.1) == "0.1");
    CHECK(sim::format_double(-1.0) == "-1");
    CHECK(sim::format_double(1e-9) == "1e-09");
}
