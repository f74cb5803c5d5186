#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "qmf/accum.hpp"
#include "qmf/models.hpp"
#include "qmf/parallel.hpp"
#include "qmf/sde_engine.hpp"

using namespace qmf;

TEST_CASE("philox4x32-10 known-answer vectors") {
    using namespace qmf::philox;
    const Words a = philox4x32_10({0, 0, 0, 0}, {0, 0});
    REQUIRE(a.w0 == 0x6627e8d5u);
    REQUIRE(a.w1 == 0xe169c58du);
    REQUIRE(a.w2 == 0xbc57ac4cu);
    REQUIRE(a.w3 == 0x9b00dbd8u);

    const Words b = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                  {0xffffffffu, 0xffffffffu});
    REQUIRE(b.w0 == 0x408f276du);
    REQUIRE(b.w1 == 0x41c83b0eu);
    REQUIRE(b.w2 == 0xa20bc7c6u);
    REQUIRE(b.w3 == 0x6d5451fdu);

    const Words c = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                  {0xa4093822u, 0x299f31d0u});
    REQUIRE(c.w0 == 0xd16cfe09u);
    REQUIRE(c.w1 == 0x94fdccebu);
    REQUIRE(c.w2 == 0x5001e420u);
    REQUIRE(c.w3 == 0x24126ea1u);
}

TEST_CASE("noise plans are reproducible and well distributed") {
    const NoisePlan plan{123456789ull, 4};
    const NoisePlan again{123456789ull, 4};
    for (int step = 0; step < 100; ++step) {
        for (int ch = 0; ch < 4; ++ch) {
            REQUIRE(plan.increment(step, ch, 0.01) == again.increment(step, ch, 0.01));
        }
    }
    REQUIRE(plan.unit_normal(3, 1) != plan.unit_normal(3, 2));
    REQUIRE(plan.unit_normal(3, 1) != plan.unit_normal(4, 1));

    // moments of N(0, dt)
    const double dt = 0.01;
    double sum = 0.0, sumsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double w = plan.increment(i, 0, dt);
        sum += w;
        sumsq += w * w;
    }
    REQUIRE(sum / n == Catch::Approx(0.0).margin(4.0 * std::sqrt(dt / n)));
    REQUIRE(sumsq / n == Catch::Approx(dt).epsilon(0.02));

    REQUIRE(derive_seed(1, 0) != derive_seed(1, 1));
    REQUIRE(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("exact accumulation is order independent to the bit") {
    std::vector<double> values;
    Rng rng(9090, 1);
    for (int i = 0; i < 5000; ++i) values.push_back(rng.normal() * 0.3);

    ExactSum forward;
    for (double v : values) forward.add(v);

    std::mt19937_64 shuffler(7);
    std::shuffle(values.begin(), values.end(), shuffler);
    ExactSum shuffled;
    for (double v : values) shuffled.add(v);

    REQUIRE(forward.value() == shuffled.value());

    ExactSum bad;
    REQUIRE_THROWS_AS(bad.add(std::numeric_limits<double>::infinity()), NonFinite);
    REQUIRE_THROWS_AS(bad.add(123.0), NonFinite);
}

TEST_CASE("time grid validation") {
    const TimeGrid g = TimeGrid::uniform(10.0, 1e-3);
    REQUIRE(g.n_steps == 10000);
    REQUIRE(std::fabs(g.n_steps * g.dt - g.T) <= 1e-12);
    REQUIRE(g.t(0) == 0.0);
    REQUIRE(g.t(10) == Catch::Approx(0.01));
    REQUIRE_THROWS_AS(TimeGrid::uniform(1.0, -0.1), GridInvalid);
    REQUIRE_THROWS_AS(TimeGrid::uniform(0.0, 0.1), GridInvalid);
}

TEST_CASE("euler_step hand cases") {
    Rng rng(11, 2);
    const DensityMatrix rho = random_density(rng, 2);

    // zero drift and diffusion: unchanged (up to projection of a valid state)
    std::vector<std::function<ComplexMatrix(const ComplexMatrix&)>> no_diff;
    const DensityMatrix same = euler_step(
        rho, [](const ComplexMatrix& x) { return ComplexMatrix::Zero(x.rows(), x.cols()); },
        no_diff, {}, 0.01);
    REQUIRE((same.matrix() - rho.matrix()).norm() < 1e-12);

    // dephasing drift keeps the maximally mixed state fixed
    const ComplexMatrix sz = sigma_z();
    const DensityMatrix mixed = maximally_mixed(2);
    const DensityMatrix still = euler_step(
        mixed,
        [&sz](const ComplexMatrix& x) {
            return (sz * x * sz - x).eval();
        },
        no_diff, {}, 0.01);
    REQUIRE((still.matrix() - mixed.matrix()).norm() < 1e-13);

    // dz = sqrt(eta) (1 - z^2) dW from z = 0 with dW = 0.1 lands on z = 0.1
    std::vector<std::function<BlochVector(const BlochVector&)>> bloch_diff{
        [](const BlochVector& v) {
            return BlochVector{0.0, 0.0, 1.0 - v.z * v.z};
        }};
    const double dW = 0.1;
    const BlochVector stepped = euler_step(
        BlochVector{0, 0, 0}, [](const BlochVector&) { return BlochVector{0, 0, 0}; },
        bloch_diff, std::span<const double>(&dW, 1), 0.01);
    REQUIRE(stepped.z == Catch::Approx(0.1).margin(1e-15));
}

TEST_CASE("project_state repairs off-manifold matrices") {
    Rng rng(17, 3);
    const DensityMatrix rho = random_density(rng, 2);
    const Projected same = project_state(rho.matrix());
    REQUIRE(same.distance < 1e-12);
    REQUIRE((same.state.matrix() - rho.matrix()).norm() < 1e-12);

    ComplexMatrix off = ComplexMatrix::Zero(2, 2);
    off(0, 0) = 1.0005;
    off(1, 1) = -0.0005;
    const Projected fixed = project_state(off);
    REQUIRE(fixed.state.matrix()(0, 0).real() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(fixed.state.matrix()(1, 1).real() == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(fixed.min_eig_before == Catch::Approx(-0.0005).margin(1e-12));

    REQUIRE_THROWS_AS(project_state(ComplexMatrix::Zero(2, 2)), DegenerateState);

    // the closed-form 2x2 path agrees with an independent eigendecomposition
    for (int rep = 0; rep < 200; ++rep) {
        Rng r2(18, static_cast<uint64_t>(rep));
        ComplexMatrix m = random_density(r2, 2).matrix();
        m += 0.05 * hermitize(random_ginibre(r2, 2));
        const Projected fast = project_state(m);

        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(m));
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
        ev /= ev.sum();
        const ComplexMatrix ref = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
        REQUIRE((fast.state.matrix() - ref).norm() < 1e-11);
        REQUIRE_NOTHROW(validate_density(fast.state.matrix(), 1e-9));
    }
}

TEST_CASE("observation increments") {
    const ComplexMatrix sz = sigma_z();
    // traceless signal
    REQUIRE(observation_increment(maximally_mixed(2), sz, 1.0, 0.37, 0.01) ==
            Catch::Approx(0.37).margin(1e-15));
    // ground state: tr((L + L^dag) rho_g) = 2
    REQUIRE(observation_increment(rho_g(), sz, 1.0, 0.0, 0.01) ==
            Catch::Approx(0.02).margin(1e-15));
    REQUIRE_THROWS_AS(observation_increment(rho_g(), sz, 0.0, 0.0, 0.01),
                      EfficiencyOutOfRange);
    REQUIRE_THROWS_AS(observation_increment(rho_g(), sz, 1.5, 0.0, 0.01),
                      EfficiencyOutOfRange);
}

TEST_CASE("run_trajectory records only x0 on an empty grid") {
    MatrixModel model = belavkin_single(qubit_qnd_params(1.0));
    const TimeGrid empty{0.0, 0.0, 0.1, 0};
    auto rec = run_trajectory(model, rho_g().matrix(), empty, NoisePlan{1, 1});
    REQUIRE(rec.times.size() == 1);
    REQUIRE(rec.states.size() == 1);
    REQUIRE((rec.states[0] - rho_g().matrix()).norm() < 1e-14);
}

TEST_CASE("run_trajectory is deterministic given the seed") {
    Rng rng(23, 1);
    const ComplexMatrix x0 = random_density(rng, 2).matrix();
    const TimeGrid grid = TimeGrid::uniform(0.5, 1e-3);
    MatrixModel m1 = belavkin_single(qubit_qnd_params(0.8));
    MatrixModel m2 = belavkin_single(qubit_qnd_params(0.8));
    const auto r1 = run_trajectory(m1, x0, grid, NoisePlan{987, 1}, 10);
    const auto r2 = run_trajectory(m2, x0, grid, NoisePlan{987, 1}, 10);
    REQUIRE(r1.times == r2.times);
    REQUIRE(r1.states.size() == r2.states.size());
    for (size_t i = 0; i < r1.states.size(); ++i) {
        REQUIRE(std::memcmp(r1.states[i].data(), r2.states[i].data(),
                            sizeof(Complex) * 4) == 0);
        REQUIRE(r1.wiener[i] == r2.wiener[i]);
        REQUIRE(r1.observation[i] == r2.observation[i]);
    }

    MatrixModel m3 = belavkin_single(qubit_qnd_params(0.8));
    const auto r3 = run_trajectory(m3, x0, grid, NoisePlan{988, 1}, 10);
    REQUIRE((r1.states.back() - r3.states.back()).norm() > 1e-8);
}

TEST_CASE("pre-projection trace drift vanishes for the qubit filter") {
    MatrixModel model = belavkin_single(qubit_qnd_params(0.9));
    const double dt = 1e-3;
    for (int rep = 0; rep < 300; ++rep) {
        Rng rng(31, static_cast<uint64_t>(rep));
        const ComplexMatrix x = random_density(rng, 2).matrix();
        StepContext ctx{0, 0.0, dt, 0.0};
        ComplexMatrix drift, diff;
        model.drift(x, ctx, drift);
        model.diffusion(x, ctx, 0, diff);
        const double dW = rng.normal() * std::sqrt(dt);
        const ComplexMatrix next = x + dt * drift + dW * diff;
        REQUIRE(std::abs(next.trace().real() - 1.0) < 1e-12);
    }
}

TEST_CASE("step errors carry the step index") {
    MatrixModel model = belavkin_single(qubit_qnd_params(1.0));
    model.drift = [](const ComplexMatrix& x, const StepContext&, ComplexMatrix& out) {
        out = ComplexMatrix::Constant(x.rows(), x.cols(),
                                      std::numeric_limits<double>::infinity());
    };
    const TimeGrid grid = TimeGrid::uniform(0.1, 1e-2);
    bool caught = false;
    try {
        run_trajectory(model, rho_g().matrix(), grid, NoisePlan{5, 1});
    } catch (const Error& e) {
        caught = true;
        REQUIRE(e.code() == "NonFinite");
        REQUIRE(std::string(e.what()).find("step 0") != std::string::npos);
    }
    REQUIRE(caught);
}

TEST_CASE("euler error on the deterministic mean equation shrinks linearly in dt") {
    ModelParams params = qubit_qnd_params(1.0, InteractionKernel::photon_exchange());
    const ComplexMatrix x0 = bloch_compose({0.6, 0.2, 0.3}).matrix();
    const double T = 1.0;

    auto euler_run = [&](double dt) {
        MatrixModel det;
        det.n_channels = 0;
        det.drift = [&params](const ComplexMatrix& x, const StepContext&, ComplexMatrix& out) {
            out = lindblad_mean_rhs(params, x);
        };
        const TimeGrid grid = TimeGrid::uniform(T, dt);
        auto rec = run_trajectory(det, x0, grid, NoisePlan{1, 0}, 0);
        return rec.states.back();
    };

    const ComplexMatrix ref = euler_run(0.02 / 8.0);
    const double e1 = (euler_run(0.02) - ref).norm();
    const double e2 = (euler_run(0.01) - ref).norm();
    REQUIRE(e1 > e2);
    REQUIRE(e1 / e2 == Catch::Approx(2.0).margin(0.7));
}

TEST_CASE("ensemble mean of the linear filter matches the Lindblad equation") {
    // u = 0: the filter mean is eta-independent and solves the linear
    // Lindblad equation.
    ModelParams params = qubit_qnd_params(0.7);
    const ComplexMatrix x0 = bloch_compose({0.5, -0.3, 0.2}).matrix();
    const TimeGrid grid = TimeGrid::uniform(1.0, 1e-3);
    const int n_paths = 10000;

    const auto ode = integrate_lindblad_mean(params, x0, grid);

    std::vector<ComplexMatrix> at_half(n_paths), at_one(n_paths);
    parallel_for_blocks(n_paths, 2, [&](int, int64_t begin, int64_t end) {
        MatrixModel model = belavkin_single(params);
        for (int64_t p = begin; p < end; ++p) {
            auto rec = run_trajectory(model, x0, grid, NoisePlan{derive_seed(777, p), 1}, 500);
            at_half[p] = rec.states[1];
            at_one[p] = rec.states[2];
        }
    });

    auto check = [&](const std::vector<ComplexMatrix>& samples, const ComplexMatrix& target) {
        for (int comp = 0; comp < 4; ++comp) {
            const Eigen::Index r = comp / 2, c = comp % 2;
            for (int part = 0; part < 2; ++part) {
                double mean = 0.0, var = 0.0;
                for (const auto& s : samples) {
                    const double v = part ? s(r, c).imag() : s(r, c).real();
                    mean += v;
                }
                mean /= samples.size();
                for (const auto& s : samples) {
                    const double v = part ? s(r, c).imag() : s(r, c).real();
                    var += (v - mean) * (v - mean);
                }
                var /= (samples.size() - 1.0);
                const double se = std::sqrt(var / samples.size());
                const double tgt = part ? target(r, c).imag() : target(r, c).real();
                REQUIRE(std::fabs(mean - tgt) <= 3.0 * se + 2e-3);
            }
        }
    };
    check(at_half, ode[500]);
    check(at_one, ode[1000]);
}

TEST_CASE("recorded states pass validation at the engine tolerance") {
    MatrixModel model = nqubit_system(3, 1.0);
    const ComplexMatrix x0 = tensor_power(bloch_compose({0.3, 0.1, 0.2}).matrix(), 3);
    const TimeGrid grid = TimeGrid::uniform(0.5, 1e-3);
    auto rec = run_trajectory(model, x0, grid, NoisePlan{2024, 3}, 50);
    for (const auto& s : rec.states) {
        REQUIRE_NOTHROW(validate_density(s, 1e-6));
    }
}
