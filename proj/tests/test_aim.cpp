#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "caim/aim.hpp"
#include "caim/errors.hpp"
#include "caim/ising.hpp"
#include "caim/rng.hpp"

using namespace caim;

namespace {

constexpr double kPi = 3.14159265358979323846;

IsingProblem pair_problem(double j12, double h1 = 0.0, double h2 = 0.0) {
    IsingProblem p;
    p.n = 2;
    p.j = {0, j12, j12, 0};
    p.h = {h1, h2};
    return p;
}

// central finite differences, the independent oracle for analytic gradients
std::vector<double> fd_grad_k(const AimModel& m, const IsingProblem& p, std::vector<double> psi,
                              double step = 1e-6) {
    std::vector<double> g(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double keep = psi[i];
        psi[i] = keep + step;
        const double hi = repr_energy(m, p, psi);
        psi[i] = keep - step;
        const double lo = repr_energy(m, p, psi);
        psi[i] = keep;
        g[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

std::vector<double> fd_grad_r(const AimModel& m, std::vector<double> psi, double step = 1e-6) {
    std::vector<double> g(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double keep = psi[i];
        psi[i] = keep + step;
        const double hi = binar_energy(m, psi);
        psi[i] = keep - step;
        const double lo = binar_energy(m, psi);
        psi[i] = keep;
        g[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

// random state away from the non-smooth points of ROSC (|phi| = 0) and GO (0)
std::vector<double> random_smooth_state(const AimModel& m, int n, Rng& rng) {
    std::vector<double> psi(n);
    for (auto& phi : psi) {
        switch (m.family) {
            case Family::Oim: phi = rng.uniform(0.0, 2.0 * kPi); break;
            case Family::Brim: phi = rng.uniform(-2.0, 2.0); break;
            case Family::Rosc:
            case Family::Go: {
                const double mag = rng.uniform(0.1, 2.0);
                phi = rng.uniform01() < 0.5 ? -mag : mag;
                break;
            }
        }
    }
    return psi;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-30, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_CASE("representation energies at canonical points") {
    const IsingProblem p = pair_problem(1.0);

    CHECK(repr_energy({Family::Oim}, p, {0.0, kPi}) == doctest::Approx(-2.0));
    CHECK(repr_energy({Family::Brim}, p, {1.0, -1.0}) == doctest::Approx(-2.0));

    IsingProblem single;
    single.n = 1;
    single.j = {0};
    single.h = {1.0};
    AimModel go{Family::Go};
    CHECK(repr_energy(go, single, {1e-12}) == doctest::Approx(1.0));  // limit from the right
    CHECK(repr_energy(go, single, {0.0}) == doctest::Approx(0.0));    // sgn(0) = 0
}

TEST_CASE("binarization energies at canonical points") {
    CHECK(binar_energy({Family::Oim}, {0.0, kPi}) == doctest::Approx(-2.0));
    CHECK(binar_energy({Family::Brim}, {1.0, -1.0}) == doctest::Approx(0.0));
    CHECK(binar_energy({Family::Rosc}, {0.5, -0.5}) == doctest::Approx(-1.0));
    CHECK(binar_energy({Family::Go}, {0.5, -0.5}) == doctest::Approx(0.5));

    const auto terms = binar_terms({Family::Rosc}, {0.5, -0.5});
    CHECK(terms[0] == doctest::Approx(-0.5));
    CHECK(terms[1] == doctest::Approx(-0.5));
}

TEST_CASE("gradients vanish at extremum configurations") {
    const IsingProblem p = pair_problem(1.0);
    std::vector<double> gk, gr;
    grad({Family::Oim}, p, {0.0, kPi}, gk, gr);
    CHECK(gk[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gk[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gr[0] == doctest::Approx(0.0).epsilon(1e-12));

    grad({Family::Brim}, p, {1.0, 1.0}, gk, gr);
    CHECK(gr[0] == doctest::Approx(0.0));
    CHECK(gr[1] == doctest::Approx(0.0));
}

TEST_CASE("OIM hand-computed gradient") {
    const IsingProblem p = pair_problem(1.0);
    std::vector<double> gk, gr;
    grad({Family::Oim}, p, {kPi / 4.0, 0.0}, gk, gr);
    CHECK(gk[0] == doctest::Approx(-std::sqrt(2.0)));
    const auto fd = fd_grad_k({Family::Oim}, p, {kPi / 4.0, 0.0});
    CHECK(rel_err(gk[0], fd[0]) < 1e-6);
}

TEST_CASE("analytic gradients match finite differences at 100 random smooth points") {
    for (Family family : {Family::Oim, Family::Brim, Family::Rosc, Family::Go}) {
        AimModel m{family};
        Rng rng(0xabc0 + static_cast<int>(family));
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 2 + static_cast<int>(rng.uniform_int(5));
            const IsingProblem p = generate_spinmodel(n, rng.next_u64());
            const auto psi = random_smooth_state(m, n, rng);
            std::vector<double> gk, gr;
            grad(m, p, psi, gk, gr);
            const auto fk = fd_grad_k(m, p, psi);
            const auto fr = fd_grad_r(m, psi);
            for (int i = 0; i < n; ++i) {
                if (std::abs(fk[i]) > 1e-7) CHECK(rel_err(gk[i], fk[i]) < 1e-6);
                if (std::abs(fr[i]) > 1e-7) CHECK(rel_err(gr[i], fr[i]) < 1e-6);
            }
        }
    }
}

TEST_CASE("non-smooth points use the subgradient convention") {
    AimModel rosc{Family::Rosc};
    std::vector<double> gk, gr;
    const IsingProblem p = pair_problem(0.5);
    grad(rosc, p, {0.0, 0.0}, gk, gr);
    CHECK(gr[0] == 0.0);
    CHECK(gr[1] == 0.0);

    AimModel go{Family::Go};
    grad(go, p, {0.0, 0.5}, gk, gr);
    CHECK(std::isfinite(gk[0]));
    CHECK(gk[0] == 0.0);  // derivative convention at the jump
}

TEST_CASE("decide maps states to spins with the +1 tie rule") {
    AimModel oim{Family::Oim};
    CHECK(decide(oim, {0.0, kPi}) == SpinConfig{1, -1});
    CHECK(decide(oim, {kPi / 2.0})[0] == 1);  // cos(pi/2) rounds up

    AimModel brim{Family::Brim};
    CHECK(decide(brim, {0.3, -7.0}) == SpinConfig{1, -1});
    CHECK(decide(brim, {0.0})[0] == 1);
}

TEST_CASE("extremum states decode back and reproduce the Hamiltonian") {
    Rng rng(31337);
    for (Family family : {Family::Oim, Family::Brim, Family::Rosc, Family::Go}) {
        AimModel m{family};
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 1 + static_cast<int>(rng.uniform_int(8));
            const IsingProblem p = generate_spinmodel(n, rng.next_u64());
            SpinConfig s(n);
            for (auto& v : s) v = rng.uniform01() < 0.5 ? -1 : 1;
            const auto psi = extremum_state(m, s);
            CHECK(decide(m, psi) == s);

            const double k = repr_energy(m, p, psi);
            const double h = hamiltonian(p, s);
            if (family == Family::Oim || family == Family::Brim) {
                CHECK(std::abs(k - h) <= 1e-12);
            } else if (family == Family::Rosc) {
                double sum_abs_j = 0.0;
                for (double v : p.j) sum_abs_j += std::abs(v);
                const double tanh_rho = std::tanh(m.rosc_rho);
                const double bound = std::abs(tanh_rho * tanh_rho - 1.0) * sum_abs_j +
                                     std::abs(tanh_rho - 1.0) * p.bias_l1();
                CHECK(std::abs(k - h) <= bound * (1.0 + 1e-9) + 1e-15);
            }
        }
    }
}

TEST_CASE("R is sign-independent element-wise") {
    Rng rng(55);
    for (Family family : {Family::Oim, Family::Brim, Family::Rosc, Family::Go}) {
        AimModel m{family};
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> psi(6);
            for (auto& phi : psi) phi = rng.uniform(-3.0, 3.0);
            const double base = binar_energy(m, psi);
            const std::size_t flip = rng.uniform_int(6);
            psi[flip] = -psi[flip];
            CHECK(binar_energy(m, psi) == doctest::Approx(base).epsilon(1e-12));
        }
    }
}

TEST_CASE("OIM energies and gradients are 2pi-periodic") {
    const IsingProblem p = generate_spinmodel(5, 8);
    AimModel m{Family::Oim};
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> psi(5), shifted(5);
        for (int i = 0; i < 5; ++i) {
            psi[i] = rng.uniform(0.0, 2.0 * kPi);
            shifted[i] = psi[i] + 2.0 * kPi;
        }
        CHECK(repr_energy(m, p, shifted) == doctest::Approx(repr_energy(m, p, psi)).epsilon(1e-12));
        CHECK(binar_energy(m, shifted) == doctest::Approx(binar_energy(m, psi)).epsilon(1e-12));
        std::vector<double> gk1, gr1, gk2, gr2;
        grad(m, p, psi, gk1, gr1);
        grad(m, p, shifted, gk2, gr2);
        for (int i = 0; i < 5; ++i) {
            CHECK(gk1[i] == doctest::Approx(gk2[i]).epsilon(1e-10));
            CHECK(gr1[i] == doctest::Approx(gr2[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("energy breakdown combines per-oscillator mu") {
    const IsingProblem p = pair_problem(1.0);
    AimModel m{Family::Oim};
    const std::vector<double> psi = {0.3, 2.0};
    const std::vector<double> mu = {0.5, 2.0};
    const auto bd = energy_breakdown(m, p, psi, mu);
    const auto terms = binar_terms(m, psi);
    CHECK(bd.e == doctest::Approx(bd.k + 0.5 * terms[0] + 2.0 * terms[1]));
    CHECK(bd.r == doctest::Approx(terms[0] + terms[1]));
}

TEST_CASE("family names round trip") {
    for (Family f : {Family::Oim, Family::Brim, Family::Rosc, Family::Go}) {
        CHECK(family_from_name(family_name(f)) == f);
    }
    CHECK_THROWS_AS(family_from_name("cim"), ContractViolation);
}
