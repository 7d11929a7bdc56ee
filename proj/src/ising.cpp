#include "caim/ising.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "caim/errors.hpp"
#include "caim/rng.hpp"
#include "json.hpp"

namespace caim {

namespace {

constexpr double kLevelMergeTol = 1e-9;

void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace

void IsingProblem::validate() const {
    require(n >= 1, "IsingProblem: n must be positive");
    require(j.size() == static_cast<std::size_t>(n) * n, "IsingProblem: J size mismatch");
    require(h.size() == static_cast<std::size_t>(n), "IsingProblem: h size mismatch");
    for (int i = 0; i < n; ++i) {
        if (coupling(i, i) != 0.0) {
            throw ContractViolation("IsingProblem: nonzero diagonal at J[" + std::to_string(i) + "][" +
                                    std::to_string(i) + "]");
        }
        if (!std::isfinite(h[i])) throw ContractViolation("IsingProblem: non-finite h[" + std::to_string(i) + "]");
        for (int k = i + 1; k < n; ++k) {
            if (coupling(i, k) != coupling(k, i)) {
                throw ContractViolation("IsingProblem: asymmetric J at (" + std::to_string(i) + "," +
                                        std::to_string(k) + ")");
            }
            if (!std::isfinite(coupling(i, k))) {
                throw ContractViolation("IsingProblem: non-finite J at (" + std::to_string(i) + "," +
                                        std::to_string(k) + ")");
            }
        }
    }
}

double IsingProblem::max_abs_coupling() const {
    double m = 0.0;
    for (double v : j) m = std::max(m, std::abs(v));
    return m;
}

double IsingProblem::max_abs_row_sum() const {
    double m = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int k = 0; k < n; ++k) row += std::abs(coupling(i, k));
        m = std::max(m, row);
    }
    return m;
}

double IsingProblem::bias_l1() const {
    double s = 0.0;
    for (double v : h) s += std::abs(v);
    return s;
}

double hamiltonian(const IsingProblem& p, const SpinConfig& s) {
    require(static_cast<int>(s.size()) == p.n, "hamiltonian: spin dimension mismatch");
    double e = 0.0;
    for (int i = 0; i < p.n; ++i) {
        double row = 0.0;
        for (int k = 0; k < p.n; ++k) row += p.coupling(i, k) * s[k];
        e += s[i] * row + p.h[i] * s[i];
    }
    return e;
}

IsingProblem generate_spinmodel(int n, std::uint64_t seed, bool include_zero) {
    require(n >= 1, "generate_spinmodel: n must be >= 1");
    IsingProblem p;
    p.n = n;
    p.j.assign(static_cast<std::size_t>(n) * n, 0.0);
    p.h.assign(n, 0.0);

    Rng rng(mix_seed(seed, 0x5049a0de));
    // Grid {0, +-0.1, ..., +-1.0}: draw k in [0,21), map 0 -> 0, 2m-1 -> +0.1m, 2m -> -0.1m.
    auto draw = [&]() {
        const std::uint64_t count = include_zero ? 21 : 20;
        std::uint64_t k = rng.uniform_int(count);
        if (!include_zero) ++k;
        if (k == 0) return 0.0;
        const double mag = 0.1 * static_cast<double>((k + 1) / 2);
        return (k % 2 == 1) ? mag : -mag;
    };

    for (int i = 0; i < n; ++i) {
        for (int k = i + 1; k < n; ++k) {
            const double v = draw();
            p.coupling(i, k) = v;
            p.coupling(k, i) = v;
        }
    }
    for (int i = 0; i < n; ++i) p.h[i] = draw();
    return p;
}

GroundStateResult brute_force_ground(const IsingProblem& p) {
    p.validate();
    if (p.n > kBruteForceMaxSpins) {
        throw ResourceCapError("brute_force_ground: n = " + std::to_string(p.n) + " exceeds the cap of " +
                               std::to_string(kBruteForceMaxSpins) + " spins (2^n enumeration)");
    }
    const int n = p.n;
    const std::uint64_t total = 1ULL << n;

    SpinConfig s(n, 1);
    // Local fields g_i = sum_k J_ik s_k; a single flip changes H by
    // -2 s_i (2 g_i + h_i) and each g_k by -2 J_ki s_i.
    std::vector<double> local(n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) local[i] += p.coupling(i, k) * s[k];
    }
    double energy = hamiltonian(p, s);

    // Distinct energy levels, merged at 1e-9 to absorb float drift.
    std::vector<std::pair<double, std::int64_t>> levels;
    levels.reserve(64);
    auto record_level = [&](double e) {
        auto it = std::lower_bound(levels.begin(), levels.end(), e - kLevelMergeTol,
                                   [](const auto& a, double v) { return a.first < v; });
        if (it != levels.end() && std::abs(it->first - e) <= kLevelMergeTol) {
            ++it->second;
        } else {
            levels.insert(it, {e, 1});
        }
    };

    double best = energy;
    std::vector<SpinConfig> ground_set;
    ground_set.push_back(s);
    record_level(energy);

    for (std::uint64_t code = 1; code < total; ++code) {
        // Gray-code walk: flip the bit position of the lowest set bit of code.
        const int flip = __builtin_ctzll(code);
        const double si = s[flip];
        energy += -2.0 * si * (2.0 * local[flip] + p.h[flip]);
        s[flip] = -s[flip];
        for (int k = 0; k < n; ++k) local[k] -= 2.0 * p.coupling(k, flip) * si;

        // Re-anchor periodically so incremental error cannot accumulate.
        if ((code & 0xffffULL) == 0) {
            energy = hamiltonian(p, s);
            for (int i = 0; i < n; ++i) {
                local[i] = 0.0;
                for (int k = 0; k < n; ++k) local[i] += p.coupling(i, k) * s[k];
            }
        }

        record_level(energy);
        if (energy < best - kLevelMergeTol) {
            best = energy;
            ground_set.clear();
            ground_set.push_back(s);
        } else if (std::abs(energy - best) <= kLevelMergeTol) {
            ground_set.push_back(s);
        }
    }

    GroundStateResult out;
    out.h0 = levels.front().first;
    out.ground_set = std::move(ground_set);
    out.levels.levels.reserve(levels.size());
    out.levels.degeneracy.reserve(levels.size());
    for (const auto& [e, count] : levels) {
        out.levels.levels.push_back(e);
        out.levels.degeneracy.push_back(count);
    }
    return out;
}

IsingProblem augment_bias(const IsingProblem& p) {
    p.validate();
    IsingProblem out;
    out.n = p.n + 1;
    out.j.assign(static_cast<std::size_t>(out.n) * out.n, 0.0);
    out.h.assign(out.n, 0.0);
    for (int i = 0; i < p.n; ++i) {
        // h_i/2 on the new node: the ordered double sum counts the pair twice.
        out.coupling(0, i + 1) = p.h[i] / 2.0;
        out.coupling(i + 1, 0) = p.h[i] / 2.0;
        for (int k = 0; k < p.n; ++k) out.coupling(i + 1, k + 1) = p.coupling(i, k);
    }
    return out;
}

std::string problem_to_json_text(const IsingProblem& p) {
    nlohmann::json doc;
    doc["n"] = p.n;
    auto rows = nlohmann::json::array();
    for (int i = 0; i < p.n; ++i) {
        auto row = nlohmann::json::array();
        for (int k = 0; k < p.n; ++k) row.push_back(p.coupling(i, k));
        rows.push_back(std::move(row));
    }
    doc["J"] = std::move(rows);
    doc["h"] = p.h;
    return doc.dump(2) + "\n";
}

IsingProblem problem_from_json_text(const std::string& text, const std::string& origin) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(origin + ": " + err.what());
    }
    if (!doc.is_object() || !doc.contains("n") || !doc.contains("J") || !doc.contains("h")) {
        throw ParseError(origin + ": expected object with fields n, J, h");
    }
    IsingProblem p;
    try {
        p.n = doc.at("n").get<int>();
        if (p.n < 1) throw ParseError(origin + ": field n must be positive");
        const auto& jm = doc.at("J");
        if (!jm.is_array() || static_cast<int>(jm.size()) != p.n) {
            throw ParseError(origin + ": field J must be an n x n array");
        }
        p.j.assign(static_cast<std::size_t>(p.n) * p.n, 0.0);
        for (int i = 0; i < p.n; ++i) {
            const auto& row = jm.at(i);
            if (!row.is_array() || static_cast<int>(row.size()) != p.n) {
                throw ParseError(origin + ": J row " + std::to_string(i) + " has wrong length");
            }
            for (int k = 0; k < p.n; ++k) p.coupling(i, k) = row.at(k).get<double>();
        }
        p.h = doc.at("h").get<std::vector<double>>();
        if (static_cast<int>(p.h.size()) != p.n) throw ParseError(origin + ": field h has wrong length");
    } catch (const nlohmann::json::exception& err) {
        throw ParseError(origin + ": " + err.what());
    }
    try {
        p.validate();
    } catch (const ContractViolation& err) {
        throw ParseError(origin + ": " + err.what());
    }
    return p;
}

void store_problem(const IsingProblem& p, const std::string& path) {
    p.validate();
    std::ofstream out(path);
    if (!out) throw ParseError("store_problem: cannot open " + path + " for writing");
    out << problem_to_json_text(p);
    if (!out) throw ParseError("store_problem: write failed for " + path);
}

IsingProblem load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_problem: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return problem_from_json_text(buf.str(), path);
}

}  // namespace caim
