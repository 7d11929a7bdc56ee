#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace caim {

// Spin configuration, entries exactly -1 or +1.
using SpinConfig = std::vector<int>;

// Symmetric zero-diagonal coupling matrix J (row-major, dense) plus bias h.
// H(s) = sum over all ordered pairs (i,j) of J[i][j] s_i s_j + sum_i h_i s_i,
// i.e. each unordered pair contributes twice through the symmetry of J.
struct IsingProblem {
    int n = 0;
    std::vector<double> j;  // n*n row-major
    std::vector<double> h;  // n

    double coupling(int row, int col) const { return j[static_cast<std::size_t>(row) * n + col]; }
    double& coupling(int row, int col) { return j[static_cast<std::size_t>(row) * n + col]; }

    // Throws ContractViolation if J is asymmetric, has a nonzero diagonal,
    // contains non-finite entries, or dimensions disagree.
    void validate() const;

    double max_abs_coupling() const;
    double max_abs_row_sum() const;
    double bias_l1() const;
};

struct EnergyLevels {
    std::vector<double> levels;      // strictly ascending distinct Hamiltonian values
    std::vector<std::int64_t> degeneracy;  // one count per level, sums to 2^n
};

struct GroundStateResult {
    double h0 = 0.0;
    std::vector<SpinConfig> ground_set;
    EnergyLevels levels;
};

// Exact Hamiltonian, double sum over ordered pairs.
double hamiltonian(const IsingProblem& p, const SpinConfig& s);

// SpinModel benchmark family: J_{ij,i<j} and h_i drawn uniformly from the
// grid {0, +-0.1, ..., +-1.0} (21 values). include_zero=false drops the 0
// entry (20 values). Pure function of (n, seed).
IsingProblem generate_spinmodel(int n, std::uint64_t seed, bool include_zero = true);

// Exhaustive enumeration over all 2^n configurations; n <= 24 enforced.
GroundStateResult brute_force_ground(const IsingProblem& p);
inline constexpr int kBruteForceMaxSpins = 24;

// Converts an n-spin problem with bias into an (n+1)-spin zero-bias problem
// by adding node 0 coupled with strengths h_i/2. For any s with s_0 = +1 the
// augmented Hamiltonian equals the original one exactly.
IsingProblem augment_bias(const IsingProblem& p);

// Problem file schema: JSON {"n": int, "J": [[real]], "h": [real]}.
void store_problem(const IsingProblem& p, const std::string& path);
IsingProblem load_problem(const std::string& path);
IsingProblem problem_from_json_text(const std::string& text, const std::string& origin);
std::string problem_to_json_text(const IsingProblem& p);

}  // namespace caim
