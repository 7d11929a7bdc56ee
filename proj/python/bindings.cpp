#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "caim/aim.hpp"
#include "caim/controller.hpp"
#include "caim/dynamics.hpp"
#include "caim/errors.hpp"
#include "caim/experiment.hpp"
#include "caim/ising.hpp"
#include "caim/metrics.hpp"
#include "caim/sensor.hpp"

namespace py = pybind11;
using namespace caim;

namespace {

IsingProblem make_problem(int n, const std::vector<std::vector<double>>& j, const std::vector<double>& h) {
    IsingProblem p;
    p.n = n;
    p.j.assign(static_cast<std::size_t>(n) * n, 0.0);
    if (static_cast<int>(j.size()) != n) throw ContractViolation("IsingProblem: J must have n rows");
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(j[i].size()) != n) throw ContractViolation("IsingProblem: J rows must have n entries");
        for (int k = 0; k < n; ++k) p.coupling(i, k) = j[i][k];
    }
    p.h = h;
    p.validate();
    return p;
}

std::vector<std::vector<double>> problem_rows(const IsingProblem& p) {
    std::vector<std::vector<double>> rows(p.n, std::vector<double>(p.n));
    for (int i = 0; i < p.n; ++i) {
        for (int k = 0; k < p.n; ++k) rows[i][k] = p.coupling(i, k);
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(pycaim, m) {
    m.doc() = "Analog Ising machine simulator: energy models, gradient-flow dynamics, "
              "sampled-feedback control, and benchmark metrics.";

    py::register_exception<ContractViolation>(m, "ContractViolation");
    py::register_exception<ParseError>(m, "ParseError");
    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<ResourceCapError>(m, "ResourceCapError");
    py::register_exception<NumericalError>(m, "NumericalError");

    py::class_<IsingProblem>(m, "IsingProblem")
        .def(py::init(&make_problem), py::arg("n"), py::arg("J"), py::arg("h"))
        .def_readonly("n", &IsingProblem::n)
        .def_property_readonly("J", &problem_rows)
        .def_readonly("h", &IsingProblem::h)
        .def("validate", &IsingProblem::validate);

    m.def("hamiltonian", &hamiltonian, py::arg("problem"), py::arg("spins"));
    m.def("generate_spinmodel", &generate_spinmodel, py::arg("n"), py::arg("seed"),
          py::arg("include_zero") = true);
    m.def("augment_bias", &augment_bias, py::arg("problem"));
    m.def("store_problem", &store_problem, py::arg("problem"), py::arg("path"));
    m.def("load_problem", &load_problem, py::arg("path"));

    py::class_<EnergyLevels>(m, "EnergyLevels")
        .def_readonly("levels", &EnergyLevels::levels)
        .def_readonly("degeneracy", &EnergyLevels::degeneracy);
    py::class_<GroundStateResult>(m, "GroundStateResult")
        .def_readonly("h0", &GroundStateResult::h0)
        .def_readonly("ground_set", &GroundStateResult::ground_set)
        .def_readonly("levels", &GroundStateResult::levels);
    m.def("brute_force_ground", &brute_force_ground, py::arg("problem"));

    py::enum_<Family>(m, "Family")
        .value("OIM", Family::Oim)
        .value("BRIM", Family::Brim)
        .value("ROSC", Family::Rosc)
        .value("GO", Family::Go);
    m.def("family_from_name", &family_from_name);

    py::class_<AimModel>(m, "AimModel")
        .def(py::init([](Family f) {
                 AimModel model;
                 model.family = f;
                 return model;
             }),
             py::arg("family") = Family::Oim)
        .def_readwrite("family", &AimModel::family)
        .def_readwrite("brim_bound", &AimModel::brim_bound)
        .def_readwrite("brim_scale", &AimModel::brim_scale)
        .def_readwrite("rosc_slope", &AimModel::rosc_slope)
        .def_readwrite("rosc_rho", &AimModel::rosc_rho)
        .def_readwrite("go_epsilon", &AimModel::go_epsilon);

    m.def("repr_energy", &repr_energy, py::arg("model"), py::arg("problem"), py::arg("psi"));
    m.def("binar_energy", &binar_energy, py::arg("model"), py::arg("psi"));
    m.def("binar_terms", &binar_terms, py::arg("model"), py::arg("psi"));
    m.def(
        "grad",
        [](const AimModel& model, const IsingProblem& p, const std::vector<double>& psi) {
            std::vector<double> gk, gr;
            grad(model, p, psi, gk, gr);
            return py::make_tuple(gk, gr);
        },
        py::arg("model"), py::arg("problem"), py::arg("psi"));
    m.def("decide", &decide, py::arg("model"), py::arg("psi"));
    m.def("extremum_state", &extremum_state, py::arg("model"), py::arg("spins"));

    py::enum_<NoiseKind>(m, "NoiseKind").value("WIENER", NoiseKind::Wiener).value("PER_STEP", NoiseKind::PerStep);

    py::class_<ConvergenceConfig>(m, "ConvergenceConfig")
        .def(py::init<>())
        .def_readwrite("enabled", &ConvergenceConfig::enabled)
        .def_readwrite("window", &ConvergenceConfig::window)
        .def_readwrite("threshold", &ConvergenceConfig::threshold);

    py::class_<IntegratorConfig>(m, "IntegratorConfig")
        .def(py::init<>())
        .def_readwrite("dt", &IntegratorConfig::dt)
        .def_readwrite("max_time", &IntegratorConfig::max_time)
        .def_readwrite("noise_gamma", &IntegratorConfig::noise_gamma)
        .def_readwrite("seed", &IntegratorConfig::seed)
        .def_readwrite("record_every", &IntegratorConfig::record_every)
        .def_readwrite("record_states", &IntegratorConfig::record_states)
        .def_readwrite("noise_kind", &IntegratorConfig::noise_kind)
        .def_readwrite("convergence", &IntegratorConfig::convergence);

    py::class_<TrajectorySample>(m, "TrajectorySample")
        .def_readonly("t", &TrajectorySample::t)
        .def_readonly("E", &TrajectorySample::e)
        .def_readonly("K", &TrajectorySample::k)
        .def_readonly("R", &TrajectorySample::r)
        .def_readonly("H_decision", &TrajectorySample::h_decision);

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("samples", &Trajectory::samples)
        .def_readonly("psi_snapshots", &Trajectory::psi_snapshots)
        .def_readonly("converged_at", &Trajectory::converged_at);

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("trajectory", &RunResult::trajectory)
        .def_readonly("final_psi", &RunResult::final_psi)
        .def_readonly("t_end", &RunResult::t_end)
        .def_readonly("best_config", &RunResult::best_config)
        .def_readonly("best_h", &RunResult::best_h)
        .def_readonly("converged", &RunResult::converged)
        .def_readonly("go_zero_crossings", &RunResult::go_zero_crossings);

    m.def("sample_initial", &sample_initial, py::arg("model"), py::arg("n"), py::arg("seed"));
    m.def("run_autonomous", &run_autonomous, py::arg("model"), py::arg("problem"), py::arg("psi0"),
          py::arg("mu"), py::arg("config"));
    m.def("detect_convergence", &detect_convergence, py::arg("window_energies"), py::arg("e_init"),
          py::arg("e_now"), py::arg("threshold") = 0.025);

    py::enum_<NormMode>(m, "NormMode").value("L2", NormMode::L2).value("L1", NormMode::L1);

    py::class_<WaveformConfig>(m, "WaveformConfig")
        .def(py::init<>())
        .def_readwrite("oversample", &WaveformConfig::oversample)
        .def_readwrite("period", &WaveformConfig::period)
        .def_readwrite("amplitude", &WaveformConfig::amplitude)
        .def_readwrite("quant_bits", &WaveformConfig::quant_bits);

    py::class_<ControllerConfig>(m, "ControllerConfig")
        .def(py::init<>())
        .def_readwrite("beta", &ControllerConfig::beta)
        .def_readwrite("eta", &ControllerConfig::eta)
        .def_readwrite("tau", &ControllerConfig::tau)
        .def_readwrite("mu_prime", &ControllerConfig::mu_prime)
        .def_readwrite("clip_bound", &ControllerConfig::clip_bound)
        .def_readwrite("norm_mode", &ControllerConfig::norm_mode)
        .def_readwrite("grad_floor", &ControllerConfig::grad_floor)
        .def_readwrite("reference_node_mu", &ControllerConfig::reference_node_mu)
        .def_readwrite("reference_node", &ControllerConfig::reference_node)
        .def_readwrite("literal_scalar_norm", &ControllerConfig::literal_scalar_norm)
        .def_readwrite("sensor", &ControllerConfig::sensor);

    py::class_<SliceBuffer>(m, "SliceBuffer")
        .def(py::init<>())
        .def_readwrite("psi_km1", &SliceBuffer::psi_km1)
        .def_readwrite("psi_km2", &SliceBuffer::psi_km2)
        .def_readwrite("k", &SliceBuffer::k)
        .def_readwrite("held_mu", &SliceBuffer::held_mu);

    m.def("adaptive_mu", &adaptive_mu, py::arg("model"), py::arg("problem"), py::arg("buffer"),
          py::arg("config"));

    py::class_<ClfDirection>(m, "ClfDirection")
        .def_readonly("mu_parallel", &ClfDirection::mu_parallel)
        .def_readonly("alpha_star", &ClfDirection::alpha_star)
        .def_readonly("degenerate", &ClfDirection::degenerate);
    m.def("clf_direction", &clf_direction, py::arg("model"), py::arg("problem"), py::arg("psi"),
          py::arg("mu_prime"));

    py::class_<MuSlice>(m, "MuSlice")
        .def_readonly("k", &MuSlice::k)
        .def_readonly("t_start", &MuSlice::t_start)
        .def_readonly("mu", &MuSlice::mu);

    py::class_<ControlledRunResult>(m, "ControlledRunResult")
        .def_readonly("run", &ControlledRunResult::run)
        .def_readonly("mu_trace", &ControlledRunResult::mu_trace)
        .def_readonly("stalled_slices", &ControlledRunResult::stalled_slices);

    m.def("run_controlled", &run_controlled, py::arg("model"), py::arg("problem"), py::arg("psi0"),
          py::arg("controller"), py::arg("config"));
    m.def("async_momentum_step", &async_momentum_step, py::arg("theta_t"), py::arg("theta_tm1"),
          py::arg("theta_tm2"), py::arg("grad_at_tm1"), py::arg("beta"), py::arg("eta"));

    py::enum_<JNormKind>(m, "JNormKind")
        .value("MAX_ABS_ENTRY", JNormKind::MaxAbsEntry)
        .value("MAX_ROW_SUM", JNormKind::MaxRowSum);
    py::class_<MetricsConfig>(m, "MetricsConfig")
        .def(py::init<>())
        .def_readwrite("j_norm", &MetricsConfig::j_norm)
        .def_readwrite("success_constant", &MetricsConfig::success_constant);

    m.def("approx_ratio", &approx_ratio, py::arg("problem"), py::arg("h_value"),
          py::arg("config") = MetricsConfig{});
    m.def("success_estimate", &success_estimate, py::arg("n"), py::arg("r"), py::arg("constant") = 1.35);
    m.def("time_to_solution", &time_to_solution, py::arg("t_run"), py::arg("p_hat"));

    py::class_<GridBounds>(m, "GridBounds")
        .def(py::init<>())
        .def_readwrite("lo", &GridBounds::lo)
        .def_readwrite("hi", &GridBounds::hi)
        .def_readwrite("periodic", &GridBounds::periodic);
    m.def("default_grid_bounds", &default_grid_bounds, py::arg("family"));

    py::class_<EquivalenceReport>(m, "EquivalenceReport")
        .def_readonly("mu", &EquivalenceReport::mu)
        .def_readonly("min_energy_ground", &EquivalenceReport::min_energy_ground)
        .def_readonly("min_energy_excited", &EquivalenceReport::min_energy_excited)
        .def_readonly("equivalent", &EquivalenceReport::equivalent);
    m.def("equivalence_check_grid", &equivalence_check_grid, py::arg("model"), py::arg("problem"),
          py::arg("mu"), py::arg("grid_res"),
          py::arg("bounds") = std::optional<GridBounds>{});

    m.def(
        "run_experiment_file",
        [](const std::string& config_path, const std::string& out_dir) {
            ExperimentConfig cfg = load_experiment_config(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const ResultBundle bundle = run_experiment(cfg);
            emit_csv(bundle, cfg.out_dir);
            emit_json(bundle, cfg.out_dir + "/bundle.json");
            return cfg.out_dir;
        },
        py::arg("config_path"), py::arg("out_dir") = "",
        "Run an experiment config and write CSV/JSON outputs; returns the output directory.");
}
