#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "qmf/config.hpp"
#include "qmf/csv.hpp"
#include "qmf/diagnostics.hpp"
#include "qmf/meanfield.hpp"
#include "qmf/version.hpp"

namespace qmf {

namespace fs = std::filesystem;

inline std::string fnv1a_hex(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Output directory: --out override > config "out" > $QMF_OUT_ROOT/<experiment> >
// runs/<experiment>.
inline fs::path resolve_out_dir(const ExperimentConfig& cfg, const std::string& override_out) {
    if (!override_out.empty()) return override_out;
    if (!cfg.out.empty()) return cfg.out;
    const char* root = std::getenv("QMF_OUT_ROOT");
    if (root && *root) return fs::path(root) / cfg.experiment;
    return fs::path("runs") / cfg.experiment;
}

// Everything needed to rerun the experiment exactly; the timestamp is the
// only line that differs between identical reruns.
inline void write_manifest(const fs::path& dir, const ExperimentConfig& cfg) {
    Json manifest;
    manifest["config"] = cfg.resolved;
    manifest["config_hash"] = fnv1a_hex(cfg.resolved.dump());
    manifest["library_version"] = QMF_VERSION_STRING;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char ts[32];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    manifest["timestamp"] = ts;
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
}

namespace detail {

inline MeanCoupledFactory<BlochVector> bloch_factory(double eta, const ControlLaw& law,
                                                     bool coupled) {
    return [eta, law, coupled](MeanLookup<BlochVector> lookup) {
        BlochMeanSource src = nullptr;
        if (coupled) {
            src = [lookup](int64_t step) {
                const BlochVector m = lookup(step);
                return std::array<double, 2>{m.x, m.y};
            };
        }
        return qubit_meanfield_bloch(eta, law, src);
    };
}

inline MeanCoupledFactory<ComplexMatrix> matrix_factory(const ModelParams& params,
                                                        const ControlLaw& law) {
    return [params, law](MeanLookup<ComplexMatrix> lookup) {
        return belavkin_meanfield(params, law, lookup);
    };
}

template <class State>
void write_ensemble_trajectories(const fs::path& dir, const std::string& experiment,
                                 const std::vector<TrajectoryRecord<State>>& records,
                                 const std::vector<uint64_t>& seeds) {
    const fs::path tdir = dir / "trajectories";
    fs::create_directories(tdir);
    for (size_t p = 0; p < records.size(); ++p) {
        write_trajectory_csv(tdir / (experiment + "_" + std::to_string(seeds[p]) + ".csv"),
                             records[p]);
    }
}

inline std::vector<uint64_t> particle_seeds(uint64_t master, int64_t n) {
    std::vector<uint64_t> seeds(static_cast<size_t>(n));
    for (int64_t p = 0; p < n; ++p) {
        seeds[static_cast<size_t>(p)] = derive_seed(master, static_cast<uint64_t>(p));
    }
    return seeds;
}

} // namespace detail

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

inline void experiment_reduction(const ExperimentConfig& cfg, const fs::path& dir) {
    const bool coupled = cfg.kernel_preset != "zero";
    const ControlLaw law = cfg.control.build();
    const auto factory = detail::bloch_factory(cfg.eta, law, coupled);
    const TimeGrid grid = cfg.grid();
    const BlochVector x0 = cfg.initial_bloch_state();
    const auto seeds = detail::particle_seeds(cfg.seed, cfg.n_samples);
    const int rec_every = cfg.record_every > 0 ? cfg.record_every : 10;

    auto result = solve_particles<BlochVector>(factory, x0, cfg.n_samples, grid, seeds,
                                               rec_every, resolve_threads(cfg.threads));

    if (cfg.write_trajectories) {
        detail::write_ensemble_trajectories(dir, cfg.experiment, result.records, seeds);
    }
    write_meanflow_csv(dir / "reduction_mean.csv", result.mean, rec_every);

    const ReductionReport rep = reduction_stats(result.records, cfg.threshold);
    CsvWriter w(dir / "reduction_report.csv");
    w.header({"n_paths", "threshold", "z0", "born_prediction", "fraction_reduced",
              "fraction_up"});
    w.row({static_cast<double>(rep.n_paths), rep.threshold, rep.z0, rep.born_prediction,
           rep.fraction_reduced, rep.fraction_up});
    if (!cfg.quiet) {
        std::cout << "reduction: " << rep.n_paths << " samples, fraction |z_T| > "
                  << rep.threshold << " = " << rep.fraction_reduced
                  << ", fraction up = " << rep.fraction_up << " (Born " << rep.born_prediction
                  << ")\n";
    }
}

inline void experiment_stabilization(const ExperimentConfig& cfg, const fs::path& dir) {
    const bool coupled = cfg.kernel_preset != "zero";
    const ControlLaw law = cfg.control.build();
    const auto factory = detail::bloch_factory(cfg.eta, law, coupled);
    const TimeGrid grid = cfg.grid();
    BlochVector x0{0.25, -0.25, 0.0};
    if (cfg.initial_bloch || !cfg.initial_preset.empty()) x0 = cfg.initial_bloch_state();
    const auto seeds = detail::particle_seeds(cfg.seed, cfg.n_samples);
    const int rec_every = cfg.record_every > 0 ? cfg.record_every : 10;

    auto result = solve_particles<BlochVector>(factory, x0, cfg.n_samples, grid, seeds,
                                               rec_every, resolve_threads(cfg.threads));
    if (cfg.write_trajectories) {
        detail::write_ensemble_trajectories(dir, cfg.experiment, result.records, seeds);
    }

    const DensityMatrix target = (cfg.control.target == "rho_g") ? rho_g() : rho_e();
    const auto& times = result.records.front().times;
    std::vector<double> mean_fid(times.size(), 0.0);
    for (const auto& rec : result.records) {
        for (size_t i = 0; i < times.size(); ++i) {
            mean_fid[i] += fidelity(bloch_compose(rec.states[i]), target);
        }
    }
    for (double& f : mean_fid) f /= static_cast<double>(result.records.size());

    {
        CsvWriter w(dir / "stabilization_mean.csv");
        w.header({"time", "mean_fidelity"});
        for (size_t i = 0; i < times.size(); ++i) w.row({times[i], mean_fid[i]});
    }
    {
        CsvWriter w(dir / "stabilization_report.csv");
        w.header({"n_paths", "final_mean_fidelity"});
        w.row({static_cast<double>(cfg.n_samples), mean_fid.back()});
    }
    if (!cfg.quiet) {
        std::cout << "stabilization: mean fidelity at T = " << mean_fid.back() << "\n";
    }
}

inline void experiment_chaos(const ExperimentConfig& cfg, const fs::path& dir) {
    if (cfg.eta != 1.0) throw config_error("eta", "chaos-scaling requires eta = 1");
    ModelParams params = qubit_qnd_params(cfg.eta, cfg.kernel());
    const TimeGrid grid = cfg.grid();
    const auto reports =
        chaos_experiment(cfg.initial_density(), params, cfg.Ns, grid, cfg.n_paths, cfg.seed,
                         cfg.record_every, resolve_threads(cfg.threads));

    for (const ChaosReport& rep : reports) {
        CsvWriter w(dir / ("chaos_N" + std::to_string(rep.n_particles) + ".csv"));
        w.header({"time", "alpha_mean", "alpha_se"});
        for (size_t i = 0; i < rep.times.size(); ++i) {
            w.row({rep.times[i], rep.alpha_mean[i], rep.alpha_se[i]});
        }
    }
    {
        CsvWriter w(dir / "chaos_summary.csv");
        w.header({"N", "n_paths", "alpha0", "alpha_T", "alpha_T_se", "fitted_c"});
        for (const ChaosReport& rep : reports) {
            w.row({static_cast<double>(rep.n_particles), static_cast<double>(rep.n_paths),
                   rep.alpha0, rep.alpha_mean.back(), rep.alpha_se.back(), rep.fitted_c});
        }
    }
    const ChaosScalingFit fit = chaos_scaling_fit(reports);
    {
        CsvWriter w(dir / "chaos_fit.csv");
        w.header({"slope", "slope_se", "negative_95"});
        w.row({fit.slope, fit.slope_se, fit.negative_95 ? 1.0 : 0.0});
    }
    if (!cfg.quiet) {
        std::cout << "chaos-scaling: slope of log E[alpha_N(T)] vs log N = " << fit.slope
                  << " +/- " << fit.slope_se << "\n";
    }
}

inline void experiment_lemma1(const ExperimentConfig& cfg, const fs::path& dir) {
    CsvWriter w(dir / "lemma1_summary.csv");
    w.header({"d", "n_triples", "violations", "max_lhs_minus_rhs"});
    bool any_violation = false;
    std::ofstream dump;
    for (int d : cfg.lemma1_dims) {
        const Lemma1Sweep sweep = lemma1_sweep(d, cfg.lemma1_triples,
                                               derive_seed(cfg.seed, static_cast<uint64_t>(d)),
                                               1e-10, resolve_threads(cfg.threads));
        w.row({static_cast<double>(d), static_cast<double>(sweep.n_triples),
               static_cast<double>(sweep.violations), sweep.max_lhs_minus_rhs});
        if (!cfg.quiet) {
            std::cout << "lemma1-sweep d=" << d << ": " << sweep.violations
                      << " violations in " << sweep.n_triples << " triples, worst margin "
                      << sweep.max_lhs_minus_rhs << "\n";
        }
        if (!sweep.counterexamples.empty()) {
            if (!any_violation) {
                dump.open(dir / "lemma1_counterexamples.txt");
                any_violation = true;
            }
            for (const auto& ce : sweep.counterexamples) {
                dump << "d=" << d << " lhs=" << g17(ce.lhs) << " rhs=" << g17(ce.rhs) << "\n";
                dump << "A:\n";
                for (Eigen::Index r = 0; r < ce.a.rows(); ++r) {
                    for (Eigen::Index c = 0; c < ce.a.cols(); ++c) {
                        dump << " (" << g17(ce.a(r, c).real()) << "," << g17(ce.a(r, c).imag())
                             << ")";
                    }
                    dump << "\n";
                }
                dump << "B:\n";
                for (Eigen::Index r = 0; r < ce.b.rows(); ++r) {
                    for (Eigen::Index c = 0; c < ce.b.cols(); ++c) {
                        dump << " (" << g17(ce.b(r, c).real()) << "," << g17(ce.b(r, c).imag())
                             << ")";
                    }
                    dump << "\n";
                }
                dump << "L:\n";
                for (Eigen::Index r = 0; r < ce.l.rows(); ++r) {
                    for (Eigen::Index c = 0; c < ce.l.cols(); ++c) {
                        dump << " (" << g17(ce.l(r, c).real()) << "," << g17(ce.l(r, c).imag())
                             << ")";
                    }
                    dump << "\n";
                }
                dump << "\n";
            }
        }
    }
}

inline void experiment_picard_vs_particles(const ExperimentConfig& cfg, const fs::path& dir) {
    const ModelParams params = qubit_qnd_params(cfg.eta, cfg.kernel());
    const ControlLaw law = cfg.control.build();
    const auto factory = detail::matrix_factory(params, law);
    const TimeGrid grid = cfg.grid();
    const ComplexMatrix x0 = cfg.initial_density().matrix();
    const int threads = resolve_threads(cfg.threads);

    PicardOptions popt;
    popt.n_paths = cfg.n_paths;
    popt.max_iter = cfg.max_iter;
    popt.tol = cfg.tol;
    popt.n_threads = threads;
    const auto picard =
        picard_solve<ComplexMatrix>(factory, x0, grid, derive_seed(cfg.seed, 0x9100), popt);

    const auto particles = solve_particles<ComplexMatrix>(
        factory, x0, cfg.n_particles, grid, derive_seed(cfg.seed, 0x9200), 0, threads);

    write_meanflow_csv(dir / "picard_mean.csv", picard.flow);
    write_meanflow_csv(dir / "particles_mean.csv", particles.mean);
    {
        CsvWriter w(dir / "picard_iterations.csv");
        w.header({"iteration", "sup_distance"});
        for (size_t i = 0; i < picard.distances.size(); ++i) {
            w.row({static_cast<double>(i + 1), picard.distances[i]});
        }
    }
    double max_dist = 0.0;
    {
        CsvWriter w(dir / "meanflow_distance.csv");
        w.header({"time", "frobenius_distance"});
        for (size_t k = 0; k < picard.flow.values.size(); ++k) {
            const double dist = (picard.flow.values[k] - particles.mean.values[k]).norm();
            max_dist = std::max(max_dist, dist);
            w.row({grid.t(static_cast<int64_t>(k)), dist});
        }
    }
    {
        CsvWriter w(dir / "picard_summary.csv");
        w.header({"converged", "iterations", "final_distance", "max_flow_distance"});
        w.row({picard.converged ? 1.0 : 0.0, static_cast<double>(picard.distances.size()),
               picard.distances.empty() ? 0.0 : picard.distances.back(), max_dist});
    }
    if (!cfg.quiet) {
        std::cout << "picard-vs-particles: picard "
                  << (picard.converged ? "converged" : "did NOT converge") << " in "
                  << picard.distances.size() << " iterations, max flow distance " << max_dist
                  << "\n";
    }
}

// ---------------------------------------------------------------------------
// dispatcher
// ---------------------------------------------------------------------------

inline std::string list_experiments() {
    return "reduction            quantum state reduction of the mean-field qubit ensemble\n"
           "                     keys: seed; optional grid{T,dt}, eta, n_samples, kernel,\n"
           "                     initial{bloch|preset}, control, threshold, record_every\n"
           "stabilization        feedback stabilization toward a target state (fidelity curves)\n"
           "                     keys: seed; optional grid, eta, n_samples, kernel, initial,\n"
           "                     control{type=stabilize,target,c1,c2}, record_every\n"
           "chaos-scaling        E[alpha_N(t)] for the coupled N-particle/mean-field pair\n"
           "                     keys: seed; optional grid, Ns, n_paths, kernel, initial (eta = 1)\n"
           "lemma1-sweep         randomized check of the trace inequality bound\n"
           "                     keys: seed; optional lemma1{dims, n_triples}\n"
           "picard-vs-particles  fixed-point vs interacting-particle mean-field law\n"
           "                     keys: seed; optional grid, eta, n_paths, n_particles,\n"
           "                     picard{max_iter, tol}, kernel, initial, control\n";
}

inline fs::path run_experiment(const ExperimentConfig& cfg, const std::string& override_out = "") {
    const fs::path dir = resolve_out_dir(cfg, override_out);
    fs::create_directories(dir);
    write_manifest(dir, cfg);
    try {
        if (cfg.experiment == "reduction") {
            experiment_reduction(cfg, dir);
        } else if (cfg.experiment == "stabilization") {
            experiment_stabilization(cfg, dir);
        } else if (cfg.experiment == "chaos-scaling") {
            experiment_chaos(cfg, dir);
        } else if (cfg.experiment == "lemma1-sweep") {
            experiment_lemma1(cfg, dir);
        } else if (cfg.experiment == "picard-vs-particles") {
            experiment_picard_vs_particles(cfg, dir);
        } else {
            throw config_error("experiment", "unknown experiment '" + cfg.experiment + "'");
        }
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const Error& e) {
        throw ExperimentFailed("experiment=" + cfg.experiment + " error=" + e.what());
    }
    return dir;
}

} // namespace qmf
