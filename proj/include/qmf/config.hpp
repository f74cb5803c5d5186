#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmf/control.hpp"
#include "qmf/density.hpp"
#include "qmf/kernels.hpp"
#include "qmf/models.hpp"

namespace qmf {

using Json = nlohmann::json;

inline ConfigInvalid config_error(const std::string& field, const std::string& reason) {
    return ConfigInvalid("field=" + field + " reason=" + reason);
}

// Matrices in config files: a preset name or a nested array of [re, im] pairs.
inline ComplexMatrix matrix_from_json(const Json& j, const std::string& field) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "sigma_x") return sigma_x();
        if (name == "sigma_y") return sigma_y();
        if (name == "sigma_z") return sigma_z();
        if (name == "identity") return identity(2);
        if (name == "zero") return ComplexMatrix::Zero(2, 2);
        throw config_error(field, "unknown matrix preset '" + name + "'");
    }
    if (!j.is_array() || j.empty()) throw config_error(field, "expected preset or matrix rows");
    const size_t d = j.size();
    ComplexMatrix m(d, d);
    for (size_t r = 0; r < d; ++r) {
        if (!j[r].is_array() || j[r].size() != d) {
            throw config_error(field, "matrix must be square");
        }
        for (size_t c = 0; c < d; ++c) {
            const Json& cell = j[r][c];
            if (cell.is_number()) {
                m(r, c) = Complex(cell.get<double>(), 0.0);
            } else if (cell.is_array() && cell.size() == 2) {
                m(r, c) = Complex(cell[0].get<double>(), cell[1].get<double>());
            } else {
                throw config_error(field, "entries must be numbers or [re, im] pairs");
            }
        }
    }
    return m;
}

struct ControlConfig {
    std::string type = "zero";     // zero | stabilize
    std::string target = "rho_e";  // rho_e | rho_g
    double c1 = 7.6;
    double c2 = 5.0;

    ControlLaw build() const {
        if (type == "zero") return zero_law();
        if (type == "stabilize") {
            const DensityMatrix tgt = (target == "rho_g") ? rho_g() : rho_e();
            return stabilizing_law(tgt, c1, c2);
        }
        throw config_error("control.type", "unknown control type '" + type + "'");
    }
};

struct ExperimentConfig {
    std::string experiment;
    uint64_t seed = 0;
    double T = 10.0;
    double dt = 1e-3;
    double eta = 1.0;
    int64_t n_samples = 100;     // ensemble size for reduction/stabilization
    int64_t n_particles = 10000; // particle-method N
    int n_paths = 2000;          // Monte Carlo paths (picard / chaos)
    std::vector<int> Ns = {2, 4, 8};
    int record_every = 10;
    int threads = 0;             // 0 = available parallelism
    bool write_trajectories = true;
    bool quiet = false;  // suppress the one-line stdout summaries (not a config key)
    std::string out;
    double threshold = 0.99;     // reduction threshold on |z_T|

    std::string kernel_preset = "photon-exchange";  // zero | photon-exchange | custom
    std::vector<std::array<double, 6>> kernel_entries;  // (l, l', k, k', re, im), 1-based

    std::optional<BlochVector> initial_bloch;
    std::string initial_preset;  // rho_g | rho_e | mixed

    ControlConfig control;

    // picard
    int max_iter = 20;
    double tol = 5e-3;

    // lemma1
    std::vector<int> lemma1_dims = {2, 3, 4};
    int64_t lemma1_triples = 100000;

    Json resolved;  // fully-resolved copy for the manifest

    TimeGrid grid() const { return TimeGrid::uniform(T, dt); }

    InteractionKernel kernel(int d = 2) const {
        if (kernel_preset == "zero") return InteractionKernel::zero(d);
        if (kernel_preset == "photon-exchange") return InteractionKernel::photon_exchange();
        if (kernel_preset == "custom") {
            std::vector<Complex> values(static_cast<size_t>(d) * d * d * d, Complex(0, 0));
            for (const auto& e : kernel_entries) {
                const int l = static_cast<int>(e[0]), lp = static_cast<int>(e[1]);
                const int k = static_cast<int>(e[2]), kp = static_cast<int>(e[3]);
                if (l < 1 || l > d || lp < 1 || lp > d || k < 1 || k > d || kp < 1 || kp > d) {
                    throw config_error("kernel.entries", "index out of range");
                }
                const size_t off =
                    ((static_cast<size_t>(l - 1) * d + (lp - 1)) * d + (k - 1)) * d + (kp - 1);
                values[off] = Complex(e[4], e[5]);
            }
            return InteractionKernel::validated(d, std::move(values));
        }
        throw config_error("kernel.preset", "unknown preset '" + kernel_preset + "'");
    }

    BlochVector initial_bloch_state() const {
        if (initial_bloch) return *initial_bloch;
        if (initial_preset == "rho_g") return {0, 0, 1};
        if (initial_preset == "rho_e") return {0, 0, -1};
        if (initial_preset == "mixed" || initial_preset.empty()) return {0, 0, 0};
        throw config_error("initial.preset", "unknown preset '" + initial_preset + "'");
    }

    DensityMatrix initial_density() const { return bloch_compose(initial_bloch_state()); }
};

namespace detail {

inline const char* known_experiments[] = {"reduction", "stabilization", "chaos-scaling",
                                          "lemma1-sweep", "picard-vs-particles"};

inline bool experiment_known(const std::string& name) {
    for (const char* e : known_experiments) {
        if (name == e) return true;
    }
    return false;
}

} // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
    ExperimentConfig cfg;
    if (!j.contains("experiment") || !j["experiment"].is_string()) {
        throw config_error("experiment", "missing or not a string");
    }
    cfg.experiment = j["experiment"].get<std::string>();
    if (!detail::experiment_known(cfg.experiment)) {
        throw config_error("experiment", "unknown experiment '" + cfg.experiment + "'");
    }
    // seed is mandatory: no wall-clock defaults, reruns must reproduce
    if (!j.contains("seed") || !j["seed"].is_number_integer() ||
        (j["seed"].is_number_integer() && !j["seed"].is_number_unsigned() &&
         j["seed"].get<int64_t>() < 0)) {
        throw config_error("seed", "missing (a non-negative integer seed is required)");
    }
    cfg.seed = j["seed"].get<uint64_t>();

    if (j.contains("grid")) {
        const Json& g = j["grid"];
        if (g.contains("T")) cfg.T = g["T"].get<double>();
        if (g.contains("dt")) cfg.dt = g["dt"].get<double>();
    }
    if (!(cfg.dt > 0.0)) throw config_error("grid.dt", "must be positive");
    if (!(cfg.T > 0.0)) throw config_error("grid.T", "must be positive");
    try {
        TimeGrid::uniform(cfg.T, cfg.dt);
    } catch (const GridInvalid& e) {
        throw config_error("grid", e.what());
    }

    if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
    if (!(cfg.eta > 0.0) || cfg.eta > 1.0) throw config_error("eta", "must lie in (0, 1]");

    if (j.contains("n_samples")) cfg.n_samples = j["n_samples"].get<int64_t>();
    if (cfg.n_samples < 1) throw config_error("n_samples", "must be >= 1");
    if (j.contains("n_particles")) cfg.n_particles = j["n_particles"].get<int64_t>();
    if (cfg.n_particles < 1) throw config_error("n_particles", "must be >= 1");
    if (j.contains("n_paths")) cfg.n_paths = j["n_paths"].get<int>();
    if (cfg.n_paths < 1) throw config_error("n_paths", "must be >= 1");
    if (j.contains("Ns")) {
        cfg.Ns.clear();
        for (const Json& v : j["Ns"]) cfg.Ns.push_back(v.get<int>());
        if (cfg.Ns.empty()) throw config_error("Ns", "must be non-empty");
    }
    if (j.contains("record_every")) cfg.record_every = j["record_every"].get<int>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    if (j.contains("write_trajectories")) {
        cfg.write_trajectories = j["write_trajectories"].get<bool>();
    }
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    if (j.contains("threshold")) cfg.threshold = j["threshold"].get<double>();

    if (j.contains("kernel")) {
        const Json& k = j["kernel"];
        if (k.contains("preset")) cfg.kernel_preset = k["preset"].get<std::string>();
        if (k.contains("entries")) {
            cfg.kernel_preset = "custom";
            for (const Json& e : k["entries"]) {
                if (!e.is_array() || e.size() != 6) {
                    throw config_error("kernel.entries", "each entry is (l, l', k, k', re, im)");
                }
                std::array<double, 6> row;
                for (size_t i = 0; i < 6; ++i) row[i] = e[i].get<double>();
                cfg.kernel_entries.push_back(row);
            }
        }
    }

    if (j.contains("initial")) {
        const Json& init = j["initial"];
        if (init.contains("bloch")) {
            const Json& b = init["bloch"];
            if (!b.is_array() || b.size() != 3) {
                throw config_error("initial.bloch", "expected [x, y, z]");
            }
            BlochVector v{b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
            if (v.norm() > 1.0 + tol::bloch) {
                throw config_error("initial.bloch", "norm exceeds 1");
            }
            cfg.initial_bloch = v;
        } else if (init.contains("preset")) {
            cfg.initial_preset = init["preset"].get<std::string>();
            (void)cfg.initial_bloch_state();  // validate the name now
        }
    }

    if (j.contains("control")) {
        const Json& c = j["control"];
        if (c.contains("type")) cfg.control.type = c["type"].get<std::string>();
        if (c.contains("target")) cfg.control.target = c["target"].get<std::string>();
        if (c.contains("c1")) cfg.control.c1 = c["c1"].get<double>();
        if (c.contains("c2")) cfg.control.c2 = c["c2"].get<double>();
        (void)cfg.control.build();  // validate now
    }

    if (j.contains("picard")) {
        const Json& p = j["picard"];
        if (p.contains("max_iter")) cfg.max_iter = p["max_iter"].get<int>();
        if (p.contains("tol")) cfg.tol = p["tol"].get<double>();
        if (!(cfg.tol > 0.0)) throw config_error("picard.tol", "must be positive");
    }

    if (j.contains("lemma1")) {
        const Json& l = j["lemma1"];
        if (l.contains("dims")) {
            cfg.lemma1_dims.clear();
            for (const Json& v : l["dims"]) cfg.lemma1_dims.push_back(v.get<int>());
        }
        if (l.contains("n_triples")) cfg.lemma1_triples = l["n_triples"].get<int64_t>();
    }

    try {
        (void)cfg.kernel();  // validate the kernel spec now
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const Error& e) {
        throw config_error("kernel", e.what());
    }

    // resolved copy for the manifest
    Json r;
    r["experiment"] = cfg.experiment;
    r["seed"] = cfg.seed;
    r["grid"] = {{"T", cfg.T}, {"dt", cfg.dt}};
    r["eta"] = cfg.eta;
    r["n_samples"] = cfg.n_samples;
    r["n_particles"] = cfg.n_particles;
    r["n_paths"] = cfg.n_paths;
    r["Ns"] = cfg.Ns;
    r["record_every"] = cfg.record_every;
    r["threads"] = cfg.threads;
    r["write_trajectories"] = cfg.write_trajectories;
    r["threshold"] = cfg.threshold;
    r["kernel"] = {{"preset", cfg.kernel_preset}};
    if (!cfg.kernel_entries.empty()) {
        Json entries = Json::array();
        for (const auto& e : cfg.kernel_entries) entries.push_back(e);
        r["kernel"]["entries"] = entries;
    }
    const BlochVector v0 = cfg.initial_bloch_state();
    r["initial"] = {{"bloch", {v0.x, v0.y, v0.z}}};
    r["control"] = {{"type", cfg.control.type},
                    {"target", cfg.control.target},
                    {"c1", cfg.control.c1},
                    {"c2", cfg.control.c2}};
    r["picard"] = {{"max_iter", cfg.max_iter}, {"tol", cfg.tol}};
    r["lemma1"] = {{"dims", cfg.lemma1_dims}, {"n_triples", cfg.lemma1_triples}};
    cfg.resolved = std::move(r);
    return cfg;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config", "cannot read " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error("config", std::string("JSON parse failure: ") + e.what());
    }
    return parse_config(j);
}

} // namespace qmf
