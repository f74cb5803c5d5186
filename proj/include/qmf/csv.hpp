#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qmf/density.hpp"
#include "qmf/errors.hpp"
#include "qmf/meanfield.hpp"
#include "qmf/sde_engine.hpp"

namespace qmf {

// Full-precision decimal formatting; reruns must be byte-identical.
inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw ExperimentFailed("cannot open " + path.string());
        out_.imbue(std::locale::classic());
    }

    void header(const std::vector<std::string>& names) { line(names); }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(g17(v));
        line(cells);
    }

    void line(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

// --- state column layouts ---

inline std::vector<std::string> state_columns(const BlochVector&) { return {"x", "y", "z"}; }

inline void state_values(const BlochVector& v, std::vector<double>& out) {
    out.push_back(v.x);
    out.push_back(v.y);
    out.push_back(v.z);
}

// Hermitian matrix: upper triangle, diagonals real.
inline std::vector<std::string> state_columns(const ComplexMatrix& m) {
    std::vector<std::string> cols;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i; j < m.cols(); ++j) {
            cols.push_back("rho_re_" + std::to_string(i) + "_" + std::to_string(j));
            if (j > i) cols.push_back("rho_im_" + std::to_string(i) + "_" + std::to_string(j));
        }
    }
    return cols;
}

inline void state_values(const ComplexMatrix& m, std::vector<double>& out) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i; j < m.cols(); ++j) {
            out.push_back(m(i, j).real());
            if (j > i) out.push_back(m(i, j).imag());
        }
    }
}

// time, state components, control, per-channel dW and dY, diagnostics.
template <class State>
void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryRecord<State>& rec) {
    CsvWriter w(path);
    std::vector<std::string> cols = {"time"};
    if (!rec.states.empty()) {
        for (const std::string& c : state_columns(rec.states.front())) cols.push_back(c);
    }
    cols.push_back("control");
    for (int k = 0; k < rec.n_channels; ++k) cols.push_back("dW_" + std::to_string(k));
    for (int k = 0; k < rec.n_channels; ++k) cols.push_back("dY_" + std::to_string(k));
    cols.push_back("trace_err");
    cols.push_back("min_eig");
    cols.push_back("purity");
    w.header(cols);

    std::vector<double> row;
    for (size_t i = 0; i < rec.times.size(); ++i) {
        row.clear();
        row.push_back(rec.times[i]);
        state_values(rec.states[i], row);
        row.push_back(rec.controls[i]);
        for (double v : rec.wiener[i]) row.push_back(v);
        for (double v : rec.observation[i]) row.push_back(v);
        row.push_back(rec.diagnostics[i].trace_err);
        row.push_back(rec.diagnostics[i].min_eig);
        row.push_back(rec.diagnostics[i].purity);
        w.row(row);
    }
}

template <class State>
void write_meanflow_csv(const std::filesystem::path& path, const MeanFlow<State>& flow,
                        int stride = 1) {
    CsvWriter w(path);
    std::vector<std::string> cols = {"time"};
    for (const std::string& c : state_columns(flow.values.front())) cols.push_back(c);
    w.header(cols);
    std::vector<double> row;
    const int64_t n = static_cast<int64_t>(flow.values.size());
    for (int64_t k = 0; k < n; k += stride) {
        row.clear();
        row.push_back(flow.grid.t(k));
        state_values(flow.values[static_cast<size_t>(k)], row);
        w.row(row);
        if (stride > 1 && k + stride >= n && k != n - 1) {
            row.clear();
            row.push_back(flow.grid.t(n - 1));
            state_values(flow.values[static_cast<size_t>(n - 1)], row);
            w.row(row);
        }
    }
}

} // namespace qmf
