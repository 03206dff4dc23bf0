#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace knadi {

// Per-step convergence records. The CSV schema (column names and order) is
// frozen; downstream plotting depends on it.
struct ConvergenceLog {
    struct Row {
        int k = 0;                  // Newton step just completed (1-based)
        double eta = 0.0;           // inner tolerance in effect (relative)
        int adi_steps = 0;
        int lin_solves = 0;
        double xi = 1.0;
        double rel_residual = 0.0;  // after the step
        double seconds = 0.0;
    };
    std::vector<Row> rows;

    int total_newton() const { return static_cast<int>(rows.size()); }
    int total_adi() const {
        int s = 0;
        for (const Row& r : rows) s += r.adi_steps;
        return s;
    }
    int total_lin_solves() const {
        int s = 0;
        for (const Row& r : rows) s += r.lin_solves;
        return s;
    }
    int total_line_searches() const {  // steps that shortened, i.e. xi < 1
        int s = 0;
        for (const Row& r : rows) s += r.xi < 1.0 ? 1 : 0;
        return s;
    }
    double total_seconds() const {
        double s = 0.0;
        for (const Row& r : rows) s += r.seconds;
        return s;
    }

    std::string to_csv() const {
        std::string out = "k,eta,adi_steps,lin_solves,xi,rel_residual,seconds\n";
        char buf[256];
        for (const Row& r : rows) {
            std::snprintf(buf, sizeof buf, "%d,%.10e,%d,%d,%.10e,%.10e,%.6f\n", r.k, r.eta,
                          r.adi_steps, r.lin_solves, r.xi, r.rel_residual, r.seconds);
            out += buf;
        }
        return out;
    }
};

}  // namespace knadi
