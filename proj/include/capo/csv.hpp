#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace capo {

/// CSV emitter with deterministic float formatting (shortest round-trip
/// via %.17g), so identical runs produce byte-identical files.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }

    void row(const std::vector<double>& values) {
        char buf[32];
        for (std::size_t i = 0; i < values.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
            out_ << (i ? "," : "") << buf;
        }
        out_ << "\n";
    }

    static std::string format(double x) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return buf;
    }

  private:
    std::ofstream out_;
};

/// Checkpoint format shared by policy parameter and action-value tables:
/// header "s,a,value", one row per (state, action).
void save_table_csv(const std::string& path, const Eigen::MatrixXd& table);
Eigen::MatrixXd load_table_csv(const std::string& path);

}  // namespace capo
