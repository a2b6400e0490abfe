#include <capo/csv.hpp>

#include <sstream>

namespace capo {

void save_table_csv(const std::string& path, const Eigen::MatrixXd& table) {
    CsvWriter csv(path, {"s", "a", "value"});
    for (Eigen::Index s = 0; s < table.rows(); ++s)
        for (Eigen::Index a = 0; a < table.cols(); ++a)
            csv.row({static_cast<double>(s), static_cast<double>(a), table(s, a)});
}

Eigen::MatrixXd load_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "s,a,value")
        throw std::runtime_error("'" + path + "': expected header s,a,value");

    std::vector<std::tuple<int, int, double>> entries;
    int max_s = -1, max_a = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string s_str, a_str, v_str;
        if (!std::getline(ss, s_str, ',') || !std::getline(ss, a_str, ',') ||
            !std::getline(ss, v_str))
            throw std::runtime_error("'" + path + "': malformed row '" + line + "'");
        const int s = std::stoi(s_str);
        const int a = std::stoi(a_str);
        entries.emplace_back(s, a, std::stod(v_str));
        max_s = std::max(max_s, s);
        max_a = std::max(max_a, a);
    }
    if (entries.empty()) throw std::runtime_error("'" + path + "': no table entries");

    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(max_s + 1, max_a + 1);
    for (const auto& [s, a, v] : entries) table(s, a) = v;
    return table;
}

}  // namespace capo
