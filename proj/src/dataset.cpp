#include "snlmm/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace snlmm {

void LongDataset::validate() const {
    const Eigen::Index nn = n();
    if (nn == 0) throw std::invalid_argument("dataset is empty");
    if (static_cast<Eigen::Index>(cluster.size()) != nn ||
        fixed_covariates.rows() != nn || random_covariates.rows() != nn ||
        auxiliary.size() != nn) {
        throw std::invalid_argument("dataset column lengths disagree");
    }
    const int J = n_clusters();
    std::vector<int> counts(J, 0);
    for (int c : cluster) {
        if (c < 0 || c >= J) throw std::invalid_argument("cluster index out of range");
        ++counts[c];
    }
    for (int j = 0; j < J; ++j) {
        if (counts[j] == 0)
            throw std::invalid_argument("cluster '" + cluster_labels[j] + "' has no rows");
    }
    for (Eigen::Index i = 0; i < nn; ++i) {
        if (!std::isfinite(auxiliary(i)))
            throw std::invalid_argument("non-finite auxiliary value at row " + std::to_string(i));
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim whitespace and CR
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_number(const std::string& s, const std::string& col, size_t lineno) {
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan")
        throw std::invalid_argument("missing value in column '" + col + "' at line " +
                                    std::to_string(lineno));
    size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || !std::isfinite(v))
        throw std::invalid_argument("non-numeric value '" + s + "' in column '" + col +
                                    "' at line " + std::to_string(lineno));
    return v;
}

} // namespace

LongDataset read_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("'" + path + "' is empty");
    const auto header = split_csv_line(line);

    std::unordered_map<std::string, int> col_of;
    for (size_t i = 0; i < header.size(); ++i) col_of[header[i]] = static_cast<int>(i);

    auto need = [&](const std::string& name) {
        auto it = col_of.find(name);
        if (it == col_of.end())
            throw std::invalid_argument("column '" + name + "' not found in '" + path + "'");
        return it->second;
    };

    const int c_cluster = need(schema.cluster);
    const int c_response = need(schema.response);
    const int c_aux = need(schema.auxiliary);
    std::vector<int> c_fixed, c_random;
    for (const auto& name : schema.fixed) c_fixed.push_back(need(name));
    for (const auto& name : schema.random) c_random.push_back(need(name));

    const int p = 1 + static_cast<int>(c_fixed.size());
    const int r = 1 + static_cast<int>(c_random.size());

    std::vector<std::string> labels;
    std::unordered_map<std::string, int> label_index;
    std::vector<int> cl;
    std::vector<double> y, aux;
    std::vector<double> Xbuf, Zbuf; // row-major

    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw std::invalid_argument("line " + std::to_string(lineno) + " has " +
                                        std::to_string(f.size()) + " fields, expected " +
                                        std::to_string(header.size()));
        const std::string& label = f[c_cluster];
        if (label.empty())
            throw std::invalid_argument("missing cluster id at line " + std::to_string(lineno));
        auto [it, inserted] = label_index.try_emplace(label, static_cast<int>(labels.size()));
        if (inserted) labels.push_back(label);
        cl.push_back(it->second);

        y.push_back(parse_number(f[c_response], schema.response, lineno));
        aux.push_back(parse_number(f[c_aux], schema.auxiliary, lineno));
        Xbuf.push_back(1.0);
        for (size_t k = 0; k < c_fixed.size(); ++k)
            Xbuf.push_back(parse_number(f[c_fixed[k]], schema.fixed[k], lineno));
        Zbuf.push_back(1.0);
        for (size_t k = 0; k < c_random.size(); ++k)
            Zbuf.push_back(parse_number(f[c_random[k]], schema.random[k], lineno));
    }

    const Eigen::Index n = static_cast<Eigen::Index>(y.size());
    if (n == 0) throw std::invalid_argument("'" + path + "' has a header but no data rows");

    LongDataset d;
    d.cluster = std::move(cl);
    d.cluster_labels = std::move(labels);
    d.response = Eigen::Map<Eigen::VectorXd>(y.data(), n);
    d.auxiliary = Eigen::Map<Eigen::VectorXd>(aux.data(), n);
    d.fixed_covariates =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            Xbuf.data(), n, p);
    d.random_covariates =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            Zbuf.data(), n, r);
    d.validate();
    return d;
}

} // namespace snlmm
