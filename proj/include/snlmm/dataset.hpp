#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace snlmm {

/// Long-format two-level data: one row per observation, rows grouped into
/// clusters, each row carrying the response, fixed- and random-effect
/// covariates and the auxiliary ordering variable.
///
/// Storage is columnar. `cluster` holds 0-based cluster indices; the
/// original labels (e.g. subject ids from a CSV) live in `cluster_labels`.
struct LongDataset {
    std::vector<int> cluster;          // n, values in [0, J)
    std::vector<std::string> cluster_labels; // J labels
    Eigen::VectorXd response;          // n
    Eigen::MatrixXd fixed_covariates;  // n x p
    Eigen::MatrixXd random_covariates; // n x r
    Eigen::VectorXd auxiliary;         // n

    Eigen::Index n() const { return response.size(); }
    int n_clusters() const { return static_cast<int>(cluster_labels.size()); }

    /// Checks the type invariants (nonempty clusters, consistent sizes,
    /// finite auxiliary values). Throws std::invalid_argument on violation.
    void validate() const;
};

/// Column selection for CSV ingestion. Fixed/random covariate columns are
/// given by name; an intercept column of ones is always prepended to both
/// design matrices.
struct CsvSchema {
    std::string cluster;
    std::string response;
    std::vector<std::string> fixed;   // covariate columns beyond the intercept
    std::vector<std::string> random;  // covariate columns beyond the intercept
    std::string auxiliary;
};

/// Reads a long-format dataset from a CSV file with a header row.
/// Clusters are numbered by first appearance. Missing or non-numeric
/// values are rejected, no imputation.
LongDataset read_csv(const std::string& path, const CsvSchema& schema);

} // namespace snlmm
