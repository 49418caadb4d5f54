#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace flatlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MixtureParams {
    long n_dim = 1000;
    double alpha = 0.7;
    double delta = 1.0;
    double rho = 0.5;

    void validate() const;
    long n_patterns() const;
};

struct Dataset {
    Vector centroid;  // v*, length N
    Vector labels;    // +-1, length P
    Matrix patterns;  // P x N, one pattern per row
    double delta = 1.0;
    double rho = 0.5;
    std::uint64_t seed = 0;

    long n_dim() const { return long(centroid.size()); }
    long n_patterns() const { return long(labels.size()); }
    double alpha() const { return double(n_patterns()) / double(n_dim()); }
};

struct LinearClassifier {
    Vector weights;
    double bias = 0.0;
};

struct Overlaps {
    double m = 0.0;       // w.v*/N
    double q_norm = 0.0;  // |w|^2/N
};

class DegenerateClassifier : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

Dataset sample_dataset(const MixtureParams& params, std::uint64_t seed);

// Fresh patterns from the same mixture (same centroid), drawn on the test stream.
Dataset sample_test_set(const Dataset& like, long count, std::uint64_t seed);

int predict(const LinearClassifier& clf, const Eigen::Ref<const Vector>& pattern);

// Pre-activations w.xi/sqrt(N) + b for every pattern.
Vector fields(const LinearClassifier& clf, const Dataset& data);

long count_errors(const LinearClassifier& clf, const Dataset& data);
double mse_loss(const LinearClassifier& clf, const Dataset& data);

double gen_error_closed_form(const Overlaps& ov, double b, double delta, double rho);
double test_loss_mse(const Overlaps& ov, double b, double delta, double rho);

Overlaps measure_overlaps(const LinearClassifier& clf, const Vector& centroid);

// Binary dataset file: header {N, P as u64; delta, rho as f64; seed as u64}, then
// centroid, labels, patterns (row-major) as little-endian f64.
void write_dataset(const Dataset& data, const std::string& path);
Dataset read_dataset(const std::string& path);

// Debug CSV with columns label,margin where margin = label * field.
void write_margins_csv(const LinearClassifier& clf, const Dataset& data, const std::string& path);

}  // namespace flatlab
