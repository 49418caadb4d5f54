#include "flatlab/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "flatlab/numerics.hpp"

namespace flatlab {

void MixtureParams::validate() const {
    if (n_dim < 1) throw std::invalid_argument("MixtureParams: n_dim must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("MixtureParams: alpha must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("MixtureParams: delta must be positive");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("MixtureParams: rho must lie in (0,1)");
}

long MixtureParams::n_patterns() const { return std::lround(alpha * double(n_dim)); }

namespace {

void fill_patterns(Dataset& d, long count, Rng& rng) {
    const long n = d.n_dim();
    const double inv_sqrt_n = 1.0 / std::sqrt(double(n));
    const double noise = std::sqrt(d.delta);
    d.labels.resize(count);
    d.patterns.resize(count, n);
    for (long mu = 0; mu < count; ++mu) {
        double s = rng.bernoulli(d.rho) ? 1.0 : -1.0;
        d.labels[mu] = s;
        for (long i = 0; i < n; ++i) d.patterns(mu, i) = d.centroid[i] * s * inv_sqrt_n + noise * rng.normal();
    }
}

}  // namespace

Dataset sample_dataset(const MixtureParams& params, std::uint64_t seed) {
    params.validate();
    Dataset d;
    d.delta = params.delta;
    d.rho = params.rho;
    d.seed = seed;
    Rng centroid_rng(seed, streams::kCentroid);
    d.centroid.resize(params.n_dim);
    for (long i = 0; i < params.n_dim; ++i) d.centroid[i] = centroid_rng.normal();
    Rng rng(seed, streams::kTraining);
    fill_patterns(d, params.n_patterns(), rng);
    return d;
}

Dataset sample_test_set(const Dataset& like, long count, std::uint64_t seed) {
    Dataset d;
    d.centroid = like.centroid;
    d.delta = like.delta;
    d.rho = like.rho;
    d.seed = seed;
    Rng rng(seed, streams::kTest);
    fill_patterns(d, count, rng);
    return d;
}

int predict(const LinearClassifier& clf, const Eigen::Ref<const Vector>& pattern) {
    if (pattern.size() != clf.weights.size()) throw std::invalid_argument("predict: dimension mismatch");
    double f = clf.weights.dot(pattern) / std::sqrt(double(pattern.size())) + clf.bias;
    return f >= 0.0 ? 1 : -1;
}

Vector fields(const LinearClassifier& clf, const Dataset& data) {
    if (clf.weights.size() != data.n_dim()) throw std::invalid_argument("fields: dimension mismatch");
    Vector f = data.patterns * clf.weights;
    f *= 1.0 / std::sqrt(double(data.n_dim()));
    f.array() += clf.bias;
    return f;
}

long count_errors(const LinearClassifier& clf, const Dataset& data) {
    Vector f = fields(clf, data);
    long errors = 0;
    for (long mu = 0; mu < f.size(); ++mu) {
        int s = f[mu] >= 0.0 ? 1 : -1;
        if (s != int(data.labels[mu])) ++errors;
    }
    return errors;
}

double mse_loss(const LinearClassifier& clf, const Dataset& data) {
    Vector f = fields(clf, data);
    return 0.5 * (data.labels.cwiseProduct(f).array() - 1.0).square().sum();
}

double gen_error_closed_form(const Overlaps& ov, double b, double delta, double rho) {
    if (!(ov.q_norm > 0.0)) throw DegenerateClassifier("gen_error_closed_form: zero-norm classifier");
    double s = std::sqrt(delta * ov.q_norm);
    return rho * gauss_tail((ov.m + b) / s) + (1.0 - rho) * gauss_tail((ov.m - b) / s);
}

double test_loss_mse(const Overlaps& ov, double b, double delta, double rho) {
    double plus = ov.m - 1.0 + b;
    double minus = ov.m - 1.0 - b;
    return 0.5 * (delta * ov.q_norm + rho * plus * plus + (1.0 - rho) * minus * minus);
}

Overlaps measure_overlaps(const LinearClassifier& clf, const Vector& centroid) {
    if (clf.weights.size() != centroid.size()) throw std::invalid_argument("measure_overlaps: dimension mismatch");
    const double n = double(centroid.size());
    return {clf.weights.dot(centroid) / n, clf.weights.squaredNorm() / n};
}

namespace {

static_assert(std::endian::native == std::endian::little, "dataset files assume a little-endian host");

void put_u64(std::ofstream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ofstream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
std::uint64_t get_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
double get_f64(std::ifstream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

}  // namespace

void write_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
    put_u64(out, std::uint64_t(data.n_dim()));
    put_u64(out, std::uint64_t(data.n_patterns()));
    put_f64(out, data.delta);
    put_f64(out, data.rho);
    put_u64(out, data.seed);
    out.write(reinterpret_cast<const char*>(data.centroid.data()), std::streamsize(8 * data.centroid.size()));
    out.write(reinterpret_cast<const char*>(data.labels.data()), std::streamsize(8 * data.labels.size()));
    out.write(reinterpret_cast<const char*>(data.patterns.data()), std::streamsize(8 * data.patterns.size()));
    if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
    Dataset d;
    auto n = long(get_u64(in));
    auto p = long(get_u64(in));
    d.delta = get_f64(in);
    d.rho = get_f64(in);
    d.seed = get_u64(in);
    if (!in || n < 1 || p < 0) throw std::runtime_error("read_dataset: bad header in " + path);
    d.centroid.resize(n);
    d.labels.resize(p);
    d.patterns.resize(p, n);
    in.read(reinterpret_cast<char*>(d.centroid.data()), std::streamsize(8 * n));
    in.read(reinterpret_cast<char*>(d.labels.data()), std::streamsize(8 * p));
    in.read(reinterpret_cast<char*>(d.patterns.data()), std::streamsize(8 * n * p));
    if (!in) throw std::runtime_error("read_dataset: truncated file " + path);
    return d;
}

void write_margins_csv(const LinearClassifier& clf, const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_margins_csv: cannot open " + path);
    Vector f = fields(clf, data);
    out << "label,margin\n";
    out.precision(17);
    for (long mu = 0; mu < f.size(); ++mu) out << int(data.labels[mu]) << ',' << data.labels[mu] * f[mu] << '\n';
}

}  // namespace flatlab
