#include "rsl/processes.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "rsl/errors.hpp"
#include "rsl/rng.hpp"

namespace rsl {

LayerFunction LayerFunction::zero(int d) {
    return constant(Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d));
}

LayerFunction LayerFunction::constant(Eigen::MatrixXd a, Eigen::VectorXd b) {
    if (a.rows() != a.cols() || a.rows() != b.size()) {
        throw ValidationError("LayerFunction::constant: inconsistent dimensions");
    }
    LayerFunction f;
    f.d = static_cast<int>(a.rows());
    f.a_of = [m = std::move(a)](double) { return m; };
    f.b_of = [v = std::move(b)](double) { return v; };
    f.holder_kappa = 2.0;
    f.holder_const = 0.0;
    return f;
}

ItoSpec ItoSpec::zero(int d) { return brownian(d, 0.0, 0.0); }

ItoSpec ItoSpec::brownian(int d, double qa_scale, double qb_scale) {
    ItoSpec s;
    s.d = d;
    s.ua_of = [d](double) { return Eigen::MatrixXd::Zero(d, d); };
    s.ub_of = [d](double) { return Eigen::VectorXd::Zero(d); };
    s.qa_of = [d, qa_scale](double) { return isotropic_tensor4(d, qa_scale); };
    s.qb_of = [d, qb_scale](double) {
        return Eigen::MatrixXd(qb_scale * Eigen::MatrixXd::Identity(d, d));
    };
    s.bound_c1 = qa_scale * qa_scale * d + qb_scale * qb_scale * std::sqrt(static_cast<double>(d));
    s.holder_kappa = 2.0;
    s.holder_const = 0.0;
    return s;
}

std::pair<Tensor4, Eigen::MatrixXd> covariance_tensors(const ItoSpec& spec, double t) {
    const Tensor4 qa = spec.qa_of(t);
    const Eigen::MatrixXd qb = spec.qb_of(t);
    Tensor4 sigma_a = Tensor4::from_flat(spec.d, qa.flat() * qa.flat().transpose());
    Eigen::MatrixXd sigma_b = qb * qb.transpose();
    return {std::move(sigma_a), std::move(sigma_b)};
}

void validate_ito_spec(const ItoSpec& spec, int grid_points) {
    for (int g = 0; g < grid_points; ++g) {
        const double t = (grid_points == 1) ? 0.0 : static_cast<double>(g) / (grid_points - 1);
        const auto [sigma_a, sigma_b] = covariance_tensors(spec, t);
        if (!sigma_a.flat().allFinite() || !sigma_b.allFinite() ||
            !spec.ua_of(t).allFinite() || !spec.ub_of(t).allFinite()) {
            throw ValidationError("ItoSpec: non-finite coefficient at t=" + std::to_string(t));
        }
        const double total = spec.ua_of(t).norm() + spec.ub_of(t).norm() + sigma_a.norm() +
                             sigma_b.norm();
        if (spec.bound_c1 > 0.0 && total > spec.bound_c1 * (1.0 + 1e-9)) {
            throw ValidationError("ItoSpec: declared bound C1 violated at t=" + std::to_string(t));
        }
        if (!sigma_a.flat().isApprox(sigma_a.flat().transpose(), 1e-12)) {
            throw ValidationError("ItoSpec: Sigma^A not symmetric under index-pair swap");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(sigma_a.flat());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_b(sigma_b);
        const double tol = 1e-12 * (1.0 + sigma_a.norm() + sigma_b.norm());
        if (es_a.eigenvalues().minCoeff() < -tol || es_b.eigenvalues().minCoeff() < -tol) {
            throw ValidationError("ItoSpec: covariance not positive semidefinite at t=" +
                                  std::to_string(t));
        }
    }
}

int ItoPath::dim() const { return storage_ ? storage_->d : 0; }

std::size_t ItoPath::fine_steps() const { return storage_ ? storage_->wa.size() - 1 : 0; }

std::uint64_t ItoPath::seed() const { return storage_ ? storage_->seed : 0; }

const Eigen::MatrixXd& ItoPath::wa_fine(std::size_t i) const { return storage_->wa[i]; }

const Eigen::VectorXd& ItoPath::wb_fine(std::size_t i) const { return storage_->wb[i]; }

const Eigen::MatrixXd& ItoPath::wa(std::size_t k) const {
    return storage_->wa[k * (fine_steps() / coarse_steps_)];
}

const Eigen::VectorXd& ItoPath::wb(std::size_t k) const {
    return storage_->wb[k * (fine_steps() / coarse_steps_)];
}

ItoPath ItoPath::with_coarse(std::size_t new_coarse_steps) const {
    if (new_coarse_steps == 0 || fine_steps() % new_coarse_steps != 0) {
        throw GridMismatchError("ItoPath::with_coarse: " + std::to_string(new_coarse_steps) +
                                " does not divide the fine grid of " +
                                std::to_string(fine_steps()) + " steps");
    }
    ItoPath view;
    view.storage_ = storage_;
    view.coarse_steps_ = new_coarse_steps;
    return view;
}

ItoPath ItoPath::zero(int d, std::size_t coarse_steps, std::size_t substeps) {
    auto st = std::make_shared<Storage>();
    st->d = d;
    st->seed = 0;
    const std::size_t n = coarse_steps * substeps;
    st->wa.assign(n + 1, Eigen::MatrixXd::Zero(d, d));
    st->wb.assign(n + 1, Eigen::VectorXd::Zero(d));
    ItoPath p;
    p.storage_ = std::move(st);
    p.coarse_steps_ = coarse_steps;
    return p;
}

ItoPath sample_ito_path(const ItoSpec& spec, std::size_t coarse_steps, std::size_t substeps,
                        std::uint64_t seed, std::uint64_t path_index) {
    if (coarse_steps < 1 || substeps < 1) {
        throw ValidationError("sample_ito_path: depth and substeps must be >= 1");
    }
    const int d = spec.d;
    const std::size_t n = coarse_steps * substeps;
    const double h = 1.0 / static_cast<double>(n);
    const double sqrt_h = std::sqrt(h);

    auto st = std::make_shared<ItoPath::Storage>();
    st->d = d;
    st->seed = seed;
    st->wa.reserve(n + 1);
    st->wb.reserve(n + 1);
    st->wa.push_back(Eigen::MatrixXd::Zero(d, d));
    st->wb.push_back(Eigen::VectorXd::Zero(d));

    const std::uint64_t seed_a = derive_seed(seed, "wA");
    const std::uint64_t seed_b = derive_seed(seed, "wb");

    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * h;
        const Tensor4 qa = spec.qa_of(t);
        const Eigen::MatrixXd qb = spec.qb_of(t);
        if (!qa.flat().allFinite() || !qb.allFinite()) {
            throw ValidationError("sample_ito_path: non-finite diffusion at t=" +
                                  std::to_string(t));
        }

        RandomStream stream_a(seed_a, path_index, i);
        RandomStream stream_b(seed_b, path_index, i);
        const Eigen::VectorXd db = sqrt_h * stream_a.gaussian_vector(d * d);
        const Eigen::VectorXd noise_a = qa.flat() * db;
        const Eigen::VectorXd noise_b = qb * (sqrt_h * stream_b.gaussian_vector(d));

        Eigen::MatrixXd wa_next =
            st->wa.back() + spec.ua_of(t) * h + unvec_rowmajor(noise_a, d, d);
        Eigen::VectorXd wb_next = st->wb.back() + spec.ub_of(t) * h + noise_b;
        st->wa.push_back(std::move(wa_next));
        st->wb.push_back(std::move(wb_next));
    }

    ItoPath p;
    p.storage_ = std::move(st);
    p.coarse_steps_ = coarse_steps;
    return p;
}

double WeightTensor::step_size(std::size_t k) const {
    if (delta) return (*delta)[k];
    return std::pow(static_cast<double>(depth()), -alpha);
}

WeightTensor regime1_weights(const LayerFunction& f, double beta, std::size_t depth, double alpha) {
    if (depth < 1) throw ValidationError("regime1_weights: depth must be >= 1");
    if (beta < 0.0 || beta > 1.0) throw ValidationError("regime1_weights: beta must be in [0,1]");
    const double scale = std::pow(static_cast<double>(depth), -beta);
    WeightTensor w;
    w.d = f.d;
    w.alpha = alpha;
    w.a.reserve(depth);
    w.b.reserve(depth);
    for (std::size_t k = 0; k < depth; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(depth);
        w.a.push_back(scale * f.a_of(t));
        w.b.push_back(scale * f.b_of(t));
    }
    return w;
}

WeightTensor regime2_weights(const LayerFunction& f, double beta, std::size_t depth,
                             const ItoPath& path, double alpha) {
    // beta = 1 (and above) is needed for the diffusive-limit setup even
    // though the decomposition hypothesis is stated on [0,1).
    if (beta < 0.0) throw ValidationError("regime2_weights: beta must be >= 0");
    if (path.coarse_steps() != depth) {
        throw GridMismatchError("regime2_weights: path coarse grid has " +
                                std::to_string(path.coarse_steps()) + " steps, expected " +
                                std::to_string(depth));
    }
    if (path.dim() != f.d) throw ValidationError("regime2_weights: dimension mismatch");
    WeightTensor w = regime1_weights(f, beta, depth, alpha);
    for (std::size_t k = 0; k < depth; ++k) {
        w.a[k] += path.wa(k + 1) - path.wa(k);
        w.b[k] += path.wb(k + 1) - path.wb(k);
    }
    return w;
}

WeightTensor gaussian_init_weights(std::size_t depth, int d, std::uint64_t seed) {
    if (depth < 1 || d < 1) throw ValidationError("gaussian_init_weights: depth, d must be >= 1");
    const double sd_a = 1.0 / std::sqrt(static_cast<double>(depth) * d * d);
    const double sd_b = 1.0 / std::sqrt(static_cast<double>(depth) * d);
    const std::uint64_t seed_a = derive_seed(seed, "init-a");
    const std::uint64_t seed_b = derive_seed(seed, "init-b");
    WeightTensor w;
    w.d = d;
    w.alpha = 0.0;
    w.a.reserve(depth);
    w.b.reserve(depth);
    for (std::size_t k = 0; k < depth; ++k) {
        RandomStream sa(seed_a, 0, k);
        RandomStream sb(seed_b, 0, k);
        w.a.push_back(sd_a * sa.gaussian_matrix(d, d));
        w.b.push_back(sd_b * sb.gaussian_vector(d));
    }
    return w;
}

namespace {

void write_doubles(const std::filesystem::path& file, const std::vector<double>& values) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + file.string());
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw ValidationError("short write to " + file.string());
}

std::vector<double> read_doubles(const std::filesystem::path& file, std::size_t expected) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + file.string());
    std::vector<double> values(expected);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(expected * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != expected * sizeof(double)) {
        throw ValidationError("file " + file.string() + " shorter than manifest promises");
    }
    return values;
}

}  // namespace

void save_weights(const WeightTensor& w, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::size_t depth = w.depth();
    const int d = w.d;

    nlohmann::json manifest;
    manifest["schema"] = "wt-v1";
    manifest["L"] = depth;
    manifest["d"] = d;
    manifest["alpha"] = w.alpha;
    manifest["has_delta"] = w.delta.has_value();
    manifest["dtype"] = "f64";
    manifest["layout"] = "layer-major, row-major within layer";
    manifest["endianness"] = "little";
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw ValidationError("cannot write " + (dir / "manifest.json").string());
    mf << manifest.dump(2) << "\n";

    std::vector<double> flat_a;
    flat_a.reserve(depth * d * d);
    for (const auto& m : w.a)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) flat_a.push_back(m(i, j));
    write_doubles(dir / "a.bin", flat_a);

    std::vector<double> flat_b;
    flat_b.reserve(depth * d);
    for (const auto& v : w.b)
        for (int i = 0; i < d; ++i) flat_b.push_back(v[i]);
    write_doubles(dir / "b.bin", flat_b);

    if (w.delta) write_doubles(dir / "delta.bin", *w.delta);
}

WeightTensor load_weights(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw ValidationError("missing manifest: " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed manifest in " + dir.string() + ": " + e.what());
    }
    if (manifest.value("schema", "") != "wt-v1") {
        throw ValidationError("unsupported weight schema in " + dir.string());
    }
    const auto depth = manifest.at("L").get<std::size_t>();
    const auto d = manifest.at("d").get<int>();
    if (depth < 1 || d < 1) throw ValidationError("manifest with empty tensor in " + dir.string());

    WeightTensor w;
    w.d = d;
    w.alpha = manifest.value("alpha", 0.0);

    const auto flat_a = read_doubles(dir / "a.bin", depth * d * d);
    const auto flat_b = read_doubles(dir / "b.bin", depth * d);
    w.a.reserve(depth);
    w.b.reserve(depth);
    for (std::size_t k = 0; k < depth; ++k) {
        Eigen::MatrixXd m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = flat_a[(k * d + i) * d + j];
        w.a.push_back(std::move(m));
        Eigen::VectorXd v(d);
        for (int i = 0; i < d; ++i) v[i] = flat_b[k * d + i];
        w.b.push_back(std::move(v));
    }
    if (manifest.value("has_delta", false)) {
        w.delta = read_doubles(dir / "delta.bin", depth);
    }
    for (const auto& m : w.a)
        if (!m.allFinite()) throw ValidationError("non-finite weights in " + dir.string());
    return w;
}

}  // namespace rsl
