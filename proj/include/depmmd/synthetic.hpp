#pragma once

#include <string>
#include <vector>

#include "depmmd/data.hpp"
#include "depmmd/rng.hpp"

namespace depmmd {

// Finite Gaussian mixture used to generate benchmark fixtures.
struct MixtureComponent {
    Vector mean;
    Matrix covariance;
    double weight = 0.0;
};

struct MixtureSpec {
    std::vector<MixtureComponent> components;

    Index dim() const { return components.empty() ? 0 : components.front().mean.size(); }

    void validate() const {
        if (components.empty()) throw SpecError("mixture has no components");
        const Index d = dim();
        double total = 0.0;
        for (std::size_t c = 0; c < components.size(); ++c) {
            const auto& comp = components[c];
            const std::string where = "component " + std::to_string(c);
            if (comp.mean.size() != d) throw SpecError(where + ": mean dimension mismatch");
            if (comp.covariance.rows() != d || comp.covariance.cols() != d)
                throw SpecError(where + ": covariance must be " + std::to_string(d) + "x" +
                                std::to_string(d));
            if (comp.weight < 0.0) throw SpecError(where + ": negative weight");
            const double asym = (comp.covariance - comp.covariance.transpose())
                                    .cwiseAbs()
                                    .maxCoeff();
            if (asym > 1e-12 * std::max(1.0, comp.covariance.cwiseAbs().maxCoeff()))
                throw SpecError(where + ": covariance is not symmetric");
            Eigen::SelfAdjointEigenSolver<Matrix> eig(comp.covariance);
            const double min_eig = eig.eigenvalues().minCoeff();
            const double max_eig = eig.eigenvalues().maxCoeff();
            if (min_eig <= 0.0 || min_eig < 1e-12 * max_eig)
                throw SpecError(where + ": covariance is not positive definite");
            total += comp.weight;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw SpecError("component weights sum to " + format_double(total) + ", expected 1");
    }
};

struct MixtureSample {
    Matrix points;                   // n x d
    std::vector<int> component_of;   // which component produced each row
};

// n i.i.d. draws; each draw consumes its own counter stream so output is a
// pure function of (spec, seed, row index).
inline MixtureSample sample_gaussian_mixture(const MixtureSpec& spec, Index n,
                                             std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw SpecError("sample size must be >= 1");
    const Index d = spec.dim();

    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& comp : spec.components) cumulative.push_back(acc += comp.weight);
    cumulative.back() = 1.0;

    std::vector<Matrix> chol;
    for (const auto& comp : spec.components)
        chol.push_back(Eigen::LLT<Matrix>(comp.covariance).matrixL());

    MixtureSample out;
    out.points.resize(n, d);
    out.component_of.resize(static_cast<std::size_t>(n));
    SplitMix64 seeder(seed);
    const std::uint64_t stream_base = seeder.next();
    for (Index i = 0; i < n; ++i) {
        SplitMix64 rng(stream_base + static_cast<std::uint64_t>(i));
        const double pick = rng.uniform();
        std::size_t c = 0;
        while (c + 1 < cumulative.size() && pick > cumulative[c]) ++c;
        Vector z(d);
        for (Index k = 0; k < d; ++k) z[k] = rng.normal();
        out.points.row(i) = (spec.components[c].mean + chol[c] * z).transpose();
        out.component_of[static_cast<std::size_t>(i)] = static_cast<int>(c);
    }
    return out;
}

// Named synthetic presets, emitted as in-memory collections. Each dataset row
// carries a categorical "component" attribute naming its mixture component.
struct SyntheticPreset {
    std::string name;
    std::vector<std::string> dataset_labels;
    std::vector<MixtureSpec> dataset_specs;  // one per dataset
};

inline MixtureSpec equal_weight_gauss3() {
    MixtureSpec spec;
    const double means[3][2] = {{-4.0, 0.0}, {4.0, 0.0}, {0.0, 6.0}};
    for (const auto& m : means) {
        MixtureComponent comp;
        comp.mean = Eigen::Vector2d(m[0], m[1]);
        comp.covariance = Matrix::Identity(2, 2);
        comp.weight = 1.0 / 3.0;
        spec.components.push_back(comp);
    }
    return spec;
}

// Two datasets drawn from the same four separated Gaussians with mirrored
// component weights, so one dataset over-represents what the other lacks.
inline SyntheticPreset skew_pair_preset() {
    SyntheticPreset preset;
    preset.name = "skewpair";
    const double means[4][2] = {{0.0, 0.0}, {8.0, 0.0}, {0.0, 8.0}, {8.0, 8.0}};
    const double weights_a[4] = {0.4, 0.3, 0.2, 0.1};
    auto make = [&](bool mirrored) {
        MixtureSpec spec;
        for (int c = 0; c < 4; ++c) {
            MixtureComponent comp;
            comp.mean = Eigen::Vector2d(means[c][0], means[c][1]);
            comp.covariance = Matrix::Identity(2, 2);
            comp.weight = mirrored ? weights_a[3 - c] : weights_a[c];
            spec.components.push_back(comp);
        }
        return spec;
    };
    preset.dataset_labels = {"a", "b"};
    preset.dataset_specs = {make(false), make(true)};
    return preset;
}

inline SyntheticPreset gauss3_preset() {
    SyntheticPreset preset;
    preset.name = "gauss3";
    preset.dataset_labels = {"sample1", "sample2"};
    preset.dataset_specs = {equal_weight_gauss3(), equal_weight_gauss3()};
    return preset;
}

inline SyntheticPreset find_preset(const std::string& name) {
    if (name == "gauss3") return gauss3_preset();
    if (name == "skewpair") return skew_pair_preset();
    throw SpecError("unknown preset '" + name + "'; available: gauss3, skewpair");
}

struct SyntheticCollection {
    EmbeddingTable table;
    DatasetCollection collection;
    SyntheticPreset preset;
};

// Materialize a preset: one n-row dataset per spec, candidate pool = union.
// Dataset k uses counter stream seed + k so datasets are independent draws.
inline SyntheticCollection generate_preset(const SyntheticPreset& preset, Index n,
                                           std::uint64_t seed) {
    SyntheticCollection out;
    out.preset = preset;
    for (std::size_t k = 0; k < preset.dataset_labels.size(); ++k) {
        const auto& label = preset.dataset_labels[k];
        const auto sample =
            sample_gaussian_mixture(preset.dataset_specs[k], n, seed + static_cast<std::uint64_t>(k));
        std::vector<Index> rows;
        for (Index i = 0; i < n; ++i) {
            const std::string id = label + "#" + std::to_string(i);
            rows.push_back(out.table.add_row(id, sample.points.row(i).transpose()));
            const int comp = sample.component_of[static_cast<std::size_t>(i)];
            out.collection.attributes.set(id, "component", "c" + std::to_string(comp));
            out.collection.attributes.set(id, "component_id", std::to_string(comp));
        }
        out.collection.add_dataset(label, std::move(rows));
    }
    out.table.finalize();
    out.collection.candidates = out.collection.pooled_rows();
    out.collection.validate(out.table);
    return out;
}

inline SyntheticCollection generate_preset(const std::string& name, Index n, std::uint64_t seed) {
    return generate_preset(find_preset(name), n, seed);
}

}  // namespace depmmd
