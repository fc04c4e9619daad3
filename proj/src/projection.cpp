#include "kgalign/projection.hpp"

#include <cmath>

namespace kgalign {

void ProjectionSpec::validate() const {
    if (input_dim < 1 || output_dim < 1) throw ContractError("projection dims must be >= 1");
    if (variant == ProjectionVariant::identity && input_dim != output_dim)
        throw ContractError("identity projection needs input_dim == output_dim (" + std::to_string(input_dim) +
                            " vs " + std::to_string(output_dim) + ")");
    if (variant == ProjectionVariant::complex && depth < 1) throw ContractError("complex projection needs depth >= 1");
}

int ProjectionSpec::layer_count() const {
    switch (variant) {
        case ProjectionVariant::identity: return 0;
        case ProjectionVariant::linear: return 1;
        case ProjectionVariant::complex: return depth;
    }
    return 0;
}

std::string to_string(ProjectionVariant v) {
    switch (v) {
        case ProjectionVariant::identity: return "identity";
        case ProjectionVariant::linear: return "linear";
        case ProjectionVariant::complex: return "complex";
    }
    return "?";
}

std::string to_string(Activation a) { return a == Activation::gelu ? "gelu" : "none"; }

ProjectionVariant parse_variant(const std::string& s) {
    if (s == "identity") return ProjectionVariant::identity;
    if (s == "linear") return ProjectionVariant::linear;
    if (s == "complex") return ProjectionVariant::complex;
    throw ConfigError("unknown projection variant '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "gelu") return Activation::gelu;
    throw ConfigError("unknown activation '" + s + "'");
}

// exact erf form: x * Phi(x)
double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
}

ProjectionParams init_projection(const ProjectionSpec& spec, uint64_t seed) {
    spec.validate();
    ProjectionParams p;
    Rng rng(seed);
    int in = spec.input_dim;
    for (int k = 0; k < spec.layer_count(); ++k) {
        const int out = spec.output_dim;
        const double a = std::sqrt(6.0 / (in + out));
        Mat w(out, in);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Vec::Zero(out));
        in = out;
    }
    return p;
}

void check_params(const ProjectionSpec& spec, const ProjectionParams& params) {
    const int n = spec.layer_count();
    if (static_cast<int>(params.weights.size()) != n || static_cast<int>(params.biases.size()) != n)
        throw ContractError("projection params have the wrong number of layers");
    int in = spec.input_dim;
    for (int k = 0; k < n; ++k) {
        const Mat& w = params.weights[static_cast<size_t>(k)];
        if (w.cols() != in || w.rows() != spec.output_dim || params.biases[static_cast<size_t>(k)].size() != spec.output_dim)
            throw ContractError("projection layer " + std::to_string(k) + " has the wrong shape");
        in = spec.output_dim;
    }
}

namespace {

bool layer_has_gelu(const ProjectionSpec& spec) { return spec.variant == ProjectionVariant::complex; }

}  // namespace

Vec project(const ProjectionSpec& spec, const ProjectionParams& params, const Vec& x_e) {
    spec.validate();
    if (x_e.size() != spec.input_dim) throw ContractError("projection input has the wrong length");
    check_params(spec, params);
    if (spec.variant == ProjectionVariant::identity) return x_e;
    Vec h = x_e;
    for (size_t k = 0; k < params.weights.size(); ++k) {
        h = params.weights[k] * h + params.biases[k];
        if (layer_has_gelu(spec)) h = h.unaryExpr([](double v) { return gelu(v); });
    }
    if (spec.final_activation == Activation::gelu) h = h.unaryExpr([](double v) { return gelu(v); });
    return h;
}

ProjectionGrads project_gradients(const ProjectionSpec& spec, const ProjectionParams& params, const Vec& x_e,
                                  const Vec& upstream) {
    spec.validate();
    if (x_e.size() != spec.input_dim) throw ContractError("projection input has the wrong length");
    if (upstream.size() != spec.output_dim) throw ContractError("upstream gradient has the wrong length");
    check_params(spec, params);
    ProjectionGrads g;
    if (spec.variant == ProjectionVariant::identity) {
        g.input = upstream;  // the identity map ignores final_activation
        return g;
    }
    const size_t n = params.weights.size();
    std::vector<Vec> inputs(n), pre(n);
    Vec h = x_e;
    for (size_t k = 0; k < n; ++k) {
        inputs[k] = h;
        pre[k] = params.weights[k] * h + params.biases[k];
        h = layer_has_gelu(spec) ? Vec(pre[k].unaryExpr([](double v) { return gelu(v); })) : pre[k];
    }
    Vec d = upstream;
    if (spec.final_activation == Activation::gelu) d = d.cwiseProduct(h.unaryExpr([](double v) { return gelu_grad(v); }));
    g.weights.resize(n);
    g.biases.resize(n);
    for (size_t k = n; k-- > 0;) {
        if (layer_has_gelu(spec)) d = d.cwiseProduct(pre[k].unaryExpr([](double v) { return gelu_grad(v); }));
        g.weights[k] = d * inputs[k].transpose();
        g.biases[k] = d;
        d = params.weights[k].transpose() * d;
    }
    g.input = d;
    return g;
}

}  // namespace kgalign
