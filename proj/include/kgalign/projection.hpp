#pragma once

#include <string>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgalign {

enum class ProjectionVariant { identity, linear, complex };
enum class Activation { none, gelu };

struct ProjectionSpec {
    ProjectionVariant variant = ProjectionVariant::linear;
    int input_dim = 0;
    int output_dim = 0;
    int depth = 2;  // complex only
    Activation final_activation = Activation::none;

    void validate() const;
    int layer_count() const;
};

std::string to_string(ProjectionVariant v);
std::string to_string(Activation a);
ProjectionVariant parse_variant(const std::string& s);
Activation parse_activation(const std::string& s);

// Layer k maps its input through W_k (out x in) and b_k.
struct ProjectionParams {
    std::vector<Mat> weights;
    std::vector<Vec> biases;
};

struct ProjectionGrads {
    std::vector<Mat> weights;
    std::vector<Vec> biases;
    Vec input;
};

double gelu(double x);
double gelu_grad(double x);

ProjectionParams init_projection(const ProjectionSpec& spec, uint64_t seed);
Vec project(const ProjectionSpec& spec, const ProjectionParams& params, const Vec& x_e);
// Reverse-mode gradients of upstream . project(x_e).
ProjectionGrads project_gradients(const ProjectionSpec& spec, const ProjectionParams& params, const Vec& x_e,
                                  const Vec& upstream);

void check_params(const ProjectionSpec& spec, const ProjectionParams& params);

}  // namespace kgalign
