#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "softrl/rng.hpp"

namespace softrl {

enum class Act { identity, elu, tanh_fn, scaled_sigmoid, scaled_tanh };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

// Fully-connected net: input -> hidden... -> output. Hidden layers use
// hidden_act; if layer_norm_first is set, the first hidden layer uses
// layer norm followed by tanh instead. Output activation may carry a scale
// (upsilon) for the scaled sigmoid/tanh variants.
struct MlpShape {
  int input_dim = 1;
  std::vector<int> hidden;
  int output_dim = 1;
  Act hidden_act = Act::elu;
  Act output_act = Act::identity;
  double output_scale = 1.0;
  bool layer_norm_first = false;
  bool bias = true;

  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  int layer_in(int l) const;
  int layer_out(int l) const;
  std::size_t param_count() const;
  void validate() const;  // throws std::invalid_argument
  bool operator==(const MlpShape&) const = default;
};

struct ParamSlice {
  std::string name;  // "w0", "b0", "w1", ...
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
};

// Flat parameter vector plus the slice layout mapping into it. Weight
// matrices are row-major (rows = layer output dim, cols = layer input dim).
struct ParamVector {
  std::vector<double> values;
  std::vector<ParamSlice> layout;

  std::size_t size() const { return values.size(); }
  const double* w(int layer) const;
  const double* b(int layer) const;  // nullptr when shape.bias == false
  double* w(int layer);
  double* b(int layer);
};

ParamVector make_params(const MlpShape& shape);            // zeros
ParamVector init_params(const MlpShape& shape, Rng& rng);  // U(+-1/sqrt(fan_in))

// Scratch buffers for one per-item evaluation; reusable across calls.
struct MlpWorkspace {
  std::vector<std::vector<double>> pre;   // pre-activation per layer
  std::vector<std::vector<double>> post;  // post-activation per layer
  std::vector<double> ln_norm;            // normalized first-layer pre (layer norm)
  double ln_inv_std = 0.0;
  std::vector<double> dcur, dnxt;         // backward scratch
  std::vector<double> tcur, tnxt;         // forward-mode scratch
};

void forward(const ParamVector& p, const MlpShape& shape,
             std::span<const double> input, MlpWorkspace& ws,
             std::span<double> out);
std::vector<double> forward(const ParamVector& p, const MlpShape& shape,
                            std::span<const double> input);

// (d out / d params)^T * cotangent, written (or added) into grad.
void grad_params(const ParamVector& p, const MlpShape& shape,
                 std::span<const double> input, std::span<const double> cotangent,
                 MlpWorkspace& ws, std::span<double> grad, bool accumulate = false);
std::vector<double> grad_params(const ParamVector& p, const MlpShape& shape,
                                std::span<const double> input,
                                std::span<const double> cotangent);

// (d out / d input)^T * cotangent
void grad_input(const ParamVector& p, const MlpShape& shape,
                std::span<const double> input, std::span<const double> cotangent,
                MlpWorkspace& ws, std::span<double> grad);
std::vector<double> grad_input(const ParamVector& p, const MlpShape& shape,
                               std::span<const double> input,
                               std::span<const double> cotangent);

// <grad_params at params_a, grad_params at params_b> for scalar-output shapes.
double param_grad_inner_product(const ParamVector& params_a,
                                const ParamVector& params_b,
                                const MlpShape& shape,
                                std::span<const double> input);

// Forward-mode: (d out / d params) * direction, with direction of size |params|.
void jvp_params(const ParamVector& p, const MlpShape& shape,
                std::span<const double> input, std::span<const double> direction,
                MlpWorkspace& ws, std::span<double> out_tangent);

// Checkpoint: text header (one "name rows cols" line per slice, then "---"),
// followed by the raw little-endian float64 values.
void save_params(const std::string& path, const ParamVector& p);
ParamVector load_params(const std::string& path);

// ---- batched path (columns are items) -------------------------------------

struct BatchedWorkspace {
  std::vector<Eigen::MatrixXd> pre;    // pre[l]: out_l x n
  std::vector<Eigen::MatrixXd> post;   // post[l]: out_l x n
  std::vector<Eigen::MatrixXd> dpre;   // backward scratch
  Eigen::MatrixXd ln_norm;             // first-layer normalized pre
  Eigen::RowVectorXd ln_inv_std;       // per item
  int n = 0;

  const Eigen::MatrixXd& output() const { return post.back(); }
};

// X: input_dim x n. Fills ws; ws.output() is output_dim x n.
void forward_batch(const ParamVector& p, const MlpShape& shape,
                   const Eigen::MatrixXd& X, BatchedWorkspace& ws);

// After forward_batch on the same ws/X: given per-item output cotangents
// C (output_dim x n), accumulates sum_i (d out_i / d params)^T C_i into grad
// (overwritten unless accumulate) and, when grad_in is non-null, writes the
// per-item input gradients (input_dim x n).
void backward_batch(const ParamVector& p, const MlpShape& shape,
                    const Eigen::MatrixXd& X, const Eigen::MatrixXd& C,
                    BatchedWorkspace& ws, std::span<double> grad,
                    Eigen::MatrixXd* grad_in = nullptr, bool accumulate = false);

}  // namespace softrl
