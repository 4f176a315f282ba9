#include "softrl/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace softrl {

namespace {

constexpr double kLnEps = 1e-6;

using RowMajorMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

double act_apply(Act a, double z, double scale) {
  switch (a) {
    case Act::identity: return z;
    case Act::elu: return z > 0.0 ? z : std::expm1(z);
    case Act::tanh_fn: return std::tanh(z);
    case Act::scaled_sigmoid: return scale / (1.0 + std::exp(-z));
    case Act::scaled_tanh: return scale * std::tanh(z);
  }
  return z;
}

// derivative from pre/post pair (post = act_apply(pre))
double act_deriv(Act a, double pre, double post, double scale) {
  switch (a) {
    case Act::identity: return 1.0;
    case Act::elu: return pre > 0.0 ? 1.0 : post + 1.0;
    case Act::tanh_fn: return 1.0 - post * post;
    case Act::scaled_sigmoid: return post * (1.0 - post / scale);
    case Act::scaled_tanh: {
      const double t = post / scale;
      return scale * (1.0 - t * t);
    }
  }
  return 1.0;
}

bool uses_layer_norm(const MlpShape& s, int layer) {
  return s.layer_norm_first && layer == 0 && s.num_layers() > 1;
}

Act layer_act(const MlpShape& s, int layer) {
  return layer == s.num_layers() - 1 ? s.output_act : s.hidden_act;
}

}  // namespace

Act act_from_string(const std::string& s) {
  if (s == "identity") return Act::identity;
  if (s == "elu") return Act::elu;
  if (s == "tanh") return Act::tanh_fn;
  if (s == "scaled_sigmoid") return Act::scaled_sigmoid;
  if (s == "scaled_tanh") return Act::scaled_tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string act_to_string(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::elu: return "elu";
    case Act::tanh_fn: return "tanh";
    case Act::scaled_sigmoid: return "scaled_sigmoid";
    case Act::scaled_tanh: return "scaled_tanh";
  }
  return "identity";
}

int MlpShape::layer_in(int l) const {
  return l == 0 ? input_dim : hidden[static_cast<std::size_t>(l) - 1];
}

int MlpShape::layer_out(int l) const {
  return l == num_layers() - 1 ? output_dim : hidden[static_cast<std::size_t>(l)];
}

std::size_t MlpShape::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    n += static_cast<std::size_t>(layer_out(l)) * layer_in(l);
    if (bias) n += static_cast<std::size_t>(layer_out(l));
  }
  return n;
}

void MlpShape::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("MlpShape: dims must be >= 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("MlpShape: hidden dims must be >= 1");
  if (hidden_act != Act::elu && hidden_act != Act::tanh_fn)
    throw std::invalid_argument("MlpShape: hidden activation must be elu or tanh");
  if ((output_act == Act::scaled_sigmoid || output_act == Act::scaled_tanh) &&
      !(output_scale > 0.0 && std::isfinite(output_scale)))
    throw std::invalid_argument("MlpShape: scaled activation needs positive finite scale");
}

namespace {

const ParamSlice* find_slice(const ParamVector& p, char kind, int layer) {
  const std::string name = std::string(1, kind) + std::to_string(layer);
  for (const ParamSlice& s : p.layout)
    if (s.name == name) return &s;
  return nullptr;
}

}  // namespace

const double* ParamVector::w(int layer) const {
  const ParamSlice* s = find_slice(*this, 'w', layer);
  return s ? values.data() + s->offset : nullptr;
}

const double* ParamVector::b(int layer) const {
  const ParamSlice* s = find_slice(*this, 'b', layer);
  return s ? values.data() + s->offset : nullptr;
}

double* ParamVector::w(int layer) {
  const ParamSlice* s = find_slice(*this, 'w', layer);
  return s ? values.data() + s->offset : nullptr;
}

double* ParamVector::b(int layer) {
  const ParamSlice* s = find_slice(*this, 'b', layer);
  return s ? values.data() + s->offset : nullptr;
}

ParamVector make_params(const MlpShape& shape) {
  shape.validate();
  ParamVector p;
  std::size_t off = 0;
  for (int l = 0; l < shape.num_layers(); ++l) {
    const int out = shape.layer_out(l), in = shape.layer_in(l);
    p.layout.push_back({"w" + std::to_string(l), out, in, off});
    off += static_cast<std::size_t>(out) * in;
    if (shape.bias) {
      p.layout.push_back({"b" + std::to_string(l), out, 1, off});
      off += static_cast<std::size_t>(out);
    }
  }
  p.values.assign(off, 0.0);
  return p;
}

ParamVector init_params(const MlpShape& shape, Rng& rng) {
  ParamVector p = make_params(shape);
  const int per_layer = shape.bias ? 2 : 1;
  for (int l = 0; l < shape.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape.layer_in(l)));
    const ParamSlice& ws = p.layout[static_cast<std::size_t>(l) * per_layer];
    for (int i = 0; i < ws.rows * ws.cols; ++i)
      p.values[ws.offset + static_cast<std::size_t>(i)] = rng.uniform(-bound, bound);
    if (shape.bias) {
      const ParamSlice& bs = p.layout[static_cast<std::size_t>(l) * per_layer + 1];
      for (int i = 0; i < bs.rows; ++i)
        p.values[bs.offset + static_cast<std::size_t>(i)] = rng.uniform(-bound, bound);
    }
  }
  return p;
}

void forward(const ParamVector& p, const MlpShape& shape,
             std::span<const double> input, MlpWorkspace& ws,
             std::span<double> out) {
  const int L = shape.num_layers();
  if (static_cast<int>(input.size()) != shape.input_dim)
    throw std::invalid_argument("forward: input size mismatch");
  if (static_cast<int>(out.size()) != shape.output_dim)
    throw std::invalid_argument("forward: output size mismatch");
  ws.pre.resize(static_cast<std::size_t>(L));
  ws.post.resize(static_cast<std::size_t>(L));
  const int per_layer = shape.bias ? 2 : 1;

  const double* x = input.data();
  for (int l = 0; l < L; ++l) {
    const int in = shape.layer_in(l), outn = shape.layer_out(l);
    auto& z = ws.pre[static_cast<std::size_t>(l)];
    auto& a = ws.post[static_cast<std::size_t>(l)];
    z.resize(static_cast<std::size_t>(outn));
    a.resize(static_cast<std::size_t>(outn));
    const double* W = p.values.data() + p.layout[static_cast<std::size_t>(l) * per_layer].offset;
    const double* B = shape.bias
        ? p.values.data() + p.layout[static_cast<std::size_t>(l) * per_layer + 1].offset
        : nullptr;
    for (int o = 0; o < outn; ++o) {
      double s = B ? B[o] : 0.0;
      const double* wrow = W + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) s += wrow[k] * x[k];
      z[static_cast<std::size_t>(o)] = s;
    }
    if (uses_layer_norm(shape, l)) {
      double mu = 0.0;
      for (int o = 0; o < outn; ++o) mu += z[static_cast<std::size_t>(o)];
      mu /= outn;
      double var = 0.0;
      for (int o = 0; o < outn; ++o) {
        const double d = z[static_cast<std::size_t>(o)] - mu;
        var += d * d;
      }
      var /= outn;
      ws.ln_inv_std = 1.0 / std::sqrt(var + kLnEps);
      ws.ln_norm.resize(static_cast<std::size_t>(outn));
      for (int o = 0; o < outn; ++o) {
        const double nrm = (z[static_cast<std::size_t>(o)] - mu) * ws.ln_inv_std;
        ws.ln_norm[static_cast<std::size_t>(o)] = nrm;
        a[static_cast<std::size_t>(o)] = std::tanh(nrm);
      }
    } else {
      const Act act = layer_act(shape, l);
      for (int o = 0; o < outn; ++o)
        a[static_cast<std::size_t>(o)] =
            act_apply(act, z[static_cast<std::size_t>(o)], shape.output_scale);
    }
    x = a.data();
  }
  std::memcpy(out.data(), ws.post.back().data(),
              sizeof(double) * static_cast<std::size_t>(shape.output_dim));
}

std::vector<double> forward(const ParamVector& p, const MlpShape& shape,
                            std::span<const double> input) {
  MlpWorkspace ws;
  std::vector<double> out(static_cast<std::size_t>(shape.output_dim));
  forward(p, shape, input, ws, out);
  return out;
}

namespace {

// Shared reverse pass. Assumes forward() has filled ws for this input.
// If grad is nonempty, parameter gradients are written there (layout offsets).
// If grad_in is nonempty, the input gradient is written there.
void backward_item(const ParamVector& p, const MlpShape& shape,
                   std::span<const double> input, std::span<const double> cot,
                   MlpWorkspace& ws, std::span<double> grad,
                   std::span<double> grad_in, bool accumulate) {
  const int L = shape.num_layers();
  const int per_layer = shape.bias ? 2 : 1;
  if (!grad.empty() && !accumulate) std::fill(grad.begin(), grad.end(), 0.0);

  ws.dcur.assign(cot.begin(), cot.end());
  for (int l = L - 1; l >= 0; --l) {
    const int in = shape.layer_in(l), outn = shape.layer_out(l);
    auto& z = ws.pre[static_cast<std::size_t>(l)];
    auto& a = ws.post[static_cast<std::size_t>(l)];
    // dpost -> dpre
    if (uses_layer_norm(shape, l)) {
      // through tanh, then through the normalization
      double mean_dn = 0.0, mean_dn_y = 0.0;
      for (int o = 0; o < outn; ++o) {
        const double t = a[static_cast<std::size_t>(o)];
        const double dn = ws.dcur[static_cast<std::size_t>(o)] * (1.0 - t * t);
        ws.dcur[static_cast<std::size_t>(o)] = dn;
        mean_dn += dn;
        mean_dn_y += dn * ws.ln_norm[static_cast<std::size_t>(o)];
      }
      mean_dn /= outn;
      mean_dn_y /= outn;
      for (int o = 0; o < outn; ++o)
        ws.dcur[static_cast<std::size_t>(o)] =
            ws.ln_inv_std * (ws.dcur[static_cast<std::size_t>(o)] - mean_dn -
                             ws.ln_norm[static_cast<std::size_t>(o)] * mean_dn_y);
    } else {
      const Act act = layer_act(shape, l);
      if (act != Act::identity)
        for (int o = 0; o < outn; ++o)
          ws.dcur[static_cast<std::size_t>(o)] *=
              act_deriv(act, z[static_cast<std::size_t>(o)],
                        a[static_cast<std::size_t>(o)], shape.output_scale);
    }

    const double* x = l == 0 ? input.data() : ws.post[static_cast<std::size_t>(l) - 1].data();
    if (!grad.empty()) {
      double* gw = grad.data() + p.layout[static_cast<std::size_t>(l) * per_layer].offset;
      for (int o = 0; o < outn; ++o) {
        const double d = ws.dcur[static_cast<std::size_t>(o)];
        double* grow = gw + static_cast<std::size_t>(o) * in;
        for (int k = 0; k < in; ++k) grow[k] += d * x[k];
      }
      if (shape.bias) {
        double* gb = grad.data() + p.layout[static_cast<std::size_t>(l) * per_layer + 1].offset;
        for (int o = 0; o < outn; ++o) gb[o] += ws.dcur[static_cast<std::size_t>(o)];
      }
    }
    if (l > 0 || !grad_in.empty()) {
      const double* W = p.values.data() + p.layout[static_cast<std::size_t>(l) * per_layer].offset;
      ws.dnxt.assign(static_cast<std::size_t>(in), 0.0);
      for (int o = 0; o < outn; ++o) {
        const double d = ws.dcur[static_cast<std::size_t>(o)];
        const double* wrow = W + static_cast<std::size_t>(o) * in;
        for (int k = 0; k < in; ++k) ws.dnxt[static_cast<std::size_t>(k)] += d * wrow[k];
      }
      if (l == 0) {
        std::copy(ws.dnxt.begin(), ws.dnxt.end(), grad_in.begin());
      } else {
        std::swap(ws.dcur, ws.dnxt);
      }
    }
  }
}

}  // namespace

void grad_params(const ParamVector& p, const MlpShape& shape,
                 std::span<const double> input, std::span<const double> cotangent,
                 MlpWorkspace& ws, std::span<double> grad, bool accumulate) {
  if (grad.size() != p.size())
    throw std::invalid_argument("grad_params: grad size mismatch");
  std::vector<double> out(static_cast<std::size_t>(shape.output_dim));
  forward(p, shape, input, ws, out);
  backward_item(p, shape, input, cotangent, ws, grad, {}, accumulate);
}

std::vector<double> grad_params(const ParamVector& p, const MlpShape& shape,
                                std::span<const double> input,
                                std::span<const double> cotangent) {
  MlpWorkspace ws;
  std::vector<double> g(p.size(), 0.0);
  grad_params(p, shape, input, cotangent, ws, g, false);
  return g;
}

void grad_input(const ParamVector& p, const MlpShape& shape,
                std::span<const double> input, std::span<const double> cotangent,
                MlpWorkspace& ws, std::span<double> grad) {
  if (static_cast<int>(grad.size()) != shape.input_dim)
    throw std::invalid_argument("grad_input: grad size mismatch");
  std::vector<double> out(static_cast<std::size_t>(shape.output_dim));
  forward(p, shape, input, ws, out);
  backward_item(p, shape, input, cotangent, ws, {}, grad, false);
}

std::vector<double> grad_input(const ParamVector& p, const MlpShape& shape,
                               std::span<const double> input,
                               std::span<const double> cotangent) {
  MlpWorkspace ws;
  std::vector<double> g(static_cast<std::size_t>(shape.input_dim), 0.0);
  grad_input(p, shape, input, cotangent, ws, g);
  return g;
}

double param_grad_inner_product(const ParamVector& params_a,
                                const ParamVector& params_b,
                                const MlpShape& shape,
                                std::span<const double> input) {
  if (shape.output_dim != 1)
    throw std::invalid_argument("param_grad_inner_product: scalar output required");
  if (params_a.size() != params_b.size())
    throw std::invalid_argument("param_grad_inner_product: layout mismatch");
  const double one = 1.0;
  const std::span<const double> cot(&one, 1);
  const std::vector<double> ga = grad_params(params_a, shape, input, cot);
  const std::vector<double> gb = grad_params(params_b, shape, input, cot);
  double dot = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) dot += ga[i] * gb[i];
  return dot;
}

void jvp_params(const ParamVector& p, const MlpShape& shape,
                std::span<const double> input, std::span<const double> direction,
                MlpWorkspace& ws, std::span<double> out_tangent) {
  if (direction.size() != p.size())
    throw std::invalid_argument("jvp_params: direction size mismatch");
  if (static_cast<int>(out_tangent.size()) != shape.output_dim)
    throw std::invalid_argument("jvp_params: tangent size mismatch");
  const int L = shape.num_layers();
  const int per_layer = shape.bias ? 2 : 1;
  std::vector<double> out(static_cast<std::size_t>(shape.output_dim));
  forward(p, shape, input, ws, out);  // fills pre/post (and layer-norm stats)

  ws.tcur.clear();
  for (int l = 0; l < L; ++l) {
    const int in = shape.layer_in(l), outn = shape.layer_out(l);
    const double* x = l == 0 ? input.data() : ws.post[static_cast<std::size_t>(l) - 1].data();
    const double* W = p.values.data() + p.layout[static_cast<std::size_t>(l) * per_layer].offset;
    const double* dW = direction.data() + p.layout[static_cast<std::size_t>(l) * per_layer].offset;
    const double* dB = shape.bias
        ? direction.data() + p.layout[static_cast<std::size_t>(l) * per_layer + 1].offset
        : nullptr;
    ws.tnxt.assign(static_cast<std::size_t>(outn), 0.0);
    for (int o = 0; o < outn; ++o) {
      double t = dB ? dB[o] : 0.0;
      const double* dwrow = dW + static_cast<std::size_t>(o) * in;
      for (int k = 0; k < in; ++k) t += dwrow[k] * x[k];
      if (l > 0) {
        const double* wrow = W + static_cast<std::size_t>(o) * in;
        for (int k = 0; k < in; ++k) t += wrow[k] * ws.tcur[static_cast<std::size_t>(k)];
      }
      ws.tnxt[static_cast<std::size_t>(o)] = t;
    }
    // through the activation
    auto& z = ws.pre[static_cast<std::size_t>(l)];
    auto& a = ws.post[static_cast<std::size_t>(l)];
    if (uses_layer_norm(shape, l)) {
      double mean_t = 0.0, mean_ty = 0.0;
      for (int o = 0; o < outn; ++o) {
        mean_t += ws.tnxt[static_cast<std::size_t>(o)];
        mean_ty += ws.tnxt[static_cast<std::size_t>(o)] * ws.ln_norm[static_cast<std::size_t>(o)];
      }
      mean_t /= outn;
      mean_ty /= outn;
      for (int o = 0; o < outn; ++o) {
        const double tn = ws.ln_inv_std *
            (ws.tnxt[static_cast<std::size_t>(o)] - mean_t -
             ws.ln_norm[static_cast<std::size_t>(o)] * mean_ty);
        const double t = a[static_cast<std::size_t>(o)];
        ws.tnxt[static_cast<std::size_t>(o)] = (1.0 - t * t) * tn;
      }
    } else {
      const Act act = layer_act(shape, l);
      if (act != Act::identity)
        for (int o = 0; o < outn; ++o)
          ws.tnxt[static_cast<std::size_t>(o)] *=
              act_deriv(act, z[static_cast<std::size_t>(o)],
                        a[static_cast<std::size_t>(o)], shape.output_scale);
    }
    std::swap(ws.tcur, ws.tnxt);
  }
  std::copy(ws.tcur.begin(), ws.tcur.end(), out_tangent.begin());
}

void save_params(const std::string& path, const ParamVector& p) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_params: cannot open " + path);
  for (const ParamSlice& s : p.layout)
    f << s.name << ' ' << s.rows << ' ' << s.cols << '\n';
  f << "---\n";
  f.write(reinterpret_cast<const char*>(p.values.data()),
          static_cast<std::streamsize>(sizeof(double) * p.values.size()));
  if (!f) throw std::runtime_error("save_params: write failed for " + path);
}

ParamVector load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_params: cannot open " + path);
  ParamVector p;
  std::string line;
  std::size_t off = 0;
  while (std::getline(f, line)) {
    if (line == "---") break;
    std::istringstream ss(line);
    ParamSlice s;
    if (!(ss >> s.name >> s.rows >> s.cols) || s.rows < 1 || s.cols < 1)
      throw std::runtime_error("load_params: bad header line in " + path);
    s.offset = off;
    off += static_cast<std::size_t>(s.rows) * s.cols;
    p.layout.push_back(s);
  }
  p.values.resize(off);
  f.read(reinterpret_cast<char*>(p.values.data()),
         static_cast<std::streamsize>(sizeof(double) * off));
  if (f.gcount() != static_cast<std::streamsize>(sizeof(double) * off))
    throw std::runtime_error("load_params: truncated payload in " + path);
  return p;
}

// ---- batched path ----------------------------------------------------------

void forward_batch(const ParamVector& p, const MlpShape& shape,
                   const Eigen::MatrixXd& X, BatchedWorkspace& ws) {
  const int L = shape.num_layers();
  const int n = static_cast<int>(X.cols());
  const int per_layer = shape.bias ? 2 : 1;
  if (static_cast<int>(X.rows()) != shape.input_dim)
    throw std::invalid_argument("forward_batch: input rows mismatch");
  ws.n = n;
  ws.pre.resize(static_cast<std::size_t>(L));
  ws.post.resize(static_cast<std::size_t>(L));
  ws.dpre.resize(static_cast<std::size_t>(L));

  const Eigen::MatrixXd* A = &X;
  for (int l = 0; l < L; ++l) {
    const int in = shape.layer_in(l), outn = shape.layer_out(l);
    RowMajorMap W(p.values.data() + p.layout[static_cast<std::size_t>(l) * per_layer].offset,
                  outn, in);
    auto& Z = ws.pre[static_cast<std::size_t>(l)];
    auto& Post = ws.post[static_cast<std::size_t>(l)];
    Z.resize(outn, n);
    Z.noalias() = W * (*A);
    if (shape.bias) {
      Eigen::Map<const Eigen::VectorXd> B(
          p.values.data() + p.layout[static_cast<std::size_t>(l) * per_layer + 1].offset, outn);
      Z.colwise() += B;
    }
    Post.resize(outn, n);
    if (uses_layer_norm(shape, l)) {
      const Eigen::RowVectorXd mu = Z.colwise().mean();
      ws.ln_norm = Z.rowwise() - mu;
      const Eigen::RowVectorXd var = ws.ln_norm.array().square().colwise().mean();
      ws.ln_inv_std = (var.array() + kLnEps).rsqrt().matrix();
      ws.ln_norm.array().rowwise() *= ws.ln_inv_std.array();
      Post.array() = ws.ln_norm.array().tanh();
    } else {
      const Act act = layer_act(shape, l);
      switch (act) {
        case Act::identity: Post = Z; break;
        case Act::elu:
          Post.array() = (Z.array() > 0.0).select(Z.array(), Z.array().exp() - 1.0);
          break;
        case Act::tanh_fn: Post.array() = Z.array().tanh(); break;
        case Act::scaled_sigmoid:
          Post.array() = shape.output_scale / (1.0 + (-Z.array()).exp());
          break;
        case Act::scaled_tanh:
          Post.array() = shape.output_scale * Z.array().tanh();
          break;
      }
    }
    A = &Post;
  }
}

void backward_batch(const ParamVector& p, const MlpShape& shape,
                    const Eigen::MatrixXd& X, const Eigen::MatrixXd& C,
                    BatchedWorkspace& ws, std::span<double> grad,
                    Eigen::MatrixXd* grad_in, bool accumulate) {
  const int L = shape.num_layers();
  const int per_layer = shape.bias ? 2 : 1;
  if (!grad.empty() && grad.size() != p.size())
    throw std::invalid_argument("backward_batch: grad size mismatch");
  if (!grad.empty() && !accumulate) std::fill(grad.begin(), grad.end(), 0.0);

  ws.dpre[static_cast<std::size_t>(L) - 1] = C;
  for (int l = L - 1; l >= 0; --l) {
    const int in = shape.layer_in(l), outn = shape.layer_out(l);
    auto& D = ws.dpre[static_cast<std::size_t>(l)];
    auto& Z = ws.pre[static_cast<std::size_t>(l)];
    auto& Post = ws.post[static_cast<std::size_t>(l)];
    if (uses_layer_norm(shape, l)) {
      D.array() *= 1.0 - Post.array().square();  // through tanh
      const Eigen::RowVectorXd mean_dn = D.colwise().mean();
      const Eigen::RowVectorXd mean_dn_y =
          ((D.array() * ws.ln_norm.array()).colwise().mean()).matrix();
      D.array() = (D.rowwise() - mean_dn).array() -
                  ws.ln_norm.array().rowwise() * mean_dn_y.array();
      D.array().rowwise() *= ws.ln_inv_std.array();
    } else {
      switch (layer_act(shape, l)) {
        case Act::identity: break;
        case Act::elu:
          D.array() *= (Z.array() > 0.0).select(1.0, Post.array() + 1.0);
          break;
        case Act::tanh_fn:
          D.array() *= 1.0 - Post.array().square();
          break;
        case Act::scaled_sigmoid:
          D.array() *= Post.array() * (1.0 - Post.array() / shape.output_scale);
          break;
        case Act::scaled_tanh: {
          D.array() *= shape.output_scale *
              (1.0 - (Post.array() / shape.output_scale).square());
          break;
        }
      }
    }

    const Eigen::MatrixXd& A =
        l == 0 ? X : ws.post[static_cast<std::size_t>(l) - 1];
    if (!grad.empty()) {
      RowMajorMutMap GW(grad.data() + p.layout[static_cast<std::size_t>(l) * per_layer].offset,
                        outn, in);
      GW.noalias() += D * A.transpose();
      if (shape.bias) {
        Eigen::Map<Eigen::VectorXd> GB(
            grad.data() + p.layout[static_cast<std::size_t>(l) * per_layer + 1].offset, outn);
        GB.noalias() += D.rowwise().sum();
      }
    }
    if (l > 0) {
      RowMajorMap W(p.values.data() + p.layout[static_cast<std::size_t>(l) * per_layer].offset,
                    outn, in);
      auto& Dprev = ws.dpre[static_cast<std::size_t>(l) - 1];
      Dprev.resize(in, ws.n);
      Dprev.noalias() = W.transpose() * D;
    } else if (grad_in != nullptr) {
      RowMajorMap W(p.values.data() + p.layout[0].offset, outn, in);
      grad_in->resize(in, ws.n);
      grad_in->noalias() = W.transpose() * D;
    }
  }
}

}  // namespace softrl
