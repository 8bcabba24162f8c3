#include "perfembed/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "perfembed/util.hpp"

namespace perfembed::model {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void ModelConfig::check() const {
  if (embed_dim < 1 || gnn_layers < 1 || attention_heads < 1 || mlp_hidden < 1)
    throw ModelError("model config: sizes must be positive");
  if (embed_dim % attention_heads != 0)
    throw ModelError("model config: embed_dim must be divisible by attention_heads");
}

// --- normalizer ---------------------------------------------------------------

VectorXd Normalizer::apply(const VectorXd& v) const {
  VectorXd out = v;
  if (log1p)
    for (int i = 0; i < out.size(); ++i) out[i] = std::log1p(std::max(out[i], 0.0));
  return (out - mean).cwiseQuotient(std);
}

VectorXd Normalizer::invert(const VectorXd& v) const {
  VectorXd out = v.cwiseProduct(std) + mean;
  if (log1p)
    for (int i = 0; i < out.size(); ++i) out[i] = std::expm1(out[i]);
  return out;
}

Normalizer Normalizer::fit(const std::vector<VectorXd>& rows, bool log1p) {
  if (rows.empty()) throw ModelError("normalizer: empty split");
  const int dim = static_cast<int>(rows[0].size());
  Normalizer n;
  n.log1p = log1p;
  n.mean = VectorXd::Zero(dim);
  n.std = VectorXd::Zero(dim);
  std::vector<VectorXd> t = rows;
  if (log1p)
    for (auto& r : t)
      for (int i = 0; i < dim; ++i) r[i] = std::log1p(std::max(r[i], 0.0));
  for (const auto& r : t) n.mean += r;
  n.mean /= static_cast<double>(t.size());
  for (const auto& r : t) n.std += (r - n.mean).cwiseAbs2();
  n.std = (n.std / static_cast<double>(t.size())).cwiseSqrt();
  for (int i = 0; i < dim; ++i)
    if (n.std[i] < 1e-12) n.std[i] = 1.0;  // constant feature
  return n;
}

// --- parameter layout -----------------------------------------------------------

namespace {

constexpr double kLnEps = 1e-5;
constexpr int kEdgeFeatures = 2;  // {into-memlet, out-of-memlet}
constexpr int kProfileDim = simprof::DynamicProfile::kSize;
constexpr int kTargetDim = simprof::TargetMetrics::kSize;

struct TensorRef {
  int offset = 0, rows = 0, cols = 1;
  int size() const { return rows * cols; }
};

struct Layout {
  TensorRef w_in, b_in;
  struct Layer {
    TensorRef wq, bq, wk, bk, wv, bv, wek, wev, wo, bo, ln_g, ln_b;
  };
  std::vector<Layer> layers;
  TensorRef gate_w, gate_b, pool_w, pool_b;
  TensorRef w_dyn, b_dyn, w1, b1, w2, b2, w_head, b_head;
  int total = 0;

  static Layout make(const ModelConfig& c, int feature_width) {
    Layout l;
    int off = 0;
    auto t = [&off](int rows, int cols) {
      TensorRef r{off, rows, cols};
      off += rows * cols;
      return r;
    };
    const int d = c.embed_dim;
    l.w_in = t(d, feature_width);
    l.b_in = t(d, 1);
    for (int i = 0; i < c.gnn_layers; ++i) {
      Layer ly;
      ly.wq = t(d, d);
      ly.bq = t(d, 1);
      ly.wk = t(d, d);
      ly.bk = t(d, 1);
      ly.wv = t(d, d);
      ly.bv = t(d, 1);
      ly.wek = t(d, kEdgeFeatures);
      ly.wev = t(d, kEdgeFeatures);
      ly.wo = t(d, d);
      ly.bo = t(d, 1);
      ly.ln_g = t(d, 1);
      ly.ln_b = t(d, 1);
      l.layers.push_back(ly);
    }
    l.gate_w = t(d, 1);
    l.gate_b = t(1, 1);
    l.pool_w = t(d, d);
    l.pool_b = t(d, 1);
    l.w_dyn = t(d, kProfileDim);
    l.b_dyn = t(d, 1);
    l.w1 = t(c.mlp_hidden, 2 * d);
    l.b1 = t(c.mlp_hidden, 1);
    l.w2 = t(d, c.mlp_hidden);
    l.b2 = t(d, 1);
    l.w_head = t(kTargetDim, d);
    l.b_head = t(kTargetDim, 1);
    l.total = off;
    return l;
  }
};

Map<MatrixXd> view(VectorXd& flat, const TensorRef& r) {
  return Map<MatrixXd>(flat.data() + r.offset, r.rows, r.cols);
}
Map<const MatrixXd> view(const VectorXd& flat, const TensorRef& r) {
  return Map<const MatrixXd>(flat.data() + r.offset, r.rows, r.cols);
}
Map<VectorXd> vview(VectorXd& flat, const TensorRef& r) {
  return Map<VectorXd>(flat.data() + r.offset, r.size());
}
Map<const VectorXd> vview(const VectorXd& flat, const TensorRef& r) {
  return Map<const VectorXd>(flat.data() + r.offset, r.size());
}

// In-neighbor lists with edge types; every node also attends to itself with a
// zero edge feature (type 2).
struct GraphView {
  int n = 0;
  std::vector<std::vector<std::pair<int, int>>> in;  // (neighbor, edge type)

  static GraphView make(const encoder::EncodedGraph& g) {
    GraphView v;
    v.n = static_cast<int>(g.nodes.size());
    v.in.resize(static_cast<size_t>(v.n));
    for (const auto& [a, b] : g.edges) {
      const int type = g.nodes[static_cast<size_t>(b)].kind == encoder::NodeKind::Memlet ? 0 : 1;
      v.in[static_cast<size_t>(b)].emplace_back(a, type);
    }
    for (int i = 0; i < v.n; ++i) v.in[static_cast<size_t>(i)].emplace_back(i, 2);
    return v;
  }
};

struct LayerCache {
  MatrixXd x_in;  // N x D
  MatrixXd q, k, vv;
  std::vector<std::vector<VectorXd>> alpha;  // [node][head] -> weights over in-list
  MatrixXd msg;     // N x D
  MatrixXd z;       // residual + projected message (pre-LN)
  MatrixXd xhat;    // normalized
  VectorXd inv_std; // per row
};

struct Cache {
  MatrixXd x0;  // input features
  std::vector<LayerCache> layers;
  MatrixXd x_final;
  VectorXd gates, gate_pre;
  MatrixXd pooled_tanh;  // N x D
  VectorXd graph_emb, dyn_emb, cat, h1_pre, h1, nest_emb, pred;
  VectorXd phi;  // normalized profile
};

void forward_internal(const Model& m, const encoder::EncodedGraph& graph,
                      const simprof::DynamicProfile& profile, const GraphView& gv,
                      const Layout& L, Cache& c) {
  const int n = gv.n;
  const int d = m.config.embed_dim;
  const int heads = m.config.attention_heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const VectorXd& flat = m.params;

  c.x0.resize(n, m.feature_width);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < m.feature_width; ++f)
      c.x0(i, f) = graph.nodes[static_cast<size_t>(i)].features[static_cast<size_t>(f)];

  MatrixXd x = c.x0 * view(flat, L.w_in).transpose();
  x.rowwise() += vview(flat, L.b_in).transpose();

  c.layers.resize(L.layers.size());
  for (size_t li = 0; li < L.layers.size(); ++li) {
    const auto& ly = L.layers[li];
    LayerCache& lc = c.layers[li];
    lc.x_in = x;
    lc.q = x * view(flat, ly.wq).transpose();
    lc.q.rowwise() += vview(flat, ly.bq).transpose();
    lc.k = x * view(flat, ly.wk).transpose();
    lc.k.rowwise() += vview(flat, ly.bk).transpose();
    lc.vv = x * view(flat, ly.wv).transpose();
    lc.vv.rowwise() += vview(flat, ly.bv).transpose();
    const auto wek = view(flat, ly.wek);
    const auto wev = view(flat, ly.wev);

    lc.msg = MatrixXd::Zero(n, d);
    lc.alpha.assign(static_cast<size_t>(n), {});
    for (int i = 0; i < n; ++i) {
      const auto& nbrs = gv.in[static_cast<size_t>(i)];
      const int deg = static_cast<int>(nbrs.size());
      lc.alpha[static_cast<size_t>(i)].resize(static_cast<size_t>(heads));
      for (int h = 0; h < heads; ++h) {
        const int base = h * dh;
        VectorXd scores(deg);
        for (int jn = 0; jn < deg; ++jn) {
          const auto [j, et] = nbrs[static_cast<size_t>(jn)];
          VectorXd kt = lc.k.row(j).segment(base, dh).transpose();
          if (et < kEdgeFeatures) kt += wek.col(et).segment(base, dh);
          scores[jn] =
              scale * lc.q.row(i).segment(base, dh).dot(kt.transpose());
        }
        const double mx = scores.maxCoeff();
        VectorXd a = (scores.array() - mx).exp();
        a /= a.sum();
        lc.alpha[static_cast<size_t>(i)][static_cast<size_t>(h)] = a;
        for (int jn = 0; jn < deg; ++jn) {
          const auto [j, et] = nbrs[static_cast<size_t>(jn)];
          VectorXd vt = lc.vv.row(j).segment(base, dh).transpose();
          if (et < kEdgeFeatures) vt += wev.col(et).segment(base, dh);
          lc.msg.row(i).segment(base, dh) += a[jn] * vt.transpose();
        }
      }
    }

    lc.z = lc.x_in + lc.msg * view(flat, ly.wo).transpose();
    lc.z.rowwise() += vview(flat, ly.bo).transpose();

    // Layer normalization per node.
    lc.xhat.resize(n, d);
    lc.inv_std.resize(n);
    x.resize(n, d);
    const auto g = vview(flat, ly.ln_g);
    const auto bta = vview(flat, ly.ln_b);
    for (int i = 0; i < n; ++i) {
      const double mu = lc.z.row(i).mean();
      const double var = (lc.z.row(i).array() - mu).square().mean();
      const double inv = 1.0 / std::sqrt(var + kLnEps);
      lc.inv_std[i] = inv;
      lc.xhat.row(i) = (lc.z.row(i).array() - mu) * inv;
      x.row(i) = lc.xhat.row(i).cwiseProduct(g.transpose()) + bta.transpose();
    }
  }
  c.x_final = x;

  // Attentional pooling.
  c.gate_pre = x * vview(flat, L.gate_w) + VectorXd::Constant(n, flat[L.gate_b.offset]);
  c.gates = c.gate_pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  c.pooled_tanh = (x * view(flat, L.pool_w).transpose()).rowwise() +
                  vview(flat, L.pool_b).transpose();
  c.pooled_tanh = c.pooled_tanh.array().tanh();
  c.graph_emb = c.pooled_tanh.transpose() * c.gates;

  c.phi = m.profile_norm.apply(
      Eigen::Map<const VectorXd>(profile.values.data(), kProfileDim));
  c.dyn_emb = view(flat, L.w_dyn) * c.phi + vview(flat, L.b_dyn);

  c.cat.resize(2 * d);
  c.cat << c.graph_emb, c.dyn_emb;
  c.h1_pre = view(flat, L.w1) * c.cat + vview(flat, L.b1);
  c.h1 = c.h1_pre.array().tanh();
  c.nest_emb = view(flat, L.w2) * c.h1 + vview(flat, L.b2);
  c.pred = view(flat, L.w_head) * c.nest_emb + vview(flat, L.b_head);
}

void backward_internal(const Model& m, const GraphView& gv, const Layout& L, const Cache& c,
                       const VectorXd& dpred, VectorXd& grad) {
  const int n = gv.n;
  const int d = m.config.embed_dim;
  const int heads = m.config.attention_heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const VectorXd& flat = m.params;

  view(grad, L.w_head) += dpred * c.nest_emb.transpose();
  vview(grad, L.b_head) += dpred;
  VectorXd d_nest = view(flat, L.w_head).transpose() * dpred;

  view(grad, L.w2) += d_nest * c.h1.transpose();
  vview(grad, L.b2) += d_nest;
  VectorXd dh1 = view(flat, L.w2).transpose() * d_nest;
  VectorXd dh1_pre = dh1.cwiseProduct((1.0 - c.h1.array().square()).matrix());
  view(grad, L.w1) += dh1_pre * c.cat.transpose();
  vview(grad, L.b1) += dh1_pre;
  VectorXd dcat = view(flat, L.w1).transpose() * dh1_pre;
  VectorXd dG = dcat.head(d);
  VectorXd ddyn = dcat.tail(d);

  view(grad, L.w_dyn) += ddyn * c.phi.transpose();
  vview(grad, L.b_dyn) += ddyn;

  // Pooling backward.
  MatrixXd dx = MatrixXd::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    const double g = c.gates[i];
    const VectorXd u = c.pooled_tanh.row(i).transpose();
    const double dgi = dG.dot(u);
    const VectorXd du = g * dG;
    const VectorXd du_pre = du.cwiseProduct((1.0 - u.array().square()).matrix());
    view(grad, L.pool_w) += du_pre * c.x_final.row(i);
    vview(grad, L.pool_b) += du_pre;
    dx.row(i) += (view(flat, L.pool_w).transpose() * du_pre).transpose();
    const double dg_pre = dgi * g * (1.0 - g);
    vview(grad, L.gate_w) += dg_pre * c.x_final.row(i).transpose();
    grad[L.gate_b.offset] += dg_pre;
    dx.row(i) += dg_pre * vview(flat, L.gate_w).transpose();
  }

  // Layers in reverse.
  for (size_t li = L.layers.size(); li-- > 0;) {
    const auto& ly = L.layers[li];
    const LayerCache& lc = c.layers[li];
    const auto g = vview(flat, ly.ln_g);

    // LayerNorm backward.
    MatrixXd dz(n, d);
    for (int i = 0; i < n; ++i) {
      const VectorXd dy = dx.row(i).transpose();
      vview(grad, ly.ln_g) += dy.cwiseProduct(lc.xhat.row(i).transpose());
      vview(grad, ly.ln_b) += dy;
      const VectorXd dxhat = dy.cwiseProduct(g);
      const double mean_dxhat = dxhat.mean();
      const double mean_dxhat_xhat = dxhat.cwiseProduct(lc.xhat.row(i).transpose()).mean();
      dz.row(i) = (lc.inv_std[i] *
                   (dxhat.array() - mean_dxhat - lc.xhat.row(i).transpose().array() * mean_dxhat_xhat))
                      .transpose();
    }

    // Residual: z = x_in + msg * wo^T + bo.
    MatrixXd dx_in = dz;
    view(grad, ly.wo) += dz.transpose() * lc.msg;
    vview(grad, ly.bo) += dz.colwise().sum().transpose();
    MatrixXd dmsg = dz * view(flat, ly.wo);

    MatrixXd dq = MatrixXd::Zero(n, d), dk = MatrixXd::Zero(n, d), dv = MatrixXd::Zero(n, d);
    const auto wek = view(flat, ly.wek);
    const auto wev = view(flat, ly.wev);
    for (int i = 0; i < n; ++i) {
      const auto& nbrs = gv.in[static_cast<size_t>(i)];
      const int deg = static_cast<int>(nbrs.size());
      for (int h = 0; h < heads; ++h) {
        const int base = h * dh;
        const VectorXd& a = lc.alpha[static_cast<size_t>(i)][static_cast<size_t>(h)];
        const VectorXd dm = dmsg.row(i).segment(base, dh).transpose();
        VectorXd dalpha(deg);
        for (int jn = 0; jn < deg; ++jn) {
          const auto [j, et] = nbrs[static_cast<size_t>(jn)];
          VectorXd vt = lc.vv.row(j).segment(base, dh).transpose();
          if (et < kEdgeFeatures) vt += wev.col(et).segment(base, dh);
          dalpha[jn] = dm.dot(vt);
          // dv-tilde: alpha_j * dm
          dv.row(j).segment(base, dh) += (a[jn] * dm).transpose();
          if (et < kEdgeFeatures)
            view(grad, ly.wev).col(et).segment(base, dh) += a[jn] * dm;
        }
        const double dot = a.dot(dalpha);
        const VectorXd ds = a.cwiseProduct(dalpha.array() - dot);
        for (int jn = 0; jn < deg; ++jn) {
          const auto [j, et] = nbrs[static_cast<size_t>(jn)];
          VectorXd kt = lc.k.row(j).segment(base, dh).transpose();
          if (et < kEdgeFeatures) kt += wek.col(et).segment(base, dh);
          dq.row(i).segment(base, dh) += (scale * ds[jn] * kt).transpose();
          const VectorXd dkt = scale * ds[jn] * lc.q.row(i).segment(base, dh).transpose();
          dk.row(j).segment(base, dh) += dkt.transpose();
          if (et < kEdgeFeatures) view(grad, ly.wek).col(et).segment(base, dh) += dkt;
        }
      }
    }

    view(grad, ly.wq) += dq.transpose() * lc.x_in;
    vview(grad, ly.bq) += dq.colwise().sum().transpose();
    view(grad, ly.wk) += dk.transpose() * lc.x_in;
    vview(grad, ly.bk) += dk.colwise().sum().transpose();
    view(grad, ly.wv) += dv.transpose() * lc.x_in;
    vview(grad, ly.bv) += dv.colwise().sum().transpose();
    dx_in += dq * view(flat, ly.wq) + dk * view(flat, ly.wk) + dv * view(flat, ly.wv);
    dx = std::move(dx_in);
  }

  view(grad, L.w_in) += dx.transpose() * c.x0;
  vview(grad, L.b_in) += dx.colwise().sum().transpose();
}

void check_compat(const Model& m, const encoder::EncodedGraph& graph) {
  if (graph.layout_version != m.layout_version)
    throw ModelError("feature layout mismatch: model built for " + m.layout_version +
                     ", graph encoded with " + graph.layout_version);
  if (graph.nodes.empty()) throw ModelError("empty encoded graph");
  if (static_cast<int>(graph.nodes[0].features.size()) != m.feature_width)
    throw ModelError("feature width mismatch");
}

}  // namespace

// --- public API -----------------------------------------------------------------

Model init_model(const ModelConfig& config) {
  config.check();
  Model m;
  m.config = config;
  m.layout_version = encoder::feature_layout().version;
  m.feature_width = encoder::feature_layout().width;
  const Layout L = Layout::make(config, m.feature_width);
  m.params = VectorXd::Zero(L.total);
  Rng rng(config.seed);
  auto xavier = [&rng](Map<MatrixXd> w) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (int c = 0; c < w.cols(); ++c)
      for (int r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-a, a);
  };
  xavier(view(m.params, L.w_in));
  for (const auto& ly : L.layers) {
    xavier(view(m.params, ly.wq));
    xavier(view(m.params, ly.wk));
    xavier(view(m.params, ly.wv));
    xavier(view(m.params, ly.wek));
    xavier(view(m.params, ly.wev));
    xavier(view(m.params, ly.wo));
    vview(m.params, ly.ln_g).setOnes();
  }
  xavier(view(m.params, L.gate_w));
  xavier(view(m.params, L.pool_w));
  xavier(view(m.params, L.w_dyn));
  xavier(view(m.params, L.w1));
  xavier(view(m.params, L.w2));
  xavier(view(m.params, L.w_head));
  // Identity normalizers until training fits real statistics.
  m.profile_norm.log1p = true;
  m.profile_norm.mean = VectorXd::Zero(kProfileDim);
  m.profile_norm.std = VectorXd::Ones(kProfileDim);
  m.target_norm.log1p = false;
  m.target_norm.mean = VectorXd::Zero(kTargetDim);
  m.target_norm.std = VectorXd::Ones(kTargetDim);
  return m;
}

uint64_t Model::fingerprint() const {
  uint64_t h = fnv1a(layout_version.data(), layout_version.size());
  const int64_t meta[5] = {config.embed_dim, config.gnn_layers, config.attention_heads,
                           config.mlp_hidden, feature_width};
  h = fnv1a(meta, sizeof(meta), h);
  h = fnv1a(params.data(), static_cast<size_t>(params.size()) * sizeof(double), h);
  h = fnv1a(profile_norm.mean.data(), static_cast<size_t>(profile_norm.mean.size()) * 8, h);
  h = fnv1a(profile_norm.std.data(), static_cast<size_t>(profile_norm.std.size()) * 8, h);
  h = fnv1a(target_norm.mean.data(), static_cast<size_t>(target_norm.mean.size()) * 8, h);
  h = fnv1a(target_norm.std.data(), static_cast<size_t>(target_norm.std.size()) * 8, h);
  return h;
}

ForwardResult forward(const Model& model, const encoder::EncodedGraph& graph,
                      const simprof::DynamicProfile& profile) {
  check_compat(model, graph);
  const Layout L = Layout::make(model.config, model.feature_width);
  const GraphView gv = GraphView::make(graph);
  Cache c;
  forward_internal(model, graph, profile, gv, L, c);
  return {c.x_final, c.nest_emb, c.pred};
}

double mae_loss(const VectorXd& prediction, const VectorXd& target) {
  if (prediction.size() != target.size()) throw ModelError("loss: length mismatch");
  return (prediction - target).cwiseAbs().mean();
}

std::pair<double, VectorXd> loss_and_gradient(const Model& model,
                                              const encoder::EncodedGraph& graph,
                                              const simprof::DynamicProfile& profile,
                                              const VectorXd& target_normalized) {
  check_compat(model, graph);
  const Layout L = Layout::make(model.config, model.feature_width);
  const GraphView gv = GraphView::make(graph);
  Cache c;
  forward_internal(model, graph, profile, gv, L, c);
  const double loss = mae_loss(c.pred, target_normalized);
  VectorXd dpred(kTargetDim);
  for (int i = 0; i < kTargetDim; ++i) {
    const double diff = c.pred[i] - target_normalized[i];
    dpred[i] = (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) / kTargetDim;
  }
  VectorXd grad = VectorXd::Zero(model.params.size());
  backward_internal(model, gv, L, c, dpred, grad);
  return {loss, grad};
}

Model train(const std::vector<Sample>& train_split, const std::vector<Sample>& val_split,
            const TrainConfig& tc, const ModelConfig& mc, TrainHistory* history) {
  if (train_split.empty() || val_split.empty()) throw ModelError("train: empty split");
  if (tc.epochs < 1 || tc.learning_rate <= 0) throw ModelError("train: bad train config");
  Model m = init_model(mc);

  std::vector<VectorXd> profiles, targets;
  for (const auto& s : train_split) {
    profiles.push_back(Eigen::Map<const VectorXd>(s.profile.values.data(), kProfileDim));
    targets.push_back(Eigen::Map<const VectorXd>(s.targets.values.data(), kTargetDim));
  }
  m.profile_norm = Normalizer::fit(profiles, true);
  m.target_norm = Normalizer::fit(targets, false);

  auto norm_target = [&m](const Sample& s) {
    return m.target_norm.apply(Eigen::Map<const VectorXd>(s.targets.values.data(), kTargetDim));
  };

  VectorXd adam_m = VectorXd::Zero(m.params.size());
  VectorXd adam_v = VectorXd::Zero(m.params.size());
  int64_t step = 0;
  Rng rng(tc.seed);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const std::vector<size_t> order = rng.permutation(train_split.size());
    double epoch_loss = 0;
    size_t pos = 0;
    while (pos < order.size()) {
      const size_t batch_end = std::min(order.size(), pos + static_cast<size_t>(tc.batch_size));
      VectorXd grad = VectorXd::Zero(m.params.size());
      double batch_loss = 0;
      for (size_t b = pos; b < batch_end; ++b) {
        const Sample& s = train_split[order[b]];
        auto [l, g] = loss_and_gradient(m, s.graph, s.profile, norm_target(s));
        batch_loss += l;
        grad += g;
      }
      const double inv = 1.0 / static_cast<double>(batch_end - pos);
      grad *= inv;
      epoch_loss += batch_loss;
      ++step;
      adam_m = tc.beta1 * adam_m + (1 - tc.beta1) * grad;
      adam_v = tc.beta2 * adam_v.array().matrix() +
               (1 - tc.beta2) * grad.cwiseAbs2();
      const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
      for (int i = 0; i < m.params.size(); ++i)
        m.params[i] -= tc.learning_rate * (adam_m[i] / bc1) /
                       (std::sqrt(adam_v[i] / bc2) + tc.epsilon);
      pos = batch_end;
    }
    epoch_loss /= static_cast<double>(train_split.size());

    double val_loss = 0;
    for (const auto& s : val_split) {
      const ForwardResult f = forward(m, s.graph, s.profile);
      val_loss += mae_loss(f.prediction, m.target_norm.apply(Eigen::Map<const VectorXd>(
                                             s.targets.values.data(), kTargetDim)));
    }
    val_loss /= static_cast<double>(val_split.size());
    if (history) {
      history->train_loss.push_back(epoch_loss);
      history->val_loss.push_back(val_loss);
    }
  }
  return m;
}

VectorXd predict_targets(const Model& model, const encoder::EncodedGraph& graph,
                         const simprof::DynamicProfile& profile) {
  return model.target_norm.invert(forward(model, graph, profile).prediction);
}

std::vector<double> pearson_per_metric(const Model& model, const std::vector<Sample>& samples) {
  const size_t n = samples.size();
  MatrixXd preds(n, kTargetDim), truth(n, kTargetDim);
  for (size_t i = 0; i < n; ++i) {
    preds.row(static_cast<Eigen::Index>(i)) =
        predict_targets(model, samples[i].graph, samples[i].profile).transpose();
    truth.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const VectorXd>(samples[i].targets.values.data(), kTargetDim).transpose();
  }
  std::vector<double> out(kTargetDim, 0.0);
  for (int k = 0; k < kTargetDim; ++k) {
    const VectorXd x = preds.col(k), y = truth.col(k);
    const double mx = x.mean(), my = y.mean();
    const double sx = std::sqrt((x.array() - mx).square().sum());
    const double sy = std::sqrt((y.array() - my).square().sum());
    if (sx < 1e-12 || sy < 1e-12) {
      out[static_cast<size_t>(k)] = 0.0;
      continue;
    }
    out[static_cast<size_t>(k)] = ((x.array() - mx) * (y.array() - my)).sum() / (sx * sy);
  }
  return out;
}

// --- persistence -----------------------------------------------------------------

void save_model(const Model& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "perfembed-model v1";
  j["layout_version"] = model.layout_version;
  j["feature_width"] = model.feature_width;
  j["config"] = {{"embed_dim", model.config.embed_dim},
                 {"gnn_layers", model.config.gnn_layers},
                 {"attention_heads", model.config.attention_heads},
                 {"mlp_hidden", model.config.mlp_hidden},
                 {"seed", model.config.seed}};
  auto vec = [](const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["profile_norm"] = {{"log1p", model.profile_norm.log1p},
                       {"mean", vec(model.profile_norm.mean)},
                       {"std", vec(model.profile_norm.std)}};
  j["target_norm"] = {{"log1p", model.target_norm.log1p},
                      {"mean", vec(model.target_norm.mean)},
                      {"std", vec(model.target_norm.std)}};
  j["params"] = vec(model.params);
  j["fingerprint"] = to_hex(model.fingerprint());
  write_text_file(path, j.dump());
}

Model load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("corrupt model file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "perfembed-model v1") throw ModelError("unknown model format");
    Model m;
    m.layout_version = j.at("layout_version");
    m.feature_width = j.at("feature_width");
    const auto& c = j.at("config");
    m.config.embed_dim = c.at("embed_dim");
    m.config.gnn_layers = c.at("gnn_layers");
    m.config.attention_heads = c.at("attention_heads");
    m.config.mlp_hidden = c.at("mlp_hidden");
    m.config.seed = c.at("seed");
    auto vec = [](const nlohmann::json& a) {
      VectorXd v(a.size());
      for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i];
      return v;
    };
    m.profile_norm.log1p = j.at("profile_norm").at("log1p");
    m.profile_norm.mean = vec(j.at("profile_norm").at("mean"));
    m.profile_norm.std = vec(j.at("profile_norm").at("std"));
    m.target_norm.log1p = j.at("target_norm").at("log1p");
    m.target_norm.mean = vec(j.at("target_norm").at("mean"));
    m.target_norm.std = vec(j.at("target_norm").at("std"));
    m.params = vec(j.at("params"));
    const Layout L = Layout::make(m.config, m.feature_width);
    if (m.params.size() != L.total) throw ModelError("corrupt model file: parameter count");
    if (m.layout_version != encoder::feature_layout().version)
      throw ModelError("model uses feature layout " + m.layout_version +
                       " but this build encodes " + encoder::feature_layout().version);
    if (j.contains("fingerprint") && j.at("fingerprint") != to_hex(m.fingerprint()))
      throw ModelError("corrupt model file: fingerprint mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("corrupt model file " + path.string() + ": " + e.what());
  }
}

}  // namespace perfembed::model
