#include "fcnlp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "fcnlp/error.hpp"
#include "fcnlp/fcn.hpp"
#include "fcnlp/graph.hpp"
#include "fcnlp/losses.hpp"
#include "fcnlp/lpn.hpp"

namespace fcnlp {

namespace {

double evaluate(const std::function<Var(Tape&)>& forward) {
  Tape tape;
  const Var out = forward(tape);
  if (out.rows() != 1 || out.cols() != 1) fail(Errc::NotScalar, "gradcheck forward must return a scalar");
  return out.value()(0, 0);
}

Matrix uniform(Index r, Index c, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

// Values bounded away from 0 so ReLU kinks and |x| style corners are not
// straddled by the finite-difference step.
Matrix away_from_zero(Index r, Index c, std::mt19937_64& rng) {
  Matrix m = uniform(r, c, 0.1, 1.0, rng);
  std::bernoulli_distribution sign(0.5);
  for (Index i = 0; i < m.size(); ++i) {
    if (sign(rng)) m.data()[i] = -m.data()[i];
  }
  return m;
}

// Scalarises an arbitrary-shape output with fixed random weights, so every
// output element's gradient is exercised.
Var weighted_sum(Tape& tape, const Var& out, const Matrix& w) { return sum(hadamard(out, tape.constant(w))); }

// A 5-node graph with one isolated node (4) and a triangle (0, 1, 2) plus
// the edge (2, 3).
CrossModalGraph five_node_graph() {
  return CrossModalGraph(5, {{0, 1, mask_of(Channel::II)},
                             {0, 2, mask_of(Channel::TT)},
                             {1, 2, mask_of(Channel::IT)},
                             {2, 3, mask_of(Channel::TI)}});
}

struct Case {
  std::string name;
  std::vector<Parameter> params;
  std::function<Var(Tape&, std::vector<Parameter>&)> forward;
};

std::vector<Case> op_cases(std::mt19937_64& rng, const GraphIndex& gi) {
  std::vector<Case> cases;
  const auto unary = [&](std::string name, Matrix x, std::function<Var(const Var&)> op, Index out_r, Index out_c) {
    Matrix w = uniform(out_r, out_c, -1.0, 1.0, rng);
    Case c{std::move(name), {Parameter("x", std::move(x))}, {}};
    c.forward = [op, w](Tape& t, std::vector<Parameter>& p) { return weighted_sum(t, op(t.param(p[0])), w); };
    cases.push_back(std::move(c));
  };
  const auto binary = [&](std::string name, Matrix a, Matrix b, std::function<Var(const Var&, const Var&)> op,
                          Index out_r, Index out_c) {
    Matrix w = uniform(out_r, out_c, -1.0, 1.0, rng);
    Case c{std::move(name), {Parameter("a", std::move(a)), Parameter("b", std::move(b))}, {}};
    c.forward = [op, w](Tape& t, std::vector<Parameter>& p) {
      return weighted_sum(t, op(t.param(p[0]), t.param(p[1])), w);
    };
    cases.push_back(std::move(c));
  };

  binary("matmul", away_from_zero(3, 4, rng), away_from_zero(4, 2, rng), matmul, 3, 2);
  binary("add", away_from_zero(3, 2, rng), away_from_zero(3, 2, rng), add, 3, 2);
  binary("sub", away_from_zero(3, 2, rng), away_from_zero(3, 2, rng), sub, 3, 2);
  binary("hadamard", away_from_zero(3, 2, rng), away_from_zero(3, 2, rng), hadamard, 3, 2);
  binary("concat_cols", away_from_zero(3, 2, rng), away_from_zero(3, 3, rng), concat_cols, 3, 5);
  binary("add_bias", away_from_zero(4, 3, rng), away_from_zero(1, 3, rng), add_bias, 4, 3);
  unary("scale", away_from_zero(3, 2, rng), [](const Var& x) { return scale(x, -1.7); }, 3, 2);
  unary("slice_cols", away_from_zero(3, 5, rng), [](const Var& x) { return slice_cols(x, 1, 3); }, 3, 3);
  unary("transpose", away_from_zero(3, 2, rng), transpose, 2, 3);
  unary("relu", away_from_zero(4, 3, rng), relu, 4, 3);
  unary("tanh", away_from_zero(4, 3, rng), tanh_op, 4, 3);
  unary("sigmoid", uniform(4, 3, -4.0, 4.0, rng), sigmoid, 4, 3);
  unary("row_softmax", uniform(4, 3, -2.0, 2.0, rng), row_softmax, 4, 3);
  const std::vector<std::uint32_t> idx = {2, 0, 2, 1, 3};
  unary("gather_rows", away_from_zero(4, 2, rng), [idx](const Var& x) { return gather_rows(x, idx); }, 5, 2);
  unary("scatter_add_rows", away_from_zero(5, 2, rng),
        [idx](const Var& x) { return scatter_add_rows(x, idx, 4); }, 4, 2);
  unary("neighbor_aggregate", away_from_zero(5, 3, rng),
        [&gi](const Var& x) { return neighbor_aggregate(x, gi.gcn); }, 5, 3);
  unary("broadcast_cols", away_from_zero(4, 1, rng), [](const Var& x) { return broadcast_cols(x, 3); }, 4, 3);
  unary("mean_rows", away_from_zero(4, 3, rng), mean_rows, 1, 3);
  unary("sum", away_from_zero(4, 3, rng), sum, 1, 1);
  unary("log_clamped", uniform(4, 3, 0.05, 1.0, rng), [](const Var& x) { return log_clamped(x, kProbClamp); }, 4,
        3);
  const std::vector<std::uint32_t> rows = {0, 2, 3}, cols = {1, 0, 1};
  unary("pick", away_from_zero(4, 2, rng), [rows, cols](const Var& x) { return pick(x, rows, cols); }, 3, 1);
  binary("mmd", away_from_zero(3, 4, rng), away_from_zero(2, 4, rng),
         [](const Var& p, const Var& q) { return mmd(p, q); }, 1, 1);
  return cases;
}

// Labels/splits of the 5-node instance: both classes on both training sides
// and one Test node.
const Label kLabels[5] = {Label::Real, Label::Fake, Label::Real, Label::Fake, Label::Fake};
const Split kSplits[5] = {Split::Seen, Split::Seen, Split::Unseen, Split::Unseen, Split::Test};

std::vector<Target> targets(bool with_unseen) {
  std::vector<Target> out;
  for (std::uint32_t i = 0; i < 5; ++i) {
    if (kSplits[i] == Split::Seen || (with_unseen && kSplits[i] == Split::Unseen)) {
      out.push_back({i, kLabels[i], kSplits[i]});
    }
  }
  return out;
}

struct ModelInstance {
  FcnModel fcn;
  LpnModel lpn;
  Matrix x;
  std::vector<Parameter*> fcn_params() { return fcn.parameters(); }
  std::vector<Parameter*> all_params() {
    std::vector<Parameter*> p = fcn.parameters();
    p.push_back(&lpn.a);
    p.push_back(&lpn.v);
    return p;
  }
};

ModelInstance make_instance(std::mt19937_64& rng, AttentionKind kind) {
  ModelInstance m;
  FcnConfig fc;
  fc.input_dim = 7;  // mixed image/text widths 3 + 4
  fc.hidden = 6;
  fc.gcn_layers = 2;
  m.fcn = make_fcn(fc, rng);
  LpnConfig lc;
  lc.feature_dim = fc.hidden;
  lc.num_layers = 3;
  lc.kind = kind;
  m.lpn = make_lpn(lc, rng);
  // Random attention weights so tanh/sigmoid are exercised off zero, and
  // nonzero head biases.
  m.lpn.a.value = uniform(m.lpn.a.value.rows(), m.lpn.a.value.cols(), -1.0, 1.0, rng);
  m.fcn.head.b1.value = uniform(1, m.fcn.head.b1.value.cols(), -0.5, 0.5, rng);
  m.fcn.head.b2.value = uniform(1, 2, -0.5, 0.5, rng);
  m.x = uniform(5, 7, -1.0, 1.0, rng);
  return m;
}

// Smallest |input| over every ReLU of the FCN forward pass. Finite
// differences across a kink are meaningless; an all-dead row feeding an
// isolated node even puts an input exactly at 0.
double relu_margin(const ModelInstance& m, const GraphIndex& gi) {
  double margin = std::numeric_limits<double>::infinity();
  Matrix h = m.x;
  for (const GcnLayer& layer : m.fcn.layers) {
    const Matrix msg = h * layer.w_nbr.value;
    Matrix pre = h * layer.self_weight().value;
    for (std::size_t i = 0; i < gi.gcn.rows; ++i) {
      for (std::size_t k = gi.gcn.offsets[i]; k < gi.gcn.offsets[i + 1]; ++k) {
        pre.row(static_cast<Index>(i)) += gi.gcn.weights[k] * msg.row(gi.gcn.cols[k]);
      }
    }
    margin = std::min(margin, pre.cwiseAbs().minCoeff());
    h = pre.cwiseMax(0.0);
  }
  const Matrix pre = (h * m.fcn.head.w1.value).rowwise() + m.fcn.head.b1.value.row(0);
  return std::min(margin, pre.cwiseAbs().minCoeff());
}

ModelInstance make_smooth_instance(std::mt19937_64& rng, AttentionKind kind, const GraphIndex& gi) {
  constexpr double kMargin = 1e-3;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    ModelInstance m = make_instance(rng, kind);
    if (relu_margin(m, gi) > kMargin) return m;
  }
  fail(Errc::BadConfig, "could not draw a gradcheck instance away from ReLU kinks");
}

}  // namespace

double max_relative_error(std::span<Parameter* const> params, const std::function<Var(Tape&)>& forward,
                          const GradcheckOptions& opts) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    const Var out = forward(tape);
    tape.backward(out);
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    const Matrix analytic = p->grad;
    for (Index k = 0; k < p->value.size(); ++k) {
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + opts.step;
      const double plus = evaluate(forward);
      x = saved - opts.step;
      const double minus = evaluate(forward);
      x = saved;
      const double numeric = (plus - minus) / (2.0 * opts.step);
      const double a = analytic.data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return worst;
}

bool GradcheckReport::ok() const {
  return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

GradcheckReport run_gradcheck(std::uint64_t first_seed, std::size_t seeds, const GradcheckOptions& opts) {
  if (seeds == 0) fail(Errc::BadConfig, "gradcheck needs at least one seed");
  const CrossModalGraph graph = five_node_graph();
  const GraphIndex gi = graph.index();
  const double lambda = 0.7, mu = 1.3;

  std::vector<std::string> order;
  std::map<std::string, double> worst;
  const auto record = [&](const std::string& name, double err) {
    if (!worst.count(name)) order.push_back(name);
    worst[name] = std::max(worst[name], err);
  };

  for (std::size_t s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(first_seed + s);
    for (Case& c : op_cases(rng, gi)) {
      std::vector<Parameter*> ptrs;
      for (Parameter& p : c.params) ptrs.push_back(&p);
      record(c.name, max_relative_error(ptrs, [&](Tape& t) { return c.forward(t, c.params); }, opts));
    }

    ModelInstance m = make_smooth_instance(rng, AttentionKind::Signed, gi);
    const std::vector<Target> seen = targets(false);
    const DomainGroups groups = domain_groups(kLabels, kSplits);

    {
      std::vector<Parameter*> ps = {&m.fcn.layers[0].w_self, &m.fcn.layers[0].w_nbr};
      const Matrix w = uniform(5, 6, -1.0, 1.0, rng);
      record("gcn_layer", max_relative_error(ps, [&](Tape& t) {
               return weighted_sum(t, gcn_layer_forward(t, m.fcn.layers[0], t.constant(m.x), gi), w);
             }, opts));
    }
    record("fcn+ce", max_relative_error(m.fcn_params(), [&](Tape& t) {
             const Var xl = contextualize(t, m.fcn, t.constant(m.x), gi);
             return ce_fcn(predict_initial(t, m.fcn, xl), seen, Reduction::Sum);
           }, opts));
    {
      std::vector<Parameter*> ps = {&m.lpn.a, &m.lpn.v};
      const Matrix xl = uniform(5, 6, 0.0, 1.0, rng);
      const Matrix y1 = row_softmax_values(uniform(5, 2, -1.0, 1.0, rng));
      const Matrix w = uniform(static_cast<Index>(gi.src.size()), 2, -1.0, 1.0, rng);
      record("compute_alpha", max_relative_error(ps, [&](Tape& t) {
               return weighted_sum(t, compute_alpha(t, m.lpn, t.constant(xl), gi).alpha, w);
             }, opts));
      record("propagate+ce", max_relative_error(ps, [&](Tape& t) {
               return ce_lpn(propagate(t, m.lpn, t.constant(y1), t.constant(xl), gi), seen, Reduction::Sum);
             }, opts));
    }
    record("mmd_loss", max_relative_error(m.fcn_params(), [&](Tape& t) {
             return mmd_loss(t, contextualize(t, m.fcn, t.constant(m.x), gi), groups);
           }, opts));
    for (const bool mean : {false, true}) {
      const Reduction r = mean ? Reduction::Mean : Reduction::Sum;
      record(mean ? "total_loss(mean)" : "total_loss", max_relative_error(m.all_params(), [&](Tape& t) {
               const Var xl = contextualize(t, m.fcn, t.constant(m.x), gi);
               const Var y_tilde = predict_initial(t, m.fcn, xl);
               const Var y_hat = propagate(t, m.lpn, y_tilde, xl, gi);
               return total_loss(ce_fcn(y_tilde, seen, r), ce_lpn(y_hat, seen, r), mmd_loss(t, xl, groups),
                                 lambda, mu);
             }, opts));
    }
    ModelInstance ma = make_smooth_instance(rng, AttentionKind::Scalar, gi);
    const std::vector<Target> both = targets(true);
    record("total_loss(lpn-alpha)", max_relative_error(ma.all_params(), [&](Tape& t) {
             const Var xl = contextualize(t, ma.fcn, t.constant(ma.x), gi);
             const Var y_tilde = predict_initial(t, ma.fcn, xl);
             const Var y_hat = propagate(t, ma.lpn, y_tilde, xl, gi);
             return total_loss(ce_fcn(y_tilde, both, Reduction::Sum), ce_lpn(y_hat, both, Reduction::Sum),
                               mmd_loss(t, xl, groups), lambda, mu);
           }, opts));
  }

  GradcheckReport report;
  report.tolerance = opts.tolerance;
  report.seeds = seeds;
  for (const std::string& name : order) {
    report.entries.push_back({name, worst[name], worst[name] <= opts.tolerance});
  }
  return report;
}

std::string format_report(const GradcheckReport& report) {
  std::ostringstream os;
  os << "op,max_rel_error,status\n" << std::scientific << std::setprecision(3);
  for (const GradcheckEntry& e : report.entries) {
    os << e.name << ',' << e.max_rel_error << ',' << (e.passed ? "ok" : "FAIL") << '\n';
  }
  return os.str();
}

}  // namespace fcnlp
