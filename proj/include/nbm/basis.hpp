// Frozen multilayer residual-network scalar basis with analytic first- and
// second-order spatial derivatives. A 64-bit seed fully determines every
// sampled parameter; evaluation is pure, so identical inputs give
// bit-identical outputs.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbm/common.hpp"
#include "nbm/io.hpp"
#include "nbm/rng.hpp"

namespace nbm {

enum class Activation { kTanh };

enum class EvalOrder { kValues, kGrad, kHess };

struct HyperplaneFilterCriteria {
  // Thresholds live on the normalized [-1,1]^d reference domain.
  double min_chord = 0.1 * 2.0 * std::sqrt(2.0);
  double min_angle_sep = 1.0 * M_PI / 180.0;  // radians
  double min_offset_sep = 0.02;
};

struct BasisConfig {
  int input_dim = 2;
  std::vector<int> layer_widths;
  Activation activation = Activation::kTanh;
  double bias_radius = 1.5;
  std::vector<double> residual_strengths;         // beta per layer; empty -> all 1
  std::vector<Vector> shape_factors;              // alpha per layer; empty -> all 1
  std::vector<int> concat_layers;                 // empty -> {L}
  bool include_constant = true;
  std::uint64_t seed = 0;
  Box domain_box = Box::square(-1.0, 1.0, 2);
  bool filter_first_layer = false;
  HyperplaneFilterCriteria filter;

  int num_layers() const { return static_cast<int>(layer_widths.size()); }

  double beta(int layer) const {  // layer is 1-based
    if (residual_strengths.empty()) return 1.0;
    return residual_strengths.at(static_cast<size_t>(layer - 1));
  }
  Vector alpha(int layer) const {
    if (shape_factors.empty() || shape_factors[static_cast<size_t>(layer - 1)].size() == 0)
      return Vector::Ones(layer_widths.at(static_cast<size_t>(layer - 1)));
    return shape_factors.at(static_cast<size_t>(layer - 1));
  }
  std::vector<int> effective_concat() const {
    if (!concat_layers.empty()) return concat_layers;
    return {num_layers()};
  }

  void validate() const {
    require(input_dim >= 1 && input_dim <= 3, "basis input_dim must be 1, 2 or 3");
    require(!layer_widths.empty(), "basis needs at least one layer");
    for (int w : layer_widths) require(w >= 1, "all layer widths must be >= 1");
    require(bias_radius > 0.0, "bias_radius must be positive");
    if (!residual_strengths.empty())
      require(residual_strengths.size() == layer_widths.size(),
              "residual_strengths must have one entry per layer");
    if (!shape_factors.empty()) {
      require(shape_factors.size() == layer_widths.size(),
              "shape_factors must have one entry per layer");
      for (size_t l = 0; l < shape_factors.size(); ++l)
        require(shape_factors[l].size() == 0 || shape_factors[l].size() == layer_widths[l],
                "shape_factors length must match layer width");
    }
    for (int l : effective_concat())
      require(l >= 1 && l <= num_layers(), "concat layer index out of range");
    Box b = domain_box;
    b.dim = input_dim;
    b.validate();
  }

  // Convenience builder: equal widths on a box, final-layer concat.
  static BasisConfig dense(int dim, int layers, int width, std::uint64_t seed,
                           const Box& box, bool include_const = true) {
    BasisConfig c;
    c.input_dim = dim;
    c.layer_widths.assign(static_cast<size_t>(layers), width);
    c.seed = seed;
    c.domain_box = box;
    c.include_constant = include_const;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Hyperplane filtering (first layer, normalized domain)

namespace detail {

// Chord length of the line {w.x + b = 0} inside [-1,1]^2. Returns 0 when the
// line misses the square.
inline double chord_length_unit_square(const Vector& w, double b) {
  std::vector<Eigen::Vector2d> pts;
  const double wx = w[0], wy = w[1];
  auto push_unique = [&pts](double x, double y) {
    for (const auto& p : pts)
      if (std::abs(p.x() - x) < 1e-12 && std::abs(p.y() - y) < 1e-12) return;
    pts.emplace_back(x, y);
  };
  // Intersections with x = +-1 and y = +-1.
  if (std::abs(wy) > 1e-300) {
    for (double x : {-1.0, 1.0}) {
      const double y = -(b + wx * x) / wy;
      if (y >= -1.0 - 1e-12 && y <= 1.0 + 1e-12) push_unique(x, y);
    }
  }
  if (std::abs(wx) > 1e-300) {
    for (double y : {-1.0, 1.0}) {
      const double x = -(b + wy * y) / wx;
      if (x >= -1.0 - 1e-12 && x <= 1.0 + 1e-12) push_unique(x, y);
    }
  }
  double best = 0.0;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      best = std::max(best, (pts[i] - pts[j]).norm());
  return best;
}

// Canonical representative of an (unoriented) hyperplane: flip sign so the
// first nonzero component of w is positive.
inline void canonicalize(Vector& w, double& b) {
  for (Index i = 0; i < w.size(); ++i) {
    if (std::abs(w[i]) > 1e-14) {
      if (w[i] < 0) {
        w = -w;
        b = -b;
      }
      return;
    }
  }
}

}  // namespace detail

// Greedy order-stable filter: a candidate is accepted unless its chord with
// the reference square is too short, or it is nearly parallel to and nearly
// coincident with an already accepted line.
inline std::vector<std::pair<Vector, double>> filter_hyperplanes(
    const std::vector<std::pair<Vector, double>>& candidates,
    const HyperplaneFilterCriteria& crit, int max_accept = -1) {
  require(crit.min_chord > 0 && crit.min_angle_sep > 0 && crit.min_offset_sep > 0,
          "filter criteria must be positive");
  std::vector<std::pair<Vector, double>> accepted;
  for (const auto& cand : candidates) {
    if (max_accept >= 0 && static_cast<int>(accepted.size()) >= max_accept) break;
    Vector w = cand.first;
    double b = cand.second;
    detail::canonicalize(w, b);
    if (w.size() == 2 &&
        detail::chord_length_unit_square(w, b) < crit.min_chord)
      continue;
    bool clustered = false;
    for (const auto& acc : accepted) {
      const double cosang = std::min(1.0, std::abs(w.dot(acc.first)));
      const double angle = std::acos(cosang);
      const double offset = std::abs(b - (w.dot(acc.first) >= 0 ? acc.second : -acc.second));
      if (angle < crit.min_angle_sep && offset < crit.min_offset_sep) {
        clustered = true;
        break;
      }
    }
    if (!clustered) accepted.emplace_back(std::move(w), b);
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Parameters

struct BasisParams {
  BasisConfig config;
  // Per layer (0-based storage, layer ell = index + 1):
  std::vector<Matrix> W;  // p_l x p_{l-1}
  std::vector<Vector> b;  // p_l
  std::vector<Matrix> P;  // skip projection; empty matrix means identity
  Vector gamma1;          // constant shift of the first-layer skip branch
  Vector scale_s, scale_c;  // physical->normalized affine map per axis
  int first_layer_accepted = 0;  // lines surviving the geometric filter

  int dim() const { return config.input_dim; }
  int num_layers() const { return config.num_layers(); }
  int output_size() const {
    int p = 0;
    for (int l : config.effective_concat()) p += config.layer_widths[static_cast<size_t>(l - 1)];
    if (config.include_constant) p += 1;
    return p;
  }
};

inline BasisParams init_basis(const BasisConfig& config) {
  config.validate();
  const int d = config.input_dim;
  const int L = config.num_layers();

  BasisParams params;
  params.config = config;
  params.scale_s = Vector(d);
  params.scale_c = Vector(d);
  for (int i = 0; i < d; ++i) {
    params.scale_s[i] = config.domain_box.half_length(i);
    params.scale_c[i] = config.domain_box.center(i);
  }

  params.W.resize(static_cast<size_t>(L));
  params.b.resize(static_cast<size_t>(L));
  params.P.resize(static_cast<size_t>(L));

  // First layer: directions uniform on the sphere, offsets uniform in
  // [-r, r], all defined on the normalized domain and then rescaled into
  // physical coordinates.
  {
    const int p1 = config.layer_widths[0];
    Rng rng(substream(config.seed, 1));
    std::vector<std::pair<Vector, double>> lines;
    if (config.filter_first_layer) {
      const int pool = std::max(8 * p1, p1 + 64);
      std::vector<std::pair<Vector, double>> cands;
      cands.reserve(static_cast<size_t>(pool));
      for (int i = 0; i < pool; ++i)
        cands.emplace_back(rng.unit_vector(d),
                           rng.uniform(-config.bias_radius, config.bias_radius));
      lines = filter_hyperplanes(cands, config.filter, p1);
      if (static_cast<int>(lines.size()) < p1)
        std::cerr << "basis: geometric filter kept " << lines.size() << " of "
                  << p1 << " requested first-layer units\n";
    } else {
      lines.reserve(static_cast<size_t>(p1));
      for (int i = 0; i < p1; ++i)
        lines.emplace_back(rng.unit_vector(d),
                           rng.uniform(-config.bias_radius, config.bias_radius));
    }
    params.first_layer_accepted = static_cast<int>(lines.size());
    const int rows = static_cast<int>(lines.size());
    require(rows >= 1, "first layer ended up empty after filtering");

    Matrix W0(rows, d);
    Vector b0(rows);
    for (int i = 0; i < rows; ++i) {
      W0.row(i) = lines[static_cast<size_t>(i)].first.transpose();
      b0[i] = lines[static_cast<size_t>(i)].second;
    }
    Matrix P0(rows, d);
    {
      Rng prng(substream(config.seed, 101));
      const double sd = 1.0 / std::sqrt(static_cast<double>(d));
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < d; ++j) P0(i, j) = sd * prng.normal();
    }
    const Vector cs = params.scale_c.cwiseQuotient(params.scale_s);
    const Vector inv_s = params.scale_s.cwiseInverse();
    params.W[0] = W0 * inv_s.asDiagonal();
    params.b[0] = b0 - W0 * cs;
    params.P[0] = P0 * inv_s.asDiagonal();
    params.gamma1 = -config.beta(1) * (P0 * cs);
    // Filtering may shrink the first layer; propagate the actual width.
    params.config.layer_widths[0] = rows;
  }

  // Deeper layers: standard normal weights, uniform offsets, identity skip
  // when square, Gaussian skip otherwise.
  for (int l = 2; l <= L; ++l) {
    const int pl = params.config.layer_widths[static_cast<size_t>(l - 1)];
    const int pprev = params.config.layer_widths[static_cast<size_t>(l - 2)];
    Rng wrng(substream(config.seed, static_cast<std::uint64_t>(l)));
    Matrix Wl(pl, pprev);
    for (int i = 0; i < pl; ++i)
      for (int j = 0; j < pprev; ++j) Wl(i, j) = wrng.normal();
    Vector bl(pl);
    for (int i = 0; i < pl; ++i)
      bl[i] = wrng.uniform(-config.bias_radius, config.bias_radius);
    params.W[static_cast<size_t>(l - 1)] = std::move(Wl);
    params.b[static_cast<size_t>(l - 1)] = std::move(bl);
    if (pl == pprev) {
      params.P[static_cast<size_t>(l - 1)] = Matrix();  // identity
    } else {
      Rng prng(substream(config.seed, 100 + static_cast<std::uint64_t>(l)));
      Matrix Pl(pl, pprev);
      const double sd = 1.0 / std::sqrt(static_cast<double>(pprev));
      for (int i = 0; i < pl; ++i)
        for (int j = 0; j < pprev; ++j) Pl(i, j) = sd * prng.normal();
      params.P[static_cast<size_t>(l - 1)] = std::move(Pl);
    }
  }
  return params;
}

// ---------------------------------------------------------------------------
// Evaluation

// Basis values and spatial derivative tensors at M points. Hessian blocks are
// stored once per unordered axis pair, so symmetry holds exactly.
struct BasisEval {
  int dim = 0;
  Index npoints = 0;
  Index size = 0;  // number of basis columns (incl. constant column if any)
  bool has_constant = false;
  Matrix phi;                 // M x P
  std::vector<Matrix> grad;   // d matrices, M x P
  std::vector<Matrix> hess;   // d*(d+1)/2 matrices, M x P (upper-triangle order)

  bool has_grad() const { return !grad.empty(); }
  bool has_hess() const { return !hess.empty(); }

  static int tri_index(int a, int b, int d) {
    if (a > b) std::swap(a, b);
    // row-major upper triangle: (a,b) with a <= b
    return a * d - a * (a - 1) / 2 + (b - a);
  }
  const Matrix& d1(int axis) const { return grad.at(static_cast<size_t>(axis)); }
  const Matrix& d2(int a, int b) const {
    return hess.at(static_cast<size_t>(tri_index(a, b, dim)));
  }
  // Laplacian of every column: sum of the diagonal Hessian blocks.
  Matrix laplacian() const {
    Matrix lap = Matrix::Zero(npoints, size);
    for (int a = 0; a < dim; ++a) lap += d2(a, a);
    return lap;
  }
};

namespace detail {

struct LayerState {
  Matrix A;                   // M x p
  std::vector<Matrix> J;      // d
  std::vector<Matrix> H;      // d*(d+1)/2
};

}  // namespace detail

inline BasisEval evaluate_basis(const BasisParams& params, const Matrix& X,
                                EvalOrder order = EvalOrder::kHess) {
  const int d = params.dim();
  require(X.cols() == d, "point matrix has wrong dimension");
  const Index M = X.rows();
  const int L = params.num_layers();
  const bool want_grad = order != EvalOrder::kValues;
  const bool want_hess = order == EvalOrder::kHess;
  const int ntri = d * (d + 1) / 2;

  detail::LayerState prev;
  prev.A = X;
  if (want_grad) {
    prev.J.resize(static_cast<size_t>(d));
    for (int a = 0; a < d; ++a) {
      prev.J[static_cast<size_t>(a)] = Matrix::Zero(M, d);
      prev.J[static_cast<size_t>(a)].col(a).setOnes();
    }
  }
  if (want_hess)
    prev.H.assign(static_cast<size_t>(ntri), Matrix::Zero(M, d));

  std::vector<int> concat = params.config.effective_concat();
  std::vector<detail::LayerState> keep(static_cast<size_t>(L) + 1);

  for (int l = 1; l <= L; ++l) {
    const Matrix& W = params.W[static_cast<size_t>(l - 1)];
    const Vector& bvec = params.b[static_cast<size_t>(l - 1)];
    const Matrix& P = params.P[static_cast<size_t>(l - 1)];
    const double beta = params.config.beta(l);
    const Vector alpha = params.config.alpha(l);
    const bool ident_skip = (P.size() == 0);

    detail::LayerState cur;
    Matrix T = prev.A * W.transpose();
    T.rowwise() += bvec.transpose();
    Matrix a = T.array().rowwise() * alpha.transpose().array();
    Matrix Z = a.array().tanh();
    // sigma' = 1 - z^2, sigma'' = -2 z (1 - z^2)
    Matrix s1 = (1.0 - Z.array().square()).matrix();
    cur.A = Z;
    if (ident_skip) {
      cur.A += beta * prev.A;
    } else {
      cur.A += beta * (prev.A * P.transpose());
    }
    if (l == 1) cur.A.rowwise() += params.gamma1.transpose();

    if (want_grad) {
      cur.J.resize(static_cast<size_t>(d));
      std::vector<Matrix> Jt(static_cast<size_t>(d));
      for (int ax = 0; ax < d; ++ax) {
        Jt[static_cast<size_t>(ax)] = prev.J[static_cast<size_t>(ax)] * W.transpose();
        Matrix g = (s1.array() * Jt[static_cast<size_t>(ax)].array()).matrix();
        g.array().rowwise() *= alpha.transpose().array();
        if (ident_skip)
          g += beta * prev.J[static_cast<size_t>(ax)];
        else
          g += beta * (prev.J[static_cast<size_t>(ax)] * P.transpose());
        cur.J[static_cast<size_t>(ax)] = std::move(g);
      }
      if (want_hess) {
        Matrix s2 = (-2.0 * Z.array() * s1.array()).matrix();
        cur.H.resize(static_cast<size_t>(ntri));
        for (int ax = 0; ax < d; ++ax) {
          for (int bx = ax; bx < d; ++bx) {
            const int t = BasisEval::tri_index(ax, bx, d);
            Matrix Ht = prev.H[static_cast<size_t>(t)] * W.transpose();
            Matrix h =
                (s2.array() * Jt[static_cast<size_t>(ax)].array() *
                     Jt[static_cast<size_t>(bx)].array() *
                     (alpha.array().square()).transpose().replicate(M, 1) +
                 s1.array() * Ht.array() * alpha.transpose().array().replicate(M, 1))
                    .matrix();
            if (ident_skip)
              h += beta * prev.H[static_cast<size_t>(t)];
            else
              h += beta * (prev.H[static_cast<size_t>(t)] * P.transpose());
            cur.H[static_cast<size_t>(t)] = std::move(h);
          }
        }
      }
    }

    if (!cur.A.allFinite())
      throw NumericError("basis evaluation produced non-finite values at layer " +
                         std::to_string(l));
    const bool needed_later =
        std::find(concat.begin(), concat.end(), l) != concat.end();
    if (needed_later) keep[static_cast<size_t>(l)] = cur;
    prev = std::move(cur);
  }

  // Assemble the concatenated output.
  BasisEval eval;
  eval.dim = d;
  eval.npoints = M;
  eval.has_constant = params.config.include_constant;
  Index P_total = 0;
  for (int l : concat) P_total += params.config.layer_widths[static_cast<size_t>(l - 1)];
  eval.size = P_total + (eval.has_constant ? 1 : 0);
  eval.phi.resize(M, eval.size);
  if (want_grad) eval.grad.assign(static_cast<size_t>(d), Matrix(M, eval.size));
  if (want_hess) eval.hess.assign(static_cast<size_t>(ntri), Matrix(M, eval.size));

  Index col = 0;
  for (int l : concat) {
    const auto& st = keep[static_cast<size_t>(l)];
    const Index w = st.A.cols();
    eval.phi.middleCols(col, w) = st.A;
    if (want_grad)
      for (int a = 0; a < d; ++a)
        eval.grad[static_cast<size_t>(a)].middleCols(col, w) = st.J[static_cast<size_t>(a)];
    if (want_hess)
      for (int t = 0; t < ntri; ++t)
        eval.hess[static_cast<size_t>(t)].middleCols(col, w) = st.H[static_cast<size_t>(t)];
    col += w;
  }
  if (eval.has_constant) {
    eval.phi.col(col).setOnes();
    if (want_grad)
      for (int a = 0; a < d; ++a) eval.grad[static_cast<size_t>(a)].col(col).setZero();
    if (want_hess)
      for (int t = 0; t < ntri; ++t) eval.hess[static_cast<size_t>(t)].col(col).setZero();
  }
  return eval;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json basis_config_to_json(const BasisConfig& c) {
  nlohmann::json j;
  j["input_dim"] = c.input_dim;
  j["layer_widths"] = c.layer_widths;
  j["activation"] = "tanh";
  j["bias_radius"] = c.bias_radius;
  if (!c.residual_strengths.empty()) j["residual_strengths"] = c.residual_strengths;
  if (!c.concat_layers.empty()) j["concat_layers"] = c.concat_layers;
  j["include_constant"] = c.include_constant;
  j["seed"] = c.seed;
  j["domain_lo"] = std::vector<double>(c.domain_box.lo.data(), c.domain_box.lo.data() + c.input_dim);
  j["domain_hi"] = std::vector<double>(c.domain_box.hi.data(), c.domain_box.hi.data() + c.input_dim);
  j["filter_first_layer"] = c.filter_first_layer;
  if (c.filter_first_layer) {
    j["filter"] = {{"min_chord", c.filter.min_chord},
                   {"min_angle_sep_deg", c.filter.min_angle_sep * 180.0 / M_PI},
                   {"min_offset_sep", c.filter.min_offset_sep}};
  }
  return j;
}

inline BasisConfig basis_config_from_json(const nlohmann::json& j) {
  BasisConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.layer_widths = j.at("layer_widths").get<std::vector<int>>();
  const std::string act = j.value("activation", "tanh");
  require(act == "tanh", "unsupported activation '" + act + "'");
  c.bias_radius = j.value("bias_radius", 1.5);
  if (j.contains("residual_strengths"))
    c.residual_strengths = j.at("residual_strengths").get<std::vector<double>>();
  if (j.contains("concat_layers"))
    c.concat_layers = j.at("concat_layers").get<std::vector<int>>();
  c.include_constant = j.value("include_constant", true);
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto lo = j.at("domain_lo").get<std::vector<double>>();
  const auto hi = j.at("domain_hi").get<std::vector<double>>();
  require(static_cast<int>(lo.size()) == c.input_dim && lo.size() == hi.size(),
          "domain bounds must match input_dim");
  c.domain_box.dim = c.input_dim;
  for (int i = 0; i < c.input_dim; ++i) {
    c.domain_box.lo[i] = lo[static_cast<size_t>(i)];
    c.domain_box.hi[i] = hi[static_cast<size_t>(i)];
  }
  c.filter_first_layer = j.value("filter_first_layer", false);
  if (j.contains("filter")) {
    c.filter.min_chord = j["filter"].value("min_chord", c.filter.min_chord);
    c.filter.min_angle_sep =
        j["filter"].value("min_angle_sep_deg", 1.0) * M_PI / 180.0;
    c.filter.min_offset_sep = j["filter"].value("min_offset_sep", c.filter.min_offset_sep);
  }
  c.validate();
  return c;
}

inline constexpr std::uint32_t kBasisBlobVersion = 1;

inline void save_basis_params(std::ostream& out, const BasisParams& p) {
  io::write_string(out, "NBMBASIS");
  io::write_pod<std::uint32_t>(out, kBasisBlobVersion);
  io::write_string(out, basis_config_to_json(p.config).dump());
  io::write_pod<std::int32_t>(out, p.num_layers());
  for (int l = 0; l < p.num_layers(); ++l) {
    io::write_matrix(out, p.W[static_cast<size_t>(l)]);
    io::write_vector(out, p.b[static_cast<size_t>(l)]);
    io::write_pod<std::uint8_t>(out, p.P[static_cast<size_t>(l)].size() == 0 ? 1 : 0);
    if (p.P[static_cast<size_t>(l)].size() != 0)
      io::write_matrix(out, p.P[static_cast<size_t>(l)]);
  }
  io::write_vector(out, p.gamma1);
  io::write_vector(out, p.scale_s);
  io::write_vector(out, p.scale_c);
  io::write_pod<std::int32_t>(out, p.first_layer_accepted);
}

inline BasisParams load_basis_params(std::istream& in) {
  require(io::read_string(in) == "NBMBASIS", "not a basis parameter blob");
  const auto version = io::read_pod<std::uint32_t>(in);
  require(version == kBasisBlobVersion,
          "unsupported basis blob version " + std::to_string(version));
  BasisParams p;
  p.config = basis_config_from_json(nlohmann::json::parse(io::read_string(in)));
  const auto L = io::read_pod<std::int32_t>(in);
  p.W.resize(static_cast<size_t>(L));
  p.b.resize(static_cast<size_t>(L));
  p.P.resize(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l) {
    p.W[static_cast<size_t>(l)] = io::read_matrix(in);
    p.b[static_cast<size_t>(l)] = io::read_vector(in);
    if (io::read_pod<std::uint8_t>(in) == 0)
      p.P[static_cast<size_t>(l)] = io::read_matrix(in);
  }
  p.gamma1 = io::read_vector(in);
  p.scale_s = io::read_vector(in);
  p.scale_c = io::read_vector(in);
  p.first_layer_accepted = io::read_pod<std::int32_t>(in);
  return p;
}

}  // namespace nbm
