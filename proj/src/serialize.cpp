#include "stochsym/serialize.hpp"

#include <cmath>
#include <fstream>

#include "stochsym/error.hpp"

namespace stochsym {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) { throw Error(Errc::Config, field, what); }

double number(const Json& j, const std::string& field) {
  if (!j.is_number()) bad(field, "expected a number");
  return j.get<double>();
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json to_json(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return Json{{"rows", m.rows()}, {"cols", m.cols()}};
  if (m.size() == 1) return m(0, 0);
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Box& b) { return Json{{"lower", to_json(b.lower)}, {"upper", to_json(b.upper)}}; }

Json to_json(const Grid& g) {
  return Json{{"lower", to_json(g.lower)}, {"widths", to_json(g.widths)}, {"counts", g.counts}};
}

Json to_json(const AffineSystem& s) {
  return Json{{"A", to_json(s.A)},           {"B", to_json(s.B)},
              {"C1", to_json(s.C1)},         {"C2", to_json(s.C2)},
              {"D", to_json(s.D)},           {"G", to_json(s.G)},
              {"b", to_json(s.b)},           {"state_box", to_json(s.state_box)},
              {"input_box", to_json(s.input_box)}, {"internal_box", to_json(s.internal_box)}};
}

Json to_json(const StorageCertificate& c) {
  Json j{{"M_bar", to_json(c.M_bar)}, {"K", to_json(c.K)},   {"P", to_json(c.P)},
         {"Q", to_json(c.Q)},         {"H", to_json(c.H)},   {"kappa_tilde", c.kappa_tilde},
         {"tau", c.tau},              {"pi", c.pi},          {"kappa_bar", c.kappa_bar},
         {"Xbar11", to_json(c.Xbar11)}, {"Xbar12", to_json(c.Xbar12)}, {"Xbar21", to_json(c.Xbar21)},
         {"Xbar22", to_json(c.Xbar22)}, {"eta_bar", c.eta_bar}, {"eta_bar_p", c.eta_bar_p},
         {"eta_bar_pp", c.eta_bar_pp}};
  j["gamma_slope"] = c.gamma_slope ? Json(*c.gamma_slope) : Json(nullptr);
  j["delta"] = c.delta;
  return j;
}

Json to_json(const SstfConstants& c) {
  return Json{{"alpha_coeff", c.alpha_coeff}, {"kappa", c.kappa}, {"rho_ext_slope", c.rho_ext_slope},
              {"psi", c.psi},                 {"gamma_slope", c.gamma_slope}};
}

Json to_json(const NetworkSsf& s) {
  return Json{{"alpha_mode", to_string(s.mode)}, {"alpha_coeff", s.alpha_coeff}, {"kappa", s.kappa},
              {"rho_ext_slope", s.rho_ext_slope}, {"psi", s.psi}};
}

Json to_json(const CompositionResult& c) {
  Json j{{"q_tilde", c.q_tilde},
         {"lmi_ok", c.lmi.ok},
         {"lmi_lambda_max", c.lmi.lambda_max},
         {"lmi_margin", c.lmi.margin},
         {"lmi_tolerance", c.lmi.tolerance}};
  j["gershgorin"] = c.gershgorin ? Json(to_string(*c.gershgorin)) : Json(nullptr);
  j["ssf"] = to_json(c.ssf);
  j["X_cmp"] = sparse_to_json(c.X_cmp);
  return j;
}

Json to_json(const ClosenessBound& b) {
  return Json{{"epsilon", b.epsilon},         {"horizon", b.horizon},
              {"psi_hat", b.psi_hat},         {"v0", b.v0},
              {"regime", to_string(b.regime)}, {"violation_bound", b.violation_bound},
              {"success_bound", b.success_bound}};
}

Json to_json(const SimSummary& s) {
  return Json{{"n_trials", s.n_trials},
              {"violations", s.violations},
              {"aborted", s.aborted},
              {"frequency", s.frequency},
              {"clopper_pearson_upper_95", s.cp_upper},
              {"mean_sup_error", s.mean_sup_error},
              {"max_sup_error", s.max_sup_error},
              {"clean_min_output", finite_or_null(s.clean_min_output)},
              {"clean_max_output", finite_or_null(s.clean_max_output)},
              {"n_substeps", s.n_substeps}};
}

Json to_json(const ConvergenceReport& c) {
  return Json{{"accepted_substeps", c.accepted_substeps},
              {"frequency_drift", c.frequency_drift},
              {"mean_error_drift", c.mean_error_drift},
              {"converged", c.converged}};
}

Json sparse_to_json(const SparseMatrix& m) {
  Json entries = Json::array();
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) entries.push_back(Json::array({it.row(), it.col(), it.value()}));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", std::move(entries)}};
}

Matrix matrix_from_json(const Json& j, const std::string& field) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (j.is_object()) {
    if (!j.contains("rows") || !j.contains("cols")) bad(field, "matrix object needs rows and cols");
    const Index r = j.at("rows").get<Index>();
    const Index c = j.at("cols").get<Index>();
    if (r < 0 || c < 0) bad(field, "negative matrix size");
    Matrix m = Matrix::Zero(r, c);
    if (j.contains("data")) {
      const Json& d = j.at("data");
      if (!d.is_array() || static_cast<Index>(d.size()) != r * c) bad(field, "data must hold rows*cols numbers");
      for (Index i = 0; i < r; ++i)
        for (Index k = 0; k < c; ++k) m(i, k) = number(d[static_cast<std::size_t>(i * c + k)], field);
    }
    return m;
  }
  if (!j.is_array()) bad(field, "expected a matrix");
  if (j.empty()) return Matrix(0, 0);
  if (!j[0].is_array()) {
    Matrix m(static_cast<Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Index>(i), 0) = number(j[i], field);
    return m;
  }
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) bad(field, "ragged matrix rows");
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = number(j[i][k], field);
  }
  return m;
}

Matrix matrix_or_zeros(const Json& parent, const std::string& key, Index rows, Index cols) {
  if (!parent.contains(key) || parent.at(key).is_null()) return Matrix::Zero(rows, cols);
  return matrix_from_json(parent.at(key), key);
}

Vector vector_from_json(const Json& j, const std::string& field) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) bad(field, "expected a vector");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = number(j[i], field);
  return v;
}

Box box_from_json(const Json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("lower") || !j.contains("upper")) bad(field, "box needs lower and upper");
  Box b{vector_from_json(j.at("lower"), field), vector_from_json(j.at("upper"), field)};
  if (b.lower.size() != b.upper.size()) bad(field, "lower and upper differ in length");
  return b;
}

Grid grid_from_json(const Json& j, const std::string& field) {
  if (!j.is_object()) bad(field, "grid must be an object");
  const Vector widths = vector_from_json(j.at("widths"), field);
  if (j.contains("counts")) {
    std::vector<Index> counts;
    if (j.at("counts").is_number()) {
      counts.push_back(j.at("counts").get<Index>());
    } else {
      counts = j.at("counts").get<std::vector<Index>>();
    }
    return make_grid(vector_from_json(j.at("lower"), field), widths, std::move(counts));
  }
  return grid_covering(box_from_json(j, field), widths);
}

SparseMatrix sparse_from_json(const Json& j, const std::string& field) {
  if (j.is_object() && j.contains("entries")) {
    const Index r = j.at("rows").get<Index>();
    const Index c = j.at("cols").get<Index>();
    std::vector<Triplet> trips;
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 3) bad(field, "entries are [row, col, value]");
      const Index i = e[0].get<Index>();
      const Index k = e[1].get<Index>();
      if (i < 0 || i >= r || k < 0 || k >= c) bad(field, "entry out of range");
      trips.emplace_back(i, k, number(e[2], field));
    }
    SparseMatrix m(r, c);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }
  return matrix_from_json(j, field).sparseView(0.0, 0.0);
}

AffineSystem system_from_json(const Json& j, const std::string& field) {
  if (!j.is_object()) bad(field, "subsystem must be an object");
  for (const char* k : {"A", "B", "C1", "G", "b", "state_box", "input_box"}) {
    if (!j.contains(k)) bad(field, std::string("missing ") + k);
  }
  AffineSystem s;
  s.A = matrix_from_json(j.at("A"), "A");
  const Index n = s.A.rows();
  s.B = matrix_from_json(j.at("B"), "B");
  s.C1 = matrix_from_json(j.at("C1"), "C1");
  s.G = matrix_from_json(j.at("G"), "G");
  s.b = vector_from_json(j.at("b"), "b");
  s.state_box = box_from_json(j.at("state_box"), "state_box");
  s.input_box = box_from_json(j.at("input_box"), "input_box");
  s.C2 = matrix_or_zeros(j, "C2", 0, n);
  s.D = matrix_or_zeros(j, "D", n, 0);
  s.internal_box = j.contains("internal_box") ? box_from_json(j.at("internal_box"), "internal_box")
                                              : Box{Vector(s.D.cols()), Vector(s.D.cols())};
  return s;
}

StorageCertificate certificate_from_json(const Json& j, const AffineSystem& sys, double tau, const std::string& field) {
  if (!j.is_object()) bad(field, "certificate must be an object");
  StorageCertificate c;
  for (const char* k : {"M_bar", "K", "P", "Q"}) {
    if (!j.contains(k)) bad(field, std::string("missing ") + k);
  }
  c.M_bar = matrix_from_json(j.at("M_bar"), "M_bar");
  c.K = matrix_from_json(j.at("K"), "K");
  c.P = matrix_from_json(j.at("P"), "P");
  c.Q = matrix_from_json(j.at("Q"), "Q");
  c.H = matrix_or_zeros(j, "H", sys.m(), sys.p());
  c.tau = tau;
  c.kappa_tilde = j.value("kappa_tilde", 0.0);
  c.pi = j.value("pi", 1.0);
  c.kappa_bar = j.value("kappa_bar", 0.0);
  c.Xbar11 = matrix_or_zeros(j, "Xbar11", sys.p(), sys.p());
  c.Xbar12 = matrix_or_zeros(j, "Xbar12", sys.p(), sys.q2());
  c.Xbar21 = matrix_or_zeros(j, "Xbar21", sys.q2(), sys.p());
  c.Xbar22 = matrix_or_zeros(j, "Xbar22", sys.q2(), sys.q2());
  c.eta_bar = j.value("eta_bar", 1.0);
  c.eta_bar_p = j.value("eta_bar_p", 1.0);
  c.eta_bar_pp = j.value("eta_bar_pp", 1.0);
  if (j.contains("gamma_slope") && !j.at("gamma_slope").is_null()) c.gamma_slope = number(j.at("gamma_slope"), "gamma_slope");
  c.delta = j.value("delta", 0.0);
  return c;
}

const char* to_string(AbstractionKind k) noexcept { return k == AbstractionKind::Deterministic ? "deterministic" : "stochastic"; }
const char* to_string(AlphaMode m) noexcept { return m == AlphaMode::General ? "general" : "stacked"; }
const char* to_string(GershgorinVerdict v) noexcept { return v == GershgorinVerdict::Ok ? "ok" : "inconclusive"; }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Config, path, "cannot open for writing");
  out << text;
}

void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace stochsym
