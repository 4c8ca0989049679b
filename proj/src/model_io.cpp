#include "condnorm/model_io.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "condnorm/error.hpp"

namespace condnorm {

namespace {

using nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i]);
  return v;
}

// Row-major nested arrays.
json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw SchemaError("ragged matrix in model JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = number(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

json optional_json(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json term_json(const SmoothTerm& t) {
  return {
      {"covariate", t.covariate},
      {"spec",
       {{"kind", to_string(t.spec.kind)},
        {"dimension", t.spec.dimension},
        {"knots", to_string(t.spec.knots)},
        {"lo", optional_json(t.spec.lo)},
        {"hi", optional_json(t.spec.hi)}}},
      {"basis",
       {{"kind", to_string(t.basis.kind())},
        {"knots", t.basis.knots()},
        {"lo", t.basis.lo()},
        {"hi", t.basis.hi()}}},
      {"shift", vector_json(t.shift.transpose())},
      {"constraint", matrix_json(t.constraint)},
      {"penalty", matrix_json(t.penalty)},
      {"penalty_scale", t.penalty_scale},
      {"lambda", t.lambda},
      {"lambda_fixed", t.lambda_fixed},
      {"offset", t.offset},
      {"coefficients", vector_json(t.coefficients)},
      {"lo", t.lo},
      {"hi", t.hi},
  };
}

SmoothTerm term_from(const json& j) {
  SmoothTerm t;
  t.covariate = j.at("covariate").get<std::string>();
  const json& spec = j.at("spec");
  t.spec.kind = parse_basis_kind(spec.at("kind").get<std::string>());
  t.spec.dimension = spec.at("dimension").get<int>();
  t.spec.knots = parse_knot_placement(spec.at("knots").get<std::string>());
  t.spec.lo = optional_from(spec.at("lo"));
  t.spec.hi = optional_from(spec.at("hi"));
  const json& basis = j.at("basis");
  t.basis = SplineBasis(parse_basis_kind(basis.at("kind").get<std::string>()),
                        basis.at("knots").get<std::vector<double>>(), basis.at("lo").get<double>(),
                        basis.at("hi").get<double>());
  t.shift = vector_from(j.at("shift")).transpose();
  t.coefficients = vector_from(j.at("coefficients"));
  t.constraint = matrix_from(j.at("constraint"));
  t.penalty = matrix_from(j.at("penalty"));
  t.penalty_scale = j.at("penalty_scale").get<double>();
  t.lambda = j.at("lambda").get<double>();
  t.lambda_fixed = j.at("lambda_fixed").get<bool>();
  t.offset = j.at("offset").get<Eigen::Index>();
  t.lo = j.at("lo").get<double>();
  t.hi = j.at("hi").get<double>();
  if (t.shift.size() != t.basis.dimension() || t.constraint.rows() != t.basis.dimension() ||
      t.coefficients.size() != t.constraint.cols())
    throw SchemaError("model JSON: term '" + t.covariate + "' has inconsistent shapes");
  return t;
}

json smooth_json(const SmoothModel& m) {
  json terms = json::array();
  for (const auto& t : m.terms) terms.push_back(term_json(t));
  return {
      {"family", to_string(m.family)},
      {"intercept", m.intercept},
      {"terms", terms},
      {"dropped", m.dropped},
      {"dispersion", number(m.dispersion)},
      {"shape", number(m.shape)},
      {"deviance", number(m.deviance)},
      {"edf", number(m.edf)},
      {"gcv", number(m.gcv)},
      {"n", m.n},
      {"iterations", m.iterations},
      {"covariance", matrix_json(m.covariance)},
      {"warnings", m.warnings},
  };
}

SmoothModel smooth_from(const json& j) {
  SmoothModel m;
  m.family = parse_family(j.at("family").get<std::string>());
  m.intercept = j.at("intercept").get<double>();
  for (const auto& t : j.at("terms")) m.terms.push_back(term_from(t));
  m.dropped = j.at("dropped").get<std::vector<std::string>>();
  m.dispersion = number(j.at("dispersion"));
  m.shape = number(j.at("shape"));
  m.deviance = number(j.at("deviance"));
  m.edf = number(j.at("edf"));
  m.gcv = number(j.at("gcv"));
  m.n = j.at("n").get<Eigen::Index>();
  m.iterations = j.at("iterations").get<int>();
  m.covariance = matrix_from(j.at("covariance"));
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  return m;
}

json ar_json(const ArModel& m) {
  json aicc = json::array();
  for (double v : m.aicc_by_order) aicc.push_back(number(v));
  return {
      {"order", m.order},
      {"intercept", m.intercept},
      {"mean", m.mean},
      {"coefficients", vector_json(m.coefficients)},
      {"sigma2", m.sigma2},
      {"aicc", number(m.aicc)},
      {"stationary", m.stationary},
      {"n_used", m.n_used},
      {"aicc_by_order", aicc},
      {"warnings", m.warnings},
  };
}

ArModel ar_from(const json& j) {
  ArModel m;
  m.order = j.at("order").get<int>();
  m.intercept = j.at("intercept").get<double>();
  m.mean = j.at("mean").get<double>();
  m.coefficients = vector_from(j.at("coefficients"));
  m.sigma2 = j.at("sigma2").get<double>();
  m.aicc = number(j.at("aicc"));
  m.stationary = j.at("stationary").get<bool>();
  m.n_used = j.at("n_used").get<Eigen::Index>();
  for (const auto& v : j.at("aicc_by_order")) m.aicc_by_order.push_back(number(v));
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (m.coefficients.size() != m.order) throw SchemaError("model JSON: AR order mismatch");
  return m;
}

template <typename F>
auto parse_with(const std::string& text, F&& f) {
  try {
    return f(json::parse(text));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model JSON: ") + e.what());
  }
}

}  // namespace

std::string to_json(const SmoothModel& model) { return smooth_json(model).dump(2); }

SmoothModel smooth_model_from_json(const std::string& text) {
  return parse_with(text, [](const json& j) { return smooth_from(j); });
}

std::string to_json(const ConditionalNormalizer& normalizer) {
  const json j = {{"mean_model", smooth_json(normalizer.mean_model)},
                  {"var_model", smooth_json(normalizer.var_model)},
                  {"var_floor", normalizer.var_floor}};
  return j.dump(2);
}

ConditionalNormalizer normalizer_from_json(const std::string& text) {
  return parse_with(text, [](const json& j) {
    ConditionalNormalizer n;
    n.mean_model = smooth_from(j.at("mean_model"));
    n.var_model = smooth_from(j.at("var_model"));
    n.var_floor = j.at("var_floor").get<double>();
    return n;
  });
}

std::string to_json(const ArModel& model) { return ar_json(model).dump(2); }

ArModel ar_model_from_json(const std::string& text) {
  return parse_with(text, [](const json& j) { return ar_from(j); });
}

}  // namespace condnorm
