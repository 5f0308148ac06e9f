#include "siso/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "siso/errors.hpp"

namespace siso {

using json = nlohmann::json;

// ---------------------------------------------------------------- signals, noise

Vector signal_at(const SignalSpec& s, int k, int p, std::mt19937_64& rng) {
  Vector base = s.value.size() == p ? s.value : Vector::Ones(p);
  const double t = k * s.Ts;
  switch (s.kind) {
    case SignalSpec::Kind::Constant:
      return s.value.size() == p ? s.value : Vector::Zero(p);
    case SignalSpec::Kind::Sinusoid:
      return s.amplitude * std::sin(2 * M_PI * s.frequency * t) * base;
    case SignalSpec::Kind::Ramp:
      return s.slope * k * base;
    case SignalSpec::Kind::StepTrain: {
      const int level = (k / std::max(1, s.step_period)) % 2;
      return (level ? s.step_amplitude : 0.0) * base;
    }
    case SignalSpec::Kind::SineSteps: {
      const int level = (k / std::max(1, s.step_period)) % 2;
      return (s.amplitude * std::sin(2 * M_PI * s.frequency * t) + (level ? s.step_amplitude : 0.0)) * base;
    }
    case SignalSpec::Kind::RandomBall:
      return sample_bounded_noise(p, s.bound, rng);
  }
  return Vector::Zero(p);
}

Vector sample_bounded_noise(int dim, double bound, std::mt19937_64& rng) {
  if (!(bound >= 0)) throw ContractViolation("sample_bounded_noise: bound must be >= 0");
  Vector v = Vector::Zero(dim);
  if (dim == 0 || bound == 0) return v;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double nrm = 0;
  do {
    for (int i = 0; i < dim; ++i) v(i) = normal(rng);
    nrm = v.norm();
  } while (nrm == 0);
  const double r = bound * std::pow(unif(rng), 1.0 / dim);
  return v * (r / nrm);
}

// ---------------------------------------------------------------- dynamics from data

namespace {

struct DynTerm {
  int row = 0, arg = 0;
  double coef = 0;
  std::string fn;  // sin, cos, tanh, identity, const
};

double apply_fn(const std::string& fn, double x) {
  if (fn == "sin") return std::sin(x);
  if (fn == "cos") return std::cos(x);
  if (fn == "tanh") return std::tanh(x);
  if (fn == "identity") return x;
  return 1.0;  // const
}

bool known_fn(const std::string& fn) {
  return fn == "sin" || fn == "cos" || fn == "tanh" || fn == "identity" || fn == "const";
}

// f(k, x) = A(k) x + sum of scalar terms, with A(k) = sum_i lambda_i(k) A_i for LPV data.
StateMap make_dynamics(std::vector<Matrix> A_list, std::vector<Vector> lambda_cycle, std::vector<DynTerm> terms) {
  return [A_list = std::move(A_list), lambda_cycle = std::move(lambda_cycle),
          terms = std::move(terms)](int k, const Vector& x) -> Vector {
    Vector y;
    if (A_list.size() == 1) {
      y = A_list[0] * x;
    } else {
      const Vector& lam = lambda_cycle[static_cast<std::size_t>(std::max(0, k)) % lambda_cycle.size()];
      y = Vector::Zero(x.size());
      for (std::size_t i = 0; i < A_list.size(); ++i) y += lam(static_cast<Eigen::Index>(i)) * (A_list[i] * x);
    }
    for (const auto& t : terms) y(t.row) += t.coef * apply_fn(t.fn, x(t.arg));
    return y;
  };
}

// ---------------------------------------------------------------- builtins

Matrix flex_A(double Ts) {
  Matrix A(4, 4);
  A << 1, Ts, 0, 0, -48.6 * Ts, 1 - 1.25 * Ts, 48.6 * Ts, 0, 0, 0, 1, Ts, 19.5 * Ts, 0, -19.5 * Ts, 1;
  return A;
}

Matrix mat(int r, int c, std::initializer_list<double> v) {
  Matrix M(r, c);
  auto it = v.begin();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = *it++;
  return M;
}

SuppliedDesign supplied(const Matrix& P, const Matrix& L, double rho, double alpha) {
  return {sym(P), L, rho, alpha};
}

Scenario flex_joint(bool unbounded) {
  const double Ts = 0.01;
  Scenario sc;
  sc.name = unbounded ? "flex_joint_unbounded" : "flex_joint";
  auto& s = sc.plant.sys;
  s.n = 4;
  s.m = 1;
  s.l = 2;
  s.p = 1;
  const Matrix A = flex_A(Ts);
  s.f = make_dynamics({A}, {}, {{1, 0, 2.16 * Ts, "const"}, {3, 2, -3.33 * Ts, "sin"}});
  s.B = constant_schedule(Matrix::Zero(4, 1));
  s.D = constant_schedule(Matrix::Zero(2, 1));
  s.G = Ts * mat(4, 1, {5, 5, 2, 1});
  s.H = Ts * mat(2, 1, {1.1, 2});
  s.C = mat(2, 4, {1, 0, 0, 0, 0, 1, 0, 0});
  s.W = Matrix::Identity(4, 4);
  s.eta_w = s.eta_v = 0.1;
  s.x0_hat = Vector::Zero(4);
  s.delta0_x = 0.5;
  const double L = 3.33 * Ts;
  sc.plant.classes["I"] = ClassLipschitz{L};
  sc.plant.classes["II"] = ClassQCStar{A, 0.0};
  sc.plant.classes["0"] = ClassQC0{qc_from_lipschitz(L, 4), L, std::nullopt};
  sc.plant.linear_part = A;
  sc.known_input = Vector::Zero(1);
  if (unbounded) {
    sc.input.kind = SignalSpec::Kind::Ramp;
    sc.input.slope = 0.05;
  } else {
    sc.input.kind = SignalSpec::Kind::SineSteps;
    sc.input.amplitude = 1.0;
    sc.input.frequency = 0.5;
    sc.input.Ts = Ts;
    sc.input.step_amplitude = 0.5;
    sc.input.step_period = 200;
  }
  sc.horizon = 500;
  sc.batch = 50;
  sc.policy = DesignPolicy::SynthesizeOrSupplied;
  // Reference certificates and gains for classes 0, I and II.
  sc.designs["0"] = supplied(mat(4, 4, {1.4458, -1.5232, -0.3419, -0.2265, -1.5232, 2.5753, -0.2546, -0.1828,
                                        -0.3419, -0.2546, 1.2159, -0.1475, -0.2265, -0.1828, -0.1475, 1.2605}),
                             mat(4, 1, {1.2471, 0.8705, 0.4783, 0.2947}), 1.1781, 0.750);
  sc.designs["I"] = supplied(mat(4, 4, {1.6684, -1.8242, -0.4606, -0.2268, -1.8242, 2.8284, -0.2860, -0.0424,
                                        -0.4606, -0.2860, 1.2086, -0.0628, -0.2208, -0.0424, -0.0628, 1.2088}),
                             mat(4, 1, {1.2620, 0.4288, 0.4244, 0.2667}), 0.9436, 0.825);
  sc.designs["II"] = supplied(mat(4, 4, {2.2823, -2.7731, -1.0065, -0.5036, -2.7731, 4.7225, -0.1605, -0.9806,
                                         -1.0065, -0.1605, 4.5760, -0.3148, -0.5036, -0.9806, -0.3148, 4.4577}),
                              mat(4, 1, {0.4605, 0.1837, 0.9321, 0.3519}), 0.9783, 0.793);
  return sc;
}

Scenario tanh_benchmark(bool unbounded) {
  Scenario sc;
  sc.name = unbounded ? "tanh_benchmark_unbounded" : "tanh_benchmark";
  auto& s = sc.plant.sys;
  s.n = 2;
  s.m = 1;
  s.l = 1;
  s.p = 1;
  const Matrix A = mat(2, 2, {-0.42, 1, -0.6, 0});
  s.f = make_dynamics({A}, {}, {{1, 0, -1.25, "tanh"}});
  s.B = constant_schedule(Matrix::Zero(2, 1));
  s.D = constant_schedule(Matrix::Zero(1, 1));
  s.G = mat(2, 1, {1, -0.65});
  s.H = Matrix::Zero(1, 1);
  s.C = mat(1, 2, {0, 1});
  s.W = Matrix::Identity(2, 2);
  s.eta_w = 0.2;
  s.eta_v = 0.1;
  s.x0_hat = Vector::Zero(2);
  s.delta0_x = 1.0;
  const double L = 1.1171;
  sc.plant.classes["I"] = ClassLipschitz{L};
  sc.plant.classes["0"] = ClassQC0{qc_from_lipschitz(L, 2), L, std::nullopt};
  sc.plant.linear_part = A;
  sc.known_input = Vector::Zero(1);
  if (unbounded) {
    sc.input.kind = SignalSpec::Kind::Ramp;
    sc.input.slope = 0.05;
  } else {
    sc.input.kind = SignalSpec::Kind::RandomBall;
    sc.input.bound = 0.2;
  }
  sc.horizon = 500;
  sc.batch = 50;
  sc.policy = DesignPolicy::SynthesizeOrSupplied;
  sc.designs["I"] = supplied(mat(2, 2, {1.8086, 1.4022, 1.4022, 5.2068}), mat(2, 1, {-0.2604, 0.2064}), 1.7336,
                             0.8875);
  return sc;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"flex_joint", "flex_joint_unbounded", "tanh_benchmark", "tanh_benchmark_unbounded"};
}

Scenario builtin_scenario(const std::string& name) {
  if (name == "flex_joint") return flex_joint(false);
  if (name == "flex_joint_unbounded") return flex_joint(true);
  if (name == "tanh_benchmark") return tanh_benchmark(false);
  if (name == "tanh_benchmark_unbounded") return tanh_benchmark(true);
  throw InputValidation("unknown builtin system '" + name + "'");
}

NonlinearSystem Scenario::system() const {
  auto it = plant.classes.find(cls);
  if (it == plant.classes.end()) throw InputValidation("scenario '" + name + "' has no class '" + cls + "'");
  NonlinearSystem s = plant.sys;
  s.class_spec = it->second;
  return s;
}

// ---------------------------------------------------------------- JSON parsing

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw InputValidation("scenario key '" + key + "': " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) bad(path + key, "missing");
  return j.at(key);
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<int>();
}

Vector vec(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Matrix matrix(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) bad(path, "rows must be arrays of equal length");
    for (std::size_t c = 0; c < cols; ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          num(j[r][c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return M;
}

Matrix matrix_or(const json& j, const std::string& key, const std::string& path, const Matrix& dflt) {
  return j.contains(key) ? matrix(j.at(key), path + key) : dflt;
}

Matrix sized(const Matrix& M, int r, int c, const std::string& path) {
  if (M.rows() == r && M.cols() == c) return M;
  if (M.size() == 0 && (r == 0 || c == 0)) return Matrix::Zero(r, c);
  bad(path, "expected shape " + std::to_string(r) + "x" + std::to_string(c) + ", got " + std::to_string(M.rows()) +
                "x" + std::to_string(M.cols()));
}

FunctionClassSpec parse_class(const std::string& name, const json& j, int n, const std::string& path) {
  if (name == "I") return ClassLipschitz{num(need(j, "L_f", path), path + "L_f")};
  if (name == "II") {
    return ClassQCStar{sized(matrix(need(j, "A", path), path + "A"), n, n, path + "A"),
                       j.contains("gamma") ? num(j.at("gamma"), path + "gamma") : 0.0};
  }
  if (name == "0") {
    ClassQC0 c;
    c.qc.M = sized(matrix(need(j, "M", path), path + "M"), 2 * n, 2 * n, path + "M");
    c.qc.gamma = j.contains("gamma") ? num(j.at("gamma"), path + "gamma") : 0.0;
    if (j.contains("lipschitz_surrogate")) c.lipschitz_surrogate = num(j.at("lipschitz_surrogate"), path + "lipschitz_surrogate");
    if (j.contains("A_surrogate")) c.A_surrogate = sized(matrix(j.at("A_surrogate"), path + "A_surrogate"), n, n, path + "A_surrogate");
    return c;
  }
  if (name == "III") {
    ClassLPV c;
    const json& As = need(j, "A", path);
    if (!As.is_array() || As.empty()) bad(path + "A", "expected a nonempty list of matrices");
    for (std::size_t i = 0; i < As.size(); ++i)
      c.A.push_back(sized(matrix(As[i], path + "A[" + std::to_string(i) + "]"), n, n, path + "A"));
    return c;
  }
  bad(path, "unknown class '" + name + "' (expected 0, I, II or III)");
}

PlantModel parse_plant(const json& j) {
  const std::string P = "system.";
  PlantModel pm;
  auto& s = pm.sys;
  s.n = integer(need(j, "n", P), P + "n");
  s.l = integer(need(j, "l", P), P + "l");
  s.p = integer(need(j, "p", P), P + "p");
  s.m = j.contains("m") ? integer(j.at("m"), P + "m") : 0;
  if (s.n < 1 || s.l < 1 || s.p < 0 || s.m < 0) bad(P + "n", "dimensions must satisfy n, l >= 1 and p, m >= 0");

  std::vector<Matrix> A_list;
  std::vector<Vector> lambda;
  if (j.contains("lpv")) {
    const json& lp = j.at("lpv");
    const json& As = need(lp, "A", P + "lpv.");
    if (!As.is_array() || As.empty()) bad(P + "lpv.A", "expected a nonempty list of matrices");
    for (std::size_t i = 0; i < As.size(); ++i)
      A_list.push_back(sized(matrix(As[i], P + "lpv.A"), s.n, s.n, P + "lpv.A[" + std::to_string(i) + "]"));
    const json& lam = need(lp, "lambda", P + "lpv.");
    if (!lam.is_array() || lam.empty()) bad(P + "lpv.lambda", "expected a nonempty list of weight vectors");
    for (std::size_t i = 0; i < lam.size(); ++i) {
      Vector w = vec(lam[i], P + "lpv.lambda[" + std::to_string(i) + "]");
      try {
        validate_lpv_weights(w, A_list.size());
      } catch (const Error& e) {
        bad(P + "lpv.lambda[" + std::to_string(i) + "]", e.what());
      }
      lambda.push_back(w);
    }
  } else {
    A_list.push_back(sized(matrix(need(j, "A", P), P + "A"), s.n, s.n, P + "A"));
    pm.linear_part = A_list[0];
  }
  std::vector<DynTerm> terms;
  if (j.contains("terms")) {
    const json& ts = j.at("terms");
    if (!ts.is_array()) bad(P + "terms", "expected an array");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string tp = P + "terms[" + std::to_string(i) + "].";
      DynTerm t;
      t.row = integer(need(ts[i], "row", tp), tp + "row");
      t.coef = num(need(ts[i], "coef", tp), tp + "coef");
      t.fn = ts[i].value("fn", "const");
      t.arg = ts[i].contains("arg") ? integer(ts[i].at("arg"), tp + "arg") : 0;
      if (!known_fn(t.fn)) bad(tp + "fn", "unknown function '" + t.fn + "'");
      if (t.row < 0 || t.row >= s.n || t.arg < 0 || t.arg >= s.n) bad(tp + "row", "index out of range");
      terms.push_back(t);
    }
  }
  s.f = make_dynamics(A_list, lambda, terms);

  s.G = sized(matrix_or(j, "G", P, Matrix::Zero(s.n, s.p)), s.n, s.p, P + "G");
  s.H = sized(matrix_or(j, "H", P, Matrix::Zero(s.l, s.p)), s.l, s.p, P + "H");
  s.C = sized(matrix(need(j, "C", P), P + "C"), s.l, s.n, P + "C");
  s.B = constant_schedule(sized(matrix_or(j, "B", P, Matrix::Zero(s.n, s.m)), s.n, s.m, P + "B"));
  s.D = constant_schedule(sized(matrix_or(j, "D", P, Matrix::Zero(s.l, s.m)), s.l, s.m, P + "D"));
  s.W = sized(matrix_or(j, "W", P, Matrix::Identity(s.n, s.n)), s.n, s.n, P + "W");
  s.eta_w = j.contains("eta_w") ? num(j.at("eta_w"), P + "eta_w") : 0.0;
  s.eta_v = j.contains("eta_v") ? num(j.at("eta_v"), P + "eta_v") : 0.0;
  s.x0_hat = j.contains("x0_hat") ? vec(j.at("x0_hat"), P + "x0_hat") : Vector::Zero(s.n);
  if (s.x0_hat.size() != s.n) bad(P + "x0_hat", "expected length n");
  s.delta0_x = j.contains("delta0_x") ? num(j.at("delta0_x"), P + "delta0_x") : 0.0;

  const json& cl = need(j, "classes", P);
  if (!cl.is_object() || cl.empty()) bad(P + "classes", "expected a nonempty object keyed by class name");
  for (auto it = cl.begin(); it != cl.end(); ++it) {
    const std::string cp = P + "classes." + it.key() + ".";
    pm.classes[it.key()] = parse_class(it.key(), it.value(), s.n, cp);
    try {
      validate_class(pm.classes[it.key()], s.n);
    } catch (const Error& e) {
      bad(cp, e.what());
    }
  }
  if (auto lpv = pm.classes.find("III"); lpv != pm.classes.end() && !lambda.empty()) {
    auto& c = std::get<ClassLPV>(lpv->second);
    c.lambda = [lambda](int k) { return lambda[static_cast<std::size_t>(std::max(0, k)) % lambda.size()]; };
  }
  s.class_spec = pm.classes.begin()->second;
  try {
    s.validate();
  } catch (const ModelInvalid& e) {
    throw ModelInvalid(std::string("scenario system: ") + e.what());
  }
  return pm;
}

SignalSpec parse_signal(const json& j, SignalSpec s) {
  const std::string P = "input.";
  const std::string type = j.value("type", "constant");
  if (type == "constant") s.kind = SignalSpec::Kind::Constant;
  else if (type == "sinusoid") s.kind = SignalSpec::Kind::Sinusoid;
  else if (type == "ramp") s.kind = SignalSpec::Kind::Ramp;
  else if (type == "step_train") s.kind = SignalSpec::Kind::StepTrain;
  else if (type == "sine_steps") s.kind = SignalSpec::Kind::SineSteps;
  else if (type == "random_ball") s.kind = SignalSpec::Kind::RandomBall;
  else bad(P + "type", "unknown signal type '" + type + "'");
  if (j.contains("value")) s.value = vec(j.at("value"), P + "value");
  if (j.contains("amplitude")) s.amplitude = num(j.at("amplitude"), P + "amplitude");
  if (j.contains("frequency")) s.frequency = num(j.at("frequency"), P + "frequency");
  if (j.contains("Ts")) s.Ts = num(j.at("Ts"), P + "Ts");
  if (j.contains("slope")) s.slope = num(j.at("slope"), P + "slope");
  if (j.contains("step_amplitude")) s.step_amplitude = num(j.at("step_amplitude"), P + "step_amplitude");
  if (j.contains("step_period")) s.step_period = integer(j.at("step_period"), P + "step_period");
  if (j.contains("bound")) s.bound = num(j.at("bound"), P + "bound");
  if (s.step_period < 1) bad(P + "step_period", "must be >= 1");
  if (!(s.bound >= 0)) bad(P + "bound", "must be >= 0");
  return s;
}

std::vector<double> grid(const json& j, const std::string& path) {
  const Vector v = vec(j, path);
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputValidation(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputValidation("scenario must be a JSON object");
  const std::string schema = need(j, "schema", "").is_string() ? j.at("schema").get<std::string>() : "";
  if (schema != kScenarioSchema) bad("schema", std::string("expected \"") + kScenarioSchema + "\"");

  Scenario sc;
  const json& sys = need(j, "system", "");
  if (sys.is_string()) {
    sc = builtin_scenario(sys.get<std::string>());
  } else if (sys.is_object()) {
    sc.plant = parse_plant(sys);
    sc.known_input = Vector::Zero(sc.plant.sys.m);
    sc.policy = DesignPolicy::Synthesize;
  } else {
    bad("system", "expected a builtin name or an object");
  }
  auto& s = sc.plant.sys;
  sc.name = j.value("name", sc.name.empty() ? std::string("scenario") : sc.name);
  if (j.contains("class")) {
    if (!j.at("class").is_string()) bad("class", "expected a string");
    sc.cls = j.at("class").get<std::string>();
  } else if (sys.is_object()) {
    sc.cls = sc.plant.classes.begin()->first;
  }
  if (!sc.plant.classes.count(sc.cls)) bad("class", "class '" + sc.cls + "' is not declared for this system");
  if (j.contains("horizon")) sc.horizon = integer(j.at("horizon"), "horizon");
  if (sc.horizon < 1) bad("horizon", "must be >= 1");
  if (j.contains("batch")) sc.batch = integer(j.at("batch"), "batch");
  if (sc.batch < 1) bad("batch", "must be >= 1");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) bad("seed", "expected a nonnegative integer");
    sc.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("input")) sc.input = parse_signal(j.at("input"), sc.input);
  if (sc.input.value.size() && sc.input.value.size() != s.p) bad("input.value", "expected length p");
  if (j.contains("known_input")) {
    sc.known_input = vec(j.at("known_input"), "known_input");
    if (sc.known_input.size() != s.m) bad("known_input", "expected length m");
  }
  if (j.contains("noise")) {
    const json& nz = j.at("noise");
    if (nz.contains("eta_w")) s.eta_w = num(nz.at("eta_w"), "noise.eta_w");
    if (nz.contains("eta_v")) s.eta_v = num(nz.at("eta_v"), "noise.eta_v");
    if (!(s.eta_w >= 0) || !(s.eta_v >= 0)) bad("noise", "bounds must be >= 0");
  }
  if (j.contains("initial")) {
    const json& in = j.at("initial");
    if (in.contains("x0_hat")) s.x0_hat = vec(in.at("x0_hat"), "initial.x0_hat");
    if (in.contains("delta0_x")) s.delta0_x = num(in.at("delta0_x"), "initial.delta0_x");
    if (in.contains("x0")) sc.x0 = vec(in.at("x0"), "initial.x0");
    if (s.x0_hat.size() != s.n) bad("initial.x0_hat", "expected length n");
    if (sc.x0 && sc.x0->size() != s.n) bad("initial.x0", "expected length n");
    if (!(s.delta0_x >= 0)) bad("initial.delta0_x", "must be >= 0");
  }
  if (j.contains("synthesis")) {
    const json& sy = j.at("synthesis");
    if (sy.contains("alpha_grid")) sc.synthesis.alpha_grid = grid(sy.at("alpha_grid"), "synthesis.alpha_grid");
    if (sy.contains("eps_grid")) sc.synthesis.eps_grid = grid(sy.at("eps_grid"), "synthesis.eps_grid");
    if (sy.contains("refine")) sc.synthesis.refine = sy.at("refine").get<bool>();
    if (sy.contains("convergent")) sc.convergent = sy.at("convergent").get<bool>();
    if (sy.contains("qcstar_sqrt")) sc.qcstar_sqrt = sy.at("qcstar_sqrt").get<bool>();
    if (sy.contains("kappa_scaled_hinf")) sc.synthesis.kappa_scaled_hinf = sy.at("kappa_scaled_hinf").get<bool>();
  }
  if (j.contains("designs")) {
    const json& ds = j.at("designs");
    if (!ds.is_object()) bad("designs", "expected an object keyed by class name");
    for (auto it = ds.begin(); it != ds.end(); ++it) {
      const std::string dp = "designs." + it.key() + ".";
      SuppliedDesign d;
      d.P = sized(matrix(need(it.value(), "P", dp), dp + "P"), s.n, s.n, dp + "P");
      d.L_tilde = matrix(need(it.value(), "L_tilde", dp), dp + "L_tilde");
      d.rho = it.value().contains("rho") ? num(it.value().at("rho"), dp + "rho") : kInf;
      d.alpha = it.value().contains("alpha") ? num(it.value().at("alpha"), dp + "alpha") : 0.0;
      sc.designs[it.key()] = d;
    }
  }
  if (j.contains("design_policy")) {
    const std::string p = j.at("design_policy").get<std::string>();
    if (p == "synthesize") sc.policy = DesignPolicy::Synthesize;
    else if (p == "supplied") sc.policy = DesignPolicy::Supplied;
    else if (p == "synthesize_or_supplied") sc.policy = DesignPolicy::SynthesizeOrSupplied;
    else bad("design_policy", "expected synthesize, supplied or synthesize_or_supplied");
  }
  return sc;
}

Scenario load_scenario(const std::string& path_or_name) {
  namespace fs = std::filesystem;
  if (!fs::exists(path_or_name)) {
    const auto names = builtin_names();
    if (std::find(names.begin(), names.end(), path_or_name) != names.end()) return builtin_scenario(path_or_name);
    throw IoError("cannot open scenario '" + path_or_name + "': no such file or builtin");
  }
  std::ifstream in(path_or_name);
  if (!in) throw IoError("cannot read scenario '" + path_or_name + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

// ---------------------------------------------------------------- synthesis and design

SynthesisResult synthesize(const Scenario& sc) {
  const NonlinearSystem s = sc.system();
  const TransformedSystem T = transform_system(s);
  const FixedGains g = fixed_gains(T, s.W);
  const MultiplierBlocks mb = class_multiplier_blocks(s.class_spec, s.n);
  return sc.convergent ? hinf_design_convergent(T, g, mb, sc.synthesis) : hinf_design(T, g, mb, sc.synthesis);
}

ObserverDesign design_for(const Scenario& sc) {
  const NonlinearSystem s = sc.system();
  auto use_supplied = [&]() {
    auto it = sc.designs.find(sc.cls);
    if (it == sc.designs.end())
      throw SynthesisInfeasible("no supplied design for class '" + sc.cls + "' in scenario '" + sc.name + "'");
    const auto& d = it->second;
    return make_design(s, d.P, d.L_tilde, d.rho, d.alpha, "supplied", sc.qcstar_sqrt);
  };
  if (sc.policy == DesignPolicy::Supplied) return use_supplied();
  try {
    return make_design(s, synthesize(sc), sc.qcstar_sqrt);
  } catch (const SynthesisInfeasible&) {
    if (sc.policy == DesignPolicy::SynthesizeOrSupplied && sc.designs.count(sc.cls)) return use_supplied();
    throw;
  }
}

// ---------------------------------------------------------------- simulation

bool contained(double err, double bound) {
  if (std::isnan(bound)) return std::isnan(err);  // no input estimate at k = 0
  if (!std::isfinite(err)) return false;          // a diverged error cannot be certified
  return err <= bound * (1 + 1e-9) + 1e-12;
}

Trace simulate(const Scenario& sc, const ObserverDesign& d, std::uint64_t seed) {
  const NonlinearSystem& s = d.sys;
  std::mt19937_64 rng(seed);
  std::mt19937_64 input_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Vector u = sc.known_input.size() == s.m ? sc.known_input : Vector::Zero(s.m);

  Vector x = sc.x0 ? *sc.x0 : Vector(s.x0_hat + sample_bounded_noise(s.n, s.delta0_x, rng));
  Vector d_prev = signal_at(sc.input, 0, s.p, input_rng);
  Vector v = sample_bounded_noise(s.l, s.eta_v, rng);
  Vector y = s.C * x + s.D_at(0) * u + s.H * d_prev + v;
  ObserverState st = initialize_from_output(d, s.x0_hat, s.delta0_x, y, u);

  Trace t;
  t.n = s.n;
  t.p = s.p;
  t.design_source = d.source;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  TraceRow r0;
  r0.k = 0;
  r0.x = x;
  r0.x_hat = st.x_hat;
  r0.delta_x = st.delta_x_bar;
  r0.d = r0.d_hat = Vector::Constant(s.p, nan);
  r0.delta_d = nan;
  r0.err_x = (x - st.x_hat).norm();
  r0.err_d = nan;
  if (!contained(r0.err_x, r0.delta_x)) ++t.violations;
  t.rows.push_back(r0);

  for (int k = 1; k <= sc.horizon; ++k) {
    const Vector w = sample_bounded_noise(s.n, s.eta_w, rng);
    x = s.f(k - 1, x) + s.B_at(k - 1) * u + s.G * d_prev + s.W * w;
    const Vector d_k = signal_at(sc.input, k, s.p, input_rng);
    v = sample_bounded_noise(s.l, s.eta_v, rng);
    y = s.C * x + s.D_at(k) * u + s.H * d_k + v;
    const StepOutput out = step(d, st, y, u);
    st = out.state;
    TraceRow r;
    r.k = k;
    r.x = x;
    r.x_hat = out.x.center;
    r.delta_x = out.x.radius;
    r.d = d_prev;
    r.d_hat = out.d_prev.center;
    r.delta_d = out.d_prev.radius;
    r.err_x = (x - r.x_hat).norm();
    r.err_d = (d_prev - r.d_hat).norm();
    if (!contained(r.err_x, r.delta_x) || !contained(r.err_d, r.delta_d)) ++t.violations;
    t.rows.push_back(std::move(r));
    d_prev = d_k;
  }
  return t;
}

Trace simulate(const Scenario& sc, std::uint64_t seed) { return simulate(sc, design_for(sc), seed); }

StepStats step_stats(std::vector<double> v) {
  StepStats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * (v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
  };
  s.min = v.front();
  s.max = v.back();
  s.q1 = q(0.25);
  s.median = q(0.5);
  s.q3 = q(0.75);
  return s;
}

std::uint64_t run_seed(std::uint64_t master_seed, int index) {
  // splitmix64 of (master, index)
  std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

BatchSummary run_batch(const Scenario& sc, const ObserverDesign& d, int runs, std::uint64_t master_seed) {
  if (runs < 1) throw ContractViolation("run_batch: runs must be >= 1");
  std::vector<Trace> traces(static_cast<std::size_t>(runs));
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), runs));
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w]() {
      for (int i = static_cast<int>(w); i < runs; i += static_cast<int>(workers))
        traces[static_cast<std::size_t>(i)] = simulate(sc, d, run_seed(master_seed, i));
    }));
  }
  for (auto& j : jobs) j.get();

  BatchSummary s;
  s.runs = runs;
  s.design_source = d.source;
  const std::size_t steps = traces[0].rows.size();
  for (const auto& t : traces) {
    s.violations += t.violations;
    s.violations_per_run.push_back(t.violations);
  }
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<double> ex, ed;
    double bx = 0, bd = 0;
    for (const auto& t : traces) {
      ex.push_back(t.rows[k].err_x);
      ed.push_back(t.rows[k].err_d);
      bx = std::max(bx, t.rows[k].delta_x);
      bd = t.rows[k].delta_d;
    }
    s.k.push_back(static_cast<int>(k));
    s.err_x.push_back(step_stats(ex));
    s.err_d.push_back(step_stats(ed));
    s.delta_x.push_back(bx);
    s.delta_d.push_back(bd);
  }
  return s;
}

BatchSummary run_batch(const Scenario& sc) { return run_batch(sc, design_for(sc), sc.batch, sc.seed); }

// ---------------------------------------------------------------- export

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void close_checked(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

std::string trace_csv_header(int n, int p) {
  std::string h = "k";
  for (int i = 0; i < n; ++i) h += ",x[" + std::to_string(i) + "]";
  for (int i = 0; i < n; ++i) h += ",xhat[" + std::to_string(i) + "]";
  h += ",delta_x";
  for (int i = 0; i < p; ++i) h += ",d[" + std::to_string(i) + "]";
  for (int i = 0; i < p; ++i) h += ",dhat[" + std::to_string(i) + "]";
  h += ",delta_d,err_x,err_d";
  return h;
}

void export_trace_csv(const Trace& t, const std::string& path) {
  auto out = open_out(path);
  out << trace_csv_header(t.n, t.p) << "\n";
  for (const auto& r : t.rows) {
    out << r.k;
    for (int i = 0; i < t.n; ++i) out << "," << format_double(r.x(i));
    for (int i = 0; i < t.n; ++i) out << "," << format_double(r.x_hat(i));
    out << "," << format_double(r.delta_x);
    for (int i = 0; i < t.p; ++i) out << "," << format_double(r.d(i));
    for (int i = 0; i < t.p; ++i) out << "," << format_double(r.d_hat(i));
    out << "," << format_double(r.delta_d) << "," << format_double(r.err_x) << "," << format_double(r.err_d)
        << "\n";
  }
  close_checked(out, path);
}

Trace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file '" + path + "'");
  Trace t;
  for (std::size_t pos = 0; (pos = line.find(",x[", pos)) != std::string::npos; ++pos) ++t.n;
  for (std::size_t pos = 0; (pos = line.find(",d[", pos)) != std::string::npos; ++pos) ++t.p;
  if (line != trace_csv_header(t.n, t.p)) throw IoError("unexpected trace header in '" + path + "'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    const std::size_t need_cols = 1 + 2 * t.n + 1 + 2 * t.p + 3;
    if (v.size() != need_cols) throw IoError("malformed trace row in '" + path + "'");
    TraceRow r;
    std::size_t c = 0;
    r.k = static_cast<int>(v[c++]);
    r.x.resize(t.n);
    r.x_hat.resize(t.n);
    r.d.resize(t.p);
    r.d_hat.resize(t.p);
    for (int i = 0; i < t.n; ++i) r.x(i) = v[c++];
    for (int i = 0; i < t.n; ++i) r.x_hat(i) = v[c++];
    r.delta_x = v[c++];
    for (int i = 0; i < t.p; ++i) r.d(i) = v[c++];
    for (int i = 0; i < t.p; ++i) r.d_hat(i) = v[c++];
    r.delta_d = v[c++];
    r.err_x = v[c++];
    r.err_d = v[c++];
    t.rows.push_back(std::move(r));
  }
  return t;
}

void export_summary_csv(const BatchSummary& s, const std::string& path) {
  auto out = open_out(path);
  out << "k,err_x_min,err_x_q1,err_x_median,err_x_q3,err_x_max,delta_x,"
         "err_d_min,err_d_q1,err_d_median,err_d_q3,err_d_max,delta_d\n";
  for (std::size_t i = 0; i < s.k.size(); ++i) {
    const auto& a = s.err_x[i];
    const auto& b = s.err_d[i];
    out << s.k[i];
    for (double v : {a.min, a.q1, a.median, a.q3, a.max, s.delta_x[i], b.min, b.q1, b.median, b.q3, b.max,
                     s.delta_d[i]})
      out << "," << format_double(v);
    out << "\n";
  }
  close_checked(out, path);
}

namespace {

// Minimal SVG plotting on a log10 value axis.
struct Plot {
  double W = 800, H = 400, ml = 60, mr = 20, mt = 30, mb = 40;
  double kmax = 1, lo = -3, hi = 1;
  std::ostringstream body;

  static bool plottable(double v) { return std::isfinite(v) && v > 0; }
  double X(double k) const { return ml + (W - ml - mr) * k / std::max(1.0, kmax); }
  double Y(double v) const {
    const double lv = std::clamp(std::log10(v), lo, hi);
    return mt + (H - mt - mb) * (hi - lv) / (hi - lo);
  }
  void range(const std::vector<double>& vals) {
    double a = kInf, b = -kInf;
    for (double v : vals)
      if (plottable(v)) {
        a = std::min(a, std::log10(v));
        b = std::max(b, std::log10(v));
      }
    if (a == kInf) return;
    lo = std::floor(a);
    hi = std::max(lo + 1, std::ceil(std::min(b, lo + 12)));
  }
  void polyline(const std::vector<double>& k, const std::vector<double>& v, const char* color, const char* dash) {
    std::ostringstream pts;
    bool open = false;
    auto flush = [&]() {
      if (open)
        body << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\"" << dash << " points=\""
             << pts.str() << "\"/>\n";
      pts.str("");
      open = false;
    };
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!plottable(v[i])) {
        flush();
        continue;
      }
      pts << X(k[i]) << "," << Y(v[i]) << " ";
      open = true;
    }
    flush();
  }
  std::string svg(const std::string& title, const std::string& legend) const {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << ml << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); ++e) {
      const double y = Y(std::pow(10.0, e));
      o << "<text x=\"5\" y=\"" << y + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">1e" << e << "</text>\n";
    }
    o << "<text x=\"" << W - mr - 60 << "\" y=\"" << H - 10 << "\" font-family=\"sans-serif\" font-size=\"11\">k = "
      << kmax << "</text>\n";
    o << "<text x=\"" << ml + 200 << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"11\">" << legend
      << "</text>\n";
    o << body.str() << "</svg>\n";
    return o.str();
  }
};

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  close_checked(out, path);
}

}  // namespace

void export_trace_svg(const Trace& t, const std::string& dir) {
  std::vector<double> k, ex, bx, ed, bd;
  for (const auto& r : t.rows) {
    k.push_back(r.k);
    ex.push_back(r.err_x);
    bx.push_back(r.delta_x);
    ed.push_back(r.err_d);
    bd.push_back(r.delta_d);
  }
  for (int ch = 0; ch < 2; ++ch) {
    const auto& e = ch == 0 ? ex : ed;
    const auto& b = ch == 0 ? bx : bd;
    Plot p;
    p.kmax = k.empty() ? 1 : k.back();
    std::vector<double> all = e;
    all.insert(all.end(), b.begin(), b.end());
    p.range(all);
    p.polyline(k, b, "red", " stroke-dasharray=\"6,3\"");
    p.polyline(k, e, "blue", "");
    const std::string name = ch == 0 ? "state" : "input";
    write_text((std::filesystem::path(dir) / ("trace_err_" + std::string(ch == 0 ? "x" : "d") + ".svg")).string(),
               p.svg(name + " error norm vs bound (log scale)", "blue: error, red dashed: bound"));
  }
}

void export_summary_svg(const BatchSummary& s, const std::string& dir) {
  for (int ch = 0; ch < 2; ++ch) {
    const auto& st = ch == 0 ? s.err_x : s.err_d;
    const auto& b = ch == 0 ? s.delta_x : s.delta_d;
    std::vector<double> k(s.k.begin(), s.k.end()), all = b;
    for (const auto& q : st) {
      all.push_back(q.min);
      all.push_back(q.max);
    }
    Plot p;
    p.kmax = k.empty() ? 1 : k.back();
    p.range(all);
    // One box every few steps keeps the file readable.
    const std::size_t stride = std::max<std::size_t>(1, k.size() / 50);
    const double half = 0.3 * (p.X(static_cast<double>(stride)) - p.X(0));
    for (std::size_t i = 0; i < k.size(); i += stride) {
      const auto& q = st[i];
      if (!Plot::plottable(q.min) || !Plot::plottable(q.max)) continue;
      const double x = p.X(k[i]);
      p.body << "<line x1=\"" << x << "\" y1=\"" << p.Y(q.min) << "\" x2=\"" << x << "\" y2=\"" << p.Y(q.max)
             << "\" stroke=\"gray\"/>\n";
      if (Plot::plottable(q.q1) && Plot::plottable(q.q3))
        p.body << "<rect x=\"" << x - half << "\" y=\"" << p.Y(q.q3) << "\" width=\"" << 2 * half << "\" height=\""
               << std::max(0.5, p.Y(q.q1) - p.Y(q.q3)) << "\" fill=\"lightblue\" stroke=\"blue\"/>\n";
      if (Plot::plottable(q.median))
        p.body << "<line x1=\"" << x - half << "\" y1=\"" << p.Y(q.median) << "\" x2=\"" << x + half << "\" y2=\""
               << p.Y(q.median) << "\" stroke=\"black\"/>\n";
    }
    p.polyline(k, b, "red", " stroke-dasharray=\"6,3\"");
    const std::string name = ch == 0 ? "state" : "input";
    write_text((std::filesystem::path(dir) / ("batch_err_" + std::string(ch == 0 ? "x" : "d") + ".svg")).string(),
               p.svg(name + " error over " + std::to_string(s.runs) + " runs (log scale)",
                     "boxes: quartiles, whiskers: min/max, red dashed: bound"));
  }
}

}  // namespace siso
