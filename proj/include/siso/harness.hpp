#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "siso/observer.hpp"
#include "siso/synthesis.hpp"
#include "siso/sysmodel.hpp"

namespace siso {

inline constexpr const char* kScenarioSchema = "siso-scenario/1";

// Unknown-input signal d_k.
struct SignalSpec {
  enum class Kind { Constant, Sinusoid, Ramp, StepTrain, SineSteps, RandomBall };
  Kind kind = Kind::Constant;
  Vector value;            // constant value (length p); zero when empty
  double amplitude = 1.0;  // sinusoid / sine part of SineSteps
  double frequency = 0.5;  // Hz
  double Ts = 1.0;         // sampling time used to turn k into seconds
  double slope = 0.05;     // ramp: d_k = slope * k
  double step_amplitude = 1.0;
  int step_period = 100;   // steps between level changes of the step train
  double bound = 0.2;      // random-in-ball radius
};

Vector signal_at(const SignalSpec& s, int k, int p, std::mt19937_64& rng);

// Plant description with the function classes it belongs to, keyed "0", "I", "II", "III".
struct PlantModel {
  NonlinearSystem sys;
  std::map<std::string, FunctionClassSpec> classes;
  std::optional<Matrix> linear_part;  // A of the linear part of f, for detectability reports
};

struct SuppliedDesign {
  Matrix P, L_tilde;
  double rho = kInf;
  double alpha = 0;
};

enum class DesignPolicy { Synthesize, Supplied, SynthesizeOrSupplied };

struct Scenario {
  std::string name;
  PlantModel plant;
  std::string cls = "I";
  int horizon = 500;
  SignalSpec input;
  Vector known_input;  // constant u (length m)
  std::optional<Vector> x0;  // fixed initial state; otherwise random in the ball around x0_hat
  int batch = 1;
  std::uint64_t seed = 1;
  SynthesisOptions synthesis;
  bool convergent = false;
  bool qcstar_sqrt = false;
  std::map<std::string, SuppliedDesign> designs;  // per class
  DesignPolicy policy = DesignPolicy::Synthesize;

  // The plant with class_spec set to `cls`. Throws InputValidation for unknown classes.
  NonlinearSystem system() const;
};

std::vector<std::string> builtin_names();
// Throws InputValidation for unknown names.
Scenario builtin_scenario(const std::string& name);

// A file path, or a builtin name when no such file exists. Throws IoError when the file
// cannot be read and InputValidation (naming the key) on schema violations.
Scenario load_scenario(const std::string& path_or_name);
Scenario parse_scenario(const std::string& json_text);

// Uniform in the closed 2-norm ball: uniform direction, radius bound * U^{1/dim}.
Vector sample_bounded_noise(int dim, double bound, std::mt19937_64& rng);

// Runs the configured search (plain or convergent variant).
SynthesisResult synthesize(const Scenario& sc);

// Design used by simulate/batch, following the scenario's policy.
ObserverDesign design_for(const Scenario& sc);

struct TraceRow {
  int k = 0;
  Vector x, x_hat;
  double delta_x = 0;
  Vector d, d_hat;  // d_{k-1} and its estimate (NaN at k = 0)
  double delta_d = 0;
  double err_x = 0, err_d = 0;
};

struct Trace {
  int n = 0, p = 0;
  std::string design_source;
  std::vector<TraceRow> rows;
  int violations = 0;
};

// Containment with a small relative slack for rounding: err <= bound * (1 + 1e-9) + 1e-12.
// Non-finite errors never count as contained.
bool contained(double err, double bound);

Trace simulate(const Scenario& sc, const ObserverDesign& d, std::uint64_t seed);
Trace simulate(const Scenario& sc, std::uint64_t seed);

struct StepStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};
StepStats step_stats(std::vector<double> v);

struct BatchSummary {
  int runs = 0;
  std::string design_source;
  std::vector<int> k;
  std::vector<StepStats> err_x, err_d;
  std::vector<double> delta_x, delta_d;
  int violations = 0;
  std::vector<int> violations_per_run;
};

// Seeds are derived from the master seed; runs execute concurrently and are reduced in seed order.
BatchSummary run_batch(const Scenario& sc, const ObserverDesign& d, int runs, std::uint64_t master_seed);
BatchSummary run_batch(const Scenario& sc);
std::uint64_t run_seed(std::uint64_t master_seed, int index);

std::string trace_csv_header(int n, int p);
void export_trace_csv(const Trace& t, const std::string& path);
Trace read_trace_csv(const std::string& path);
void export_summary_csv(const BatchSummary& s, const std::string& path);
// Error norms against their bounds on a log axis.
void export_trace_svg(const Trace& t, const std::string& dir);
// One box-plot file per channel (state error and input error).
void export_summary_svg(const BatchSummary& s, const std::string& dir);

std::string format_double(double v);

}  // namespace siso
