#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sdgd/estimator.hpp"
#include "sdgd/network.hpp"
#include "sdgd/optimizer.hpp"
#include "sdgd/pde.hpp"
#include "sdgd/sampling.hpp"

namespace sdgd {

struct AdversarialConfig {
  bool enabled = true;  // HJB only
  std::size_t steps = 1;
  double step_size = 1e-2;
  std::size_t dims = 10;
};

struct TrainConfig {
  ProblemKind problem = ProblemKind::SineGordon;
  std::size_t d = 100;
  std::uint64_t problem_seed = 0;
  std::uint64_t model_seed = 1;
  std::uint64_t data_seed = 2;

  std::vector<std::size_t> hidden = {128, 128, 128};
  Activation activation = Activation::Tanh;
  bool bias = true;

  Algorithm algorithm = Algorithm::Algo3;
  std::size_t batch_points = 100;   // |B|
  std::size_t backward_dims = 100;  // |I|
  std::size_t forward_dims = 100;   // |J|, algo2 only
  bool replacement = false;
  std::size_t accumulation = 1;

  std::size_t epochs = 10000;
  double lr = 1e-3;
  ScheduleKind schedule = ScheduleKind::LinearToZero;
  double decay = 0.9995;

  AdversarialConfig adversarial;

  std::size_t test_points = kDefaultTestPoints;
  std::size_t reference_samples = kDefaultReferenceSamples;
  std::size_t monitor_points = 100;
  std::size_t eval_interval = 100;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());

  std::string output_dir = "out";
  std::string metrics_file = "metrics.csv";
  std::string checkpoint_file = "checkpoint.bin";
};

/// Throws ConfigError describing the first inconsistent field.
void validate(const TrainConfig& config);

/// Widths of the surrogate: input size, hidden layers, 1.
std::vector<std::size_t> network_widths(const TrainConfig& config);

struct EvalRecord {
  std::size_t epoch = 0;
  double loss = 0.0;    // exact normalized loss on the monitor batch
  double rel_l2 = 0.0;  // relative L2 error on the test set
  double wall_s = 0.0;  // cumulative training time, evaluation excluded
  double step_s = 0.0;  // mean seconds per epoch since the previous record
  std::size_t term_evals = 0;  // cumulative
};

struct RunReport {
  std::vector<EvalRecord> records;
  bool diverged = false;
  std::string diagnostic;
  std::size_t epochs_run = 0;
  NetworkParams params;
  AdamState adam;

  const EvalRecord& final_record() const { return records.back(); }
};

/// Called after every evaluation record; used for progress output.
using EvalCallback = std::function<void(const EvalRecord&)>;

RunReport train(const TrainConfig& config, const EvalCallback& on_eval = {});

/// Same loop, reusing an already built test set (e.g. shared across runs).
RunReport train(const TrainConfig& config, const TestSet& test_set, const EvalCallback& on_eval = {});

/// Value of the hard-constrained model at a point.
double predict(const PdeProblem& problem, const NetworkParams& params, const Point& p);

/// |pred - truth|_2 / |truth|_2. Throws MetricError when truth is all zero.
double relative_l2(const std::vector<double>& pred, const std::vector<double>& truth);

double evaluate(const NetworkParams& params, const PdeProblem& problem, const TestSet& test_set,
                std::size_t workers = 1);

PdeProblem make_problem(const TrainConfig& config);
TestSet make_test_set(const TrainConfig& config, const PdeProblem& problem);

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Written to a temporary file and renamed into place.
void save_checkpoint(const NetworkParams& params, const AdamState& state,
                     const std::filesystem::path& path);
std::pair<NetworkParams, AdamState> load_checkpoint(const std::filesystem::path& path);

inline constexpr const char* kMetricsHeader = "epoch,loss,rel_l2,wall_s,step_s,term_evals";

void emit_metrics(const RunReport& report, const std::filesystem::path& path);

/// Writes `contents` next to `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace sdgd
