#include "sdgd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sdgd/errors.hpp"

namespace sdgd {

void validate(const TrainConfig& c) {
  if (c.d < 2) throw ConfigError("d must be at least 2");
  if (c.hidden.empty()) throw ConfigError("hidden must list at least one layer width");
  for (std::size_t w : c.hidden) {
    if (w == 0) throw ConfigError("hidden layer widths must be positive");
  }
  if (c.batch_points == 0) throw ConfigError("batch_points must be at least 1");
  if (c.backward_dims == 0) throw ConfigError("backward_dims must be at least 1");
  if (c.forward_dims == 0) throw ConfigError("forward_dims must be at least 1");
  if (!c.replacement && c.backward_dims > c.d) {
    throw ConfigError("backward_dims exceeds d without replacement");
  }
  if (!c.replacement && c.algorithm == Algorithm::Algo2 && c.forward_dims > c.d) {
    throw ConfigError("forward_dims exceeds d without replacement");
  }
  if (c.algorithm == Algorithm::Accumulated) throw ConfigError("algorithm must be full, algo1, algo2 or algo3");
  if (c.accumulation == 0) throw ConfigError("accumulation must be at least 1");
  if (!(c.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(c.decay > 0.0 && c.decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (c.test_points == 0) throw ConfigError("test_points must be at least 1");
  if (c.reference_samples == 0) throw ConfigError("reference_samples must be at least 1");
  if (c.monitor_points == 0) throw ConfigError("monitor_points must be at least 1");
  if (c.eval_interval == 0) throw ConfigError("eval_interval must be at least 1");
  const bool hjb = c.problem == ProblemKind::HjbLog || c.problem == ProblemKind::HjbRosenbrock;
  if (hjb && c.adversarial.enabled && (c.adversarial.dims == 0 || c.adversarial.dims > c.d)) {
    throw ConfigError("adversarial.dims must lie in [1, d]");
  }
  if (!(c.adversarial.step_size >= 0.0)) throw ConfigError("adversarial.step_size must be >= 0");
}

std::vector<std::size_t> network_widths(const TrainConfig& c) {
  std::vector<std::size_t> widths;
  widths.push_back(make_problem(c.problem, c.d, c.problem_seed).input_dim());
  widths.insert(widths.end(), c.hidden.begin(), c.hidden.end());
  widths.push_back(1);
  return widths;
}

PdeProblem make_problem(const TrainConfig& c) { return make_problem(c.problem, c.d, c.problem_seed); }

TestSet make_test_set(const TrainConfig& c, const PdeProblem& problem) {
  return make_test_set(problem, c.test_points, c.data_seed, c.reference_samples);
}

double predict(const PdeProblem& problem, const NetworkParams& params, const Point& p) {
  const double u = forward(params, network_input(problem, p));
  if (problem.is_hjb()) return (1.0 - p.t) * u + terminal_cost(problem, p.x);
  return (1.0 - p.x.squaredNorm()) * u;
}

double relative_l2(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and truth sizes differ");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double e = pred[k] - truth[k];
    num += e * e;
    den += truth[k] * truth[k];
  }
  if (den == 0.0) throw MetricError("relative L2 error is undefined for an all-zero reference");
  return std::sqrt(num) / std::sqrt(den);
}

double evaluate(const NetworkParams& params, const PdeProblem& problem, const TestSet& test_set,
                std::size_t workers) {
  if (test_set.points.empty()) throw ArgumentError("empty test set");
  std::vector<double> pred(test_set.points.size());
  parallel_for(pred.size(), workers,
               [&](std::size_t k) { pred[k] = predict(problem, params, test_set.points[k]); });
  return relative_l2(pred, test_set.truth);
}

RunReport train(const TrainConfig& config, const EvalCallback& on_eval) {
  validate(config);
  const PdeProblem problem = make_problem(config);
  return train(config, make_test_set(config, problem), on_eval);
}

RunReport train(const TrainConfig& config, const TestSet& test_set, const EvalCallback& on_eval) {
  validate(config);
  using clock = std::chrono::steady_clock;
  const PdeProblem problem = make_problem(config);
  const std::size_t n_terms = problem.n_terms();
  const EstimatorOptions opts{config.workers};

  RunReport report;
  report.params = init_params(network_widths(config), config.activation, config.model_seed, config.bias);
  report.adam = AdamState(report.params.size());

  RngStream monitor_stream(config.data_seed, 0, Purpose::Monitor);
  const std::vector<Point> monitor = sample_points(problem, config.monitor_points, monitor_stream);
  const LrSchedule schedule{config.schedule, config.lr, config.epochs, config.decay};
  const bool adversarial =
      problem.is_hjb() && config.adversarial.enabled && config.adversarial.steps > 0;

  double wall = 0.0;
  double interval_wall = 0.0;
  std::size_t interval_epochs = 0;
  std::size_t term_evals = 0;

  auto record = [&](std::size_t epoch) {
    EvalRecord r;
    r.epoch = epoch;
    r.loss = normalized_loss(problem, report.params, monitor, opts);
    r.rel_l2 = evaluate(report.params, problem, test_set, config.workers);
    r.wall_s = wall;
    r.step_s = interval_epochs > 0 ? interval_wall / static_cast<double>(interval_epochs) : 0.0;
    r.term_evals = term_evals;
    interval_wall = 0.0;
    interval_epochs = 0;
    if (!report.diverged && (!std::isfinite(r.loss) || !std::isfinite(r.rel_l2))) {
      report.diverged = true;
      std::ostringstream msg;
      msg << "non-finite loss or error at epoch " << epoch << " (loss " << r.loss << ", rel_l2 "
          << r.rel_l2 << ")";
      report.diagnostic = msg.str();
    }
    report.records.push_back(r);
    if (on_eval) on_eval(r);
  };

  record(0);
  for (std::size_t epoch = 0; epoch < config.epochs && !report.diverged; ++epoch) {
    const auto start = clock::now();
    RngStream point_stream(config.data_seed, epoch, Purpose::ResidualPoints);
    std::vector<Point> points = sample_points(problem, config.batch_points, point_stream);
    if (adversarial) {
      points = adversarial_ascend(problem, report.params, points, config.adversarial.dims,
                                  config.adversarial.steps, config.adversarial.step_size,
                                  RngStream(config.data_seed, epoch, Purpose::Adversarial),
                                  config.workers);
    }

    std::vector<GradEstimate> parts;
    for (std::size_t a = 0; a < config.accumulation; ++a) {
      const auto sub = static_cast<std::uint32_t>(a);
      RngStream back(config.data_seed, epoch, Purpose::BackwardDims, sub);
      RngStream fwd(config.data_seed, epoch, Purpose::ForwardDims, sub);
      switch (config.algorithm) {
        case Algorithm::Full:
          parts.push_back(full_grad(problem, report.params, points, opts));
          break;
        case Algorithm::Algo1:
          parts.push_back(grad_algo1(problem, report.params, points,
                                     sample_dims(n_terms, config.backward_dims, config.replacement, back),
                                     opts));
          break;
        case Algorithm::Algo2: {
          const DimSet I = sample_dims(n_terms, config.backward_dims, config.replacement, back);
          const DimSet J = sample_dims(n_terms, config.forward_dims, config.replacement, fwd);
          parts.push_back(grad_algo2(problem, report.params, points, I, J, opts));
          break;
        }
        case Algorithm::Algo3:
        case Algorithm::Accumulated:
          parts.push_back(grad_algo3(problem, report.params, points,
                                     sample_dims(n_terms, config.backward_dims, config.replacement, back),
                                     opts));
          break;
      }
    }
    const GradEstimate g = accumulate(parts);
    term_evals += g.meta.term_evals;
    if (!g.grad.data.allFinite()) {
      report.diverged = true;
      report.diagnostic = "non-finite gradient at epoch " + std::to_string(epoch);
    } else {
      adam_step(report.adam, report.params, g.grad, lr_at(schedule, static_cast<std::int64_t>(epoch)));
    }
    const double dt = std::chrono::duration<double>(clock::now() - start).count();
    wall += dt;
    interval_wall += dt;
    ++interval_epochs;
    report.epochs_run = epoch + 1;
    if (report.diverged) {
      record(epoch + 1);
      break;
    }
    if ((epoch + 1) % config.eval_interval == 0 || epoch + 1 == config.epochs) record(epoch + 1);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Files

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'D', 'G', 'D', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated checkpoint");
  return v;
}

void put_vector(std::ostream& out, const Vector& v) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vector get_vector(std::istream& in, std::size_t expected) {
  const auto n = get<std::uint64_t>(in);
  if (n != expected) throw IoError("checkpoint optimizer state does not match the parameters");
  Vector v(static_cast<Eigen::Index>(n));
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw IoError("truncated checkpoint");
  }
  return v;
}

}  // namespace

void save_checkpoint(const NetworkParams& params, const AdamState& state,
                     const std::filesystem::path& path) {
  std::ostringstream out(std::ios::binary);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointFormatVersion);
  write_params(out, params);
  const bool has_state = state.m.size() > 0;
  if (has_state && (static_cast<std::size_t>(state.m.size()) != params.size() ||
                    static_cast<std::size_t>(state.v.size()) != params.size())) {
    throw ContractError("optimizer state does not match the parameters");
  }
  put<std::uint8_t>(out, has_state ? 1 : 0);
  put<std::uint64_t>(out, state.step);
  put<double>(out, state.beta1);
  put<double>(out, state.beta2);
  put<double>(out, state.eps);
  if (has_state) {
    put_vector(out, state.m);
    put_vector(out, state.v);
  }
  write_file_atomic(path, out.str());
}

std::pair<NetworkParams, AdamState> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic))) throw IoError("truncated checkpoint");
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw IoError("not a checkpoint file");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointFormatVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointFormatVersion) + ")");
  }
  NetworkParams params = read_params(in);
  AdamState state;
  const auto has_state = get<std::uint8_t>(in);
  if (has_state > 1) throw IoError("corrupt checkpoint state flag");
  state.step = get<std::uint64_t>(in);
  state.beta1 = get<double>(in);
  state.beta2 = get<double>(in);
  state.eps = get<double>(in);
  if (has_state) {
    state.m = get_vector(in, params.size());
    state.v = get_vector(in, params.size());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in checkpoint");
  return {std::move(params), std::move(state)};
}

void emit_metrics(const RunReport& report, const std::filesystem::path& path) {
  std::string text = std::string(kMetricsHeader) + "\n";
  char line[256];
  for (const EvalRecord& r : report.records) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.9f,%.9f,%zu\n", r.epoch, r.loss, r.rel_l2,
                  r.wall_s, r.step_s, r.term_evals);
    text += line;
  }
  write_file_atomic(path, text);
}

}  // namespace sdgd
