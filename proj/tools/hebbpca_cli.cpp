// hebbpca: command-line front end for data generation, training, the
// eigen oracle, balancing, network simulation and loss evaluation.
//
// Exit status: 0 success, 1 usage error, 2 data or validation error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "hebbpca.hpp"

namespace {

using namespace hebbpca;
using json = nlohmann::json;

constexpr const char* kVersion = "1.0.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "sha256 failed for " + path);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = io::parse_double(item);
    if (!v) throw UsageError("cannot parse list entry '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

// Resolved parameters in flag form, replayable through run_command.
class Resolved {
 public:
  explicit Resolved(std::string command) : command_(std::move(command)) {}

  void set(const std::string& flag, const std::string& value) { values_.emplace_back(flag, value); }
  void set(const std::string& flag, double value) { set(flag, io::format_double(value)); }
  void set(const std::string& flag, std::uint64_t value) { set(flag, std::to_string(value)); }
  void set(const std::string& flag, std::size_t value, int) { set(flag, std::to_string(value)); }
  void flag(const std::string& flag) { flags_.push_back(flag); }
  void input(const std::string& path) { inputs_.push_back(path); }
  void output(const std::string& path) { outputs_.push_back(path); }

  std::vector<std::string> argv() const {
    std::vector<std::string> out{command_};
    for (const auto& [k, v] : values_) {
      out.push_back("--" + k);
      out.push_back(v);
    }
    for (const auto& f : flags_) out.push_back("--" + f);
    return out;
  }

  /// Manifest beside the first output: <output>.manifest.json
  void write_manifest() const {
    json m;
    m["tool"] = "hebbpca";
    m["version"] = kVersion;
    m["command"] = command_;
    m["arguments"] = argv();
    json params = json::object();
    for (const auto& [k, v] : values_) params[k] = v;
    for (const auto& f : flags_) params[f] = true;
    m["parameters"] = params;
    json in = json::object();
    for (const auto& p : inputs_) in[p] = sha256_file(p);
    json out = json::object();
    for (const auto& p : outputs_) out[p] = sha256_file(p);
    m["inputs"] = in;
    m["outputs"] = out;
    auto f = io::open_out(outputs_.front() + ".manifest.json");
    f << m.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> values_;
  std::vector<std::string> flags_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

DataMatrix load_data(const std::string& path) { return center(io::read_data(path)); }

// Trained bases are orthonormal only up to the training tolerance. Rows
// within kLearnedDefect are re-orthonormalized; anything worse is rejected.
constexpr double kLearnedDefect = 1e-3;

WeightBasis accept_basis(const WeightBasis& basis) {
  const double defect = orthonormality_defect(basis);
  if (defect <= default_tolerances().orthonormal) return basis;
  if (defect > kLearnedDefect) {
    std::ostringstream msg;
    msg << "basis is not orthonormal (defect " << defect << ")";
    throw Error(ErrorCode::NonOrthonormalBasis, msg.str());
  }
  std::cerr << "hebbpca: warning: re-orthonormalizing basis with defect " << defect << '\n';
  return orthonormalize(basis.rows());
}

double default_eta(const DataMatrix& data) {
  const Spectrum s = jacobi_eigen(covariance(data));
  if (!(s.value(0) > 0.0)) throw Error(ErrorCode::DegenerateData, "covariance is the zero matrix");
  return 0.1 / s.value(0);
}

Schedule parse_schedule(const std::string& s) {
  if (s == "constant") return Schedule::Constant;
  if (s == "inverse-time") return Schedule::InverseTime;
  throw UsageError("unknown schedule '" + s + "'");
}

// ---- subcommand options ----

struct GenOptions {
  std::size_t dims = 0;
  std::size_t samples = 0;
  std::string spectrum;
  std::uint64_t seed = 0;
  std::string out;
  bool header = false;
};

struct TrainOptions {
  std::string algo;
  std::size_t components = 1;
  std::optional<double> eta;
  std::size_t epochs = 1000;
  double tol = 1e-8;
  std::string schedule = "constant";
  std::uint64_t seed = 0;
  std::string data;
  std::string out;
  std::string trace;
  bool oracle = false;
};

struct EigenOptions {
  std::string data;
  std::string out;
};

struct BalanceOptions {
  std::string weights;
  std::string data;
  std::string out;
  bool orthonormalize = false;
};

struct SimulateOptions {
  std::size_t components = 1;
  double drop = 0.0;
  double noise = 0.0;
  std::size_t rounds = 1000;
  std::string failures;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> channel_seed;
  std::optional<double> eta;
  std::string schedule = "constant";
  std::string data;
  std::string out;
  std::string trace;
};

struct EvalOptions {
  std::string weights;
  std::string data;
  std::size_t lose = 1;
  std::string report;
};

struct ReplayOptions {
  std::string manifest;
};

// ---- commands ----

void run_gen(const GenOptions& o) {
  SpectrumSpec spec{parse_list(o.spectrum), o.samples, o.seed};
  if (spec.dims() != o.dims) throw UsageError("--dims must equal the number of --spectrum entries");
  if (!spec.distinct()) std::cerr << "hebbpca: warning: spectrum has repeated eigenvalues\n";
  const DataMatrix data = gen_data(spec);
  std::vector<std::string> header;
  if (o.header)
    for (std::size_t i = 0; i < o.dims; ++i) header.push_back("x" + std::to_string(i + 1));
  io::write_data(o.out, data, header);

  Resolved r("gen");
  r.set("dims", o.dims, 0);
  r.set("samples", o.samples, 0);
  r.set("spectrum", o.spectrum);
  r.set("seed", o.seed);
  r.set("out", o.out);
  if (o.header) r.flag("header");
  r.output(o.out);
  r.write_manifest();
}

void run_train(const TrainOptions& o) {
  const std::vector<std::string> algos{"hebb", "oja", "gha", "shp"};
  if (std::find(algos.begin(), algos.end(), o.algo) == algos.end())
    throw UsageError("--algo must be one of hebb, oja, gha, shp");
  if ((o.algo == "hebb" || o.algo == "oja") && o.components != 1)
    throw UsageError("--algo " + o.algo + " learns one component; use gha or shp for more");
  const Schedule schedule = parse_schedule(o.schedule);
  const DataMatrix data = load_data(o.data);
  if (o.components < 1 || o.components > data.dims())
    throw UsageError("--components must be between 1 and the data dimension (" +
                     std::to_string(data.dims()) + ")");

  TrainConfig cfg;
  cfg.eta = o.eta ? *o.eta : default_eta(data);
  cfg.epochs = o.epochs;
  cfg.tol = o.tol;
  cfg.schedule = schedule;
  cfg.seed = o.seed;
  cfg.nodes = o.components;
  std::optional<Spectrum> oracle;
  if (o.oracle) oracle = jacobi_eigen(covariance(data));

  const TrainResult result = (o.algo == "shp" || o.algo == "hebb") ? shp_train(data, cfg, oracle)
                                                                   : gha_train(data, cfg, oracle);
  io::write_basis(o.out, result.basis);
  if (!o.trace.empty()) {
    auto f = io::open_out(o.trace);
    io::write_train_trace(f, result.report);
  }
  if (!result.report.converged)
    std::cerr << "hebbpca: warning: not converged after " << result.report.epochs_run << " epochs\n";

  Resolved r("train");
  r.set("algo", o.algo);
  r.set("components", o.components, 0);
  r.set("eta", cfg.eta);
  r.set("epochs", o.epochs, 0);
  r.set("tol", o.tol);
  r.set("schedule", o.schedule);
  r.set("seed", o.seed);
  r.set("data", o.data);
  r.set("out", o.out);
  if (!o.trace.empty()) r.set("trace", o.trace);
  if (o.oracle) r.flag("oracle");
  r.input(o.data);
  r.output(o.out);
  if (!o.trace.empty()) r.output(o.trace);
  r.write_manifest();
}

void run_eigen(const EigenOptions& o) {
  const DataMatrix data = load_data(o.data);
  const Spectrum s = jacobi_eigen(covariance(data));
  auto f = io::open_out(o.out);
  io::write_spectrum(f, s);
  f.close();

  Resolved r("eigen");
  r.set("data", o.data);
  r.set("out", o.out);
  r.input(o.data);
  r.output(o.out);
  r.write_manifest();
}

void run_balance(const BalanceOptions& o) {
  const DataMatrix data = load_data(o.data);
  WeightBasis basis = io::read_basis(o.weights);
  if (basis.dims() != data.dims()) throw UsageError("--weights and --data differ in dimension");
  basis = o.orthonormalize ? orthonormalize(basis.rows()) : accept_basis(basis);
  const BalanceResult result = balance(basis, covariance(data));
  io::write_basis(o.out, result.basis);
  const std::string meta = o.out + ".meta";
  {
    auto f = io::open_out(meta);
    io::write_balance_meta(f, result);
  }

  Resolved r("balance");
  r.set("weights", o.weights);
  r.set("data", o.data);
  r.set("out", o.out);
  if (o.orthonormalize) r.flag("orthonormalize");
  r.input(o.weights);
  r.input(o.data);
  r.output(o.out);
  r.output(meta);
  r.write_manifest();
}

void run_simulate(const SimulateOptions& o) {
  const Schedule schedule = parse_schedule(o.schedule);
  const DataMatrix data = load_data(o.data);
  if (o.components < 1 || o.components > data.dims())
    throw UsageError("--components must be between 1 and the data dimension (" +
                     std::to_string(data.dims()) + ")");
  if (o.drop < 0.0 || o.drop > 1.0) throw UsageError("--drop must lie in [0, 1]");
  if (o.noise < 0.0) throw UsageError("--noise must be non-negative");
  if (o.rounds < 1) throw UsageError("--rounds must be at least 1");

  TrainConfig cfg;
  cfg.eta = o.eta ? *o.eta : default_eta(data);
  cfg.epochs = o.rounds;
  cfg.tol = 1e-12;
  cfg.schedule = schedule;
  cfg.seed = o.seed;
  cfg.nodes = o.components;
  ChannelModel channel;
  channel.drop_probability = o.drop;
  channel.noise_sigma = o.noise;
  channel.seed = o.channel_seed ? *o.channel_seed : o.seed + 0x9E3779B97F4A7C15ULL;
  FailureScript failures;
  if (!o.failures.empty()) failures = io::read_failure_script(o.failures);

  const SimResult result = simulate(data, Topology::feedforward(o.components), channel, failures, cfg);
  if (result.live.empty()) {
    auto f = io::open_out(o.out);  // no live nodes: empty basis file
  } else {
    io::write_basis(o.out, result.basis);
  }
  if (!o.trace.empty()) {
    auto f = io::open_out(o.trace);
    io::write_sim_trace(f, result.trace);
  }

  Resolved r("simulate");
  r.set("components", o.components, 0);
  r.set("drop", o.drop);
  r.set("noise", o.noise);
  r.set("rounds", o.rounds, 0);
  if (!o.failures.empty()) r.set("failures", o.failures);
  r.set("seed", o.seed);
  r.set("channel-seed", channel.seed);
  r.set("eta", cfg.eta);
  r.set("schedule", o.schedule);
  r.set("data", o.data);
  r.set("out", o.out);
  if (!o.trace.empty()) r.set("trace", o.trace);
  r.input(o.data);
  if (!o.failures.empty()) r.input(o.failures);
  r.output(o.out);
  if (!o.trace.empty()) r.output(o.trace);
  r.write_manifest();
}

void run_eval(const EvalOptions& o) {
  const DataMatrix data = load_data(o.data);
  const WeightBasis raw = io::read_basis(o.weights);
  if (raw.dims() != data.dims()) throw UsageError("--weights and --data differ in dimension");
  if (o.lose > raw.nodes()) throw UsageError("--lose exceeds the number of components");
  const WeightBasis basis = accept_basis(raw);
  const CovarianceMatrix c = covariance(data);

  auto f = io::open_out(o.report);
  f << "lost,predicted_error,measured_error\n";
  const std::size_t n = basis.nodes();
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(o.lose), true);
  double worst_measured = 0.0;
  // Lexicographic order of lost index sets.
  do {
    std::vector<NodeId> lost;
    Matrix kept(0, basis.rows().cols());
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i]) {
        lost.push_back(i);
      } else {
        kept.conservativeResize(kept.rows() + 1, Eigen::NoChange);
        kept.row(kept.rows() - 1) = basis.rows().row(static_cast<Eigen::Index>(i));
      }
    }
    const double predicted = evaluate_under_failure(basis, c, lost);
    const double measured = linear_code_error(kept, data);
    worst_measured = std::max(worst_measured, measured);
    for (std::size_t i = 0; i < lost.size(); ++i) f << (i ? ";" : "") << lost[i] + 1;
    f << ',' << io::format_double(predicted) << ',' << io::format_double(measured) << '\n';
  } while (std::prev_permutation(mask.begin(), mask.end()));
  f << "worst_case," << io::format_double(worst_case_loss(basis, c, o.lose)) << ','
    << io::format_double(worst_measured) << '\n';
  f.close();

  Resolved r("eval");
  r.set("weights", o.weights);
  r.set("data", o.data);
  r.set("lose", o.lose, 0);
  r.set("report", o.report);
  r.input(o.weights);
  r.input(o.data);
  r.output(o.report);
  r.write_manifest();
}

int run_command(std::vector<std::string> args);

int run_replay(const ReplayOptions& o) {
  json m;
  {
    auto in = io::open_in(o.manifest);
    try {
      in >> m;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
    }
  }
  if (!m.contains("arguments") || !m.contains("outputs"))
    throw Error(ErrorCode::ParseError, "manifest lacks arguments or outputs");
  std::vector<std::string> args = m["arguments"].get<std::vector<std::string>>();
  const int status = run_command(args);
  if (status != 0) return status;
  for (const auto& [path, digest] : m["outputs"].items()) {
    if (sha256_file(path) != digest.get<std::string>()) {
      std::cerr << "hebbpca: error: replay output differs: " << path << '\n';
      return 2;
    }
  }
  std::cout << "replay reproduced " << m["outputs"].size() << " output(s)\n";
  return 0;
}

// --config <file>: key=value lines, appended as --key value unless the
// flag is already on the command line.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end()) return args;
  if (std::next(it) == args.end()) throw UsageError("--config needs a file");
  const std::string path = *std::next(it);
  args.erase(it, std::next(it, 2));
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line without '=': " + line);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (given) continue;
    args.push_back(flag);
    if (value != "true") args.push_back(value);
  }
  return args;
}

int run_command(std::vector<std::string> args) {
  CLI::App app{"Hebbian PCA encodings: training, oracle, balancing and network simulation", "hebbpca"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.footer("Use --config <file> with key=value lines to supply flags; command-line flags win.");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate centered data with a prescribed covariance spectrum");
  gen_cmd->add_option("--dims", gen.dims, "Input dimension (must match --spectrum length)")->required();
  gen_cmd->add_option("--samples", gen.samples, "Number of samples")->required();
  gen_cmd->add_option("--spectrum", gen.spectrum, "Comma-separated eigenvalues, descending")->required();
  gen_cmd->add_option("--seed", gen.seed, "splitmix64 seed")->required();
  gen_cmd->add_option("--out", gen.out, "Output data CSV")->required();
  gen_cmd->add_flag("--header", gen.header, "Write a header row of column names");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Learn encoding vectors with a Hebbian rule");
  train_cmd->add_option("--algo", train.algo, "hebb | oja | gha | shp")->required();
  train_cmd->add_option("--components", train.components, "Number of nodes/components");
  train_cmd->add_option("--eta", train.eta, "Step size (default 0.1 / largest eigenvalue)");
  train_cmd->add_option("--epochs", train.epochs, "Epoch budget");
  train_cmd->add_option("--tol", train.tol, "Stop when max step / eta falls below this");
  train_cmd->add_option("--schedule", train.schedule, "constant | inverse-time");
  train_cmd->add_option("--seed", train.seed, "Seed for the initial weights");
  train_cmd->add_option("--data", train.data, "Input data CSV")->required();
  train_cmd->add_option("--out", train.out, "Output weights CSV")->required();
  train_cmd->add_option("--trace", train.trace, "Per-epoch trace CSV");
  train_cmd->add_flag("--oracle", train.oracle, "Fill the trace's cosine_to_oracle column");

  EigenOptions eigen;
  auto* eigen_cmd = app.add_subcommand("eigen", "Jacobi eigendecomposition of the data covariance");
  eigen_cmd->add_option("--data", eigen.data, "Input data CSV")->required();
  eigen_cmd->add_option("--out", eigen.out, "Output spectrum CSV")->required();

  BalanceOptions bal;
  auto* balance_cmd = app.add_subcommand("balance", "Rotate a basis so every component carries equal variance");
  balance_cmd->add_option("--weights", bal.weights, "Orthonormal basis CSV")->required();
  balance_cmd->add_option("--data", bal.data, "Input data CSV")->required();
  balance_cmd->add_option("--out", bal.out, "Output basis CSV (metadata goes to <out>.meta)")->required();
  balance_cmd->add_flag("--orthonormalize", bal.orthonormalize, "Gram-Schmidt the rows first, whatever their defect");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the node network simulator");
  sim_cmd->add_option("--components", sim.components, "Number of nodes");
  sim_cmd->add_option("--drop", sim.drop, "Per-message drop probability");
  sim_cmd->add_option("--noise", sim.noise, "Additive Gaussian noise sigma per signal entry");
  sim_cmd->add_option("--rounds", sim.rounds, "Number of rounds");
  sim_cmd->add_option("--failures", sim.failures, "Failure script CSV (round,node,action)");
  sim_cmd->add_option("--seed", sim.seed, "Seed for the initial weights");
  sim_cmd->add_option("--channel-seed", sim.channel_seed, "Seed for the channel (default derived from --seed)");
  sim_cmd->add_option("--eta", sim.eta, "Step size (default 0.1 / largest eigenvalue)");
  sim_cmd->add_option("--schedule", sim.schedule, "constant | inverse-time");
  sim_cmd->add_option("--data", sim.data, "Input data CSV")->required();
  sim_cmd->add_option("--out", sim.out, "Output basis CSV of live nodes")->required();
  sim_cmd->add_option("--trace", sim.trace, "Per-round trace CSV");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Reconstruction error under component loss");
  eval_cmd->add_option("--weights", ev.weights, "Orthonormal basis CSV")->required();
  eval_cmd->add_option("--data", ev.data, "Input data CSV")->required();
  eval_cmd->add_option("--lose", ev.lose, "Number of lost components");
  eval_cmd->add_option("--report", ev.report, "Output report CSV")->required();

  ReplayOptions replay;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and verify its outputs");
  replay_cmd->add_option("--manifest", replay.manifest, "Manifest JSON written by an earlier run")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "hebbpca: error: " << e.what() << '\n';
    return 1;
  }

  if (*gen_cmd) run_gen(gen);
  if (*train_cmd) run_train(train);
  if (*eigen_cmd) run_eigen(eigen);
  if (*balance_cmd) run_balance(bal);
  if (*sim_cmd) run_simulate(sim);
  if (*eval_cmd) run_eval(ev);
  if (*replay_cmd) return run_replay(replay);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_command(apply_config(std::move(args)));
  } catch (const UsageError& e) {
    std::cerr << "hebbpca: error: " << e.what() << '\n';
    return 1;
  } catch (const hebbpca::Error& e) {
    std::cerr << "hebbpca: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hebbpca: error: " << e.what() << '\n';
    return 2;
  }
}
