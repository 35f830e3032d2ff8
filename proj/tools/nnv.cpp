// nnv: dataset generation, training, pruning, verification and retraining.
//
// Exit codes: 0 success, 1 verification found a class change or adversarial
// example, 2 usage or data error, 3 verification incomplete (undetermined
// query or unresolved oracle label).

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nnv/config.hpp"
#include "nnv/grid.hpp"
#include "nnv/grid_io.hpp"
#include "nnv/network_io.hpp"
#include "nnv/report.hpp"
#include "nnv/train.hpp"
#include "nnv/verify.hpp"

namespace fs = std::filesystem;
using namespace nnv;

namespace {

constexpr int kOk = 0, kFound = 1, kUsage = 2, kIncomplete = 3;

struct Flags {
  std::string config;
  std::optional<std::string> grid, dataset, network, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers, samples, epochs;
  std::optional<double> eps, sparsity, time_limit, resolution, gap_tol;
  std::vector<double> eps_grid;
  bool power_balance = false;

  // per-command inputs
  std::vector<double> x;
  std::optional<int> sample;
  std::string split;
  std::string input;
  std::string target = "safe";
  bool minimize = false;
  bool sweep = false;
  std::string adversarials;
};

RunConfig effective_config(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.grid) c.grid = *f.grid;
  if (f.dataset) c.dataset = *f.dataset;
  if (f.network) c.network = *f.network;
  if (f.out) c.out = *f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (f.samples) c.samples = *f.samples;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.eps) c.eps = *f.eps;
  if (f.sparsity) c.sparsity = *f.sparsity;
  if (f.time_limit) c.time_limit = *f.time_limit;
  if (f.resolution) c.resolution = *f.resolution;
  if (f.gap_tol) c.gap_tol = *f.gap_tol;
  if (!f.eps_grid.empty()) c.eps_grid = f.eps_grid;
  if (f.power_balance) c.power_balance = true;
  c.validate();
  return c;
}

std::string need(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing ") + flag);
  return value;
}

std::string existing(const std::string& value, const char* flag) {
  need(value, flag);
  if (!fs::exists(value)) throw DataError(std::string(flag) + " file " + value + " does not exist");
  return value;
}

std::string grid_hash_of(const std::string& path) { return json_hash(read_json_file(path)); }

std::string sidecar(const std::string& dataset_path) { return dataset_path + ".meta.json"; }

void check_hash(const std::string& what, const std::string& have, const std::string& want) {
  if (!have.empty() && !want.empty() && have != want)
    throw DataError(what + " was produced for a different grid (hash " + have + ", expected " + want + ")");
}

/// Grid hash recorded with a dataset, or empty when the dataset has no sidecar.
std::string dataset_grid_hash(const std::string& path) {
  if (!fs::exists(sidecar(path))) return {};
  return read_json_file(sidecar(path)).value("grid_hash", "");
}

std::string network_grid_hash(const nlohmann::json& net_json) {
  if (!net_json.contains("meta") || !net_json["meta"].is_object()) return {};
  return net_json["meta"].value("grid_hash", "");
}

struct Loaded {
  Network net;
  std::string grid_hash;
};

Loaded load_checked_network(const RunConfig& c) {
  const auto j = read_json_file(existing(c.network, "--network"));
  return {network_from_json(j), network_grid_hash(j)};
}

std::optional<GridModel> load_optional_grid(const RunConfig& c, std::string& hash) {
  if (c.grid.empty()) return std::nullopt;
  existing(c.grid, "--grid");
  hash = grid_hash_of(c.grid);
  return load_grid(c.grid);
}

Dataset load_checked_dataset(const RunConfig& c, const std::string& grid_hash) {
  const auto path = existing(c.dataset, "--dataset");
  check_hash("dataset " + path, dataset_grid_hash(path), grid_hash);
  return load_dataset(path);
}

void write_confusion(const Network& net, const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "split,tp_safe,fn_safe,fp_safe,tn_safe,accuracy\n";
  for (Split s : {Split::Train, Split::Test}) {
    if (d.indices(s).empty()) continue;
    const auto cm = evaluate(net, d, s);
    out << to_string(s) << ',' << cm.tp_safe << ',' << cm.fn_safe << ',' << cm.fp_safe << ',' << cm.tn_safe << ','
        << std::fixed << std::setprecision(4) << cm.accuracy() << '\n';
  }
}

void print_accuracy(const Network& net, const Dataset& d) {
  for (Split s : {Split::Train, Split::Test}) {
    if (d.indices(s).empty()) continue;
    const auto cm = evaluate(net, d, s);
    std::cout << to_string(s) << " accuracy " << std::fixed << std::setprecision(4) << cm.accuracy() << " (safe "
              << cm.tp_safe << "/" << cm.tp_safe + cm.fn_safe << ", unsafe " << cm.tn_safe << "/"
              << cm.tn_safe + cm.fp_safe << ")\n";
  }
  std::cout << "weight sparsity " << std::fixed << std::setprecision(4) << net.weight_sparsity() << "\n";
}

TrainConfig logging_train_config(const RunConfig& c) {
  TrainConfig t = c.train_config();
  t.on_epoch = [](int epoch, double loss) {
    if ((epoch + 1) % 50 == 0) std::clog << "epoch " << epoch + 1 << " probe loss " << loss << "\n";
  };
  return t;
}

nlohmann::json network_meta(const RunConfig& c, const std::string& grid_hash, const Network& net) {
  return {{"config_hash", c.hash()}, {"grid_hash", grid_hash}, {"weight_sparsity", net.weight_sparsity()}};
}

QueryOptions query_options(const RunConfig& c) {
  QueryOptions q;
  q.milp.abs_gap_tol = c.gap_tol;
  q.milp.time_limit = c.time_limit;
  return q;
}

InputRegion region_for(const RunConfig& c, int n, const std::optional<GridModel>& g) {
  if (!c.power_balance) return InputRegion::unit_box(n);
  if (!g) throw ConfigError("--power-balance needs --grid");
  return InputRegion::unit_box(n, power_balance_constraint(*g));
}

void check_grid_shape(const std::optional<GridModel>& g, const Network& net) {
  if (g && g->num_inputs() != net.input_dim())
    throw ShapeError("network takes " + std::to_string(net.input_dim()) + " inputs but the grid defines " +
                     std::to_string(g->num_inputs()));
}

Vector reference_point(const Flags& f, const RunConfig& c, const std::string& grid_hash, int n) {
  if (!f.x.empty() && f.sample) throw ConfigError("give either --x or --sample, not both");
  Vector x;
  if (f.sample) {
    const auto d = load_checked_dataset(c, grid_hash);
    if (*f.sample < 0 || *f.sample >= d.size()) throw ConfigError("--sample out of range");
    x = d.row(*f.sample);
  } else {
    if (f.x.empty()) throw ConfigError("missing --x or --sample");
    x = Eigen::Map<const Vector>(f.x.data(), static_cast<Eigen::Index>(f.x.size()));
  }
  if (x.size() != n) throw ShapeError("reference point has " + std::to_string(x.size()) + " entries, network takes " +
                                      std::to_string(n));
  if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) throw ConfigError("reference point leaves [0,1]");
  return x;
}

std::string out_dir(const RunConfig& c) {
  const auto dir = need(c.out, "--out");
  fs::create_directories(dir);
  return dir;
}

nlohmann::json report_header(const char* kind, const RunConfig& c, const std::string& grid_hash) {
  return {{"kind", kind}, {"config_hash", c.hash()}, {"grid_hash", grid_hash}, {"network", c.network}};
}

// ---------------------------------------------------------------------------

int cmd_generate(const RunConfig& c) {
  const auto grid_path = existing(c.grid, "--grid");
  const auto g = load_grid(grid_path);
  const auto d = generate_dataset(g, c.samples, c.seed, c.train_fraction);
  const auto path = need(c.out.empty() ? c.dataset : c.out, "--out");
  save_dataset(d, path);
  write_json_file({{"grid_hash", grid_hash_of(grid_path)}, {"config_hash", c.hash()}, {"samples", c.samples}},
                  sidecar(path));
  const int safe = d.count(ClassLabel::Safe, Split::Train) + d.count(ClassLabel::Safe, Split::Test);
  std::cout << "wrote " << d.size() << " samples to " << path << " (train " << d.indices(Split::Train).size()
            << ", test " << d.indices(Split::Test).size() << ")\n"
            << "safe " << safe << " (" << std::fixed << std::setprecision(2) << 100.0 * safe / d.size()
            << "%), unsafe " << d.size() - safe << "\n";
  return kOk;
}

int cmd_train(const RunConfig& c) {
  const auto d = load_dataset(existing(c.dataset, "--dataset"));
  if (c.architecture.empty() || c.architecture.front() != d.dim())
    throw ConfigError("architecture input width must equal the dataset dimension " + std::to_string(d.dim()));
  if (c.train.epochs == 0) std::clog << "warning: epochs = 0, the initial network is written unchanged\n";
  const auto net = train(init_network(c.architecture, c.seed), d, logging_train_config(c));
  const auto out = need(c.out, "--out");
  save_network(net, out, network_meta(c, dataset_grid_hash(c.dataset), net));
  write_confusion(net, d, out + ".confusion.csv");
  print_accuracy(net, d);
  return kOk;
}

int cmd_prune(const RunConfig& c) {
  const auto d = load_dataset(existing(c.dataset, "--dataset"));
  const auto loaded = load_checked_network(c);
  check_hash("network " + c.network, loaded.grid_hash, dataset_grid_hash(c.dataset));
  TrainConfig t = logging_train_config(c);
  t.sparsity_target = c.sparsity;
  const auto net = prune_retrain(loaded.net, d, t);
  const auto out = need(c.out, "--out");
  save_network(net, out, network_meta(c, dataset_grid_hash(c.dataset), net));
  write_confusion(net, d, out + ".confusion.csv");
  print_accuracy(net, d);
  return kOk;
}

int cmd_eval(const RunConfig& c) {
  const auto d = load_dataset(existing(c.dataset, "--dataset"));
  const auto loaded = load_checked_network(c);
  check_hash("network " + c.network, loaded.grid_hash, dataset_grid_hash(c.dataset));
  if (loaded.net.input_dim() != d.dim()) throw ShapeError("network and dataset dimensions differ");
  print_accuracy(loaded.net, d);
  if (!c.out.empty()) write_confusion(loaded.net, d, c.out);
  return kOk;
}

struct VerifyContext {
  RunConfig cfg;
  Network net;
  std::optional<GridModel> grid;
  std::string grid_hash;
  InputRegion region;
};

VerifyContext verify_context(const RunConfig& c) {
  VerifyContext v{c, Network{}, std::nullopt, {}, {}};
  auto loaded = load_checked_network(c);
  v.grid = load_optional_grid(c, v.grid_hash);
  check_hash("network " + c.network, loaded.grid_hash, v.grid_hash);
  if (v.grid_hash.empty()) v.grid_hash = loaded.grid_hash;
  v.net = std::move(loaded.net);
  check_grid_shape(v.grid, v.net);
  v.region = region_for(c, v.net.input_dim(), v.grid);
  return v;
}

int cmd_ball(const VerifyContext& v, const Flags& f) {
  const auto x = reference_point(f, v.cfg, v.grid_hash, v.net.input_dim());
  const auto r = certify_ball(v.net, x, v.cfg.eps, v.region, query_options(v.cfg));
  auto rep = report_header("ball", v.cfg, v.grid_hash);
  rep["x_ref"] = vector_json(x);
  rep["eps"] = v.cfg.eps;
  rep["reference"] = to_string(r.reference);
  rep["verdict"] = to_string(r.verdict);
  rep["margin"] = number_json(r.margin);
  rep["nodes"] = r.stats.nodes;
  rep["wall_time"] = r.stats.wall_time;
  rep["witness"] = nullptr;
  if (r.witness) {
    check_witness(v.net, *r.witness, detail::other(r.reference), "ball query");
    rep["witness"] = vector_json(*r.witness);
  }
  write_json_file(rep, out_dir(v.cfg) + "/report.json");
  std::cout << "ball eps " << v.cfg.eps << ": " << to_string(r.verdict) << " (margin bound " << r.margin << ")\n";
  if (r.verdict == Verdict::Falsified) return kFound;
  return r.verdict == Verdict::Certified ? kOk : kIncomplete;
}

int cmd_region(const VerifyContext& v, const Flags& f) {
  const auto x = reference_point(f, v.cfg, v.grid_hash, v.net.input_dim());
  const auto r = min_change_radius(v.net, x, v.region, query_options(v.cfg));
  auto rep = report_header("region", v.cfg, v.grid_hash);
  rep["x_ref"] = vector_json(x);
  rep["power_balance"] = v.cfg.power_balance;
  rep["reference"] = to_string(r.reference);
  rep["class_constant"] = r.class_constant;
  rep["radius"] = number_json(r.radius);
  rep["radius_lower_bound"] = number_json(r.radius_lower_bound);
  rep["status"] = to_string(r.stats.status);
  rep["nodes"] = r.stats.nodes;
  rep["binaries"] = r.stats.binaries;
  rep["wall_time"] = r.stats.wall_time;
  rep["witness"] = nullptr;
  if (r.witness) {
    check_witness(v.net, *r.witness, detail::other(r.reference), "region query");
    rep["witness"] = vector_json(*r.witness);
  }
  std::cout << "network (" << to_string(r.reference) << "): ";
  if (r.class_constant) std::cout << "class constant over the region\n";
  else
    std::cout << "radius " << 100.0 * r.radius << "% (lower bound " << 100.0 * r.radius_lower_bound << "%)\n";

  if (v.grid) {
    nlohmann::json gt;
    if (classify_n1(*v.grid, x) == ClassLabel::Unsafe) {
      const auto g = scdcopf_ground_truth_distance(*v.grid, x);
      gt = {{"method", "scdcopf"}, {"feasible", g.feasible}, {"value", number_json(g.value)}};
      if (g.feasible) std::cout << "ground truth (SC-DC-OPF distance): " << 100.0 * g.value << "%\n";
      else std::cout << "ground truth: no N-1 secure operating point exists\n";
    } else {
      const auto s = safe_region_sampling_estimate(*v.grid, x, v.cfg.resolution);
      gt = {{"method", "sampling"}, {"resolution", v.cfg.resolution}, {"value", s.radius}, {"covers_box", s.covers_box}};
      std::cout << "ground truth (sampling, resolution " << v.cfg.resolution << "): " << 100.0 * s.radius << "%\n";
    }
    rep["ground_truth"] = gt;
  }
  write_json_file(rep, out_dir(v.cfg) + "/report.json");
  return r.class_constant || r.stats.status == MilpStatus::Optimal ? kOk : kIncomplete;
}

int input_index(const VerifyContext& v, const std::string& name) {
  if (v.grid)
    for (int i = 0; i < v.grid->num_inputs(); ++i)
      if (v.grid->inputs[static_cast<std::size_t>(i)].name == name) return i;
  try {
    std::size_t used = 0;
    const int i = std::stoi(name, &used);
    if (used == name.size() && i >= 0 && i < v.net.input_dim()) return i;
  } catch (const std::exception&) {
  }
  throw ConfigError("--input '" + name + "' is neither an input name of the grid nor an index below " +
                    std::to_string(v.net.input_dim()));
}

int cmd_property(const VerifyContext& v, const Flags& f) {
  const int dim = input_index(v, need(f.input, "--input"));
  const auto target = label_from_string(f.target);
  Vector cvec = Vector::Zero(v.net.input_dim());
  cvec(dim) = 1.0;
  const auto r = directional_property(v.net, cvec, 0.0, !f.minimize, target, v.region, query_options(v.cfg));
  auto rep = report_header("property", v.cfg, v.grid_hash);
  rep["input"] = dim;
  rep["sense"] = f.minimize ? "min" : "max";
  rep["target"] = to_string(target);
  rep["power_balance"] = v.cfg.power_balance;
  rep["feasible"] = r.feasible;
  rep["value"] = number_json(r.value);
  rep["bound"] = number_json(r.bound);
  rep["status"] = to_string(r.stats.status);
  rep["nodes"] = r.stats.nodes;
  rep["wall_time"] = r.stats.wall_time;
  rep["witness"] = nullptr;
  if (r.witness) {
    check_witness(v.net, *r.witness, target, "property query");
    rep["witness"] = vector_json(*r.witness);
  }
  if (!r.feasible) std::cout << "no input is classified " << to_string(target) << "\n";
  else std::cout << (f.minimize ? "min" : "max") << " x_" << dim + 1 << " classified " << to_string(target) << ": "
                 << 100.0 * r.value << "% (bound " << 100.0 * r.bound << "%)\n";
  if (v.grid && !f.minimize && target == ClassLabel::Safe) {
    const auto g = max_input_ground_truth(*v.grid, dim);
    rep["ground_truth"] = {{"method", "scdcopf"}, {"feasible", g.feasible}, {"value", number_json(g.value)}};
    if (g.feasible) std::cout << "ground truth (SC-DC-OPF): " << 100.0 * g.value << "%\n";
  }
  write_json_file(rep, out_dir(v.cfg) + "/report.json");
  return r.stats.status == MilpStatus::Optimal ? kOk : kIncomplete;
}

Split split_flag(const Flags& f, Split fallback) { return f.split.empty() ? fallback : split_from_string(f.split); }

/// Campaign over one dataset split; record sample ids are dataset rows.
Campaign split_campaign(const VerifyContext& v, const Dataset& d, Split s, const std::vector<double>& eps,
                        bool with_oracle) {
  const auto rows = d.indices(s);
  if (rows.empty()) throw DataError(std::string("split '") + to_string(s) + "' is empty");
  if (with_oracle && !v.grid) throw ConfigError("this command needs --grid for the ground-truth oracle");
  CampaignOptions opts{query_options(v.cfg), v.cfg.workers};
  auto camp = run_campaign(v.net, d.rows(s), d.labels_of(s), eps, v.region,
                           with_oracle ? n1_oracle(*v.grid) : Oracle{}, opts);
  for (auto& r : camp.records) r.sample_id = rows[static_cast<std::size_t>(r.sample_id)];
  return camp;
}

int campaign_exit(const Campaign& c) {
  bool falsified = false, incomplete = false;
  for (const auto& r : c.records) {
    falsified = falsified || (r.correct() && r.verdict == Verdict::Falsified);
    incomplete = incomplete || r.unresolved || (r.correct() && r.verdict == Verdict::Undetermined);
  }
  if (incomplete) return kIncomplete;
  return falsified ? kFound : kOk;
}

int cmd_adv_accuracy(const VerifyContext& v, const Flags& f) {
  const auto d = load_checked_dataset(v.cfg, v.grid_hash);
  const Split s = split_flag(f, Split::Test);
  const auto camp = split_campaign(v, d, s, v.cfg.eps_grid, v.grid.has_value());
  const auto dir = out_dir(v.cfg);
  auto rep = report_header("adv-accuracy", v.cfg, v.grid_hash);
  rep["split"] = to_string(s);
  rep.update(campaign_json(v.net, camp));
  write_json_file(rep, dir + "/report.json");
  std::ofstream csv(dir + "/summary.csv");
  write_summary_csv(camp.curve, csv);
  write_summary_csv(camp.curve, std::cout);
  return campaign_exit(camp);
}

int cmd_find_adv(const VerifyContext& v, const Flags& f) {
  const auto d = load_checked_dataset(v.cfg, v.grid_hash);
  const Split s = split_flag(f, Split::Train);
  if (!v.grid) throw ConfigError("find-adv needs --grid for the ground-truth oracle");
  const auto rows = d.indices(s);
  CampaignOptions opts{query_options(v.cfg), v.cfg.workers};
  opts.query.stop_at_first_witness = true;
  const auto eps = f.sweep ? v.cfg.eps_grid : std::vector<double>{v.cfg.eps};
  auto m = find_adversarial_examples(v.net, d.rows(s), d.labels_of(s), eps, n1_oracle(*v.grid), v.region, opts);
  for (auto& r : m.campaign.records) r.sample_id = rows[static_cast<std::size_t>(r.sample_id)];
  for (auto& a : m.examples) a.sample_id = rows[static_cast<std::size_t>(a.sample_id)];
  auto rep = report_header("find-adv", v.cfg, v.grid_hash);
  rep["split"] = to_string(s);
  rep["eps"] = eps;
  rep["adversarials"] = adversarials_json(v.net, m);
  rep.update(campaign_json(v.net, m.campaign));
  write_json_file(rep, out_dir(v.cfg) + "/report.json");
  std::cout << m.examples.size() << " adversarial examples on the " << to_string(s) << " split";
  if (f.sweep) std::cout << " over " << eps.size() << " eps values\n";
  else std::cout << " at eps " << v.cfg.eps << "\n";
  if (!m.unresolved.empty()) {
    std::cerr << m.unresolved.size() << " witnesses could not be labeled by the oracle\n";
    return kIncomplete;
  }
  return m.examples.empty() ? kOk : kFound;
}

int cmd_retrain(const RunConfig& c, const Flags& f) {
  const auto rep_path = existing(f.adversarials, "--adversarials");
  const auto rep = read_json_file(rep_path);
  if (rep.value("kind", "") != "find-adv") throw DataError(rep_path + " is not a find-adv report");
  if (rep.value("split", "") != "train")
    throw DataError("leakage guard: " + rep_path + " was computed on the '" + rep.value("split", "?") +
                    "' split; only training-split adversarial examples may be added");
  VerifyContext v = verify_context(c);
  check_hash("adversarial report " + rep_path, rep.value("grid_hash", ""), v.grid_hash);
  const auto d = load_checked_dataset(c, v.grid_hash);
  const auto adv = read_adversarials(rep);
  const auto out = need(c.out, "--out");

  const Split s = split_flag(f, Split::Test);
  const bool oracle = v.grid.has_value();
  const auto before = split_campaign(v, d, s, c.eps_grid, oracle);
  auto res = retrain_with_adversarials(v.net, d, adv, logging_train_config(c));
  save_network(res.network, out, network_meta(c, v.grid_hash, res.network));
  save_dataset(res.dataset, out + ".dataset.csv");
  write_json_file({{"grid_hash", v.grid_hash}, {"config_hash", c.hash()}, {"samples", res.dataset.size()}},
                  sidecar(out + ".dataset.csv"));
  VerifyContext after_ctx = v;
  after_ctx.net = res.network;
  const auto after = split_campaign(after_ctx, d, s, c.eps_grid, oracle);

  std::ofstream csv(out + ".curves.csv");
  if (!csv) throw DataError("cannot write " + out + ".curves.csv");
  std::ostringstream table;
  table << "eps,robust_before,robust_after,adversarial_before,adversarial_after,misclassified_before,"
           "misclassified_after\n";
  for (std::size_t i = 0; i < before.curve.size(); ++i) {
    const auto &b = before.curve[i], &a = after.curve[i];
    table << format_double(b.eps) << ',' << format_double(b.robust_fraction) << ',' << format_double(a.robust_fraction)
          << ',' << format_double(b.adversarial_fraction) << ',' << format_double(a.adversarial_fraction) << ','
          << format_double(b.misclassified_fraction) << ',' << format_double(a.misclassified_fraction) << '\n';
  }
  csv << table.str();
  std::cout << "added " << res.added << " samples to the training split\n" << table.str();
  print_accuracy(res.network, d);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ReLU security classifiers for power systems: training and MILP verification"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration; flags override its values");
  app.add_option("--grid", f.grid, "grid JSON file");
  app.add_option("--dataset", f.dataset, "dataset CSV file");
  app.add_option("--network", f.network, "network JSON file");
  app.add_option("--out", f.out, "output file or report directory");
  app.add_option("--seed", f.seed, "seed for sampling, initialization and shuffling");
  app.add_option("--workers", f.workers, "campaign threads, 0 for all cores");
  app.add_option("--eps", f.eps, "ball radius in normalized input units");
  app.add_option("--eps-grid", f.eps_grid, "comma-separated ascending radii")->delimiter(',');
  app.add_flag("--power-balance", f.power_balance, "add the slack-generator power balance rows to the input region");
  app.add_option("--time-limit", f.time_limit, "MILP time limit in seconds, 0 for none");
  app.add_option("--gap-tol", f.gap_tol, "absolute MILP optimality gap");

  auto* gen = app.add_subcommand("generate", "sample a labeled dataset from the grid");
  gen->add_option("--samples", f.samples, "number of samples");
  auto* tr = app.add_subcommand("train", "train a dense network");
  tr->add_option("--epochs", f.epochs, "training epochs");
  auto* pr = app.add_subcommand("prune", "sparsify a trained network by gradual magnitude pruning");
  pr->add_option("--sparsity", f.sparsity, "target weight sparsity");
  pr->add_option("--epochs", f.epochs, "training epochs");
  auto* ev = app.add_subcommand("eval", "confusion matrices on both splits");

  auto* ver = app.add_subcommand("verify", "MILP verification queries");
  ver->require_subcommand(1);
  ver->fallthrough();
  auto add_point = [&](CLI::App* a) {
    a->add_option("--x", f.x, "reference point, comma-separated")->delimiter(',');
    a->add_option("--sample", f.sample, "dataset row used as reference point");
  };
  auto* ball = ver->add_subcommand("ball", "certify the class over an eps ball");
  add_point(ball);
  auto* region = ver->add_subcommand("region", "largest ball with constant class around a point");
  add_point(region);
  region->add_option("--resolution", f.resolution, "grid step of the sampling ground truth");
  auto* prop = ver->add_subcommand("property", "extreme value of one input over a predicted class");
  prop->add_option("--input", f.input, "input name or 0-based index")->required();
  prop->add_option("--target", f.target, "class the inputs must receive (safe|unsafe)");
  prop->add_flag("--minimize", f.minimize, "minimize instead of maximize");
  auto* adv_acc = ver->add_subcommand("adv-accuracy", "robustness curves over the eps grid");
  adv_acc->add_option("--split", f.split, "dataset split (default test)");
  auto* find_adv = ver->add_subcommand("find-adv", "mine adversarial examples at --eps");
  find_adv->add_option("--split", f.split, "dataset split (default train)");
  find_adv->add_flag("--sweep", f.sweep, "mine every value of the eps grid instead of --eps");

  auto* re = app.add_subcommand("retrain", "add training-split adversarial examples and resume training");
  re->add_option("--adversarials", f.adversarials, "find-adv report")->required();
  re->add_option("--split", f.split, "split for the before/after curves (default test)");
  re->add_option("--epochs", f.epochs, "training epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const RunConfig c = effective_config(f);
    if (*gen) return cmd_generate(c);
    if (*tr) return cmd_train(c);
    if (*pr) return cmd_prune(c);
    if (*ev) return cmd_eval(c);
    if (*re) return cmd_retrain(c, f);
    const auto v = verify_context(c);
    if (*ball) return cmd_ball(v, f);
    if (*region) return cmd_region(v, f);
    if (*prop) return cmd_property(v, f);
    if (*adv_acc) return cmd_adv_accuracy(v, f);
    if (*find_adv) return cmd_find_adv(v, f);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kIncomplete;
  }
  return kUsage;
}
