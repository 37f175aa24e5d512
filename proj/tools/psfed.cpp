// Experiment driver: dataset generation, local/central/federated training,
// site adaptation, evaluation, and the two ablation studies.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "psfed/adaptation.hpp"
#include "psfed/config.hpp"
#include "psfed/evaluate.hpp"
#include "psfed/federation.hpp"
#include "psfed/kernels.hpp"
#include "psfed/report.hpp"
#include "psfed/synthdata.hpp"
#include "psfed/threads.hpp"

namespace fs = std::filesystem;
using namespace psfed;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  int threads_override = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment JSON config")
      ->required();
  cmd->add_option("--out", opts.out_override, "output directory override");
  cmd->add_option("--seed", opts.seed_override, "seed override");
  cmd->add_option("--threads", opts.threads_override, "worker thread count");
}

ExperimentConfig load_config(const CommonOpts& opts) {
  std::ifstream in(opts.config_path);
  if (!in) throw ConfigError("cannot open config file: " + opts.config_path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  // overrides are applied before parsing so derived seeds stay consistent
  if (opts.seed_override != 0) j["seed"] = opts.seed_override;
  if (!opts.out_override.empty()) j["output_dir"] = opts.out_override;
  if (opts.threads_override != 0) j["threads"] = opts.threads_override;
  return ExperimentConfig::from_json_text(j.dump());
}

void write_config_echo(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(fs::path(cfg.output_dir) / "config_resolved.json");
  out << cfg.to_json_text();
  if (!out) throw std::runtime_error("cannot write config echo");
}

std::vector<ClientDataset> load_sites(const ExperimentConfig& cfg) {
  return load_all_sites(cfg.data.root);
}

std::vector<ClientState> make_clients(const std::vector<ClientDataset>& sites,
                                      const LossConfig& loss, const FedConfig& fed) {
  std::vector<ClientState> clients;
  clients.reserve(sites.size());
  for (const ClientDataset& ds : sites)
    clients.push_back(ClientState::make(ds.spec.site_id, ds, loss, fed));
  return clients;
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  out << "round,client_id,mean_loss,lr\n";
  char buf[96];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9f,%.9f\n", r.round, r.client_id,
                  r.mean_loss, r.lr);
    out << buf;
  }
  if (!out) throw std::runtime_error("cannot write trace: " + path.string());
}

std::vector<ReportRow> eval_rows(const std::string& experiment,
                                 const ModelParams& params,
                                 const std::vector<ClientDataset>& sites,
                                 bool test_split, int threads,
                                 std::vector<SiteEval>* out_evals = nullptr) {
  std::vector<ReportRow> rows;
  std::vector<SiteEval> evals;
  for (const ClientDataset& ds : sites) {
    const SiteEval ev = evaluate_site(params, ds, test_split, threads);
    for (const auto& [organ, score] : ev.organs)
      rows.push_back(make_report_row(experiment, ds.spec.site_id,
                                     ds.scheme.space.class_names[organ], score.dc,
                                     score.hd95, 0.0));
    evals.push_back(ev);
  }
  if (out_evals != nullptr) *out_evals = std::move(evals);
  return rows;
}

int central_iterations(const ExperimentConfig& cfg, std::size_t num_clients) {
  if (cfg.central_iterations > 0) return cfg.central_iterations;
  return cfg.fed.global_rounds * cfg.fed.client_iterations *
         static_cast<int>(num_clients);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- commands ----

int cmd_gen_data(const ExperimentConfig& cfg) {
  write_config_echo(cfg);
  const auto specs = cfg.resolved_sites();
  const LabelSpace space = LabelSpace::organs(cfg.net.num_classes - 1);
  std::vector<ClientDataset> sites(specs.size());
  parallel_for(static_cast<int>(specs.size()), cfg.threads, [&](int i) {
    sites[static_cast<std::size_t>(i)] = generate_site(specs[static_cast<std::size_t>(i)], space);
  });
  fs::create_directories(cfg.data.root);
  for (const ClientDataset& ds : sites) {
    save_dataset(cfg.data.root, ds);
    std::cout << "site" << ds.spec.site_id << ": train=" << ds.spec.n_train
              << " test=" << ds.spec.n_test << " merged_classes="
              << ds.scheme.num_merged() << " labeled={";
    bool first = true;
    for (int c : ds.spec.labeled) {
      std::cout << (first ? "" : ",") << c;
      first = false;
    }
    std::cout << "}\n";
  }
  std::cout << "wrote " << sites.size() << " sites under " << cfg.data.root << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& mode) {
  write_config_echo(cfg);
  const auto sites = load_sites(cfg);
  const ModelParams init = init_params(cfg.net);

  std::string name;
  FedResult result;
  const auto t0 = std::chrono::steady_clock::now();
  if (mode == "federated") {
    name = "federated";
    auto clients = make_clients(sites, cfg.loss, cfg.fed);
    result = run_federated(clients, init, cfg.fed, cfg.threads);
  } else if (mode == "central") {
    name = "central";
    auto clients = make_clients(sites, cfg.loss, cfg.fed);
    result = run_central(clients, init, cfg.fed, central_iterations(cfg, clients.size()));
  } else if (mode.rfind("local:", 0) == 0) {
    std::string site_str = mode.substr(6);
    if (site_str.rfind("site", 0) == 0) site_str = site_str.substr(4);
    int site_id = 0;
    try {
      site_id = std::stoi(site_str);
    } catch (...) {
      throw ConfigError("train --mode local:<site>: bad site id '" + site_str + "'");
    }
    name = "local_site" + std::to_string(site_id);
    std::vector<ClientDataset> one;
    for (const auto& ds : sites)
      if (ds.spec.site_id == site_id) one.push_back(ds);
    if (one.empty())
      throw std::runtime_error("no such site in dataset: " + std::to_string(site_id));
    FedConfig local_fed = cfg.fed;
    local_fed.warmstart_epochs = 0;  // locals train from scratch
    auto clients = make_clients(one, cfg.loss, local_fed);
    result = run_federated(clients, init, local_fed, cfg.threads);
  } else {
    throw ConfigError("train --mode must be federated, central or local:<site>");
  }

  const fs::path out_dir(cfg.output_dir);
  save_checkpoint(out_dir / (name + ".ckpt"), result.weights);
  write_trace_csv(out_dir / (name + "_trace.csv"), result.trace);
  std::cout << name << ": " << result.trace.size() << " trace rows, "
            << seconds_since(t0) << " s\n";
  std::cout << "checkpoint: " << (out_dir / (name + ".ckpt")).string() << "\n";
  return 0;
}

int cmd_adapt(const ExperimentConfig& cfg, int site_id, const std::string& mode_name,
              const std::string& checkpoint) {
  write_config_echo(cfg);
  const auto sites = load_sites(cfg);
  const AdaptMode mode = adapt_mode_from_name(mode_name);

  const fs::path ckpt = checkpoint.empty()
                            ? fs::path(cfg.output_dir) / "federated.ckpt"
                            : fs::path(checkpoint);
  const ModelParams fed_weights = load_checkpoint(ckpt);

  const ClientDataset* target = nullptr;
  for (const auto& ds : sites)
    if (ds.spec.site_id == site_id) target = &ds;
  if (target == nullptr)
    throw std::runtime_error("no such site in dataset: " + std::to_string(site_id));

  ClientState site = ClientState::make(site_id, *target, cfg.loss, cfg.fed);
  const ModelParams adapted = adapt(fed_weights, site, mode, cfg.adapt.epochs,
                                    cfg.adapt.lr, cfg.fed.batch_size);
  const fs::path out = fs::path(cfg.output_dir) /
                       ("site" + std::to_string(site_id) + "_" + mode_name + ".ckpt");
  save_checkpoint(out, adapted);
  std::cout << "adapted checkpoint: " << out.string() << "\n";
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint,
             const std::string& experiment) {
  write_config_echo(cfg);
  const auto sites = load_sites(cfg);
  const ModelParams params = load_checkpoint(checkpoint);
  std::vector<SiteEval> evals;
  const auto rows = eval_rows(experiment, params, sites, cfg.eval.split == "test",
                              cfg.threads, &evals);
  const fs::path out = fs::path(cfg.output_dir) / ("eval_" + experiment + ".csv");
  write_report_csv(out, rows);
  print_report_table(std::cout, rows);
  std::cout << "mean labeled DC: "
            << quantize(mean_labeled_dc(evals, sites), 3) << "\n";
  std::cout << "report: " << out.string() << "\n";
  return 0;
}

int cmd_ablate_losses(const ExperimentConfig& cfg) {
  write_config_echo(cfg);
  const auto sites = load_sites(cfg);
  const ModelParams init = init_params(cfg.net);

  std::vector<ReportRow> all_rows;
  std::vector<ReportRow> summary;
  for (const auto& combo : cfg.ablate.loss_combos) {
    std::string name = "central";
    for (const auto& base : combo) name += "+" + base;
    LossConfig loss = cfg.loss;
    loss.active_terms = expand_base_losses(combo);

    const auto t0 = std::chrono::steady_clock::now();
    auto clients = make_clients(sites, loss, cfg.fed);
    FedConfig fed = cfg.fed;
    const FedResult result =
        run_central(clients, init, fed, cfg.ablate.combo_iterations);
    const double wall = seconds_since(t0);

    std::vector<SiteEval> evals;
    auto rows = eval_rows(name, result.weights, sites, cfg.eval.split == "test",
                          cfg.threads, &evals);
    for (auto& r : rows) r.wall_time_s = quantize(wall, 3);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());

    double hd_sum = 0.0;
    int hd_count = 0;
    for (const auto& ev : evals)
      for (const auto& [organ, score] : ev.organs)
        if (score.hd95.has_value()) {
          hd_sum += *score.hd95;
          hd_count++;
        }
    summary.push_back(make_report_row(
        name, 0, "mean", mean_labeled_dc(evals, sites),
        hd_count > 0 ? std::optional<double>(hd_sum / hd_count) : std::nullopt,
        wall));
  }

  const fs::path out = fs::path(cfg.output_dir) / "ablate_losses.csv";
  write_report_csv(out, all_rows);
  print_report_table(std::cout, summary);
  std::cout << "report: " << out.string() << "\n";
  return 0;
}

int cmd_ablate_schedule(const ExperimentConfig& cfg) {
  write_config_echo(cfg);
  const auto sites = load_sites(cfg);
  const ModelParams init = init_params(cfg.net);

  std::vector<ReportRow> all_rows;
  std::vector<ReportRow> summary;
  for (const auto& [client_iters, rounds] : cfg.ablate.schedule_splits) {
    const std::string name =
        "fed_" + std::to_string(client_iters) + "x" + std::to_string(rounds);
    FedConfig fed = cfg.fed;
    fed.client_iterations = client_iters;
    fed.global_rounds = rounds;

    const auto t0 = std::chrono::steady_clock::now();
    auto clients = make_clients(sites, cfg.loss, fed);
    const FedResult result = run_federated(clients, init, fed, cfg.threads);
    const double wall = seconds_since(t0);

    std::vector<SiteEval> evals;
    auto rows = eval_rows(name, result.weights, sites, cfg.eval.split == "test",
                          cfg.threads, &evals);
    for (auto& r : rows) r.wall_time_s = quantize(wall, 3);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());

    double hd_sum = 0.0;
    int hd_count = 0;
    for (const auto& ev : evals)
      for (const auto& [organ, score] : ev.organs)
        if (score.hd95.has_value()) {
          hd_sum += *score.hd95;
          hd_count++;
        }
    summary.push_back(make_report_row(
        name, 0, "mean", mean_labeled_dc(evals, sites),
        hd_count > 0 ? std::optional<double>(hd_sum / hd_count) : std::nullopt,
        wall));
  }

  const fs::path out = fs::path(cfg.output_dir) / "ablate_schedule.csv";
  write_report_csv(out, all_rows);
  print_report_table(std::cout, summary);
  std::cout << "report: " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partially supervised multi-organ segmentation: federated training and site adaptation"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, adapt_opts, eval_opts, al_opts, as_opts;

  CLI::App* gen = app.add_subcommand("gen-data", "generate the multi-site dataset");
  add_common(gen, gen_opts);

  CLI::App* train = app.add_subcommand("train", "train a model variant");
  add_common(train, train_opts);
  std::string train_mode;
  train->add_option("--mode", train_mode, "federated | central | local:<site>")
      ->required();

  CLI::App* adapt_cmd = app.add_subcommand("adapt", "site adaptation fine-tuning");
  add_common(adapt_cmd, adapt_opts);
  int adapt_site = 0;
  std::string adapt_mode, adapt_ckpt;
  adapt_cmd->add_option("--site", adapt_site, "site id")->required();
  adapt_cmd->add_option("--mode", adapt_mode, "FTA | FTB | FTC");
  adapt_cmd->add_option("--checkpoint", adapt_ckpt, "source checkpoint (default <out>/federated.ckpt)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, eval_opts);
  std::string eval_ckpt, eval_split, eval_name = "eval";
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();
  eval_cmd->add_option("--split", eval_split, "test | train");
  eval_cmd->add_option("--experiment", eval_name, "experiment label for report rows");

  CLI::App* al = app.add_subcommand("ablate-losses", "loss-combination study");
  add_common(al, al_opts);

  CLI::App* as = app.add_subcommand("ablate-schedule",
                                    "client-iterations/rounds study at fixed total");
  add_common(as, as_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(load_config(gen_opts));
    if (train->parsed()) return cmd_train(load_config(train_opts), train_mode);
    if (adapt_cmd->parsed()) {
      ExperimentConfig cfg = load_config(adapt_opts);
      if (!adapt_mode.empty()) {
        if (adapt_mode != "FTA" && adapt_mode != "FTB" && adapt_mode != "FTC")
          throw ConfigError("adapt --mode must be FTA, FTB or FTC");
        cfg.adapt.mode = adapt_mode;
      }
      return cmd_adapt(cfg, adapt_site, cfg.adapt.mode, adapt_ckpt);
    }
    if (eval_cmd->parsed()) {
      ExperimentConfig cfg = load_config(eval_opts);
      if (!eval_split.empty()) {
        if (eval_split != "test" && eval_split != "train")
          throw ConfigError("eval --split must be 'test' or 'train'");
        cfg.eval.split = eval_split;
      }
      return cmd_eval(cfg, eval_ckpt, eval_name);
    }
    if (al->parsed()) return cmd_ablate_losses(load_config(al_opts));
    if (as->parsed()) return cmd_ablate_schedule(load_config(as_opts));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
