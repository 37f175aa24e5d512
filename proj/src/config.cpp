#include "psfed/config.hpp"

#include <fstream>

#include <json.hpp>

#include "psfed/rng.hpp"

namespace psfed {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw ConfigError("config field '" + path + "': " + why);
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback,
         const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(path + key, e.what());
  }
}

void known_keys(const json& j, std::initializer_list<const char*> keys,
                const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* k : keys)
      if (key == k) ok = true;
    if (!ok) fail(path + key, "unknown field");
  }
}

SiteSpec parse_site(const json& j, const std::string& path) {
  known_keys(j,
             {"site_id", "labeled", "n_train", "n_test", "intensity_shift",
              "noise_sigma", "deform_amp", "seed", "height", "width"},
             path);
  SiteSpec s;
  s.site_id = get_or<int>(j, "site_id", 0, path);
  if (j.contains("labeled"))
    for (const auto& c : j.at("labeled")) s.labeled.insert(c.get<int>());
  s.n_train = get_or<int>(j, "n_train", s.n_train, path);
  s.n_test = get_or<int>(j, "n_test", s.n_test, path);
  s.intensity_shift = get_or<double>(j, "intensity_shift", 0.0, path);
  s.noise_sigma = get_or<double>(j, "noise_sigma", 0.0, path);
  s.deform_amp = get_or<double>(j, "deform_amp", 0.0, path);
  s.seed = get_or<std::uint64_t>(j, "seed", 0, path);
  s.height = get_or<int>(j, "height", s.height, path);
  s.width = get_or<int>(j, "width", s.width, path);
  return s;
}

}  // namespace

std::set<LossTerm> expand_base_losses(const std::vector<std::string>& bases) {
  std::set<LossTerm> terms;
  for (const std::string& b : bases) {
    terms.insert(loss_term_from_name("marginal_" + b));
    terms.insert(loss_term_from_name("exclusion_" + b));
  }
  if (terms.empty()) throw ConfigError("empty loss combination");
  return terms;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  known_keys(j,
             {"seed", "threads", "output_dir", "data", "net", "loss", "fed",
              "adapt", "eval", "central_iterations", "ablate"},
             "");

  ExperimentConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, "");
  cfg.threads = get_or<int>(j, "threads", cfg.threads, "");
  if (cfg.threads < 1) fail("threads", "must be >= 1");
  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir, "");
  cfg.central_iterations =
      get_or<int>(j, "central_iterations", cfg.central_iterations, "");

  if (j.contains("data")) {
    const json& d = j.at("data");
    known_keys(d, {"root", "seed", "sites"}, "data.");
    cfg.data.root = get_or<std::string>(d, "root", cfg.data.root, "data.");
    cfg.data.seed = get_or<std::uint64_t>(d, "seed", 0, "data.");
    if (d.contains("sites"))
      for (const auto& s : d.at("sites"))
        cfg.data.sites.push_back(parse_site(s, "data.sites."));
  }
  if (cfg.data.seed == 0) cfg.data.seed = derive_seed(cfg.seed, 0xda7aULL);

  if (j.contains("net")) {
    const json& n = j.at("net");
    known_keys(n, {"in_channels", "base_width", "depth", "num_classes", "seed"},
               "net.");
    cfg.net.in_channels = get_or<int>(n, "in_channels", cfg.net.in_channels, "net.");
    cfg.net.base_width = get_or<int>(n, "base_width", cfg.net.base_width, "net.");
    cfg.net.depth = get_or<int>(n, "depth", cfg.net.depth, "net.");
    cfg.net.num_classes = get_or<int>(n, "num_classes", cfg.net.num_classes, "net.");
    cfg.net.seed = get_or<std::uint64_t>(n, "seed", 0, "net.");
  }
  if (cfg.net.seed == 0) cfg.net.seed = derive_seed(cfg.seed, 0x9e7ULL);
  try {
    cfg.net.validate();
  } catch (const std::exception& e) {
    fail("net", e.what());
  }

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    known_keys(l,
               {"gamma", "topk_fraction", "epsilon", "dice_smooth",
                "active_terms", "term_weights"},
               "loss.");
    cfg.loss.gamma = get_or<double>(l, "gamma", cfg.loss.gamma, "loss.");
    cfg.loss.topk_fraction =
        get_or<double>(l, "topk_fraction", cfg.loss.topk_fraction, "loss.");
    cfg.loss.epsilon = get_or<double>(l, "epsilon", cfg.loss.epsilon, "loss.");
    cfg.loss.dice_smooth =
        get_or<double>(l, "dice_smooth", cfg.loss.dice_smooth, "loss.");
    if (l.contains("active_terms")) {
      cfg.loss.active_terms.clear();
      for (const auto& t : l.at("active_terms")) {
        try {
          cfg.loss.active_terms.insert(loss_term_from_name(t.get<std::string>()));
        } catch (const std::exception& e) {
          fail("loss.active_terms", e.what());
        }
      }
    }
    if (l.contains("term_weights"))
      for (const auto& [name, w] : l.at("term_weights").items()) {
        try {
          cfg.loss.term_weights[loss_term_from_name(name)] = w.get<double>();
        } catch (const std::exception& e) {
          fail("loss.term_weights", e.what());
        }
      }
  }
  try {
    cfg.loss.validate();
  } catch (const std::exception& e) {
    fail("loss", e.what());
  }

  if (j.contains("fed")) {
    const json& f = j.at("fed");
    known_keys(f,
               {"global_rounds", "client_iterations", "lr", "batch_size",
                "warmstart_epochs", "seed"},
               "fed.");
    cfg.fed.global_rounds =
        get_or<int>(f, "global_rounds", cfg.fed.global_rounds, "fed.");
    cfg.fed.client_iterations =
        get_or<int>(f, "client_iterations", cfg.fed.client_iterations, "fed.");
    cfg.fed.lr = get_or<double>(f, "lr", cfg.fed.lr, "fed.");
    cfg.fed.batch_size = get_or<int>(f, "batch_size", cfg.fed.batch_size, "fed.");
    cfg.fed.warmstart_epochs =
        get_or<int>(f, "warmstart_epochs", cfg.fed.warmstart_epochs, "fed.");
    cfg.fed.seed = get_or<std::uint64_t>(f, "seed", 0, "fed.");
  }
  if (cfg.fed.seed == 0) cfg.fed.seed = derive_seed(cfg.seed, 0xfedULL);
  try {
    cfg.fed.validate();
  } catch (const std::exception& e) {
    fail("fed", e.what());
  }

  if (j.contains("adapt")) {
    const json& a = j.at("adapt");
    known_keys(a, {"mode", "epochs", "lr"}, "adapt.");
    cfg.adapt.mode = get_or<std::string>(a, "mode", cfg.adapt.mode, "adapt.");
    cfg.adapt.epochs = get_or<int>(a, "epochs", cfg.adapt.epochs, "adapt.");
    cfg.adapt.lr = get_or<double>(a, "lr", cfg.adapt.lr, "adapt.");
    if (cfg.adapt.mode != "FTA" && cfg.adapt.mode != "FTB" && cfg.adapt.mode != "FTC")
      fail("adapt.mode", "must be FTA, FTB or FTC");
    if (cfg.adapt.epochs < 0) fail("adapt.epochs", "must be >= 0");
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    known_keys(e, {"split"}, "eval.");
    cfg.eval.split = get_or<std::string>(e, "split", cfg.eval.split, "eval.");
    if (cfg.eval.split != "test" && cfg.eval.split != "train")
      fail("eval.split", "must be 'test' or 'train'");
  }

  if (j.contains("ablate")) {
    const json& a = j.at("ablate");
    known_keys(a, {"loss_combos", "combo_iterations", "schedule_splits"},
               "ablate.");
    if (a.contains("loss_combos")) {
      cfg.ablate.loss_combos.clear();
      for (const auto& combo : a.at("loss_combos")) {
        std::vector<std::string> names;
        for (const auto& n : combo) names.push_back(n.get<std::string>());
        try {
          expand_base_losses(names);
        } catch (const std::exception& e) {
          fail("ablate.loss_combos", e.what());
        }
        cfg.ablate.loss_combos.push_back(std::move(names));
      }
    }
    cfg.ablate.combo_iterations =
        get_or<int>(a, "combo_iterations", cfg.ablate.combo_iterations, "ablate.");
    if (a.contains("schedule_splits")) {
      cfg.ablate.schedule_splits.clear();
      for (const auto& s : a.at("schedule_splits")) {
        if (!s.is_array() || s.size() != 2)
          fail("ablate.schedule_splits", "each split must be [client_iterations, rounds]");
        cfg.ablate.schedule_splits.emplace_back(s[0].get<int>(), s[1].get<int>());
      }
    }
    // fixed total iterations across splits
    if (!cfg.ablate.schedule_splits.empty()) {
      const long long total =
          static_cast<long long>(cfg.ablate.schedule_splits[0].first) *
          cfg.ablate.schedule_splits[0].second;
      for (const auto& [it, rounds] : cfg.ablate.schedule_splits)
        if (static_cast<long long>(it) * rounds != total)
          fail("ablate.schedule_splits", "splits must share the same total iterations");
    }
  }

  return cfg;
}

std::vector<SiteSpec> ExperimentConfig::resolved_sites() const {
  std::vector<SiteSpec> sites =
      data.sites.empty() ? default_benchmark_specs(data.seed) : data.sites;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i].site_id == 0) sites[i].site_id = static_cast<int>(i) + 1;
    if (sites[i].seed == 0)
      sites[i].seed = derive_seed(data.seed, static_cast<std::uint64_t>(sites[i].site_id));
    try {
      sites[i].validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config field 'data.sites': ") + e.what());
    }
  }
  return sites;
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["output_dir"] = output_dir;
  j["central_iterations"] = central_iterations;

  j["data"]["root"] = data.root;
  j["data"]["seed"] = data.seed;
  json sites = json::array();
  for (const SiteSpec& s : resolved_sites()) {
    json sj;
    sj["site_id"] = s.site_id;
    sj["labeled"] = std::vector<int>(s.labeled.begin(), s.labeled.end());
    sj["n_train"] = s.n_train;
    sj["n_test"] = s.n_test;
    sj["intensity_shift"] = s.intensity_shift;
    sj["noise_sigma"] = s.noise_sigma;
    sj["deform_amp"] = s.deform_amp;
    sj["seed"] = s.seed;
    sj["height"] = s.height;
    sj["width"] = s.width;
    sites.push_back(std::move(sj));
  }
  j["data"]["sites"] = std::move(sites);

  j["net"]["in_channels"] = net.in_channels;
  j["net"]["base_width"] = net.base_width;
  j["net"]["depth"] = net.depth;
  j["net"]["num_classes"] = net.num_classes;
  j["net"]["seed"] = net.seed;

  j["loss"]["gamma"] = loss.gamma;
  j["loss"]["topk_fraction"] = loss.topk_fraction;
  j["loss"]["epsilon"] = loss.epsilon;
  j["loss"]["dice_smooth"] = loss.dice_smooth;
  std::vector<std::string> terms;
  for (LossTerm t : loss.active_terms) terms.push_back(loss_term_name(t));
  j["loss"]["active_terms"] = terms;
  json weights = json::object();
  for (const auto& [t, w] : loss.term_weights) weights[loss_term_name(t)] = w;
  j["loss"]["term_weights"] = std::move(weights);

  j["fed"]["global_rounds"] = fed.global_rounds;
  j["fed"]["client_iterations"] = fed.client_iterations;
  j["fed"]["lr"] = fed.lr;
  j["fed"]["batch_size"] = fed.batch_size;
  j["fed"]["warmstart_epochs"] = fed.warmstart_epochs;
  j["fed"]["seed"] = fed.seed;

  j["adapt"]["mode"] = adapt.mode;
  j["adapt"]["epochs"] = adapt.epochs;
  j["adapt"]["lr"] = adapt.lr;

  j["eval"]["split"] = eval.split;

  j["ablate"]["loss_combos"] = ablate.loss_combos;
  j["ablate"]["combo_iterations"] = ablate.combo_iterations;
  json splits = json::array();
  for (const auto& [it, rounds] : ablate.schedule_splits)
    splits.push_back(json::array({it, rounds}));
  j["ablate"]["schedule_splits"] = std::move(splits);

  return j.dump(2) + "\n";
}

}  // namespace psfed
