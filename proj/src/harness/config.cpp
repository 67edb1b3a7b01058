#include "alrl/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <tuple>
#include <sstream>

#include "alrl/errors.hpp"

namespace alrl::harness {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// "targetNetworkUpdateRate (C)" -> "targetnetworkupdaterate"
std::string normalize_key(std::string_view key) {
    std::string k(key);
    if (auto p = k.find('('); p != std::string::npos) k.erase(p);
    std::string out;
    for (char c : k) {
        if (c != ' ' && c != '\t' && c != '_' && c != '-') out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::vector<std::string> split_list(std::string v) {
    // accepts "[1, 0.2]" and "1, 0.2"
    v.erase(std::remove_if(v.begin(), v.end(), [](char c) { return c == '[' || c == ']'; }), v.end());
    std::vector<std::string> items;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
        auto t = trim(item);
        if (!t.empty()) items.push_back(t);
    }
    return items;
}

double to_double(const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) throw ConfigError("expected a number, got '" + v + "'");
    return d;
}

long to_long(const std::string& v) {
    long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError("expected an integer, got '" + v + "'");
    return out;
}

std::size_t to_size(const std::string& v) {
    const long n = to_long(v);
    if (n < 0) throw ConfigError("expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& v) {
    std::string l;
    for (char c : v) l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l == "true" || l == "1" || l == "yes") return true;
    if (l == "false" || l == "0" || l == "no") return false;
    throw ConfigError("expected true/false, got '" + v + "'");
}

std::pair<double, double> to_range(const std::string& v) {
    auto items = split_list(v);
    if (items.size() != 2) throw ConfigError("expected a range [start, end], got '" + v + "'");
    return {to_double(items[0]), to_double(items[1])};
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"name", [](auto& c, auto& v) { c.name = v; }},
        {"mode", [](auto& c, auto& v) { c.env.mode = env::parse_env_mode(v); }},
        {"seed", [](auto& c, auto& v) { c.seed = to_size(v); }},
        {"threads", [](auto& c, auto& v) { c.threads = static_cast<int>(to_long(v)); }},

        // hyperparameters
        {"icmodelmaxepochs", [](auto& c, auto& v) { c.classifier.max_epochs = static_cast<int>(to_long(v)); }},
        {"earlystoppingpatience", [](auto& c, auto& v) { c.classifier.patience = static_cast<int>(to_long(v)); }},
        {"agentbatchsize", [](auto& c, auto& v) { c.agent.batch_size = to_size(v); }},
        {"targetnetworkupdaterate", [](auto& c, auto& v) { c.agent.target_sync = static_cast<int>(to_long(v)); }},
        {"budget", [](auto& c, auto& v) { c.env.budget = static_cast<int>(to_long(v)); }},
        {"rewardshaping", [](auto& c, auto& v) { c.env.reward_shaping = to_bool(v); }},
        {"samplesize", [](auto& c, auto& v) { c.env.sample_size = to_size(v); }},
        {"imagestobundle", [](auto& c, auto& v) { c.env.bundle_size = to_size(v); }},
        {"subgamelength", [](auto& c, auto& v) { c.env.subgame_length = static_cast<int>(to_long(v)); }},
        {"rewardscaling", [](auto& c, auto& v) { c.env.reward_scale = to_double(v); }},
        {"maxinteractionpergame", [](auto& c, auto& v) { c.env.max_interactions_per_game = static_cast<int>(to_long(v)); }},
        {"mintraininginteractions", [](auto& c, auto& v) { c.total_interactions = to_long(v); }},
        {"greedparameterrange", [](auto& c, auto& v) { std::tie(c.tau_start, c.tau_end) = to_range(v); }},
        {"agentlearningraterange", [](auto& c, auto& v) { std::tie(c.lr_start, c.lr_end) = to_range(v); }},
        {"exploration", [](auto& c, auto& v) { c.exploration = to_long(v); }},
        {"conversion", [](auto& c, auto& v) { c.conversion = to_long(v); }},
        {"memorymaxlength", [](auto& c, auto& v) { c.memory = to_size(v); }},

        // environment and classifier details
        {"initialpointsperclass", [](auto& c, auto& v) { c.env.initial_points_per_class = static_cast<int>(to_long(v)); }},
        {"f1movingaverage", [](auto& c, auto& v) { c.env.f1_alpha = to_double(v); }},
        {"icmodelwidth",
         [](auto& c, auto& v) {
             const auto epochs = c.classifier.max_epochs;
             const auto patience = c.classifier.patience;
             if (v == "halved") c.classifier = classifier::ICModelConfig::halved();
             else if (v == "full") c.classifier = classifier::ICModelConfig{};
             else throw ConfigError("icModelWidth must be full or halved");
             c.classifier.max_epochs = epochs;
             c.classifier.patience = patience;
         }},
        {"icmodellearningrate", [](auto& c, auto& v) { c.classifier.learning_rate = to_double(v); }},
        {"icmodelbatchsize", [](auto& c, auto& v) { c.classifier.batch_size = to_size(v); }},

        // agent details
        {"agenthidden",
         [](auto& c, auto& v) {
             c.agent.hidden.clear();
             for (const auto& h : split_list(v)) c.agent.hidden.push_back(to_size(h));
         }},
        {"agentbatchnorm", [](auto& c, auto& v) { c.agent.batchnorm = to_bool(v); }},
        {"agentl2", [](auto& c, auto& v) { c.agent.l2 = to_double(v); }},
        {"gamma", [](auto& c, auto& v) { c.agent.gamma = to_double(v); }},

        // evaluation
        {"evaluationruns", [](auto& c, auto& v) { c.eval_runs = static_cast<int>(to_long(v)); }},
        {"evaluateeverygames", [](auto& c, auto& v) { c.eval_every_games = static_cast<int>(to_long(v)); }},
        {"evalmaxinteractions", [](auto& c, auto& v) { c.eval_max_interactions = static_cast<int>(to_long(v)); }},
        {"checkpoints",
         [](auto& c, auto& v) {
             c.checkpoints.clear();
             for (const auto& x : split_list(v)) c.checkpoints.push_back(static_cast<int>(to_long(x)));
         }},

        // data
        {"dataset",
         [](auto& c, auto& v) {
             if (v == "synthetic") c.dataset = DatasetKind::synthetic;
             else if (v == "mnist") c.dataset = DatasetKind::mnist;
             else throw ConfigError("dataset must be synthetic or mnist");
         }},
        {"datadir", [](auto& c, auto& v) { c.data_dir = v; }},
        {"poolsize", [](auto& c, auto& v) { c.pool_size = to_size(v); }},
        {"validationsize", [](auto& c, auto& v) { c.validation_size = to_size(v); }},
        {"syntheticclasses", [](auto& c, auto& v) { c.synthetic.classes = static_cast<int>(to_long(v)); }},
        {"syntheticside", [](auto& c, auto& v) { c.synthetic.side = to_size(v); }},
        {"syntheticsamples", [](auto& c, auto& v) { c.synthetic.samples = to_size(v); }},
        {"syntheticnoise", [](auto& c, auto& v) { c.synthetic.pixel_noise = to_double(v); }},
        {"syntheticstyles", [](auto& c, auto& v) { c.synthetic.styles_per_class = static_cast<int>(to_long(v)); }},
        {"syntheticseed", [](auto& c, auto& v) { c.synthetic.seed = to_size(v); }},
    };
    return table;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + std::to_string(xs[i]);
    return out + "]";
}

}  // namespace

void ExperimentConfig::validate() const {
    env.validate();
    if (total_interactions <= 0) throw ConfigError("minTrainingInteractions must be positive");
    if (exploration < 0 || conversion < 0) throw ConfigError("exploration and conversion must be non-negative");
    if (exploration + conversion > total_interactions) {
        throw ConfigError("exploration + conversion exceeds minTrainingInteractions");
    }
    if (!(tau_end > 0.0) || !(tau_start >= tau_end)) throw ConfigError("greedParameterRange must satisfy start >= end > 0");
    if (!(lr_end > 0.0) || !(lr_start >= lr_end)) throw ConfigError("agentLearningRateRange must satisfy start >= end > 0");
    if (memory == 0) throw ConfigError("memoryMaxLength must be positive");
    if (agent.batch_size == 0) throw ConfigError("agentBatchSize must be positive");
    if (eval_runs <= 0) throw ConfigError("evaluationRuns must be positive");
    if (eval_every_games <= 0) throw ConfigError("evaluateEveryGames must be positive");
    if (validation_size == 0) throw ConfigError("validationSize must be positive");
    if (classifier.max_epochs <= 0 || classifier.patience <= 0) throw ConfigError("classifier epochs and patience must be positive");
    for (int c : checkpoints) {
        if (c <= 0 || c > env.budget) throw ConfigError("checkpoints must lie in [1, budget]");
    }
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    if (name == "exp1") {
        c.env.mode = env::EnvMode::exp1_single;
        c.agent = agent::AgentConfig::small();
    } else if (name == "exp2") {
        c.env.mode = env::EnvMode::exp2_sample;
    } else if (name == "exp3") {
        c.env.mode = env::EnvMode::exp3_bundle;
        c.env.reward_scale = 40.0;
        c.total_interactions = 8000;
        c.exploration = 3000;
        c.conversion = 3000;
    } else if (name == "desk") {
        c.env.mode = env::EnvMode::exp2_sample;
        c.env.budget = 200;
        c.env.max_interactions_per_game = 300;
        c.classifier = classifier::ICModelConfig::halved();
        c.total_interactions = 1500;
        c.exploration = 500;
        c.conversion = 500;
        c.eval_runs = 5;
        c.eval_every_games = 2;
        c.dataset = DatasetKind::synthetic;
        c.synthetic.samples = 3000;
        c.pool_size = 2000;
        c.validation_size = 500;
        c.checkpoints = {25, 100, 200};
    } else {
        throw ConfigError("unknown preset '" + name + "' (exp1, exp2, exp3, desk)");
    }
    return c;
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    ExperimentConfig cfg = preset("exp2");
    bool any_key = false;
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const auto key = normalize_key(trim(std::string_view(line).substr(0, eq)));
        const auto value = trim(std::string_view(line).substr(eq + 1));
        try {
            if (key == "preset") {
                if (any_key) throw ConfigError("preset must be the first key");
                cfg = preset(value);
            } else {
                auto it = setters().find(key);
                if (it == setters().end()) throw ConfigError("unknown key '" + trim(line.substr(0, eq)) + "'");
                it->second(cfg, value);
            }
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
        any_key = true;
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse_config(in, path.string());
}

std::string to_config_text(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "name = " << c.name << '\n'
      << "mode = " << env::to_string(c.env.mode) << '\n'
      << "seed = " << c.seed << '\n'
      << "icModelMaxEpochs = " << c.classifier.max_epochs << '\n'
      << "earlyStoppingPatience = " << c.classifier.patience << '\n'
      << "agentBatchSize = " << c.agent.batch_size << '\n'
      << "targetNetworkUpdateRate = " << c.agent.target_sync << '\n'
      << "budget = " << c.env.budget << '\n'
      << "rewardShaping = " << (c.env.reward_shaping ? "true" : "false") << '\n'
      << "sampleSize = " << c.env.sample_size << '\n'
      << "imagesToBundle = " << c.env.bundle_size << '\n'
      << "subGameLength = " << c.env.subgame_length << '\n'
      << "rewardScaling = " << fmt(c.env.reward_scale) << '\n'
      << "maxInteractionPerGame = " << c.env.max_interactions_per_game << '\n'
      << "minTrainingInteractions = " << c.total_interactions << '\n'
      << "greedParameterRange = [" << fmt(c.tau_start) << ", " << fmt(c.tau_end) << "]\n"
      << "agentLearningRateRange = [" << fmt(c.lr_start) << ", " << fmt(c.lr_end) << "]\n"
      << "exploration = " << c.exploration << '\n'
      << "conversion = " << c.conversion << '\n'
      << "memoryMaxLength = " << c.memory << '\n'
      << "initialPointsPerClass = " << c.env.initial_points_per_class << '\n'
      << "f1MovingAverage = " << fmt(c.env.f1_alpha) << '\n'
      << "icModelWidth = " << (c.classifier.conv1_filters == classifier::ICModelConfig::halved().conv1_filters ? "halved" : "full") << '\n'
      << "icModelLearningRate = " << fmt(c.classifier.learning_rate) << '\n'
      << "icModelBatchSize = " << c.classifier.batch_size << '\n'
      << "agentHidden = " << join(c.agent.hidden) << '\n'
      << "agentBatchNorm = " << (c.agent.batchnorm ? "true" : "false") << '\n'
      << "agentL2 = " << fmt(c.agent.l2) << '\n'
      << "gamma = " << fmt(c.agent.gamma) << '\n'
      << "evaluationRuns = " << c.eval_runs << '\n'
      << "evaluateEveryGames = " << c.eval_every_games << '\n'
      << "evalMaxInteractions = " << c.eval_max_interactions << '\n'
      << "checkpoints = " << join(c.checkpoints) << '\n'
      << "dataset = " << (c.dataset == DatasetKind::synthetic ? "synthetic" : "mnist") << '\n'
      << "poolSize = " << c.pool_size << '\n'
      << "validationSize = " << c.validation_size << '\n'
      << "syntheticClasses = " << c.synthetic.classes << '\n'
      << "syntheticSide = " << c.synthetic.side << '\n'
      << "syntheticSamples = " << c.synthetic.samples << '\n'
      << "syntheticNoise = " << fmt(c.synthetic.pixel_noise) << '\n'
      << "syntheticStyles = " << c.synthetic.styles_per_class << '\n'
      << "syntheticSeed = " << c.synthetic.seed << '\n';
    if (!c.data_dir.empty()) o << "dataDir = " << c.data_dir << '\n';
    return o.str();
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    data::Rng rng(cfg.seed ^ 0x5eedda7aULL);
    data::Dataset train, full_val;
    if (cfg.dataset == DatasetKind::synthetic) {
        // one generated set, split into pool and held-out part
        auto all = data::generate_synthetic(cfg.synthetic);
        const std::size_t pool = cfg.pool_size > 0 ? cfg.pool_size : all.size() / 2;
        if (pool >= all.size()) throw ConfigError("poolSize must be smaller than syntheticSamples");
        std::vector<data::Id> a, b;
        for (data::Id i = 0; i < all.size(); ++i) (i < pool ? a : b).push_back(i);
        train = data::subset(all, a);
        full_val = data::subset(all, b);
    } else {
        std::string dir = cfg.data_dir;
        if (dir.empty()) {
            const char* env_dir = std::getenv("ALRL_DATA_DIR");
            if (!env_dir) throw ConfigError("MNIST data directory not set (dataDir or ALRL_DATA_DIR)");
            dir = env_dir;
        }
        auto mnist = data::load_mnist(dir);
        train = std::move(mnist.train);
        full_val = std::move(mnist.test);
        if (cfg.pool_size > 0 && cfg.pool_size < train.size()) {
            std::vector<data::Id> ids(train.size());
            std::iota(ids.begin(), ids.end(), data::Id{0});
            std::shuffle(ids.begin(), ids.end(), rng);
            ids.resize(cfg.pool_size);
            std::sort(ids.begin(), ids.end());
            train = data::subset(train, ids);
        }
    }
    if (cfg.validation_size > full_val.size()) throw ConfigError("validationSize exceeds the held-out data");
    auto split = data::make_validation_split(std::move(full_val), cfg.validation_size, rng);
    return {std::make_shared<const data::Dataset>(std::move(train)),
            std::make_shared<const data::Dataset>(std::move(split.reduced))};
}

}  // namespace alrl::harness
