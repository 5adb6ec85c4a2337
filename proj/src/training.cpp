// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cxrfuse {

void TrainConfig::validate() const {
    if (!(base_lr > 0.0) || warmup_steps == 0 || batch_size == 0 || max_epochs == 0 || early_stop_patience == 0) {
        throw ConfigError("training configuration values must be positive");
    }
    if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"base_lr", cfg.base_lr},
            {"warmup_steps", cfg.warmup_steps},
            {"batch_size", cfg.batch_size},
            {"max_epochs", cfg.max_epochs},
            {"early_stop_patience", cfg.early_stop_patience},
            {"seed", cfg.seed},
            {"clip_norm", cfg.clip_norm}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (!j.is_object()) throw ConfigError("training configuration must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "base_lr") c.base_lr = value.get<double>();
            else if (key == "warmup_steps") c.warmup_steps = value.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
            else if (key == "early_stop_patience") c.early_stop_patience = value.get<std::size_t>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "clip_norm") c.clip_norm = value.get<double>();
            else throw ConfigError("unknown training key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad training configuration: ") + e.what());
    }
    c.validate();
    return c;
}

double lr_at_step(std::size_t t, const TrainConfig& cfg) {
    if (t >= cfg.warmup_steps) return cfg.base_lr;
    return cfg.base_lr * static_cast<double>(t) / static_cast<double>(cfg.warmup_steps);
}

void adam_step(ModelParameters& params, const Gradients& grads, AdamState& state, double lr) {
    for (const auto& [path, g] : grads) {
        if (!params.contains(path)) throw TrainingError("gradient for unknown parameter '" + path + "'");
        if (g.shape() != params.at(path).shape()) {
            throw TrainingError("gradient for '" + path + "' has shape " + shape_string(g.shape()));
        }
        if (!g.all_finite()) throw TrainingError("non-finite gradient for parameter '" + path + "'");
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (const auto& [path, g] : grads) {
        Tensor& p = params.at(path);
        auto [mit, m_new] = state.m.try_emplace(path, Tensor::zeros(p.shape()));
        auto [vit, v_new] = state.v.try_emplace(path, Tensor::zeros(p.shape()));
        auto m = mit->second.data();
        auto v = vit->second.data();
        auto w = p.data();
        const auto gd = g.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gd[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gd[i] * gd[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double clip_global_norm(Gradients& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& [_, g] : grads)
        for (double x : g.data()) sq += x * x;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& [_, g] : grads)
            for (double& x : g.data()) x *= s;
    }
    return norm;
}

bool EarlyStopping::observe(double loss) {
    ++seen_;
    if (seen_ == 1 || loss < best_) {
        best_ = loss;
        best_epoch_ = seen_;
        bad_ = 0;
        improved_last_ = true;
    } else {
        ++bad_;
        improved_last_ = false;
    }
    return bad_ >= patience_;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
    for (const auto& e : history) {
        ss << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ',' << e.val_acc << ','
           << e.lr << '\n';
    }
    return ss.str();
}

SplitStats evaluate_split(const ReportModel& model, const std::vector<PatientRecord>& records) {
    double loss = 0.0;
    std::size_t tokens = 0, correct = 0;
    for (const auto& r : records) {
        const SampleStats s = model.evaluate(r);
        loss += s.loss_sum;
        tokens += s.tokens;
        correct += s.correct;
    }
    SplitStats out;
    out.tokens = tokens;
    if (tokens > 0) {
        out.loss = loss / static_cast<double>(tokens);
        out.accuracy = static_cast<double>(correct) / static_cast<double>(tokens);
    }
    return out;
}

namespace {

void accumulate(Gradients& into, Gradients&& from) {
    if (into.empty()) {
        into = std::move(from);
        return;
    }
    for (auto& [path, g] : from) kernels::add_inplace(into.at(path), g);
}

}  // namespace

FitResult fit(ReportModel& model, const std::vector<PatientRecord>& train, const std::vector<PatientRecord>& val,
              const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train.empty() || val.empty()) throw ConfigError("training and validation splits must be non-empty");

    FitResult result;
    AdamState adam;
    EarlyStopping stopper(cfg.early_stop_patience);
    ModelParameters best = model.parameters();
    Rng shuffle_rng(cfg.seed ^ 0x5348554646ULL);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const bool use_dropout = model.config().dropout > 0.0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t tokens = 0, correct = 0;
        double lr = 0.0;
        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                Gradients batch;
                std::size_t batch_tokens = 0;
                for (std::size_t k = start; k < end; ++k) {
                    const std::size_t i = order[k];
                    const std::uint64_t dseed =
                        use_dropout ? cfg.seed * 0x9e3779b97f4a7c15ULL + result.steps * 131071ULL + k + 1 : 0;
                    Gradients g;
                    const SampleStats s = model.loss_and_gradients(train[i], g, dseed);
                    if (!std::isfinite(s.loss_sum)) throw TrainingError("non-finite loss on sample " + train[i].sample_id);
                    loss_sum += s.loss_sum;
                    tokens += s.tokens;
                    correct += s.correct;
                    batch_tokens += s.tokens;
                    accumulate(batch, std::move(g));
                }
                if (batch_tokens == 0) continue;
                const double inv = 1.0 / static_cast<double>(batch_tokens);
                for (auto& [_, g] : batch)
                    for (double& x : g.data()) x *= inv;
                if (cfg.clip_norm > 0.0) clip_global_norm(batch, cfg.clip_norm);
                ++result.steps;
                lr = lr_at_step(result.steps, cfg);
                adam_step(model.parameters(), batch, adam, lr);
            }
        } catch (const TrainingError& e) {
            result.diverged = true;
            result.message = e.what();
            break;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        if (tokens > 0) {
            rec.train_loss = loss_sum / static_cast<double>(tokens);
            rec.train_acc = static_cast<double>(correct) / static_cast<double>(tokens);
        }
        const SplitStats v = evaluate_split(model, val);
        rec.val_loss = v.loss;
        rec.val_acc = v.accuracy;
        if (!std::isfinite(rec.val_loss)) {
            result.diverged = true;
            result.message = "non-finite validation loss at epoch " + std::to_string(epoch);
            break;
        }
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        const bool stop = stopper.observe(rec.val_loss);
        if (stopper.improved_last()) best = model.parameters();
        if (stop) {
            result.stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    model.parameters() = std::move(best);
    result.best_epoch = stopper.best_epoch();
    result.best_val_loss = stopper.best_loss();
    return result;
}

SplitIndices split_indices(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
    if (f.test < 0.0 || f.test >= 1.0 || f.train <= 0.0 || f.val < 0.0 ||
        std::abs(f.train + f.val - 1.0) > 1e-9) {
        throw ConfigError("split fractions must satisfy test in [0, 1), train > 0, train + val = 1");
    }
    const std::size_t parts = 1 + (f.val > 0.0 ? 1 : 0) + (f.test > 0.0 ? 1 : 0);
    if (n < parts) throw ConfigError("cannot split " + std::to_string(n) + " records into " + std::to_string(parts) + " parts");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed ^ 0x53504c4954ULL);
    rng.shuffle(perm);

    std::size_t n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * f.test));
    if (f.test > 0.0) n_test = std::clamp<std::size_t>(n_test, 1, n - (parts - 1));
    const std::size_t rest = n - n_test;
    std::size_t n_train = static_cast<std::size_t>(std::llround(static_cast<double>(rest) * f.train));
    const std::size_t min_val = f.val > 0.0 ? 1 : 0;
    n_train = std::clamp<std::size_t>(n_train, 1, rest - min_val);

    SplitIndices out;
    out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test),
                     perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_train));
    out.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_train), perm.end());
    return out;
}

}  // namespace cxrfuse
