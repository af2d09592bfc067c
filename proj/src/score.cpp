#include "score.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace drf {

Latent ScoreModel::vjp(const Latent& z, const Condition& y, int t, const Latent& cotangent) const {
    require_same_shape(z, cotangent, "vjp");
    // (J^T u)_j = d/dh [ u . predict(z + h e_j) ] at h = 0, central differences.
    Latent grad(z.channels, z.height, z.width);
    Latent zp = z;
    for (int j = 0; j < z.size(); ++j) {
        const double h = 1e-4 * (1.0 + std::abs(z[j]));
        zp[j]          = z[j] + h;
        const double up = dot(cotangent, predict(zp, y, t));
        zp[j]          = z[j] - h;
        const double um = dot(cotangent, predict(zp, y, t));
        zp[j]          = z[j];
        grad[j]        = (up - um) / (2.0 * h);
    }
    return grad;
}

GradientMode gradient_mode_from_string(const std::string& s) {
    if (s == "full_vjp") return GradientMode::full_vjp;
    if (s == "identity_jacobian") return GradientMode::identity_jacobian;
    throw ConfigError("drf.gradient_mode: unknown value '" + s + "'");
}

std::string to_string(GradientMode m) {
    return m == GradientMode::full_vjp ? "full_vjp" : "identity_jacobian";
}

Latent cfg_predict(const ScoreModel& model, const Latent& z, const Condition& y, int t, double omega) {
    if (y.is_null()) throw ConfigError("cfg_predict requires a non-null condition");
    if (omega < 0.0) throw ConfigError("drf.omega must be >= 0");
    if (omega == 0.0) return model.predict(z, y, t);
    const Latent cond   = model.predict(z, y, t);
    const Latent uncond = model.predict(z, Condition::none(), t);
    return lincomb(1.0 + omega, cond, -omega, uncond);
}

Latent cfg_vjp(const ScoreModel& model, const Latent& z, const Condition& y, int t, double omega,
               const Latent& cotangent, GradientMode mode) {
    if (y.is_null()) throw ConfigError("cfg_vjp requires a non-null condition");
    if (omega < 0.0) throw ConfigError("drf.omega must be >= 0");
    if (mode == GradientMode::identity_jacobian) return cotangent;
    if (omega == 0.0) return model.vjp(z, y, t, cotangent);
    const Latent vc = model.vjp(z, y, t, cotangent);
    const Latent vu = model.vjp(z, Condition::none(), t, cotangent);
    return lincomb(1.0 + omega, vc, -omega, vu);
}

/*========================== GaussianMixtureScore ===========================*/

GaussianMixtureScore::GaussianMixtureScore(std::vector<Latent> means,
                                           std::map<int, std::vector<int>> label_map,
                                           const NoiseSchedule& sched)
    : means_(std::move(means)), label_map_(std::move(label_map)), sched_(&sched) {
    if (means_.empty()) throw ConfigError("model: mixture needs at least one component");
    for (const auto& m : means_) require_same_shape(m, means_[0], "mixture means");
    for (const auto& [label, subset] : label_map_) {
        if (subset.empty()) throw ConfigError("model: label " + std::to_string(label) + " maps to no components");
        for (int k : subset)
            if (k < 0 || k >= int(means_.size()))
                throw ConfigError("model: label " + std::to_string(label) + " references component " +
                                  std::to_string(k));
    }
    all_components_.resize(means_.size());
    for (size_t k = 0; k < means_.size(); ++k) all_components_[k] = int(k);
}

const std::vector<int>& GaussianMixtureScore::subset_for(const Condition& y) const {
    if (y.is_null()) return all_components_;
    auto it = label_map_.find(*y.label);
    if (it == label_map_.end())
        throw ConfigError("model: condition label " + std::to_string(*y.label) + " unknown to the mixture");
    return it->second;
}

std::vector<double> GaussianMixtureScore::responsibilities(const Latent& z, const Condition& y,
                                                           int t) const {
    const std::vector<int>& subset = subset_for(y);
    const double sab               = std::sqrt(sched_->alpha_bar(t));
    // Unit component variance: the time-t marginal variance is
    // abar + (1 - abar) = 1 for every t.
    std::vector<double> logits(subset.size());
    double max_logit = -1e300;
    for (size_t i = 0; i < subset.size(); ++i) {
        const Latent& mu = means_[size_t(subset[i])];
        double d2        = 0.0;
        for (int j = 0; j < z.size(); ++j) {
            const double d = z[j] - sab * mu[j];
            d2 += d * d;
        }
        logits[i] = -0.5 * d2;
        max_logit = std::max(max_logit, logits[i]);
    }
    double sum = 0.0;
    for (auto& l : logits) {
        l = std::exp(l - max_logit);
        sum += l;
    }
    for (auto& l : logits) l /= sum;
    return logits;
}

Latent GaussianMixtureScore::predict(const Latent& z, const Condition& y, int t) const {
    require_same_shape(z, means_[0], "mixture predict");
    const std::vector<int>& subset = subset_for(y);
    const double ab                = sched_->alpha_bar(t);
    const double sab               = std::sqrt(ab);
    const std::vector<double> r    = responsibilities(z, y, t);

    // eps*(z, t) = sqrt(1 - abar) * (z - sqrt(abar) * mu_bar(z)), the exact
    // optimal denoiser of the unit-variance mixture marginal.
    Latent mu_bar(z.channels, z.height, z.width);
    for (size_t i = 0; i < subset.size(); ++i) axpy(r[i], means_[size_t(subset[i])], mu_bar);

    Latent out(z.channels, z.height, z.width);
    const double s1 = std::sqrt(1.0 - ab);
    for (int j = 0; j < z.size(); ++j) out[j] = s1 * (z[j] - sab * mu_bar[j]);
    return out;
}

Latent GaussianMixtureScore::vjp(const Latent& z, const Condition& y, int t,
                                 const Latent& cotangent) const {
    require_same_shape(z, cotangent, "mixture vjp");
    const std::vector<int>& subset = subset_for(y);
    const double ab                = sched_->alpha_bar(t);
    const double s1                = std::sqrt(1.0 - ab);
    const std::vector<double> r    = responsibilities(z, y, t);

    // J^T u = sqrt(1-abar) * (u - abar * sum_k r_k (u . mu_k)(mu_k - mu_bar)).
    Latent mu_bar(z.channels, z.height, z.width);
    for (size_t i = 0; i < subset.size(); ++i) axpy(r[i], means_[size_t(subset[i])], mu_bar);

    Latent corr(z.channels, z.height, z.width);
    for (size_t i = 0; i < subset.size(); ++i) {
        const Latent& mu = means_[size_t(subset[i])];
        const double w   = r[i] * dot(cotangent, mu);
        for (int j = 0; j < z.size(); ++j) corr[j] += w * (mu[j] - mu_bar[j]);
    }

    Latent out(z.channels, z.height, z.width);
    for (int j = 0; j < z.size(); ++j) out[j] = s1 * (cotangent[j] - ab * corr[j]);
    return out;
}

std::string GaussianMixtureScore::to_json() const {
    nlohmann::json j;
    j["shape"] = {means_[0].channels, means_[0].height, means_[0].width};
    for (const auto& m : means_) j["means"].push_back(m.data);
    nlohmann::json lm = nlohmann::json::object();
    for (const auto& [label, subset] : label_map_) lm[std::to_string(label)] = subset;
    j["labels"] = lm;
    return j.dump(2);
}

GaussianMixtureScore GaussianMixtureScore::from_json(const std::string& text,
                                                     const NoiseSchedule& sched) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("model: bad mixture json: ") + e.what());
    }
    const auto shape = j.at("shape");
    std::vector<Latent> means;
    for (const auto& arr : j.at("means")) {
        Latent m(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>());
        m.data = arr.get<std::vector<double>>();
        if (int(m.data.size()) != m.size()) throw ConfigError("model: mixture mean size mismatch");
        means.push_back(std::move(m));
    }
    std::map<int, std::vector<int>> label_map;
    for (const auto& [key, subset] : j.at("labels").items())
        label_map[std::stoi(key)] = subset.get<std::vector<int>>();
    return GaussianMixtureScore(std::move(means), std::move(label_map), sched);
}

/*============================== ToyDenoiser ================================*/

namespace {
constexpr int kTimeFeatures = 5;
}

struct ToyDenoiser::Forward {
    std::vector<double> x, h1, h2, out;
};

ToyDenoiser::ToyDenoiser(int channels, int height, int width, int n_labels, int hidden,
                         uint64_t init_seed, const NoiseSchedule& sched)
    : channels_(channels),
      height_(height),
      width_(width),
      dim_(channels * height * width),
      n_labels_(n_labels),
      hidden_(hidden),
      input_dim_(dim_ + kTimeFeatures + n_labels + 1),
      sched_(&sched) {
    if (hidden < 1) throw ConfigError("model.hidden must be >= 1");
    off_w1_ = 0;
    off_b1_ = off_w1_ + size_t(hidden_) * input_dim_;
    off_w2_ = off_b1_ + size_t(hidden_);
    off_b2_ = off_w2_ + size_t(hidden_) * hidden_;
    off_w3_ = off_b2_ + size_t(hidden_);
    off_b3_ = off_w3_ + size_t(dim_) * hidden_;
    params_.assign(off_b3_ + size_t(dim_), 0.0);

    RngStream rng(init_seed);
    const double s1 = std::sqrt(1.0 / input_dim_);
    const double s2 = std::sqrt(1.0 / hidden_);
    for (size_t i = off_w1_; i < off_b1_; ++i) params_[i] = s1 * rng.normal();
    for (size_t i = off_w2_; i < off_b2_; ++i) params_[i] = s2 * rng.normal();
    for (size_t i = off_w3_; i < off_b3_; ++i) params_[i] = s2 * rng.normal();
}

void ToyDenoiser::embed_input(const Latent& z, const Condition& y, int t,
                              std::vector<double>& x) const {
    x.assign(size_t(input_dim_), 0.0);
    for (int j = 0; j < dim_; ++j) x[size_t(j)] = z[j];
    const double tf = double(t) / double(sched_->t_train());
    const double ab     = sched_->alpha_bar(t);
    x[size_t(dim_) + 0] = tf;
    x[size_t(dim_) + 1] = std::sin(2.0 * M_PI * tf);
    x[size_t(dim_) + 2] = std::cos(2.0 * M_PI * tf);
    x[size_t(dim_) + 3] = std::sqrt(ab);
    x[size_t(dim_) + 4] = std::sqrt(1.0 - ab);
    if (y.is_null()) {
        x[size_t(dim_) + kTimeFeatures + n_labels_] = 1.0;
    } else {
        if (*y.label < 0 || *y.label >= n_labels_)
            throw ConfigError("model: condition label " + std::to_string(*y.label) +
                              " outside [0," + std::to_string(n_labels_ - 1) + "]");
        x[size_t(dim_) + kTimeFeatures + *y.label] = 1.0;
    }
}

void ToyDenoiser::run_forward(const std::vector<double>& x, Forward& f) const {
    const double* w1 = params_.data() + off_w1_;
    const double* b1 = params_.data() + off_b1_;
    const double* w2 = params_.data() + off_w2_;
    const double* b2 = params_.data() + off_b2_;
    const double* w3 = params_.data() + off_w3_;
    const double* b3 = params_.data() + off_b3_;

    f.h1.assign(size_t(hidden_), 0.0);
    for (int i = 0; i < hidden_; ++i) {
        double s = b1[i];
        const double* row = w1 + size_t(i) * input_dim_;
        for (int j = 0; j < input_dim_; ++j) s += row[j] * x[size_t(j)];
        f.h1[size_t(i)] = std::tanh(s);
    }
    f.h2.assign(size_t(hidden_), 0.0);
    for (int i = 0; i < hidden_; ++i) {
        double s = b2[i];
        const double* row = w2 + size_t(i) * hidden_;
        for (int j = 0; j < hidden_; ++j) s += row[j] * f.h1[size_t(j)];
        f.h2[size_t(i)] = std::tanh(s);
    }
    f.out.assign(size_t(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        double s = b3[i];
        const double* row = w3 + size_t(i) * hidden_;
        for (int j = 0; j < hidden_; ++j) s += row[j] * f.h2[size_t(j)];
        f.out[size_t(i)] = s;
    }
}

Latent ToyDenoiser::predict(const Latent& z, const Condition& y, int t) const {
    if (z.size() != dim_)
        throw DimensionError("denoiser predict: latent size " + std::to_string(z.size()) +
                             " != " + std::to_string(dim_));
    Forward f;
    embed_input(z, y, t, f.x);
    run_forward(f.x, f);
    Latent out(z.channels, z.height, z.width);
    for (int j = 0; j < dim_; ++j) out[j] = f.out[size_t(j)];
    return out;
}

Latent ToyDenoiser::vjp(const Latent& z, const Condition& y, int t, const Latent& cotangent) const {
    require_same_shape(z, cotangent, "denoiser vjp");
    Forward f;
    embed_input(z, y, t, f.x);
    run_forward(f.x, f);

    const double* w1 = params_.data() + off_w1_;
    const double* w2 = params_.data() + off_w2_;
    const double* w3 = params_.data() + off_w3_;

    // Reverse pass through out = W3 h2 + b3, h2 = tanh(W2 h1 + b2), ...
    std::vector<double> g2(size_t(hidden_), 0.0);
    for (int i = 0; i < dim_; ++i) {
        const double* row = w3 + size_t(i) * hidden_;
        for (int j = 0; j < hidden_; ++j) g2[size_t(j)] += row[j] * cotangent[i];
    }
    for (int j = 0; j < hidden_; ++j) g2[size_t(j)] *= 1.0 - f.h2[size_t(j)] * f.h2[size_t(j)];

    std::vector<double> g1(size_t(hidden_), 0.0);
    for (int i = 0; i < hidden_; ++i) {
        const double* row = w2 + size_t(i) * hidden_;
        for (int j = 0; j < hidden_; ++j) g1[size_t(j)] += row[j] * g2[size_t(i)];
    }
    for (int j = 0; j < hidden_; ++j) g1[size_t(j)] *= 1.0 - f.h1[size_t(j)] * f.h1[size_t(j)];

    Latent grad(z.channels, z.height, z.width);
    for (int i = 0; i < hidden_; ++i) {
        const double* row = w1 + size_t(i) * input_dim_;
        for (int j = 0; j < dim_; ++j) grad[j] += row[j] * g1[size_t(i)];
    }
    return grad;
}

void ToyDenoiser::save(const std::string& path) const {
    nlohmann::json header;
    header["layer_sizes"] = {input_dim_, hidden_, hidden_, dim_};
    header["shape"]       = {channels_, height_, width_};
    header["n_labels"]    = n_labels_;
    header["hidden"]      = hidden_;
    header["param_count"] = params_.size();
    header["training"]    = {{"epochs", train_meta.epochs},
                             {"lr", train_meta.lr},
                             {"seed", train_meta.seed},
                             {"p_uncond", train_meta.p_uncond},
                             {"final_loss", train_meta.final_loss}};
    const std::string htext = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    const uint64_t hlen = htext.size();
    unsigned char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = (hlen >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(lenbuf), 8);
    os.write(htext.data(), std::streamsize(htext.size()));
    // Raw float64 parameter block; this code targets little-endian hosts.
    os.write(reinterpret_cast<const char*>(params_.data()),
             std::streamsize(params_.size() * sizeof(double)));
    if (!os) throw IoError("failed writing '" + path + "'");
}

ToyDenoiser ToyDenoiser::load(const std::string& path, const NoiseSchedule& sched) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    unsigned char lenbuf[8];
    is.read(reinterpret_cast<char*>(lenbuf), 8);
    if (!is) throw IoError("truncated weights file '" + path + "'");
    uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= uint64_t(lenbuf[i]) << (8 * i);
    std::string htext(hlen, '\0');
    is.read(htext.data(), std::streamsize(hlen));
    if (!is) throw IoError("truncated weights header in '" + path + "'");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const std::exception& e) {
        throw IoError(std::string("bad weights header: ") + e.what());
    }
    const auto shape = header.at("shape");
    ToyDenoiser model(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>(),
                      header.at("n_labels").get<int>(), header.at("hidden").get<int>(), 0, sched);
    const size_t count = header.at("param_count").get<size_t>();
    if (count != model.params_.size()) throw IoError("weights parameter count mismatch in '" + path + "'");
    is.read(reinterpret_cast<char*>(model.params_.data()), std::streamsize(count * sizeof(double)));
    if (!is) throw IoError("truncated weights block in '" + path + "'");
    const auto& tr            = header.at("training");
    model.train_meta.epochs   = tr.at("epochs").get<int>();
    model.train_meta.lr       = tr.at("lr").get<double>();
    model.train_meta.seed     = tr.at("seed").get<uint64_t>();
    model.train_meta.p_uncond = tr.at("p_uncond").get<double>();
    model.train_meta.final_loss = tr.at("final_loss").get<double>();
    return model;
}

ToyDenoiser train_denoiser(const std::vector<std::pair<Latent, Condition>>& dataset,
                           const NoiseSchedule& sched, int epochs, double lr, uint64_t seed,
                           int hidden) {
    if (dataset.empty()) throw ConfigError("model: training dataset is empty");
    if (epochs < 1) throw ConfigError("model.train_epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("model.train_lr must be > 0");

    int n_labels = 0;
    for (const auto& [z, y] : dataset) {
        require_same_shape(z, dataset[0].first, "training dataset");
        if (!y.is_null()) n_labels = std::max(n_labels, *y.label + 1);
    }

    const Latent& proto = dataset[0].first;
    ToyDenoiser model(proto.channels, proto.height, proto.width, n_labels, hidden,
                      splitmix64(seed ^ 0x746f79ull), sched);
    const double p_uncond = model.train_meta.p_uncond;

    RngStream rng(seed);
    const int dim       = model.latent_dim();
    const int hidden_n  = model.hidden();
    const int input_dim = dim + kTimeFeatures + n_labels + 1;
    ToyDenoiser::Forward f;
    std::vector<double> delta(static_cast<size_t>(dim));
    std::vector<double> g2(static_cast<size_t>(hidden_n));
    std::vector<double> g1(static_cast<size_t>(hidden_n));

    double epoch_loss = 0.0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        // Linear step-size decay to a 5% floor.
        const double lr_eff =
            lr * std::max(0.05, 1.0 - double(epoch) / std::max(1.0, double(epochs)));
        epoch_loss = 0.0;
        for (const auto& [z0, y] : dataset) {
            const int t = 1 + int(rng.next_u64() % uint64_t(sched.t_train()));
            Latent eps(z0.channels, z0.height, z0.width);
            for (auto& v : eps.data) v = rng.normal();
            const Latent zt   = forward_diffuse(z0, t, eps, sched);
            const Condition c = (!y.is_null() && rng.uniform() < p_uncond) ? Condition::none() : y;

            model.embed_input(zt, c, t, f.x);
            model.run_forward(f.x, f);

            double loss = 0.0;
            for (int j = 0; j < dim; ++j) {
                delta[size_t(j)] = f.out[size_t(j)] - eps[j];
                loss += delta[size_t(j)] * delta[size_t(j)];
            }
            loss /= dim;
            epoch_loss += loss;
            if (!std::isfinite(loss))
                throw NumericError("denoiser training diverged at epoch " + std::to_string(epoch));

            // Backprop of mean squared error, SGD update in place.
            for (auto& d : delta) d *= 2.0 / dim;

            double* w1 = model.params().data();
            double* b1 = w1 + size_t(hidden_n) * input_dim;
            double* w2 = b1 + size_t(hidden_n);
            double* b2 = w2 + size_t(hidden_n) * hidden_n;
            double* w3 = b2 + size_t(hidden_n);
            double* b3 = w3 + size_t(dim) * hidden_n;

            std::fill(g2.begin(), g2.end(), 0.0);
            for (int i = 0; i < dim; ++i) {
                double* row = w3 + size_t(i) * hidden_n;
                for (int j = 0; j < hidden_n; ++j) g2[size_t(j)] += row[j] * delta[size_t(i)];
                for (int j = 0; j < hidden_n; ++j) row[j] -= lr_eff * delta[size_t(i)] * f.h2[size_t(j)];
                b3[i] -= lr_eff * delta[size_t(i)];
            }
            for (int j = 0; j < hidden_n; ++j) g2[size_t(j)] *= 1.0 - f.h2[size_t(j)] * f.h2[size_t(j)];

            std::fill(g1.begin(), g1.end(), 0.0);
            for (int i = 0; i < hidden_n; ++i) {
                double* row = w2 + size_t(i) * hidden_n;
                for (int j = 0; j < hidden_n; ++j) g1[size_t(j)] += row[j] * g2[size_t(i)];
                for (int j = 0; j < hidden_n; ++j) row[j] -= lr_eff * g2[size_t(i)] * f.h1[size_t(j)];
                b2[i] -= lr_eff * g2[size_t(i)];
            }
            for (int j = 0; j < hidden_n; ++j) g1[size_t(j)] *= 1.0 - f.h1[size_t(j)] * f.h1[size_t(j)];

            for (int i = 0; i < hidden_n; ++i) {
                double* row = w1 + size_t(i) * input_dim;
                for (int j = 0; j < input_dim; ++j) row[j] -= lr_eff * g1[size_t(i)] * f.x[size_t(j)];
                b1[i] -= lr_eff * g1[size_t(i)];
            }
        }
        epoch_loss /= double(dataset.size());
    }

    model.train_meta.epochs     = epochs;
    model.train_meta.lr         = lr;
    model.train_meta.seed       = seed;
    model.train_meta.final_loss = epoch_loss;
    return model;
}

}  // namespace drf
