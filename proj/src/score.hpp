#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latent.hpp"
#include "schedule.hpp"

namespace drf {

// Discrete condition id standing in for a text prompt; nullopt is the
// unconditional branch.
struct Condition {
    std::optional<int> label;

    static Condition none() { return Condition{}; }
    static Condition of(int id) { return Condition{id}; }
    bool is_null() const { return !label.has_value(); }
};

/*
 * Conditional noise predictor eps(z, y, t) with a gradient contract. Models
 * that cannot differentiate themselves inherit the central finite-difference
 * vjp below (relative step 1e-4, accuracy O(step^2)). Read-only after
 * construction; safe for concurrent predict/vjp calls.
 */
struct ScoreModel {
    virtual ~ScoreModel() = default;

    virtual Latent predict(const Latent& z, const Condition& y, int t) const = 0;

    virtual bool supports_exact_vjp() const { return false; }

    // Vector-Jacobian product of predict with respect to z.
    virtual Latent vjp(const Latent& z, const Condition& y, int t, const Latent& cotangent) const;
};

enum class GradientMode { full_vjp, identity_jacobian };

GradientMode gradient_mode_from_string(const std::string& s);
std::string to_string(GradientMode m);

// (1 + omega) * eps(z, y, t) - omega * eps(z, null, t)
Latent cfg_predict(const ScoreModel& model, const Latent& z, const Condition& y, int t, double omega);

// vjp of cfg_predict w.r.t. z. identity_jacobian treats d eps / d z as the
// identity (the score-distillation convention), which collapses to the
// cotangent itself for any omega.
Latent cfg_vjp(const ScoreModel& model, const Latent& z, const Condition& y, int t, double omega,
               const Latent& cotangent, GradientMode mode);

/*
 * Analytic optimal denoiser for an isotropic unit-variance Gaussian mixture.
 * With component variance 1 the time-t marginal of each component is
 * N(sqrt(abar_t) * mu_k, I), so posterior responsibilities and the exact
 * score are available in closed form. Conditions select component subsets;
 * the null condition marginalizes over all components.
 */
class GaussianMixtureScore : public ScoreModel {
public:
    GaussianMixtureScore(std::vector<Latent> means, std::map<int, std::vector<int>> label_map,
                         const NoiseSchedule& sched);

    Latent predict(const Latent& z, const Condition& y, int t) const override;
    bool supports_exact_vjp() const override { return true; }
    Latent vjp(const Latent& z, const Condition& y, int t, const Latent& cotangent) const override;

    int components() const { return int(means_.size()); }
    const Latent& mean(int k) const { return means_[size_t(k)]; }
    const std::map<int, std::vector<int>>& label_map() const { return label_map_; }

    // Posterior responsibilities over the active subset at time t.
    std::vector<double> responsibilities(const Latent& z, const Condition& y, int t) const;

    std::string to_json() const;
    static GaussianMixtureScore from_json(const std::string& text, const NoiseSchedule& sched);

private:
    const std::vector<int>& subset_for(const Condition& y) const;

    std::vector<Latent> means_;
    std::map<int, std::vector<int>> label_map_;
    std::vector<int> all_components_;
    const NoiseSchedule* sched_;
};

/*
 * Small fully connected denoiser: flattened latent + timestep embedding +
 * condition one-hot -> two tanh hidden layers -> eps prediction. Exact input
 * vjp via manual backprop.
 */
class ToyDenoiser : public ScoreModel {
public:
    ToyDenoiser(int channels, int height, int width, int n_labels, int hidden, uint64_t init_seed,
                const NoiseSchedule& sched);

    Latent predict(const Latent& z, const Condition& y, int t) const override;
    bool supports_exact_vjp() const override { return true; }
    Latent vjp(const Latent& z, const Condition& y, int t, const Latent& cotangent) const override;

    int latent_dim() const { return dim_; }
    int n_labels() const { return n_labels_; }
    int hidden() const { return hidden_; }

    void save(const std::string& path) const;
    static ToyDenoiser load(const std::string& path, const NoiseSchedule& sched);

    // Flat parameter view, little-endian float64 on disk.
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    struct TrainMeta {
        int epochs     = 0;
        double lr      = 0.0;
        uint64_t seed  = 0;
        double p_uncond = 0.1;
        double final_loss = 0.0;
    };
    TrainMeta train_meta;

private:
    friend ToyDenoiser train_denoiser(const std::vector<std::pair<Latent, Condition>>&,
                                      const NoiseSchedule&, int, double, uint64_t, int);

    struct Forward;
    void embed_input(const Latent& z, const Condition& y, int t, std::vector<double>& x) const;
    void run_forward(const std::vector<double>& x, Forward& f) const;

    int channels_, height_, width_, dim_;
    int n_labels_, hidden_, input_dim_;
    const NoiseSchedule* sched_;
    std::vector<double> params_;
    // Offsets into params_: W1, b1, W2, b2, W3, b3.
    size_t off_w1_, off_b1_, off_w2_, off_b2_, off_w3_, off_b3_;
};

// Plain SGD on the eps-prediction MSE over random (t, eps) draws.
// Deterministic under a fixed seed. Conditions are dropped with probability
// 0.1 during training so the unconditional branch is learned too.
ToyDenoiser train_denoiser(const std::vector<std::pair<Latent, Condition>>& dataset,
                           const NoiseSchedule& sched, int epochs, double lr, uint64_t seed,
                           int hidden = 128);

}  // namespace drf
