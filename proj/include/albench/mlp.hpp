#pragma once

// Two-hidden-layer ReLU regressor trained with Adam on mean squared error,
// and the query-by-committee ensemble built from it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "albench/dataset.hpp"
#include "albench/error.hpp"
#include "albench/matrix.hpp"
#include "albench/random.hpp"

namespace albench {

struct NetShape {
    std::size_t inputs = kNumFeatures;
    std::size_t hidden1 = 128;
    std::size_t hidden2 = 128;

    std::size_t parameter_count() const noexcept
    {
        return hidden1 * inputs + hidden1 + hidden2 * hidden1 + hidden2 + hidden2 + 1;
    }

    friend bool operator==(const NetShape&, const NetShape&) = default;
};

/// All weights in one flat buffer: W1 (h1 x in, row-major), b1, W2 (h2 x h1), b2, W3 (h2), b3.
/// Gradients share the same type and layout.
class NetParams {
public:
    NetParams() = default;
    explicit NetParams(NetShape shape) : shape_(shape), theta_(shape.parameter_count(), 0.0) {}

    const NetShape& shape() const noexcept { return shape_; }

    std::span<double> w1() noexcept { return {theta_.data(), shape_.hidden1 * shape_.inputs}; }
    std::span<double> b1() noexcept { return {theta_.data() + off_b1(), shape_.hidden1}; }
    std::span<double> w2() noexcept { return {theta_.data() + off_w2(), shape_.hidden2 * shape_.hidden1}; }
    std::span<double> b2() noexcept { return {theta_.data() + off_b2(), shape_.hidden2}; }
    std::span<double> w3() noexcept { return {theta_.data() + off_w3(), shape_.hidden2}; }
    double& b3() noexcept { return theta_.back(); }

    std::span<const double> w1() const noexcept { return {theta_.data(), shape_.hidden1 * shape_.inputs}; }
    std::span<const double> b1() const noexcept { return {theta_.data() + off_b1(), shape_.hidden1}; }
    std::span<const double> w2() const noexcept { return {theta_.data() + off_w2(), shape_.hidden2 * shape_.hidden1}; }
    std::span<const double> b2() const noexcept { return {theta_.data() + off_b2(), shape_.hidden2}; }
    std::span<const double> w3() const noexcept { return {theta_.data() + off_w3(), shape_.hidden2}; }
    double b3() const noexcept { return theta_.back(); }

    std::span<double> flat() noexcept { return theta_; }
    std::span<const double> flat() const noexcept { return theta_; }

    bool all_finite() const noexcept
    {
        return std::all_of(theta_.begin(), theta_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const NetParams&, const NetParams&) = default;

private:
    std::size_t off_b1() const noexcept { return shape_.hidden1 * shape_.inputs; }
    std::size_t off_w2() const noexcept { return off_b1() + shape_.hidden1; }
    std::size_t off_b2() const noexcept { return off_w2() + shape_.hidden2 * shape_.hidden1; }
    std::size_t off_w3() const noexcept { return off_b2() + shape_.hidden2; }

    NetShape shape_{};
    std::vector<double> theta_;
};

struct TrainHyperparams {
    double learning_rate = 1e-3;
    int epochs = 200;
    int minibatch_size = 32;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const
    {
        if (!(learning_rate > 0.0))
            throw ValidationError("learning_rate must be positive");
        if (epochs < 1)
            throw ValidationError("epochs must be at least 1");
        if (minibatch_size < 1)
            throw ValidationError("minibatch_size must be at least 1");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
            throw ValidationError("Adam betas must lie in (0, 1)");
        if (!(adam_eps > 0.0))
            throw ValidationError("adam_eps must be positive");
    }

    friend bool operator==(const TrainHyperparams&, const TrainHyperparams&) = default;
};

namespace detail {

struct Activations {
    std::vector<double> a1, h1, a2, h2;

    explicit Activations(const NetShape& s) : a1(s.hidden1), h1(s.hidden1), a2(s.hidden2), h2(s.hidden2) {}
};

inline double forward_into(const NetParams& p, std::span<const double> x, Activations& act)
{
    const NetShape& s = p.shape();
    const auto w1 = p.w1();
    const auto b1 = p.b1();
    for (std::size_t j = 0; j < s.hidden1; ++j) {
        const double* wr = w1.data() + j * s.inputs;
        double z = b1[j];
        for (std::size_t i = 0; i < s.inputs; ++i)
            z += wr[i] * x[i];
        act.a1[j] = z;
        act.h1[j] = z > 0.0 ? z : 0.0;
    }
    const auto w2 = p.w2();
    const auto b2 = p.b2();
    for (std::size_t k = 0; k < s.hidden2; ++k) {
        const double* wr = w2.data() + k * s.hidden1;
        double z = b2[k];
        for (std::size_t j = 0; j < s.hidden1; ++j)
            z += wr[j] * act.h1[j];
        act.a2[k] = z;
        act.h2[k] = z > 0.0 ? z : 0.0;
    }
    const auto w3 = p.w3();
    double y = p.b3();
    for (std::size_t k = 0; k < s.hidden2; ++k)
        y += w3[k] * act.h2[k];
    return y;
}

/// Adds dy * d(output)/d(theta) for one sample, where dy = dL/d(output).
inline void backward_accumulate(const NetParams& p, std::span<const double> x, const Activations& act,
                                double dy, NetParams& grad, std::vector<double>& d1, std::vector<double>& d2)
{
    const NetShape& s = p.shape();
    grad.b3() += dy;
    auto gw3 = grad.w3();
    const auto w3 = p.w3();
    for (std::size_t k = 0; k < s.hidden2; ++k) {
        gw3[k] += dy * act.h2[k];
        // ReLU derivative at exactly 0 is taken as 0.
        d2[k] = act.a2[k] > 0.0 ? dy * w3[k] : 0.0;
    }
    auto gw2 = grad.w2();
    auto gb2 = grad.b2();
    const auto w2 = p.w2();
    std::fill(d1.begin(), d1.end(), 0.0);
    for (std::size_t k = 0; k < s.hidden2; ++k) {
        const double g = d2[k];
        if (g == 0.0)
            continue;
        gb2[k] += g;
        double* gr = gw2.data() + k * s.hidden1;
        const double* wr = w2.data() + k * s.hidden1;
        for (std::size_t j = 0; j < s.hidden1; ++j) {
            gr[j] += g * act.h1[j];
            d1[j] += g * wr[j];
        }
    }
    auto gw1 = grad.w1();
    auto gb1 = grad.b1();
    for (std::size_t j = 0; j < s.hidden1; ++j) {
        if (!(act.a1[j] > 0.0))
            continue;
        const double g = d1[j];
        gb1[j] += g;
        double* gr = gw1.data() + j * s.inputs;
        for (std::size_t i = 0; i < s.inputs; ++i)
            gr[i] += g * x[i];
    }
}

/// Mean squared error over `rows` of (X, y); gradient written to `grad` (overwritten).
inline double batch_loss_and_gradient(const NetParams& p, const Matrix& X, std::span<const double> y,
                                      std::span<const std::size_t> rows, NetParams& grad, Activations& act,
                                      std::vector<double>& d1, std::vector<double>& d2)
{
    std::fill(grad.flat().begin(), grad.flat().end(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    double loss = 0.0;
    for (const std::size_t r : rows) {
        const auto x = X.row(r);
        const double residual = forward_into(p, x, act) - y[r];
        loss += residual * residual;
        backward_accumulate(p, x, act, 2.0 * residual * inv_n, grad, d1, d2);
    }
    return loss * inv_n;
}

inline void check_finite_input(std::span<const double> x)
{
    for (const double v : x)
        if (!std::isfinite(v))
            throw ValidationError("network input contains a non-finite value");
}

} // namespace detail

inline double forward(const NetParams& params, std::span<const double> x)
{
    if (x.size() != params.shape().inputs)
        throw ValidationError("forward: expected " + std::to_string(params.shape().inputs) + " inputs, got " +
                              std::to_string(x.size()));
    detail::check_finite_input(x);
    detail::Activations act(params.shape());
    return detail::forward_into(params, x, act);
}

struct LossAndGradient {
    double loss = 0.0;
    NetParams gradient;
};

inline LossAndGradient loss_and_gradient(const NetParams& params, const Matrix& X, std::span<const double> y)
{
    if (X.rows() == 0 || X.rows() != y.size())
        throw ValidationError("loss_and_gradient: need n >= 1 rows with matching targets");
    if (X.cols() != params.shape().inputs)
        throw ValidationError("loss_and_gradient: feature width does not match network inputs");
    std::vector<std::size_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    LossAndGradient out{0.0, NetParams(params.shape())};
    detail::Activations act(params.shape());
    std::vector<double> d1(params.shape().hidden1), d2(params.shape().hidden2);
    out.loss = detail::batch_loss_and_gradient(params, X, y, rows, out.gradient, act, d1, d2);
    if (!std::isfinite(out.loss))
        throw TrainingError("loss_and_gradient: non-finite loss");
    return out;
}

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
inline NetParams init_params(const NetShape& shape, Rng& rng)
{
    NetParams p(shape);
    const auto fill = [&](std::span<double> w, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (auto& v : w)
            v = rng.uniform(-limit, limit);
    };
    fill(p.w1(), shape.inputs);
    fill(p.w2(), shape.hidden1);
    fill(p.w3(), shape.hidden2);
    return p;
}

/// Train one network from scratch. Deterministic in (X, y, hyper, seed, shape).
inline NetParams train_member(const Matrix& X, std::span<const double> y, const TrainHyperparams& hyper,
                              std::uint64_t seed, const NetShape& shape = {})
{
    hyper.validate();
    const std::size_t n = X.rows();
    if (n < 2 || y.size() != n)
        throw InsufficientDataError("train_member: need at least 2 labeled rows with matching targets");
    if (X.cols() != shape.inputs)
        throw ValidationError("train_member: feature width does not match network inputs");
    for (std::size_t i = 0; i < n; ++i)
        detail::check_finite_input(X.row(i));

    Rng rng(derive_seed(seed, 0xA11CE));
    NetParams params = init_params(shape, rng);
    NetParams grad(shape);
    std::vector<double> m(shape.parameter_count(), 0.0), v(shape.parameter_count(), 0.0);
    detail::Activations act(shape);
    std::vector<double> d1(shape.hidden1), d2(shape.hidden2);

    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(hyper.minibatch_size), n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    const double b1 = hyper.adam_beta1, b2 = hyper.adam_beta2;
    double b1_pow = 1.0, b2_pow = 1.0;
    std::uint64_t step = 0;
    auto theta = params.flat();
    const auto g = std::as_const(grad).flat();

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            const double loss = detail::batch_loss_and_gradient(params, X, y, rows, grad, act, d1, d2);
            ++step;
            if (!std::isfinite(loss))
                throw TrainingError("train_member: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(step) + " (seed " + std::to_string(seed) + ")");
            b1_pow *= b1;
            b2_pow *= b2;
            const double c1 = 1.0 / (1.0 - b1_pow);
            const double c2 = 1.0 / (1.0 - b2_pow);
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                theta[i] -= hyper.learning_rate * (m[i] * c1) / (std::sqrt(v[i] * c2) + hyper.adam_eps);
            }
        }
        if (!params.all_finite())
            throw TrainingError("train_member: non-finite parameters after epoch " + std::to_string(epoch) +
                                " (seed " + std::to_string(seed) + ")");
    }
    return params;
}

// ---------------------------------------------------------------------------
// Ensemble

struct EnsembleModel {
    std::vector<NetParams> members;
    std::vector<std::uint64_t> member_seeds;
    StandardizationParams standardization;
    TrainHyperparams hyper;

    std::size_t size() const noexcept { return members.size(); }

    friend bool operator==(const EnsembleModel&, const EnsembleModel&) = default;
};

/// Train one member per seed. Members are independent, so up to `threads`
/// of them train concurrently; results do not depend on the thread count.
inline EnsembleModel train_ensemble_with_seeds(const Matrix& X, std::span<const double> y,
                                               const TrainHyperparams& hyper, std::span<const std::uint64_t> seeds,
                                               const NetShape& shape = {}, unsigned threads = 1)
{
    if (seeds.empty())
        throw ValidationError("train_ensemble: need at least one member");
    EnsembleModel model;
    model.hyper = hyper;
    model.member_seeds.assign(seeds.begin(), seeds.end());
    model.members.resize(seeds.size());

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(seeds.size())));
    if (threads == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i)
            model.members[i] = train_member(X, y, hyper, seeds[i], shape);
        return model;
    }

    std::vector<std::exception_ptr> errors(seeds.size());
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < seeds.size(); i += threads) {
                try {
                    model.members[i] = train_member(X, y, hyper, seeds[i], shape);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return model;
}

/// Member i is trained with seed base_seed + i.
inline EnsembleModel train_ensemble(const Matrix& X, std::span<const double> y, const TrainHyperparams& hyper,
                                    std::size_t members, std::uint64_t base_seed, const NetShape& shape = {},
                                    unsigned threads = 1)
{
    if (members < 2)
        throw ValidationError("train_ensemble: ensemble size must be at least 2");
    std::vector<std::uint64_t> seeds(members);
    for (std::size_t i = 0; i < members; ++i)
        seeds[i] = base_seed + i;
    return train_ensemble_with_seeds(X, y, hyper, seeds, shape, threads);
}

inline std::vector<double> member_outputs(const EnsembleModel& model, std::span<const double> x)
{
    std::vector<double> out;
    out.reserve(model.size());
    for (const auto& m : model.members)
        out.push_back(forward(m, x));
    return out;
}

/// Ensemble mean of member outputs.
inline double ensemble_mean(std::span<const double> outputs)
{
    double s = 0.0;
    for (const double v : outputs)
        s += v;
    return s / static_cast<double>(outputs.size());
}

/// Population variance of member outputs (divides by M). Shifted by the
/// first output so identical members give exactly zero.
inline double ensemble_variance(std::span<const double> outputs)
{
    const double n = static_cast<double>(outputs.size());
    const double k = outputs.front();
    double s = 0.0, s2 = 0.0;
    for (const double v : outputs) {
        s += v - k;
        s2 += (v - k) * (v - k);
    }
    return std::max(0.0, (s2 - s * s / n) / n);
}

inline double predict_mean(const EnsembleModel& model, std::span<const double> x)
{
    return ensemble_mean(member_outputs(model, x));
}

inline double predict_uncertainty(const EnsembleModel& model, std::span<const double> x)
{
    return ensemble_variance(member_outputs(model, x));
}

struct EnsemblePrediction {
    std::vector<double> mean;
    std::vector<double> variance;
};

/// Mean and variance for every row of an already standardized matrix.
inline EnsemblePrediction predict_batch(const EnsembleModel& model, const Matrix& X)
{
    EnsemblePrediction out;
    out.mean.reserve(X.rows());
    out.variance.reserve(X.rows());
    std::vector<double> outputs(model.size());
    std::vector<detail::Activations> acts;
    for (const auto& m : model.members)
        acts.emplace_back(m.shape());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        const auto x = X.row(r);
        detail::check_finite_input(x);
        for (std::size_t k = 0; k < model.size(); ++k)
            outputs[k] = detail::forward_into(model.members[k], x, acts[k]);
        out.mean.push_back(ensemble_mean(outputs));
        out.variance.push_back(ensemble_variance(outputs));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json hyper_to_json(const TrainHyperparams& h)
{
    return {{"learning_rate", h.learning_rate}, {"epochs", h.epochs},
            {"minibatch_size", h.minibatch_size}, {"adam_beta1", h.adam_beta1},
            {"adam_beta2", h.adam_beta2}, {"adam_eps", h.adam_eps}};
}

inline TrainHyperparams hyper_from_json(const nlohmann::json& j)
{
    TrainHyperparams h;
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.epochs = j.value("epochs", h.epochs);
    h.minibatch_size = j.value("minibatch_size", h.minibatch_size);
    h.adam_beta1 = j.value("adam_beta1", h.adam_beta1);
    h.adam_beta2 = j.value("adam_beta2", h.adam_beta2);
    h.adam_eps = j.value("adam_eps", h.adam_eps);
    return h;
}

/// JSON numbers are written in shortest round-trip form, so parsing the
/// dump reproduces every double exactly.
inline nlohmann::json checkpoint_to_json(const EnsembleModel& model)
{
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& p = model.members[i];
        const auto flat = p.flat();
        members.push_back({{"seed", model.member_seeds[i]},
                           {"shape", {p.shape().inputs, p.shape().hidden1, p.shape().hidden2}},
                           {"params", std::vector<double>(flat.begin(), flat.end())}});
    }
    return {{"format", "albench-ensemble"},
            {"version", kCheckpointVersion},
            {"hyperparams", hyper_to_json(model.hyper)},
            {"standardization",
             {{"means", model.standardization.means}, {"std_devs", model.standardization.std_devs}}},
            {"members", std::move(members)}};
}

inline EnsembleModel checkpoint_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format") != "albench-ensemble")
            throw ParseError("checkpoint: unexpected format tag");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw ParseError("checkpoint: unsupported version " + j.at("version").dump());
        EnsembleModel model;
        model.hyper = hyper_from_json(j.at("hyperparams"));
        model.standardization.means = j.at("standardization").at("means").get<std::vector<double>>();
        model.standardization.std_devs = j.at("standardization").at("std_devs").get<std::vector<double>>();
        for (const auto& m : j.at("members")) {
            const auto dims = m.at("shape").get<std::vector<std::size_t>>();
            if (dims.size() != 3)
                throw ParseError("checkpoint: member shape must have 3 entries");
            NetParams p(NetShape{dims[0], dims[1], dims[2]});
            const auto values = m.at("params").get<std::vector<double>>();
            if (values.size() != p.flat().size())
                throw ParseError("checkpoint: parameter count does not match shape");
            std::copy(values.begin(), values.end(), p.flat().begin());
            model.members.push_back(std::move(p));
            model.member_seeds.push_back(m.at("seed").get<std::uint64_t>());
        }
        return model;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("checkpoint: ") + ex.what());
    }
}

inline void save_checkpoint(const EnsembleModel& model, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ParseError("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(model).dump() << '\n';
}

inline EnsembleModel load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open checkpoint " + path.string());
    try {
        return checkpoint_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError("checkpoint " + path.string() + ": " + ex.what());
    }
}

} // namespace albench
