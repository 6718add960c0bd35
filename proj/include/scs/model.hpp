#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "scs/rng.hpp"
#include "scs/scoring.hpp"

namespace scs {

struct ToyEncoderConfig {
    int vocab_size = 0;
    int embedding_dim = 64;
    int layers = 2;
    int heads = 4;
    int max_positions = 128;
    double dropout = 0.1;

    void validate() const;
    bool operator==(const ToyEncoderConfig&) const = default;
};

/// All trainable tensors in one flat double vector with named segments, so
/// the optimizer, checkpoints, and finite-difference probes see a single
/// contiguous parameter space.
class ParamStore {
public:
    int add(std::string name, int rows, int cols);

    Eigen::Map<Eigen::MatrixXd> value(int handle);
    Eigen::Map<const Eigen::MatrixXd> value(int handle) const;
    Eigen::Map<Eigen::MatrixXd> grad(int handle);

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& grads() { return grads_; }
    const std::vector<double>& grads() const { return grads_; }

    size_t size() const { return values_.size(); }
    void zero_grad();

    struct Segment {
        std::string name;
        size_t offset;
        int rows, cols;
    };
    const std::vector<Segment>& segments() const { return segments_; }
    const Segment& segment(const std::string& name) const;

private:
    std::vector<Segment> segments_;
    std::vector<double> values_;
    std::vector<double> grads_;
};

/// Small trainable discriminative LM: token+position embeddings, a pre-norm
/// transformer encoder, and a one-logit-per-token linear head. Evaluation
/// scoring is deterministic (dropout off); training mode caches activations
/// for the hand-written backward pass.
class ToyDiscriminator : public TrainableScorer {
public:
    ToyDiscriminator(const ToyEncoderConfig& config, uint64_t seed);

    const ToyEncoderConfig& config() const { return config_; }

    // Scorer / TrainableScorer interface.
    std::vector<TokenLogits> score(std::span<const BuiltPrompt> prompts) const override;
    std::vector<TokenLogits> forward(std::span<const BuiltPrompt> prompts) override;
    void backward(std::span<const std::vector<double>> dlogits) override;
    void zero_grad() override;
    std::span<double> parameters() override;
    std::span<const double> parameters_const() const override;
    std::span<const double> gradients() const override;

    /// Raw-id entry points used by the RTD pretrainer.
    std::vector<double> score_ids(const std::vector<int>& ids) const;
    std::vector<double> forward_ids(const std::vector<int>& ids);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void save(std::ostream& out) const;
    static ToyDiscriminator load(std::istream& in);
    void save_file(const std::string& path) const;
    static ToyDiscriminator load_file(const std::string& path);

private:
    struct LayerHandles {
        int ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
        int ln2_g, ln2_b, w1, b1, w2, b2;
    };

    struct LayerCache {
        Eigen::MatrixXd x_in, xhat1, a1, q, k, v, y, xhat2, x2, a2, u, g;
        Eigen::VectorXd istd1, istd2;
        std::vector<Eigen::MatrixXd> att;  // per head, n x n
        Eigen::MatrixXd mask_attn, mask_ffn;
    };

    struct ForwardCache {
        std::vector<int> ids;
        std::vector<LayerCache> layers;
        Eigen::MatrixXd xhat_f, h;
        Eigen::VectorXd istd_f;
    };

    Eigen::MatrixXd embed(const std::vector<int>& ids) const;
    // Training mode iff dropout_rng is non-null.
    std::vector<double> run_forward(const std::vector<int>& ids, Rng* dropout_rng, ForwardCache* cache) const;
    void run_backward(const ForwardCache& cache, const std::vector<double>& dz);

    ToyEncoderConfig config_;
    ParamStore params_;
    int tok_emb_, pos_emb_, lnf_g_, lnf_b_, head_w_, head_b_;
    std::vector<LayerHandles> layers_;
    Rng dropout_rng_;
    std::vector<ForwardCache> caches_;
};

}  // namespace scs
