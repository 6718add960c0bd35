#include "scs/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scs {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kLnEps = 1e-5;
const char kMagic[8] = {'S', 'C', 'S', 'T', 'O', 'Y', 'D', '1'};

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599344;
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("truncated model stream");
    return v;
}

// y = gamma .* (x - mu)/sigma + beta, per column. Caches xhat and 1/sigma.
Eigen::MatrixXd ln_forward(const Eigen::MatrixXd& x, Eigen::Map<const Eigen::MatrixXd> gamma,
                           Eigen::Map<const Eigen::MatrixXd> beta, Eigen::MatrixXd* xhat,
                           Eigen::VectorXd* istd) {
    const auto d = x.rows();
    const auto n = x.cols();
    xhat->resize(d, n);
    istd->resize(n);
    Eigen::MatrixXd y(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double mu = x.col(j).mean();
        const double var = (x.col(j).array() - mu).square().mean();
        const double is = 1.0 / std::sqrt(var + kLnEps);
        (*istd)(j) = is;
        xhat->col(j) = (x.col(j).array() - mu) * is;
        y.col(j) = gamma.col(0).array() * xhat->col(j).array() + beta.col(0).array();
    }
    return y;
}

// Accumulates dgamma/dbeta and returns dx.
Eigen::MatrixXd ln_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& xhat,
                            const Eigen::VectorXd& istd, const Eigen::Ref<const Eigen::MatrixXd>& gamma,
                            Eigen::Map<Eigen::MatrixXd> dgamma, Eigen::Map<Eigen::MatrixXd> dbeta) {
    const auto d = dy.rows();
    const auto n = dy.cols();
    Eigen::MatrixXd dx(d, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        dgamma.col(0).array() += dy.col(j).array() * xhat.col(j).array();
        dbeta.col(0) += dy.col(j);
        const Eigen::ArrayXd dyh = gamma.col(0).array() * dy.col(j).array();
        const double m1 = dyh.mean();
        const double m2 = (dyh * xhat.col(j).array()).mean();
        dx.col(j) = istd(j) * (dyh - m1 - xhat.col(j).array() * m2);
    }
    return dx;
}

}  // namespace

void ToyEncoderConfig::validate() const {
    if (vocab_size <= 0) throw std::invalid_argument("vocab_size must be positive");
    if (embedding_dim <= 0 || layers <= 0 || heads <= 0 || max_positions <= 0)
        throw std::invalid_argument("encoder dimensions must be positive");
    if (embedding_dim % heads != 0) throw std::invalid_argument("embedding_dim must be divisible by heads");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0,1)");
}

int ParamStore::add(std::string name, int rows, int cols) {
    segments_.push_back({std::move(name), values_.size(), rows, cols});
    values_.resize(values_.size() + static_cast<size_t>(rows) * static_cast<size_t>(cols), 0.0);
    grads_.resize(values_.size(), 0.0);
    return static_cast<int>(segments_.size()) - 1;
}

Eigen::Map<Eigen::MatrixXd> ParamStore::value(int handle) {
    const Segment& s = segments_.at(static_cast<size_t>(handle));
    return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParamStore::value(int handle) const {
    const Segment& s = segments_.at(static_cast<size_t>(handle));
    return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<Eigen::MatrixXd> ParamStore::grad(int handle) {
    const Segment& s = segments_.at(static_cast<size_t>(handle));
    return {grads_.data() + s.offset, s.rows, s.cols};
}

void ParamStore::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

const ParamStore::Segment& ParamStore::segment(const std::string& name) const {
    for (const auto& s : segments_) {
        if (s.name == name) return s;
    }
    throw std::out_of_range("no parameter segment named " + name);
}

ToyDiscriminator::ToyDiscriminator(const ToyEncoderConfig& config, uint64_t seed)
    : config_(config), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ull) {
    config_.validate();
    const int d = config_.embedding_dim;
    const int f = 4 * d;

    tok_emb_ = params_.add("tok_emb", d, config_.vocab_size);
    pos_emb_ = params_.add("pos_emb", d, config_.max_positions);
    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerHandles h;
        h.ln1_g = params_.add(p + "ln1.gamma", d, 1);
        h.ln1_b = params_.add(p + "ln1.beta", d, 1);
        h.wq = params_.add(p + "attn.wq", d, d);
        h.bq = params_.add(p + "attn.bq", d, 1);
        h.wk = params_.add(p + "attn.wk", d, d);
        h.bk = params_.add(p + "attn.bk", d, 1);
        h.wv = params_.add(p + "attn.wv", d, d);
        h.bv = params_.add(p + "attn.bv", d, 1);
        h.wo = params_.add(p + "attn.wo", d, d);
        h.bo = params_.add(p + "attn.bo", d, 1);
        h.ln2_g = params_.add(p + "ln2.gamma", d, 1);
        h.ln2_b = params_.add(p + "ln2.beta", d, 1);
        h.w1 = params_.add(p + "ffn.w1", f, d);
        h.b1 = params_.add(p + "ffn.b1", f, 1);
        h.w2 = params_.add(p + "ffn.w2", d, f);
        h.b2 = params_.add(p + "ffn.b2", d, 1);
        layers_.push_back(h);
    }
    lnf_g_ = params_.add("lnf.gamma", d, 1);
    lnf_b_ = params_.add("lnf.beta", d, 1);
    head_w_ = params_.add("head.w", d, 1);
    head_b_ = params_.add("head.b", 1, 1);

    Rng init_rng(seed);
    for (const auto& seg : params_.segments()) {
        const bool is_gamma = seg.name.ends_with("gamma");
        const bool is_bias = seg.name.ends_with("beta") || seg.name.find(".b") != std::string::npos ||
                             seg.name == "head.b";
        double* ptr = params_.values().data() + seg.offset;
        const size_t count = static_cast<size_t>(seg.rows) * static_cast<size_t>(seg.cols);
        for (size_t i = 0; i < count; ++i) {
            if (is_gamma) ptr[i] = 1.0;
            else if (is_bias) ptr[i] = 0.0;
            else ptr[i] = init_rng.normal(0.0, kInitStd);
        }
    }
}

Eigen::MatrixXd ToyDiscriminator::embed(const std::vector<int>& ids) const {
    const auto tok = params_.value(tok_emb_);
    const auto pos = params_.value(pos_emb_);
    Eigen::MatrixXd x(config_.embedding_dim, static_cast<Eigen::Index>(ids.size()));
    for (size_t t = 0; t < ids.size(); ++t)
        x.col(static_cast<Eigen::Index>(t)) = tok.col(ids[t]) + pos.col(static_cast<Eigen::Index>(t));
    return x;
}

std::vector<double> ToyDiscriminator::run_forward(const std::vector<int>& ids, Rng* dropout_rng,
                                                  ForwardCache* cache) const {
    if (ids.empty()) throw std::invalid_argument("cannot score an empty token sequence");
    if (ids.size() > static_cast<size_t>(config_.max_positions))
        throw std::invalid_argument("prompt length " + std::to_string(ids.size()) + " exceeds max_positions " +
                                    std::to_string(config_.max_positions));
    for (int id : ids) {
        if (id < 0 || id >= config_.vocab_size)
            throw std::invalid_argument("token id " + std::to_string(id) + " out of range");
    }

    const int d = config_.embedding_dim;
    const int heads = config_.heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
    const bool use_dropout = dropout_rng != nullptr && config_.dropout > 0.0;
    const double keep = 1.0 - config_.dropout;

    auto dropout_mask = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        return m;
    };

    if (cache) {
        cache->ids = ids;
        cache->layers.assign(layers_.size(), {});
    }

    Eigen::MatrixXd x = embed(ids);
    for (size_t l = 0; l < layers_.size(); ++l) {
        const LayerHandles& h = layers_[l];
        LayerCache scratch;
        LayerCache& lc = cache ? cache->layers[l] : scratch;
        lc.x_in = x;

        lc.a1 = ln_forward(x, params_.value(h.ln1_g), params_.value(h.ln1_b), &lc.xhat1, &lc.istd1);
        lc.q = params_.value(h.wq) * lc.a1;
        lc.q.colwise() += params_.value(h.bq).col(0);
        lc.k = params_.value(h.wk) * lc.a1;
        lc.k.colwise() += params_.value(h.bk).col(0);
        lc.v = params_.value(h.wv) * lc.a1;
        lc.v.colwise() += params_.value(h.bv).col(0);

        lc.y.resize(d, n);
        lc.att.resize(static_cast<size_t>(heads));
        for (int hd = 0; hd < heads; ++hd) {
            const auto qh = lc.q.middleRows(hd * dh, dh);
            const auto kh = lc.k.middleRows(hd * dh, dh);
            const auto vh = lc.v.middleRows(hd * dh, dh);
            Eigen::MatrixXd s = (qh.transpose() * kh) * scale;
            Eigen::MatrixXd& att = lc.att[static_cast<size_t>(hd)];
            att.resize(n, n);
            for (Eigen::Index t = 0; t < n; ++t) {
                const double hi = s.row(t).maxCoeff();
                att.row(t) = (s.row(t).array() - hi).exp();
                att.row(t) /= att.row(t).sum();
            }
            lc.y.middleRows(hd * dh, dh) = vh * att.transpose();
        }

        Eigen::MatrixXd o = params_.value(h.wo) * lc.y;
        o.colwise() += params_.value(h.bo).col(0);
        if (use_dropout) {
            lc.mask_attn = dropout_mask(d, n);
            o.array() *= lc.mask_attn.array();
        }
        lc.x2 = x + o;

        lc.a2 = ln_forward(lc.x2, params_.value(h.ln2_g), params_.value(h.ln2_b), &lc.xhat2, &lc.istd2);
        lc.u = params_.value(h.w1) * lc.a2;
        lc.u.colwise() += params_.value(h.b1).col(0);
        lc.g = lc.u.unaryExpr([](double v) { return gelu(v); });
        Eigen::MatrixXd fout = params_.value(h.w2) * lc.g;
        fout.colwise() += params_.value(h.b2).col(0);
        if (use_dropout) {
            lc.mask_ffn = dropout_mask(d, n);
            fout.array() *= lc.mask_ffn.array();
        }
        x = lc.x2 + fout;
    }

    Eigen::MatrixXd scratch_xhat;
    Eigen::VectorXd scratch_istd;
    Eigen::MatrixXd& xhat_f = cache ? cache->xhat_f : scratch_xhat;
    Eigen::VectorXd& istd_f = cache ? cache->istd_f : scratch_istd;
    Eigen::MatrixXd hfin = ln_forward(x, params_.value(lnf_g_), params_.value(lnf_b_), &xhat_f, &istd_f);
    if (cache) cache->h = hfin;

    const auto w = params_.value(head_w_);
    const double b = params_.value(head_b_)(0, 0);
    std::vector<double> z(ids.size());
    for (Eigen::Index t = 0; t < n; ++t) z[static_cast<size_t>(t)] = w.col(0).dot(hfin.col(t)) + b;
    return z;
}

void ToyDiscriminator::run_backward(const ForwardCache& cache, const std::vector<double>& dz) {
    const int d = config_.embedding_dim;
    const int heads = config_.heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index n = static_cast<Eigen::Index>(cache.ids.size());
    if (dz.size() != cache.ids.size()) throw std::invalid_argument("dlogits length mismatch");

    const auto w = params_.value(head_w_);
    Eigen::Map<const Eigen::VectorXd> dzv(dz.data(), n);

    params_.grad(head_w_).col(0) += cache.h * dzv;
    params_.grad(head_b_)(0, 0) += dzv.sum();
    Eigen::MatrixXd dx = w.col(0) * dzv.transpose();

    dx = ln_backward(dx, cache.xhat_f, cache.istd_f, params_.value(lnf_g_), params_.grad(lnf_g_),
                     params_.grad(lnf_b_));

    for (size_t li = layers_.size(); li-- > 0;) {
        const LayerHandles& h = layers_[li];
        const LayerCache& lc = cache.layers[li];

        // FFN branch: x = x2 + dropout(W2 gelu(W1 a2 + b1) + b2)
        Eigen::MatrixXd df = dx;
        if (lc.mask_ffn.size() > 0) df.array() *= lc.mask_ffn.array();
        params_.grad(h.w2) += df * lc.g.transpose();
        params_.grad(h.b2).col(0) += df.rowwise().sum();
        Eigen::MatrixXd dg = params_.value(h.w2).transpose() * df;
        Eigen::MatrixXd du = dg.array() * lc.u.unaryExpr([](double v) { return gelu_grad(v); }).array();
        params_.grad(h.w1) += du * lc.a2.transpose();
        params_.grad(h.b1).col(0) += du.rowwise().sum();
        Eigen::MatrixXd da2 = params_.value(h.w1).transpose() * du;

        Eigen::MatrixXd dx2 = dx;  // residual path
        dx2 += ln_backward(da2, lc.xhat2, lc.istd2, params_.value(h.ln2_g), params_.grad(h.ln2_g),
                           params_.grad(h.ln2_b));

        // Attention branch: x2 = x_in + dropout(Wo y + bo)
        Eigen::MatrixXd dout = dx2;
        if (lc.mask_attn.size() > 0) dout.array() *= lc.mask_attn.array();
        params_.grad(h.wo) += dout * lc.y.transpose();
        params_.grad(h.bo).col(0) += dout.rowwise().sum();
        Eigen::MatrixXd dy = params_.value(h.wo).transpose() * dout;

        Eigen::MatrixXd dq(d, n), dk(d, n), dv(d, n);
        for (int hd = 0; hd < heads; ++hd) {
            const auto qh = lc.q.middleRows(hd * dh, dh);
            const auto kh = lc.k.middleRows(hd * dh, dh);
            const auto vh = lc.v.middleRows(hd * dh, dh);
            const Eigen::MatrixXd& att = lc.att[static_cast<size_t>(hd)];
            const auto dyh = dy.middleRows(hd * dh, dh);

            dv.middleRows(hd * dh, dh) = dyh * att;
            Eigen::MatrixXd datt = dyh.transpose() * vh;
            Eigen::MatrixXd ds(n, n);
            for (Eigen::Index t = 0; t < n; ++t) {
                const double dot = datt.row(t).dot(att.row(t));
                ds.row(t) = att.row(t).array() * (datt.row(t).array() - dot);
            }
            dq.middleRows(hd * dh, dh) = kh * ds.transpose() * scale;
            dk.middleRows(hd * dh, dh) = qh * ds * scale;
        }

        params_.grad(h.wq) += dq * lc.a1.transpose();
        params_.grad(h.bq).col(0) += dq.rowwise().sum();
        params_.grad(h.wk) += dk * lc.a1.transpose();
        params_.grad(h.bk).col(0) += dk.rowwise().sum();
        params_.grad(h.wv) += dv * lc.a1.transpose();
        params_.grad(h.bv).col(0) += dv.rowwise().sum();

        Eigen::MatrixXd da1 = params_.value(h.wq).transpose() * dq + params_.value(h.wk).transpose() * dk +
                              params_.value(h.wv).transpose() * dv;
        dx = dx2 + ln_backward(da1, lc.xhat1, lc.istd1, params_.value(h.ln1_g), params_.grad(h.ln1_g),
                               params_.grad(h.ln1_b));
    }

    auto dtok = params_.grad(tok_emb_);
    auto dpos = params_.grad(pos_emb_);
    for (Eigen::Index t = 0; t < n; ++t) {
        dtok.col(cache.ids[static_cast<size_t>(t)]) += dx.col(t);
        dpos.col(t) += dx.col(t);
    }
}

std::vector<TokenLogits> ToyDiscriminator::score(std::span<const BuiltPrompt> prompts) const {
    std::vector<TokenLogits> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(TokenLogits{run_forward(p.token_ids, nullptr, nullptr)});
    return out;
}

std::vector<TokenLogits> ToyDiscriminator::forward(std::span<const BuiltPrompt> prompts) {
    caches_.clear();
    caches_.resize(prompts.size());
    std::vector<TokenLogits> out;
    out.reserve(prompts.size());
    for (size_t i = 0; i < prompts.size(); ++i)
        out.push_back(TokenLogits{run_forward(prompts[i].token_ids, &dropout_rng_, &caches_[i])});
    return out;
}

void ToyDiscriminator::backward(std::span<const std::vector<double>> dlogits) {
    if (dlogits.size() != caches_.size())
        throw std::logic_error("backward expects one gradient vector per prompt of the last forward");
    for (size_t i = 0; i < dlogits.size(); ++i) run_backward(caches_[i], dlogits[i]);
}

void ToyDiscriminator::zero_grad() { params_.zero_grad(); }

std::span<double> ToyDiscriminator::parameters() { return params_.values(); }
std::span<const double> ToyDiscriminator::parameters_const() const { return params_.values(); }
std::span<const double> ToyDiscriminator::gradients() const { return params_.grads(); }

std::vector<double> ToyDiscriminator::score_ids(const std::vector<int>& ids) const {
    return run_forward(ids, nullptr, nullptr);
}

std::vector<double> ToyDiscriminator::forward_ids(const std::vector<int>& ids) {
    caches_.clear();
    caches_.resize(1);
    return run_forward(ids, &dropout_rng_, &caches_[0]);
}

void ToyDiscriminator::save(std::ostream& out) const {
    out.write(kMagic, sizeof kMagic);
    write_pod<int32_t>(out, config_.vocab_size);
    write_pod<int32_t>(out, config_.embedding_dim);
    write_pod<int32_t>(out, config_.layers);
    write_pod<int32_t>(out, config_.heads);
    write_pod<int32_t>(out, config_.max_positions);
    write_pod<double>(out, config_.dropout);
    write_pod<uint64_t>(out, params_.size());
    out.write(reinterpret_cast<const char*>(params_.values().data()),
              static_cast<std::streamsize>(params_.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed to write model stream");
}

ToyDiscriminator ToyDiscriminator::load(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error("not a model file (bad magic)");
    ToyEncoderConfig config;
    config.vocab_size = read_pod<int32_t>(in);
    config.embedding_dim = read_pod<int32_t>(in);
    config.layers = read_pod<int32_t>(in);
    config.heads = read_pod<int32_t>(in);
    config.max_positions = read_pod<int32_t>(in);
    config.dropout = read_pod<double>(in);
    ToyDiscriminator model(config, 0);
    const uint64_t count = read_pod<uint64_t>(in);
    if (count != model.params_.size()) throw std::runtime_error("model parameter count mismatch");
    in.read(reinterpret_cast<char*>(model.params_.values().data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("truncated model stream");
    return model;
}

void ToyDiscriminator::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    save(out);
}

ToyDiscriminator ToyDiscriminator::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read model file: " + path);
    return load(in);
}

}  // namespace scs
