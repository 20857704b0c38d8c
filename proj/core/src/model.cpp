#include "psld/model.hpp"

#include <cmath>

namespace psld {

const char* to_string(HeadMode mode) noexcept {
    return mode == HeadMode::separate ? "separate" : "merged";
}

HeadMode head_mode_from_string(const std::string& name) {
    if (name == "separate") return HeadMode::separate;
    if (name == "merged") return HeadMode::merged;
    throw std::invalid_argument("unknown head mode '" + name + "' (expected separate or merged)");
}

std::array<std::size_t, 3> ModelShape::head_in() const {
    if (kind == DecomposerKind::mvd) return {1, 1, l_in};
    return {l_in, l_in, l_in};
}

std::array<std::size_t, 3> ModelShape::head_out() const {
    if (kind == DecomposerKind::mvd) return {1, 1, l_out};
    return {l_out, l_out, l_out};
}

namespace {

const std::array<const char*, 3>& head_names(DecomposerKind kind) {
    static const std::array<const char*, 3> mvd{"mean", "var", "resid"};
    static const std::array<const char*, 3> stl{"trend", "seasonal", "resid"};
    return kind == DecomposerKind::mvd ? mvd : stl;
}

std::string head_label(const PsldParams& p, std::size_t index) {
    if (p.shape.mode == HeadMode::merged) return "merged";
    return head_names(p.shape.kind)[index];
}

template <typename HeadT, typename Out>
void append_head(const std::string& prefix, HeadT& h, Out& out) {
    out.push_back({prefix + ".l1.weight", &h.learner.layer1.weight});
    out.push_back({prefix + ".l1.bias", &h.learner.layer1.bias});
    out.push_back({prefix + ".l2.weight", &h.learner.layer2.weight});
    out.push_back({prefix + ".l2.bias", &h.learner.layer2.bias});
    out.push_back({prefix + ".pred.weight", &h.predictor.weight});
    out.push_back({prefix + ".pred.bias", &h.predictor.bias});
}

template <typename P, typename Out>
void collect(P& p, Out& out) {
    for (std::size_t i = 0; i < p.heads.size(); ++i)
        append_head("head." + head_label(p, i), p.heads[i], out);
    append_head(std::string("combinator"), p.combinator, out);
}

LinearLayer zero_layer(std::size_t out, std::size_t in) {
    return {Matrix(out, in), Matrix(1, out)};
}

Head zero_head(std::size_t in, std::size_t hidden, std::size_t out, double dropout) {
    return {{zero_layer(hidden, in), zero_layer(hidden, hidden), dropout},
            zero_layer(out, hidden)};
}

Head zeros_like_head(const Head& h) {
    Head z = zero_head(h.learner.layer1.in(), h.learner.layer1.out(), h.predictor.out(),
                       h.learner.dropout_rate);
    z.learner.layer2 = zero_layer(h.learner.layer2.out(), h.learner.layer2.in());
    return z;
}

void init_layer(LinearLayer& layer, Rng& rng) {
    if (layer.in() == 0) throw std::invalid_argument("init_params: zero fan-in");
    const double bound = std::sqrt(1.0 / static_cast<double>(layer.in()));
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
}

Head random_head(std::size_t in, std::size_t hidden, std::size_t out, double dropout, Rng& rng) {
    Head h = zero_head(in, hidden, out, dropout);
    init_layer(h.learner.layer1, rng);
    init_layer(h.learner.layer2, rng);
    init_layer(h.predictor, rng);
    return h;
}

void check_dropout(double p) {
    if (!(p >= 0.0 && p < 1.0))
        throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(p));
}

// x W^T + b
Matrix linear_forward(const LinearLayer& layer, const Matrix& x) {
    return add_row_vector(matmul_bt(x, layer.weight), layer.bias.data());
}

void linear_backward(const LinearLayer& layer, const Matrix& x, const Matrix& d_out,
                     LinearLayer& grad) {
    grad.weight = add(grad.weight, matmul_at(d_out, x));
    const auto db = column_sums(d_out);
    for (std::size_t j = 0; j < db.size(); ++j) grad.bias(0, j) += db[j];
    (void)layer;
}

void mse_grad(const Matrix& pred, const Matrix& target, double weight, Matrix& acc) {
    const double factor = 2.0 * weight / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        acc.data()[i] += factor * (pred.data()[i] - target.data()[i]);
}

double mse(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target))
        throw ShapeError("mse: prediction " + pred.shape_string() + " vs target " +
                         target.shape_string());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

} // namespace

std::vector<NamedTensor> named_tensors(PsldParams& p) {
    std::vector<NamedTensor> out;
    collect(p, out);
    return out;
}

std::vector<ConstNamedTensor> named_tensors(const PsldParams& p) {
    std::vector<ConstNamedTensor> out;
    collect(p, out);
    return out;
}

std::vector<NamedTensor> named_tensors(PlainParams& p) {
    std::vector<NamedTensor> out;
    append_head(std::string("plain"), p.head, out);
    return out;
}

std::vector<ConstNamedTensor> named_tensors(const PlainParams& p) {
    std::vector<ConstNamedTensor> out;
    append_head(std::string("plain"), p.head, out);
    return out;
}

PsldParams zeros_like(const PsldParams& p) {
    PsldParams z;
    z.shape = p.shape;
    for (const auto& h : p.heads) z.heads.push_back(zeros_like_head(h));
    z.combinator = zeros_like_head(p.combinator);
    return z;
}

PlainParams zeros_like(const PlainParams& p) {
    return {p.l_in, p.l_out, zeros_like_head(p.head)};
}

PsldParams init_params(const ModelShape& shape, Rng& rng) {
    if (shape.l_in == 0 || shape.l_out == 0 || shape.hidden == 0)
        throw std::invalid_argument("init_params: zero fan-in (l_in, l_out and hidden must be >= 1)");
    check_dropout(shape.dropout);
    PsldParams p;
    p.shape = shape;
    const auto in = shape.head_in();
    const auto out = shape.head_out();
    if (shape.mode == HeadMode::separate) {
        for (std::size_t k = 0; k < 3; ++k)
            p.heads.push_back(random_head(in[k], shape.hidden, out[k], shape.dropout, rng));
    } else {
        p.heads.push_back(random_head(in[0] + in[1] + in[2], 3 * shape.hidden,
                                      out[0] + out[1] + out[2], shape.dropout, rng));
    }
    p.combinator = random_head(shape.l_out, shape.hidden, shape.l_out, shape.dropout, rng);
    return p;
}

PlainParams init_plain_params(std::size_t l_in, std::size_t l_out, std::size_t hidden,
                              double dropout, Rng& rng) {
    if (l_in == 0 || l_out == 0 || hidden == 0)
        throw std::invalid_argument("init_plain_params: zero fan-in");
    check_dropout(dropout);
    return {l_in, l_out, random_head(l_in, hidden, l_out, dropout, rng)};
}

Head embed_block_diagonal(const std::vector<Head>& heads) {
    std::size_t in = 0, hid = 0, out = 0;
    for (const auto& h : heads) {
        in += h.learner.layer1.in();
        hid += h.learner.layer1.out();
        out += h.predictor.out();
    }
    Head m = zero_head(in, hid, out, heads.empty() ? 0.0 : heads.front().learner.dropout_rate);
    std::size_t io = 0, ho = 0, oo = 0;
    for (const auto& h : heads) {
        const auto& l1 = h.learner.layer1;
        const auto& l2 = h.learner.layer2;
        const auto& pr = h.predictor;
        for (std::size_t r = 0; r < l1.out(); ++r) {
            for (std::size_t c = 0; c < l1.in(); ++c)
                m.learner.layer1.weight(ho + r, io + c) = l1.weight(r, c);
            m.learner.layer1.bias(0, ho + r) = l1.bias(0, r);
            for (std::size_t c = 0; c < l2.in(); ++c)
                m.learner.layer2.weight(ho + r, ho + c) = l2.weight(r, c);
            m.learner.layer2.bias(0, ho + r) = l2.bias(0, r);
        }
        for (std::size_t r = 0; r < pr.out(); ++r) {
            for (std::size_t c = 0; c < pr.in(); ++c)
                m.predictor.weight(oo + r, ho + c) = pr.weight(r, c);
            m.predictor.bias(0, oo + r) = pr.bias(0, r);
        }
        io += l1.in();
        ho += l1.out();
        oo += pr.out();
    }
    return m;
}

PsldParams to_merged(const PsldParams& separate) {
    if (separate.shape.mode != HeadMode::separate)
        throw std::invalid_argument("to_merged: parameters are already merged");
    PsldParams m;
    m.shape = separate.shape;
    m.shape.mode = HeadMode::merged;
    m.heads.push_back(embed_block_diagonal(separate.heads));
    m.combinator = separate.combinator;
    return m;
}

// --- forward / backward ----------------------------------------------------

Matrix head_forward(const Head& head, const Matrix& input, bool training, const Rng& rng,
                    HeadCache* cache, std::uint64_t key_base, std::size_t dropout_blocks) {
    const auto& l1 = head.learner.layer1;
    if (input.cols() != l1.in())
        throw ShapeError("head input " + input.shape_string() + " does not match layer1 " +
                         l1.weight.shape_string());
    Matrix pre1 = linear_forward(l1, input);
    Matrix act = relu(pre1);

    const double p = head.learner.dropout_rate;
    Matrix mask;
    if (training && p > 0.0) {
        const std::size_t hidden = act.cols();
        if (dropout_blocks == 0 || hidden % dropout_blocks != 0)
            throw std::invalid_argument("head_forward: hidden width not divisible into dropout blocks");
        const std::size_t block = hidden / dropout_blocks;
        const double keep_scale = 1.0 / (1.0 - p);
        mask = Matrix(act.rows(), hidden);
        for (std::size_t b = 0; b < dropout_blocks; ++b) {
            Rng stream = rng.split(key_base + b);
            for (std::size_t r = 0; r < act.rows(); ++r)
                for (std::size_t c = b * block; c < (b + 1) * block; ++c)
                    mask(r, c) = stream.uniform() < p ? 0.0 : keep_scale;
        }
        act = hadamard(act, mask);
    }

    Matrix features = linear_forward(head.learner.layer2, act);
    Matrix out = linear_forward(head.predictor, features);
    if (cache) {
        cache->input = input;
        cache->pre1 = std::move(pre1);
        cache->dropmask = std::move(mask);
        cache->act1 = std::move(act);
        cache->features = std::move(features);
    }
    return out;
}

Matrix head_backward(const Head& head, const HeadCache& cache, const Matrix& d_out, Head& grad,
                     bool want_input_grad) {
    linear_backward(head.predictor, cache.features, d_out, grad.predictor);
    Matrix d_features = matmul(d_out, head.predictor.weight);

    linear_backward(head.learner.layer2, cache.act1, d_features, grad.learner.layer2);
    Matrix d_act = matmul(d_features, head.learner.layer2.weight);

    if (!cache.dropmask.empty()) d_act = hadamard(d_act, cache.dropmask);
    for (std::size_t i = 0; i < d_act.size(); ++i)
        if (!(cache.pre1.data()[i] > 0.0)) d_act.data()[i] = 0.0;

    linear_backward(head.learner.layer1, cache.input, d_act, grad.learner.layer1);
    if (!want_input_grad) return {};
    return matmul(d_act, head.learner.layer1.weight);
}

namespace {

void check_components(const PsldParams& params, const ComponentBundle& x) {
    if (x.kind != params.shape.kind)
        throw ShapeError(std::string("forward: input components are ") + to_string(x.kind) +
                         " but the model expects " + to_string(params.shape.kind));
    const auto in = params.shape.head_in();
    const Matrix* parts[3] = {&x.c1, &x.c2, &x.c3};
    const auto& names = head_names(params.shape.kind);
    for (std::size_t k = 0; k < 3; ++k) {
        if (parts[k]->cols() != in[k] || parts[k]->rows() != x.c3.rows())
            throw ShapeError(std::string("forward: head '") + names[k] + "' expects width " +
                             std::to_string(in[k]) + ", got " + parts[k]->shape_string());
    }
}

constexpr std::uint64_t kCombinatorKey = 3;

} // namespace

HeadOutputs forward(const PsldParams& params, const ComponentBundle& x, bool training,
                    const Rng& rng, ForwardCache* cache) {
    check_components(params, x);
    const auto& shape = params.shape;
    const auto out_w = shape.head_out();

    HeadOutputs o;
    o.kind = shape.kind;
    if (cache) cache->heads.assign(params.heads.size(), {});

    if (shape.mode == HeadMode::separate) {
        if (params.heads.size() != 3) throw ShapeError("forward: separate mode needs three heads");
        const Matrix* in[3] = {&x.c1, &x.c2, &x.c3};
        Matrix* out[3] = {&o.c1, &o.c2, &o.c3};
        for (std::size_t k = 0; k < 3; ++k)
            *out[k] = head_forward(params.heads[k], *in[k], training, rng,
                                   cache ? &cache->heads[k] : nullptr, k, 1);
    } else {
        if (params.heads.size() != 1) throw ShapeError("forward: merged mode needs one head");
        const Matrix parts[3] = {x.c1, x.c2, x.c3};
        Matrix wide = head_forward(params.heads[0], hconcat(parts), training, rng,
                                   cache ? &cache->heads[0] : nullptr, 0, 3);
        o.c1 = column_block(wide, 0, out_w[0]);
        o.c2 = column_block(wide, out_w[0], out_w[1]);
        o.c3 = column_block(wide, out_w[0] + out_w[1], out_w[2]);
    }

    // Combinator over the predicted components.
    Matrix comb_in = shape.kind == DecomposerKind::mvd ? mul_column_broadcast(o.c3, o.c2)
                                                        : add(o.c2, o.c3);
    Matrix comb_out = head_forward(params.combinator, comb_in, training, rng,
                                   cache ? &cache->combinator : nullptr, kCombinatorKey, 1);
    o.y_hat = shape.kind == DecomposerKind::mvd ? add_column_broadcast(comb_out, o.c1)
                                                : add(comb_out, o.c1);
    return o;
}

LossBreakdown compute_loss(const HeadOutputs& outputs, const ComponentBundle& labels,
                           const Matrix& y, double lambda) {
    LossBreakdown l;
    const Matrix* pred[3] = {&outputs.c1, &outputs.c2, &outputs.c3};
    const Matrix* target[3] = {&labels.c1, &labels.c2, &labels.c3};
    const auto& names = head_names(outputs.kind);
    for (std::size_t k = 0; k < 3; ++k) {
        l.per_head[k] = mse(*pred[k], *target[k]);
        if (!std::isfinite(l.per_head[k]))
            throw NumericError(std::string("non-finite component loss in head '") + names[k] + "'");
        l.cpn += l.per_head[k];
    }
    l.cbn = mse(outputs.y_hat, y);
    if (!std::isfinite(l.cbn)) throw NumericError("non-finite loss in head 'combinator'");
    l.total = l.cbn + lambda * l.cpn;
    return l;
}

LossBreakdown loss_and_backward(const PsldParams& params, const HeadOutputs& outputs,
                                const ForwardCache& cache, const ComponentBundle& labels,
                                const Matrix& y, double lambda, PsldParams& grads) {
    const LossBreakdown loss = compute_loss(outputs, labels, y, lambda);
    const bool mvd = params.shape.kind == DecomposerKind::mvd;

    Matrix d1(outputs.c1.rows(), outputs.c1.cols());
    Matrix d2(outputs.c2.rows(), outputs.c2.cols());
    Matrix d3(outputs.c3.rows(), outputs.c3.cols());

    // Combinator path: y_hat = comb(z) + c1, z = c2 * c3 (mvd) or c2 + c3 (stl).
    Matrix d_yhat(y.rows(), y.cols());
    mse_grad(outputs.y_hat, y, 1.0, d_yhat);
    d1 = add(d1, mvd ? row_sums(d_yhat) : d_yhat);
    Matrix dz = head_backward(params.combinator, cache.combinator, d_yhat, grads.combinator, true);
    if (mvd) {
        d2 = add(d2, row_sums(hadamard(dz, outputs.c3)));
        d3 = add(d3, mul_column_broadcast(dz, outputs.c2));
    } else {
        d2 = add(d2, dz);
        d3 = add(d3, dz);
    }

    // Component supervision.
    mse_grad(outputs.c1, labels.c1, lambda, d1);
    mse_grad(outputs.c2, labels.c2, lambda, d2);
    mse_grad(outputs.c3, labels.c3, lambda, d3);

    if (params.shape.mode == HeadMode::separate) {
        const Matrix* d[3] = {&d1, &d2, &d3};
        for (std::size_t k = 0; k < 3; ++k)
            head_backward(params.heads[k], cache.heads[k], *d[k], grads.heads[k], false);
    } else {
        const Matrix parts[3] = {d1, d2, d3};
        head_backward(params.heads[0], cache.heads[0], hconcat(parts), grads.heads[0], false);
    }
    return loss;
}

Matrix plain_forward(const PlainParams& params, const Matrix& x, bool training, const Rng& rng,
                     HeadCache* cache) {
    return head_forward(params.head, x, training, rng, cache, 0, 1);
}

double plain_loss_and_backward(const PlainParams& params, const Matrix& y_hat,
                               const HeadCache& cache, const Matrix& y, PlainParams& grads) {
    const double loss = mse(y_hat, y);
    if (!std::isfinite(loss)) throw NumericError("non-finite loss in head 'plain'");
    Matrix d(y.rows(), y.cols());
    mse_grad(y_hat, y, 1.0, d);
    head_backward(params.head, cache, d, grads.head, false);
    return loss;
}

void adam_update(std::span<const NamedTensor> params, std::span<const ConstNamedTensor> grads,
                 std::span<const NamedTensor> m, std::span<const NamedTensor> v,
                 std::uint64_t t, const AdamConfig& cfg, double lr) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
        throw ShapeError("adam_step: parameter, gradient and moment lists differ in length");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].value->data();
        const auto& g = grads[i].value->data();
        auto& mi = m[i].value->data();
        auto& vi = v[i].value->data();
        if (g.size() != p.size() || mi.size() != p.size() || vi.size() != p.size())
            throw ShapeError("adam_step: shape mismatch for " + params[i].name);
        for (std::size_t j = 0; j < p.size(); ++j) {
            mi[j] = cfg.beta1 * mi[j] + (1.0 - cfg.beta1) * g[j];
            vi[j] = cfg.beta2 * vi[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double m_hat = mi[j] / bc1;
            const double v_hat = vi[j] / bc2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

} // namespace psld
