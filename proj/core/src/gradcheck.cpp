#include "psld/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace psld {

double gradcheck_relative_error(double analytic, double numeric) noexcept {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradcheckFloor});
    return std::abs(analytic - numeric) / denom;
}

namespace {

std::string group_of(const std::string& tensor_name) {
    // "head.mean.l1.weight" -> "head.mean", "combinator.l1.bias" -> "combinator"
    const auto first = tensor_name.find('.');
    if (tensor_name.compare(0, first, "head") == 0) {
        return tensor_name.substr(0, tensor_name.find('.', first + 1));
    }
    return tensor_name.substr(0, first);
}

} // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
    Rng root(cfg.seed);
    Rng init_rng = root.split(0);
    Rng data_rng = root.split(1);
    const Rng dropout_rng = root.split(2);

    ModelShape shape;
    shape.kind = cfg.kind;
    shape.mode = cfg.mode;
    shape.l_in = cfg.l_in;
    shape.l_out = cfg.l_out;
    shape.hidden = cfg.hidden;
    shape.dropout = cfg.dropout;
    PsldParams params = init_params(shape, init_rng);
    // Non-zero biases so their gradients are exercised away from the origin.
    for (auto& t : named_tensors(params))
        if (t.name.ends_with(".bias"))
            for (double& b : t.value->data()) b = data_rng.uniform(-0.1, 0.1);

    const std::size_t rows = cfg.n_vars * cfg.n_windows;
    Matrix x(rows, cfg.l_in), y(rows, cfg.l_out);
    for (double& v : x.data()) v = data_rng.normal();
    for (double& v : y.data()) v = data_rng.normal();

    DecomposerConfig dcfg;
    dcfg.kind = cfg.kind;
    // Short test series need kernels that fit their length.
    dcfg.stl.kappa_t = 5;
    dcfg.stl.kappa_s = 3;
    const ComponentBundle xc = decompose(x, dcfg);
    const ComponentBundle yc = decompose(y, dcfg);

    auto total_loss = [&](const PsldParams& p) {
        const HeadOutputs o = forward(p, xc, true, dropout_rng);
        return compute_loss(o, yc, y, cfg.lambda).total;
    };

    ForwardCache cache;
    const HeadOutputs out = forward(params, xc, true, dropout_rng, &cache);
    PsldParams grads = zeros_like(params);
    loss_and_backward(params, out, cache, yc, y, cfg.lambda, grads);

    GradcheckReport report;
    auto p_tensors = named_tensors(params);
    const auto g_tensors = named_tensors(std::as_const(grads));
    for (std::size_t t = 0; t < p_tensors.size(); ++t) {
        auto& values = p_tensors[t].value->data();
        const auto& analytic = g_tensors[t].value->data();
        const std::string group = group_of(p_tensors[t].name);
        double& group_worst = report.per_group[group];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + cfg.step;
            const double plus = total_loss(params);
            values[i] = saved - cfg.step;
            const double minus = total_loss(params);
            values[i] = saved;
            const double numeric = (plus - minus) / (2.0 * cfg.step);
            const double err = gradcheck_relative_error(analytic[i], numeric);
            ++report.n_checked;
            group_worst = std::max(group_worst, err);
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_tensor = p_tensors[t].name;
            }
        }
    }
    report.pass = report.max_rel_err <= cfg.tolerance;
    return report;
}

} // namespace psld
