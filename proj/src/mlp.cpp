#include "gridcast/mlp.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gridcast/errors.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/text.hpp"

namespace gridcast {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

const char* optimizer_name(OptimizerKind o) {
    switch (o) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::Rmsprop: return "rmsprop";
        case OptimizerKind::Adam: return "adam";
    }
    return "?";
}

std::optional<Activation> parse_activation(const std::string& s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    return std::nullopt;
}

std::optional<OptimizerKind> parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "rmsprop") return OptimizerKind::Rmsprop;
    if (s == "adam") return OptimizerKind::Adam;
    return std::nullopt;
}

int default_hidden_neurons(int n_in, int n_out) {
    int h = static_cast<int>(std::ceil(2.0 * (n_in + n_out) / 3.0));
    return std::clamp(h, 8, 256);
}

namespace {

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::Linear: return z;
        case Activation::Relu: return z.cwiseMax(0.0);
        case Activation::Tanh: return z.array().tanh().matrix();
        case Activation::Sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    }
    return z;
}

// derivative expressed through the activation value
Eigen::ArrayXXd activation_grad(const Eigen::MatrixXd& a_val, Activation a) {
    switch (a) {
        case Activation::Linear: return Eigen::ArrayXXd::Ones(a_val.rows(), a_val.cols());
        case Activation::Relu: return (a_val.array() > 0.0).cast<double>();
        case Activation::Tanh: return 1.0 - a_val.array().square();
        case Activation::Sigmoid: return a_val.array() * (1.0 - a_val.array());
    }
    return Eigen::ArrayXXd::Ones(a_val.rows(), a_val.cols());
}

std::vector<Eigen::MatrixXd> forward_all(const MlpCore& core, const Eigen::MatrixXd& x) {
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(core.weights.size() + 1);
    acts.push_back(x);
    for (std::size_t l = 0; l < core.weights.size(); ++l) {
        Eigen::MatrixXd z = acts.back() * core.weights[l];
        z.rowwise() += core.biases[l].transpose();
        acts.push_back(apply_activation(z, core.acts[l]));
    }
    return acts;
}

}  // namespace

Eigen::MatrixXd MlpCore::forward(const Eigen::MatrixXd& x) const {
    return forward_all(*this, x).back();
}

MlpCore init_core(int n_in, int n_out, const MlpConfig& cfg) {
    if (n_in < 1 || n_out < 1) throw Error("network needs at least one input and one output");
    if (cfg.hidden_layers < 0 || cfg.hidden_layers > 3)
        throw Error("hidden_layers must be in [0, 3]");
    int hidden = cfg.hidden_neurons > 0 ? cfg.hidden_neurons : default_hidden_neurons(n_in, n_out);

    std::vector<int> dims;
    dims.push_back(n_in);
    for (int l = 0; l < cfg.hidden_layers; ++l) dims.push_back(hidden);
    dims.push_back(n_out);

    MlpCore core;
    Rng rng(mix_seed(cfg.seed, 0x6d6c70));
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        int fan_in = dims[l], fan_out = dims[l + 1];
        double bound = std::sqrt(6.0 / (fan_in + fan_out));  // Glorot uniform
        Eigen::MatrixXd w(fan_in, fan_out);
        for (int i = 0; i < fan_in; ++i)
            for (int j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-bound, bound);
        core.weights.push_back(std::move(w));
        core.biases.push_back(Eigen::VectorXd::Zero(fan_out));
        bool last = l + 2 == dims.size();
        core.acts.push_back(last ? cfg.activation_output : cfg.activation_hidden);
    }
    return core;
}

double mlp_loss(const MlpCore& core, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    Eigen::MatrixXd pred = core.forward(x);
    return (pred - y).squaredNorm() / (static_cast<double>(x.rows()) * static_cast<double>(y.cols()));
}

MlpGradients mlp_gradients(const MlpCore& core, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    auto acts = forward_all(core, x);
    const double scale = 1.0 / (static_cast<double>(x.rows()) * static_cast<double>(y.cols()));

    MlpGradients g;
    g.weights.resize(core.weights.size());
    g.biases.resize(core.biases.size());

    // delta = dL/dz at the current layer
    Eigen::MatrixXd delta =
        (2.0 * scale * (acts.back() - y).array() * activation_grad(acts.back(), core.acts.back()))
            .matrix();
    for (int l = static_cast<int>(core.weights.size()) - 1; l >= 0; --l) {
        g.weights[static_cast<std::size_t>(l)] =
            acts[static_cast<std::size_t>(l)].transpose() * delta;
        g.biases[static_cast<std::size_t>(l)] = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd upstream = delta * core.weights[static_cast<std::size_t>(l)].transpose();
            delta = (upstream.array() *
                     activation_grad(acts[static_cast<std::size_t>(l)], core.acts[static_cast<std::size_t>(l - 1)]))
                        .matrix();
        }
    }
    return g;
}

Eigen::MatrixXd NormStats::normalize(const Eigen::MatrixXd& x) const {
    return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Eigen::MatrixXd NormStats::denormalize(const Eigen::MatrixXd& x) const {
    return (x.array().rowwise() * scale.transpose().array()).matrix().rowwise() + mean.transpose();
}

NormStats fit_norm(const Eigen::MatrixXd& data, const std::vector<int>& rows) {
    if (rows.empty()) throw Error("cannot fit normalization on an empty row set");
    const int cols = static_cast<int>(data.cols());
    NormStats st;
    st.mean.setZero(cols);
    st.scale.setOnes(cols);
    st.lo.setConstant(cols, std::numeric_limits<double>::infinity());
    st.hi.setConstant(cols, -std::numeric_limits<double>::infinity());

    for (int r : rows) {
        st.mean += data.row(r).transpose();
        st.lo = st.lo.cwiseMin(data.row(r).transpose());
        st.hi = st.hi.cwiseMax(data.row(r).transpose());
    }
    st.mean /= static_cast<double>(rows.size());

    Eigen::VectorXd var = Eigen::VectorXd::Zero(cols);
    for (int r : rows) {
        Eigen::VectorXd d = data.row(r).transpose() - st.mean;
        var += d.cwiseProduct(d);
    }
    var /= static_cast<double>(rows.size());

    for (int c = 0; c < cols; ++c) {
        double sd = std::sqrt(var(c));
        double floor = 1e-12 * std::max(1.0, std::abs(st.mean(c)));
        if (sd < floor) {
            st.scale(c) = 1.0;  // degenerate column: center only
            st.degenerate.push_back(c);
        } else {
            st.scale(c) = sd;
        }
    }
    return st;
}

int MlpModel::count_extrapolated(const Eigen::MatrixXd& inputs) const {
    int count = 0;
    for (int r = 0; r < inputs.rows(); ++r) {
        bool outside = false;
        for (int c = 0; c < inputs.cols() && !outside; ++c)
            outside = inputs(r, c) < in_norm.lo(c) || inputs(r, c) > in_norm.hi(c);
        count += outside ? 1 : 0;
    }
    return count;
}

namespace {

struct OptimizerState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    long step = 0;

    explicit OptimizerState(const MlpCore& core) {
        for (const auto& w : core.weights) {
            m_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
            v_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        }
        for (const auto& b : core.biases) {
            m_b.push_back(Eigen::VectorXd::Zero(b.size()));
            v_b.push_back(Eigen::VectorXd::Zero(b.size()));
        }
    }
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kRmsRho = 0.9;
constexpr double kEps = 1e-8;

template <class Tensor>
void update_tensor(Tensor& theta, const Tensor& grad, Tensor& m, Tensor& v, long step,
                   OptimizerKind kind, double lr) {
    switch (kind) {
        case OptimizerKind::Sgd:
            theta -= lr * grad;
            break;
        case OptimizerKind::Rmsprop:
            v = kRmsRho * v + (1.0 - kRmsRho) * grad.array().square().matrix();
            theta -= (lr * grad.array() / (v.array().sqrt() + kEps)).matrix();
            break;
        case OptimizerKind::Adam: {
            m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
            v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.array().square().matrix();
            double mc = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
            double vc = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
            theta -= (lr * (m.array() / mc) / ((v.array() / vc).sqrt() + kEps)).matrix();
            break;
        }
    }
}

}  // namespace

std::pair<MlpModel, TrainReport> train_mlp(const ClusterDataset& ds, const MlpConfig& cfg) {
    if (ds.inputs.rows() == 0 || ds.inputs.cols() == 0 || ds.outputs.cols() == 0)
        throw Error("empty dataset");
    if (ds.train_rows.empty()) throw Error("dataset has no training rows");
    if (cfg.batch_size < 1) throw Error("batch_size must be >= 1");
    if (cfg.epochs < 1) throw Error("epochs must be >= 1");
    if (cfg.hidden_neurons < 0) throw Error("hidden_neurons must be >= 1 (or 0 for auto)");

    auto t0 = std::chrono::steady_clock::now();

    MlpModel model;
    model.config = cfg;
    model.in_norm = fit_norm(ds.inputs, ds.train_rows);
    model.out_norm = fit_norm(ds.outputs, ds.train_rows);

    TrainReport report;
    for (int c : model.in_norm.degenerate)
        report.warnings.push_back("zero-variance input column " + std::to_string(c));
    for (int c : model.out_norm.degenerate)
        report.warnings.push_back("zero-variance output column " + std::to_string(c));

    const int n_train = static_cast<int>(ds.train_rows.size());
    Eigen::MatrixXd x_train(n_train, ds.inputs.cols());
    Eigen::MatrixXd y_train(n_train, ds.outputs.cols());
    for (int i = 0; i < n_train; ++i) {
        x_train.row(i) = ds.inputs.row(ds.train_rows[static_cast<std::size_t>(i)]);
        y_train.row(i) = ds.outputs.row(ds.train_rows[static_cast<std::size_t>(i)]);
    }
    x_train = model.in_norm.normalize(x_train);
    y_train = model.out_norm.normalize(y_train);

    model.core = init_core(static_cast<int>(ds.inputs.cols()), static_cast<int>(ds.outputs.cols()), cfg);
    OptimizerState opt(model.core);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x65706f63));

    std::vector<int> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);

    report.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    const int batch = std::min(cfg.batch_size, n_train);
    Eigen::MatrixXd xb, yb;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double sse = 0.0;
        for (int start = 0; start < n_train; start += batch) {
            int rows = std::min(batch, n_train - start);
            xb.resize(rows, x_train.cols());
            yb.resize(rows, y_train.cols());
            for (int i = 0; i < rows; ++i) {
                xb.row(i) = x_train.row(order[static_cast<std::size_t>(start + i)]);
                yb.row(i) = y_train.row(order[static_cast<std::size_t>(start + i)]);
            }
            double batch_loss = mlp_loss(model.core, xb, yb);
            sse += batch_loss * rows * static_cast<double>(y_train.cols());
            MlpGradients g = mlp_gradients(model.core, xb, yb);
            ++opt.step;
            for (std::size_t l = 0; l < model.core.weights.size(); ++l) {
                update_tensor(model.core.weights[l], g.weights[l], opt.m_w[l], opt.v_w[l], opt.step,
                              cfg.optimizer, cfg.learning_rate);
                update_tensor(model.core.biases[l], g.biases[l], opt.m_b[l], opt.v_b[l], opt.step,
                              cfg.optimizer, cfg.learning_rate);
            }
        }
        double epoch_loss = sse / (static_cast<double>(n_train) * static_cast<double>(y_train.cols()));
        if (!std::isfinite(epoch_loss))
            throw Error("training diverged (non-finite loss at epoch " + std::to_string(epoch) + ")");
        report.epoch_loss.push_back(epoch_loss);
    }

    // validation on the held-out rows, in denormalized units
    if (!ds.test_rows.empty()) {
        const int n_test = static_cast<int>(ds.test_rows.size());
        Eigen::MatrixXd x_test(n_test, ds.inputs.cols());
        Eigen::MatrixXd y_test(n_test, ds.outputs.cols());
        for (int i = 0; i < n_test; ++i) {
            x_test.row(i) = ds.inputs.row(ds.test_rows[static_cast<std::size_t>(i)]);
            y_test.row(i) = ds.outputs.row(ds.test_rows[static_cast<std::size_t>(i)]);
        }
        report.extrapolated_rows = model.count_extrapolated(x_test);
        Eigen::MatrixXd pred = predict_mlp(model, x_test);
        Eigen::ArrayXXd abs_err = (pred - y_test).array().abs();
        report.val_mae = abs_err.mean();
        std::map<std::string, std::pair<double, long>> acc;
        for (int c = 0; c < y_test.cols(); ++c) {
            const std::string& group =
                ds.output_groups.empty() ? std::string("output") : ds.output_groups[static_cast<std::size_t>(c)];
            auto& slot = acc[group];
            slot.first += abs_err.col(c).sum();
            slot.second += n_test;
        }
        for (const auto& [group, sums] : acc)
            report.val_mae_groups[group] = sums.first / static_cast<double>(sums.second);
    }

    report.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(model), std::move(report)};
}

Eigen::MatrixXd predict_mlp(const MlpModel& m, const Eigen::MatrixXd& inputs) {
    if (inputs.cols() != m.input_width())
        throw Error("input width " + std::to_string(inputs.cols()) + " does not match model width " +
                    std::to_string(m.input_width()));
    return m.out_norm.denormalize(m.core.forward(m.in_norm.normalize(inputs)));
}

namespace {

void write_norm(std::ostringstream& out, const char* name, const NormStats& st) {
    out << '[' << name << "]\n";
    for (int c = 0; c < st.mean.size(); ++c)
        out << fmt_full(st.mean(c)) << ' ' << fmt_full(st.scale(c)) << ' ' << fmt_full(st.lo(c))
            << ' ' << fmt_full(st.hi(c)) << '\n';
    out << '\n';
}

NormStats read_norm(const TextSection& s) {
    NormStats st;
    const int n = static_cast<int>(s.lines.size());
    st.mean.resize(n);
    st.scale.resize(n);
    st.lo.resize(n);
    st.hi.resize(n);
    for (int c = 0; c < n; ++c) {
        const auto& tokens = s.lines[static_cast<std::size_t>(c)].tokens;
        if (tokens.size() != 4) throw Error("norm row needs 4 values");
        auto get = [&](int k) {
            auto v = parse_double(tokens[static_cast<std::size_t>(k)].value);
            if (!v) throw Error("bad norm value " + tokens[static_cast<std::size_t>(k)].value);
            return *v;
        };
        st.mean(c) = get(0);
        st.scale(c) = get(1);
        st.lo(c) = get(2);
        st.hi(c) = get(3);
        if (st.scale(c) == 0.0) throw Error("norm scale must be nonzero");
    }
    return st;
}

}  // namespace

std::string serialize_mlp(const MlpModel& m) {
    std::ostringstream out;
    out << "[config]\n";
    out << "hidden_neurons " << m.config.hidden_neurons << '\n';
    out << "hidden_layers " << m.config.hidden_layers << '\n';
    out << "activation_hidden " << activation_name(m.config.activation_hidden) << '\n';
    out << "activation_output " << activation_name(m.config.activation_output) << '\n';
    out << "optimizer " << optimizer_name(m.config.optimizer) << '\n';
    out << "learning_rate " << fmt_full(m.config.learning_rate) << '\n';
    out << "batch_size " << m.config.batch_size << '\n';
    out << "epochs " << m.config.epochs << '\n';
    out << "seed " << m.config.seed << '\n';
    out << "layers " << m.core.weights.size() << '\n';
    out << '\n';
    write_norm(out, "norm_in", m.in_norm);
    write_norm(out, "norm_out", m.out_norm);
    for (std::size_t l = 0; l < m.core.weights.size(); ++l) {
        const auto& w = m.core.weights[l];
        out << "[layer" << l << "]\n";
        out << "activation " << activation_name(m.core.acts[l]) << '\n';
        out << "rows " << w.rows() << '\n';
        out << "cols " << w.cols() << '\n';
        out << '\n';
        out << "[weights" << l << "]\n";
        for (int r = 0; r < w.rows(); ++r) {
            for (int c = 0; c < w.cols(); ++c) out << (c ? " " : "") << fmt_full(w(r, c));
            out << '\n';
        }
        out << '\n';
        out << "[bias" << l << "]\n";
        for (int c = 0; c < m.core.biases[l].size(); ++c)
            out << (c ? " " : "") << fmt_full(m.core.biases[l](c));
        out << "\n\n";
    }
    return out.str();
}

MlpModel parse_mlp(const std::string& text) {
    auto sections = parse_sections(text);
    auto find = [&](const std::string& name) -> const TextSection* {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    };
    const TextSection* config = find("config");
    if (!config) throw Error("model file missing [config]");

    MlpModel m;
    int layers = -1;
    for (const auto& line : config->lines) {
        if (line.tokens.size() != 2) throw Error("config line needs: key value");
        const std::string& key = line.tokens[0].value;
        const std::string& val = line.tokens[1].value;
        if (key == "hidden_neurons") m.config.hidden_neurons = std::stoi(val);
        else if (key == "hidden_layers") m.config.hidden_layers = std::stoi(val);
        else if (key == "activation_hidden") {
            auto a = parse_activation(val);
            if (!a) throw Error("bad activation " + val);
            m.config.activation_hidden = *a;
        } else if (key == "activation_output") {
            auto a = parse_activation(val);
            if (!a) throw Error("bad activation " + val);
            m.config.activation_output = *a;
        } else if (key == "optimizer") {
            auto o = parse_optimizer(val);
            if (!o) throw Error("bad optimizer " + val);
            m.config.optimizer = *o;
        } else if (key == "learning_rate") m.config.learning_rate = std::stod(val);
        else if (key == "batch_size") m.config.batch_size = std::stoi(val);
        else if (key == "epochs") m.config.epochs = std::stoi(val);
        else if (key == "seed") m.config.seed = std::stoull(val);
        else if (key == "layers") layers = std::stoi(val);
        else throw Error("unknown model config key " + key);
    }
    if (layers < 1) throw Error("model file missing layer count");

    const TextSection* norm_in = find("norm_in");
    const TextSection* norm_out = find("norm_out");
    if (!norm_in || !norm_out) throw Error("model file missing normalization sections");
    m.in_norm = read_norm(*norm_in);
    m.out_norm = read_norm(*norm_out);

    for (int l = 0; l < layers; ++l) {
        const TextSection* meta = find("layer" + std::to_string(l));
        const TextSection* ws = find("weights" + std::to_string(l));
        const TextSection* bs = find("bias" + std::to_string(l));
        if (!meta || !ws || !bs) throw Error("model file missing layer " + std::to_string(l));
        int rows = -1, cols = -1;
        Activation act = Activation::Linear;
        for (const auto& line : meta->lines) {
            if (line.tokens.size() != 2) throw Error("layer line needs: key value");
            if (line.tokens[0].value == "rows") rows = std::stoi(line.tokens[1].value);
            else if (line.tokens[0].value == "cols") cols = std::stoi(line.tokens[1].value);
            else if (line.tokens[0].value == "activation") {
                auto a = parse_activation(line.tokens[1].value);
                if (!a) throw Error("bad activation");
                act = *a;
            }
        }
        if (rows < 1 || cols < 1 || static_cast<int>(ws->lines.size()) != rows)
            throw Error("bad layer dimensions");
        Eigen::MatrixXd w(rows, cols);
        for (int r = 0; r < rows; ++r) {
            const auto& tokens = ws->lines[static_cast<std::size_t>(r)].tokens;
            if (static_cast<int>(tokens.size()) != cols) throw Error("bad weight row width");
            for (int c = 0; c < cols; ++c) {
                auto v = parse_double(tokens[static_cast<std::size_t>(c)].value);
                if (!v) throw Error("bad weight value");
                w(r, c) = *v;
            }
        }
        Eigen::VectorXd b(cols);
        if (bs->lines.size() != 1 || static_cast<int>(bs->lines[0].tokens.size()) != cols)
            throw Error("bad bias row");
        for (int c = 0; c < cols; ++c) {
            auto v = parse_double(bs->lines[0].tokens[static_cast<std::size_t>(c)].value);
            if (!v) throw Error("bad bias value");
            b(c) = *v;
        }
        m.core.weights.push_back(std::move(w));
        m.core.biases.push_back(std::move(b));
        m.core.acts.push_back(act);
    }
    return m;
}

}  // namespace gridcast
